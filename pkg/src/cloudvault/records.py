"""Storing and fetching sealed records. Nothing unverifiable is ever written."""

from __future__ import annotations

from .errors import MalformedRecord, NotFound, StoreError, VerifyFailed
from .monitoring import AuditCategory, AuditLog, SYSTEM_ACTOR
from .sealing import KeyRing, SealedRecord, secure_data
from .store import Store


class RecordArchive:
    def __init__(self, store: Store, keyring: KeyRing, audit: AuditLog):
        self.store = store
        self.keyring = keyring
        self.audit = audit

    def put_record(self, record: SealedRecord | bytes, actor: str = SYSTEM_ACTOR) -> str:
        """Verify and persist ``record``; returns its id (first 16 hex chars of the MAC)."""
        if isinstance(record, SealedRecord):
            data = record.to_bytes()
        else:
            data = bytes(record)
            try:
                record = SealedRecord.from_bytes(data)
            except MalformedRecord as exc:
                raise VerifyFailed(f"record does not parse: {exc}") from None
        if not secure_data(record, self.keyring):
            raise VerifyFailed("record failed authentication; not stored")
        record_id = record.record_id
        with self.store.locked():
            try:
                existing = self.store.read_record(record_id)
            except NotFound:
                existing = None
            if existing is not None and existing != data:
                raise StoreError(f"record id collision on {record_id}")
            try:
                self.store.write_record(record_id, data)
            except OSError as exc:
                raise StoreError(f"cannot write record {record_id}: {exc}") from exc
            self.audit.record_event(
                AuditCategory.SEAL,
                f"stored record {record_id} ({record.profile.name}, {record.level.label}, key {record.key_id})",
                actor,
            )
        return record_id

    def get_record_bytes(self, record_id: str) -> bytes:
        return self.store.read_record(record_id)

    def get_record(self, record_id: str) -> SealedRecord:
        """Parse a stored record. The caller still has to run ``secure_data``."""
        return SealedRecord.from_bytes(self.get_record_bytes(record_id))

    def delete_record(self, record_id: str) -> None:
        self.store.delete_record(record_id)

    def list_records(self) -> list[str]:
        return self.store.list_records()
