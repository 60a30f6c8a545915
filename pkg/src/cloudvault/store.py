"""Persistence backends standing in for cloud storage.

``LocalStore`` keeps everything under one directory (``CLOUDVAULT_HOME``)::

    accounts/  requests/  credentials/  sessions/  records/<id>.cvs
    audit.log  policy.conf  controls.conf  keyring.bin  config.conf

Every file write goes through :func:`atomic_write` (temp file in the same
directory, fsync, ``os.replace``).  ``MemoryStore`` implements the same surface
in process memory for tests that run tens of thousands of operations.
"""

from __future__ import annotations

import contextlib
import fcntl
import json
import os
import re
import tempfile
import threading
from pathlib import Path
from typing import Any, Iterator, Protocol

from .errors import NotFound, StoreUnavailable

DOC_KINDS = ("accounts", "requests", "credentials", "sessions")
_KEY_RE = re.compile(r"^[A-Za-z0-9._-]{1,200}$")
TMP_SUFFIX = ".tmp"


def _check_key(key: str) -> str:
    if not _KEY_RE.match(key) or key.startswith("."):
        raise ValueError(f"illegal store key: {key!r}")
    return key


def atomic_write(path: Path, data: bytes, *, durable: bool = True, mode: int | None = None) -> None:
    """Write ``data`` to ``path`` so readers see either the old or the new file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=TMP_SUFFIX)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            if durable:
                fh.flush()
                os.fsync(fh.fileno())
        if mode is not None:
            os.chmod(tmp, mode)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise
    if durable:
        _fsync_dir(path.parent)


def _fsync_dir(directory: Path) -> None:
    with contextlib.suppress(OSError):
        dfd = os.open(directory, os.O_RDONLY)
        try:
            os.fsync(dfd)
        finally:
            os.close(dfd)


def encode_json(doc: dict[str, Any]) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


class Store(Protocol):
    """Surface every cloudvault service needs from a backend."""

    def locked(self) -> contextlib.AbstractContextManager[None]: ...
    def save_doc(self, kind: str, key: str, doc: dict[str, Any]) -> None: ...
    def load_doc(self, kind: str, key: str) -> dict[str, Any] | None: ...
    def delete_doc(self, kind: str, key: str) -> None: ...
    def list_docs(self, kind: str) -> list[dict[str, Any]]: ...
    def write_file(self, name: str, data: bytes, *, private: bool = False) -> None: ...
    def read_file(self, name: str) -> bytes | None: ...
    def write_record(self, record_id: str, data: bytes) -> None: ...
    def read_record(self, record_id: str) -> bytes: ...
    def delete_record(self, record_id: str) -> None: ...
    def list_records(self) -> list[str]: ...
    def append_audit(self, line: bytes) -> None: ...
    def read_audit(self) -> bytes: ...
    def read_audit_tail(self) -> bytes: ...
    def iter_persisted(self) -> Iterator[tuple[str, bytes]]: ...


class _ReentrantLock:
    """Thread lock plus an advisory ``flock`` that is taken once per outermost entry."""

    def __init__(self, lock_path: Path | None):
        self._lock = threading.RLock()
        self._depth = 0
        self._lock_path = lock_path
        self._fh = None

    @contextlib.contextmanager
    def __call__(self) -> Iterator[None]:
        with self._lock:
            if self._depth == 0 and self._lock_path is not None:
                self._fh = open(self._lock_path, "a+b")
                fcntl.flock(self._fh.fileno(), fcntl.LOCK_EX)
            self._depth += 1
            try:
                yield
            finally:
                self._depth -= 1
                if self._depth == 0 and self._fh is not None:
                    fcntl.flock(self._fh.fileno(), fcntl.LOCK_UN)
                    self._fh.close()
                    self._fh = None


class LocalStore:
    """Directory-backed store. Single writer at a time across processes."""

    def __init__(self, root: str | os.PathLike[str], *, durable: bool = True):
        self.root = Path(root)
        self.durable = durable
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            for kind in DOC_KINDS:
                (self.root / kind).mkdir(exist_ok=True)
            (self.root / "records").mkdir(exist_ok=True)
        except OSError as exc:
            raise StoreUnavailable(f"cannot prepare store at {self.root}: {exc}") from exc
        self.locked = _ReentrantLock(self.root / ".lock")

    # structured documents
    def _doc_path(self, kind: str, key: str) -> Path:
        if kind not in DOC_KINDS:
            raise ValueError(f"unknown document kind: {kind}")
        return self.root / kind / f"{_check_key(key)}.json"

    def save_doc(self, kind: str, key: str, doc: dict[str, Any]) -> None:
        atomic_write(self._doc_path(kind, key), encode_json(doc), durable=self.durable)

    def load_doc(self, kind: str, key: str) -> dict[str, Any] | None:
        path = self._doc_path(kind, key)
        try:
            return json.loads(path.read_bytes())
        except FileNotFoundError:
            return None

    def delete_doc(self, kind: str, key: str) -> None:
        with contextlib.suppress(FileNotFoundError):
            self._doc_path(kind, key).unlink()

    def list_docs(self, kind: str) -> list[dict[str, Any]]:
        if kind not in DOC_KINDS:
            raise ValueError(f"unknown document kind: {kind}")
        docs = []
        for path in sorted((self.root / kind).glob("*.json")):
            if path.name.startswith("."):
                continue
            docs.append(json.loads(path.read_bytes()))
        return docs

    # flat files
    def write_file(self, name: str, data: bytes, *, private: bool = False) -> None:
        atomic_write(self.root / _check_key(name), data, durable=self.durable,
                     mode=0o600 if private else None)

    def read_file(self, name: str) -> bytes | None:
        try:
            return (self.root / _check_key(name)).read_bytes()
        except FileNotFoundError:
            return None

    # sealed records
    def _record_path(self, record_id: str) -> Path:
        return self.root / "records" / f"{_check_key(record_id)}.cvs"

    def write_record(self, record_id: str, data: bytes) -> None:
        atomic_write(self._record_path(record_id), data, durable=self.durable)

    def read_record(self, record_id: str) -> bytes:
        try:
            return self._record_path(record_id).read_bytes()
        except (FileNotFoundError, ValueError):
            raise NotFound(f"no record {record_id!r}") from None

    def delete_record(self, record_id: str) -> None:
        with contextlib.suppress(FileNotFoundError):
            self._record_path(record_id).unlink()

    def list_records(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "records").glob("*.cvs") if not p.name.startswith("."))

    # audit log
    def append_audit(self, line: bytes) -> None:
        try:
            fd = os.open(self.root / "audit.log", os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
        except OSError as exc:
            raise StoreUnavailable(str(exc)) from exc
        try:
            os.write(fd, line)
            if self.durable:
                os.fsync(fd)
        finally:
            os.close(fd)

    def read_audit(self) -> bytes:
        try:
            return (self.root / "audit.log").read_bytes()
        except FileNotFoundError:
            return b""

    def read_audit_tail(self) -> bytes:
        """Last complete line of the audit log, without its newline."""
        try:
            fh = open(self.root / "audit.log", "rb")
        except FileNotFoundError:
            return b""
        with fh:
            end = fh.seek(0, os.SEEK_END)
            pos, buf = end, b""
            while pos > 0:
                step = min(4096, pos)
                pos -= step
                fh.seek(pos)
                buf = fh.read(step) + buf
                if buf.count(b"\n") >= 2 or pos == 0:
                    break
            return buf.rstrip(b"\n").rsplit(b"\n", 1)[-1]

    def iter_persisted(self) -> Iterator[tuple[str, bytes]]:
        for path in sorted(self.root.rglob("*")):
            if path.is_file():
                yield str(path.relative_to(self.root)), path.read_bytes()


class MemoryStore:
    """In-process store with the ``LocalStore`` surface; nothing touches disk."""

    def __init__(self) -> None:
        self._docs: dict[str, dict[str, bytes]] = {kind: {} for kind in DOC_KINDS}
        self._files: dict[str, bytes] = {}
        self._records: dict[str, bytes] = {}
        self._audit = bytearray()
        self._audit_tail = b""
        self.locked = _ReentrantLock(None)

    def _kind(self, kind: str) -> dict[str, bytes]:
        if kind not in self._docs:
            raise ValueError(f"unknown document kind: {kind}")
        return self._docs[kind]

    def save_doc(self, kind: str, key: str, doc: dict[str, Any]) -> None:
        self._kind(kind)[_check_key(key)] = encode_json(doc)

    def load_doc(self, kind: str, key: str) -> dict[str, Any] | None:
        raw = self._kind(kind).get(key)
        return None if raw is None else json.loads(raw)

    def delete_doc(self, kind: str, key: str) -> None:
        self._kind(kind).pop(key, None)

    def list_docs(self, kind: str) -> list[dict[str, Any]]:
        docs = self._kind(kind)
        return [json.loads(docs[k]) for k in sorted(docs)]

    def write_file(self, name: str, data: bytes, *, private: bool = False) -> None:
        self._files[_check_key(name)] = bytes(data)

    def read_file(self, name: str) -> bytes | None:
        return self._files.get(name)

    def write_record(self, record_id: str, data: bytes) -> None:
        self._records[_check_key(record_id)] = bytes(data)

    def read_record(self, record_id: str) -> bytes:
        try:
            return self._records[record_id]
        except KeyError:
            raise NotFound(f"no record {record_id!r}") from None

    def delete_record(self, record_id: str) -> None:
        self._records.pop(record_id, None)

    def list_records(self) -> list[str]:
        return sorted(self._records)

    def append_audit(self, line: bytes) -> None:
        self._audit += line
        self._audit_tail = line.rstrip(b"\n")

    def read_audit_tail(self) -> bytes:
        return self._audit_tail

    def read_audit(self) -> bytes:
        return bytes(self._audit)

    def iter_persisted(self) -> Iterator[tuple[str, bytes]]:
        for kind, docs in self._docs.items():
            for key, raw in docs.items():
                yield f"{kind}/{key}.json", raw
        for name, raw in self._files.items():
            yield name, raw
        for rid, raw in self._records.items():
            yield f"records/{rid}.cvs", raw
        yield "audit.log", bytes(self._audit)
