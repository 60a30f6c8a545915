"""Encrypt-then-MAC sealing into the ``CVS1`` record format.

Record layout (all integers big-endian)::

    "CVS1" | version:1 | profile:1 | level:1 | key_id_len:1 | key_id
           | nonce_len:1 | nonce | ct_len:4 | ciphertext | mac_len:1 | mac

The MAC covers every byte before ``mac_len``.  The encrypted plaintext is the
canonical payload (``len:8 | payload | level:1``) followed by its 8-byte FNV-1a
digest, which lets :func:`open_record` detect decryption under the wrong key.

Two profiles exist:

* ``TEST`` -- a 64-bit LCG keystream and a keyed FNV-1a tag.  Fully
  deterministic and reproducible from constants, for golden files.  It offers
  no cryptographic security at all.
* ``STD`` -- AES-256-CTR with an HMAC-SHA256 tag, using subkeys derived from the
  keyring key by HMAC with fixed labels.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Protocol

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import (
    BadNonceLength,
    DigestMismatch,
    MalformedRecord,
    PayloadTooLarge,
    TestProfileForbidden,
    UnknownKey,
    VerifyFailed,
)
from .levels import SensitivityLevel

MAGIC = b"CVS1"
FORMAT_VERSION = 1
KEY_LEN = 32
DIGEST_LEN = 8
MAX_CIPHERTEXT = 0xFFFFFFFF

MASK64 = (1 << 64) - 1
LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
FNV64_OFFSET = 14695981039346656037
FNV64_PRIME = 1099511628211


class Profile(IntEnum):
    TEST = 0
    STD = 1


NONCE_LEN = {Profile.TEST: 8, Profile.STD: 16}
TAG_LEN = {Profile.TEST: 8, Profile.STD: 32}


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & MASK64
    return h


def lcg_keystream(key: bytes, nonce: bytes, length: int) -> bytes:
    """TEST keystream: x0 = key[:8] xor nonce, then x <- a*x + c mod 2^64; every x emitted big-endian."""
    x = int.from_bytes(key[:8], "big") ^ int.from_bytes(nonce, "big")
    blocks = []
    for _ in range((length + 7) // 8):
        blocks.append(x.to_bytes(8, "big"))
        x = (LCG_MULTIPLIER * x + LCG_INCREMENT) & MASK64
    return b"".join(blocks)[:length]


def _xor(data: bytes, stream: bytes) -> bytes:
    n = len(data)
    return (int.from_bytes(data, "big") ^ int.from_bytes(stream, "big")).to_bytes(n, "big") if n else b""


def lcg_xor(key: bytes, nonce: bytes, data: bytes) -> bytes:
    """XOR ``data`` with the TEST keystream (its own inverse)."""
    return _xor(data, lcg_keystream(key, nonce, len(data)))


def _subkey(key: bytes, label: bytes) -> bytes:
    return hmac.new(key, b"cloudvault/std/" + label, hashlib.sha256).digest()


def _aes_ctr(key: bytes, nonce: bytes, data: bytes) -> bytes:
    cipher = Cipher(algorithms.AES(_subkey(key, b"enc")), modes.CTR(nonce))
    enc = cipher.encryptor()
    return enc.update(data) + enc.finalize()


# --- keys ------------------------------------------------------------------------


class KeyRing:
    """Named 32-byte secrets plus the id of the one used for new records."""

    FILE_MAGIC = b"CVK1"

    def __init__(self, keys: dict[str, bytes], active_key_id: str):
        for kid, key in keys.items():
            if not kid or len(kid.encode("latin-1")) > 255 or not kid.isascii() or not kid.isprintable():
                raise ValueError(f"bad key id {kid!r}")
            if len(key) != KEY_LEN:
                raise ValueError(f"key {kid!r} must be {KEY_LEN} bytes")
        if active_key_id not in keys:
            raise ValueError("active key id is not in the keyring")
        self._keys = dict(keys)
        self.active_key_id = active_key_id

    def __repr__(self) -> str:
        return f"KeyRing(ids={sorted(self._keys)}, active={self.active_key_id!r})"

    @classmethod
    def generate(cls, key_id: str = "k1") -> "KeyRing":
        return cls({key_id: os.urandom(KEY_LEN)}, key_id)

    def key(self, key_id: str | None = None) -> bytes:
        kid = self.active_key_id if key_id is None else key_id
        try:
            return self._keys[kid]
        except KeyError:
            raise UnknownKey(f"no key {kid!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._keys)

    def rotate(self, new_key_id: str) -> "KeyRing":
        if new_key_id in self._keys:
            raise ValueError(f"key id {new_key_id!r} already used")
        return KeyRing({**self._keys, new_key_id: os.urandom(KEY_LEN)}, new_key_id)

    def to_bytes(self) -> bytes:
        out = bytearray(self.FILE_MAGIC)
        out.append(len(self._keys))
        for kid in sorted(self._keys):
            raw = kid.encode("latin-1")
            out += bytes([len(raw)]) + raw + self._keys[kid]
        active = self.active_key_id.encode("latin-1")
        out += bytes([len(active)]) + active
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "KeyRing":
        if data[:4] != cls.FILE_MAGIC:
            raise ValueError("not a keyring file")
        try:
            pos = 5
            keys = {}
            for _ in range(data[4]):
                n = data[pos]
                kid = data[pos + 1:pos + 1 + n].decode("latin-1")
                pos += 1 + n
                keys[kid] = data[pos:pos + KEY_LEN]
                pos += KEY_LEN
            n = data[pos]
            active = data[pos + 1:pos + 1 + n].decode("latin-1")
            if pos + 1 + n != len(data):
                raise ValueError("trailing bytes")
        except IndexError:
            raise ValueError("truncated keyring file") from None
        return cls(keys, active)


# --- pipeline steps --------------------------------------------------------------


class _ProfileConfig(Protocol):
    allow_test_profile: bool
    min_level_for_std: SensitivityLevel


@dataclass(frozen=True)
class ProtectionProfile:
    profile: Profile
    min_level_for_std: SensitivityLevel


def privacy_policy(level: SensitivityLevel, config: _ProfileConfig, *, require_encryption: bool = False,
                   requested: Profile | None = None) -> ProtectionProfile:
    """Pick the protection profile for data at ``level``.

    TEST is only ever chosen when the configuration allows it and the level is
    below ``min_level_for_std``; otherwise STD.  Asking for TEST where it is
    not permitted raises TestProfileForbidden instead of silently upgrading.
    """
    test_ok = (config.allow_test_profile and level < config.min_level_for_std
               and not require_encryption)
    if requested is Profile.TEST and not test_ok:
        raise TestProfileForbidden(f"TEST profile not permitted for {level.label} data")
    if requested is None:
        requested = Profile.TEST if test_ok else Profile.STD
    return ProtectionProfile(requested, config.min_level_for_std)


@dataclass(frozen=True)
class CanonicalPayload:
    bytes: bytes
    digest: int

    @property
    def sealed_plaintext(self) -> bytes:
        """What actually gets encrypted: canonical bytes then the digest."""
        return self.bytes + self.digest.to_bytes(DIGEST_LEN, "big")


def authenticate_data(payload: bytes, level: SensitivityLevel) -> CanonicalPayload:
    if len(payload) + 9 + DIGEST_LEN > MAX_CIPHERTEXT:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes does not fit a record")
    canon = len(payload).to_bytes(8, "big") + payload + bytes([int(level)])
    return CanonicalPayload(canon, fnv1a64(canon))


def _check_nonce(profile: Profile, nonce: bytes) -> None:
    if len(nonce) != NONCE_LEN[profile]:
        raise BadNonceLength(f"{profile.name} needs a {NONCE_LEN[profile]}-byte nonce, got {len(nonce)}")


def encrypt_data(canonical: CanonicalPayload | bytes, profile: Profile, keyring: KeyRing, nonce: bytes,
                 key_id: str | None = None) -> bytes:
    """Encrypt a canonical payload (or raw bytes). Output length equals input length."""
    _check_nonce(profile, nonce)
    data = canonical.sealed_plaintext if isinstance(canonical, CanonicalPayload) else canonical
    key = keyring.key(key_id)
    if profile is Profile.TEST:
        return lcg_xor(key, nonce, data)
    return _aes_ctr(key, nonce, data)


def decrypt_data(ciphertext: bytes, profile: Profile, keyring: KeyRing, nonce: bytes,
                 key_id: str | None = None) -> bytes:
    # both profiles are XOR stream constructions
    return encrypt_data(ciphertext, profile, keyring, nonce, key_id)


def authentication_code(data: bytes, keyring: KeyRing, key_id: str | None, profile: Profile) -> bytes:
    key = keyring.key(key_id)
    if profile is Profile.TEST:
        return fnv1a64(key + data).to_bytes(8, "big")
    return hmac.new(_subkey(key, b"mac"), data, hashlib.sha256).digest()


# --- record format ---------------------------------------------------------------


@dataclass(frozen=True)
class SealedRecord:
    profile: Profile
    level: SensitivityLevel
    key_id: str
    nonce: bytes
    ciphertext: bytes
    mac: bytes
    version: int = FORMAT_VERSION

    def header(self) -> bytes:
        kid = self.key_id.encode("latin-1")
        return (MAGIC + bytes([self.version, int(self.profile), int(self.level), len(kid)]) + kid
                + bytes([len(self.nonce)]) + self.nonce + struct.pack(">I", len(self.ciphertext)))

    def authenticated_bytes(self) -> bytes:
        return self.header() + self.ciphertext

    def to_bytes(self) -> bytes:
        return self.authenticated_bytes() + bytes([len(self.mac)]) + self.mac

    @property
    def record_id(self) -> str:
        return self.mac.hex()[:16]

    @classmethod
    def from_bytes(cls, data: bytes) -> "SealedRecord":
        """Strict parse; any structural problem raises MalformedRecord."""
        view = memoryview(data)
        pos = 0

        def take(n: int) -> bytes:
            nonlocal pos
            if pos + n > len(view):
                raise MalformedRecord("record truncated")
            chunk = bytes(view[pos:pos + n])
            pos += n
            return chunk

        if take(4) != MAGIC:
            raise MalformedRecord("bad magic")
        version, profile_id, level, kid_len = take(4)
        if version != FORMAT_VERSION:
            raise MalformedRecord(f"unsupported version {version}")
        try:
            profile = Profile(profile_id)
            level = SensitivityLevel(level)
        except ValueError as exc:
            raise MalformedRecord(str(exc)) from None
        key_id = take(kid_len).decode("latin-1")
        nonce = take(take(1)[0])
        (ct_len,) = struct.unpack(">I", take(4))
        ciphertext = take(ct_len)
        mac = take(take(1)[0])
        if pos != len(view):
            raise MalformedRecord("trailing bytes after mac")
        return cls(profile, level, key_id, nonce, ciphertext, mac, version)


def seal(payload: bytes, level: SensitivityLevel, profile: Profile | ProtectionProfile, keyring: KeyRing, *,
         nonce: bytes | None = None, key_id: str | None = None, trace: list[str] | None = None) -> SealedRecord:
    """Canonicalize, encrypt, then MAC header and ciphertext."""
    if isinstance(profile, ProtectionProfile):
        profile = profile.profile
    key_id = keyring.active_key_id if key_id is None else key_id
    nonce = os.urandom(NONCE_LEN[profile]) if nonce is None else nonce
    canonical = authenticate_data(payload, level)
    if trace is not None:
        trace.append("authenticate_data")
    ciphertext = encrypt_data(canonical, profile, keyring, nonce, key_id)
    if trace is not None:
        trace.append("encrypt_data")
    unsigned = SealedRecord(profile, SensitivityLevel(level), key_id, nonce, ciphertext, b"")
    mac = authentication_code(unsigned.authenticated_bytes(), keyring, key_id, profile)
    if trace is not None:
        trace.append("authentication_code")
    return SealedRecord(profile, SensitivityLevel(level), key_id, nonce, ciphertext, mac)


def secure_data(record: SealedRecord | bytes, keyring: KeyRing) -> bool:
    """Recompute and constant-time compare the MAC. Never decrypts; never raises."""
    try:
        if not isinstance(record, SealedRecord):
            record = SealedRecord.from_bytes(bytes(record))
        if len(record.nonce) != NONCE_LEN[record.profile] or len(record.mac) != TAG_LEN[record.profile]:
            return False
        expected = authentication_code(record.authenticated_bytes(), keyring, record.key_id, record.profile)
    except (MalformedRecord, UnknownKey, ValueError):
        return False
    return hmac.compare_digest(expected, record.mac)


@dataclass(frozen=True)
class OpenedRecord:
    payload: bytes
    level: SensitivityLevel


def open_record(record: SealedRecord | bytes, keyring: KeyRing, *, decrypt_key_id: str | None = None,
                trace: list[str] | None = None) -> OpenedRecord:
    """Verify, then decrypt and check the canonical digest.

    ``decrypt_key_id`` overrides the header's key for decryption only; it
    exists to exercise key-confusion detection.
    """
    if not secure_data(record, keyring):
        raise VerifyFailed("record failed authentication")
    if trace is not None:
        trace.append("secure_data")
    if not isinstance(record, SealedRecord):
        record = SealedRecord.from_bytes(bytes(record))
    kid = record.key_id if decrypt_key_id is None else decrypt_key_id
    plain = decrypt_data(record.ciphertext, record.profile, keyring, record.nonce, kid)
    if trace is not None:
        trace.append("decrypt_data")
    if len(plain) < 9 + DIGEST_LEN:
        raise DigestMismatch("decrypted payload too short")
    canon, digest = plain[:-DIGEST_LEN], plain[-DIGEST_LEN:]
    if fnv1a64(canon).to_bytes(DIGEST_LEN, "big") != digest:
        raise DigestMismatch("canonical digest mismatch (wrong key?)")
    length = int.from_bytes(canon[:8], "big")
    if length != len(canon) - 9 or canon[-1] != int(record.level):
        raise DigestMismatch("canonical payload inconsistent with header")
    return OpenedRecord(canon[8:-1], record.level)
