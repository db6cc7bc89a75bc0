"""Filesystem-backed store for verification records.

Layout, one directory per record:

    <root>/<grade>/<address>/record              JSON manifest
    <root>/<grade>/<address>/sources/<path>      source bodies, virtual paths

Virtual paths are written exactly as submitted.  Sanitization is the
service's job; the store reproducing a traversal write when handed an
unsanitized ``../..`` path is intentional, since that observable overwrite
is what the hardened profile must prevent upstream.  The manifest records a
sha256 digest per source file so tampering is detectable after the fact.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import NotVerifiedError, ReplacementDeniedError
from .matching import Grade

RECORD_FILENAME = "record"

# Grades a record may carry; also the fixed lookup order, so an exact
# record shadows a stray partial one for the same address.
_STORABLE_GRADES = (Grade.EXACT, Grade.PARTIAL)


def normalize_address(address: str | bytes) -> str:
    """Canonical lowercase 0x-prefixed form used for directory names."""
    if isinstance(address, (bytes, bytearray)):
        raw = bytes(address)
        if len(raw) != 20:
            raise ValueError(f"address must be 20 bytes, got {len(raw)}")
        return "0x" + raw.hex()
    text = address.lower()
    if text.startswith("0x"):
        text = text[2:]
    if len(text) != 40 or any(c not in string.hexdigits for c in text):
        raise ValueError(f"not a 20-byte hex address: {address!r}")
    return "0x" + text


def _sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class VerificationRecord:
    """Everything the verifier asserts about one address, as stored."""

    address: str
    grade: Grade
    sources: dict[str, str]
    fully_qualified_target: str
    settings: dict
    code_hash_at_verification: bytes
    creation_tx_hash: bytes | None = None
    warnings: list[str] = field(default_factory=list)
    timestamp: float = field(default_factory=time.time)

    def __post_init__(self) -> None:
        self.address = normalize_address(self.address)
        if self.grade not in _STORABLE_GRADES:
            raise ValueError(f"only exact/partial records are storable, got {self.grade}")
        if not self.sources:
            raise ValueError("record must carry at least one source file")
        if len(self.code_hash_at_verification) != 32:
            raise ValueError("code hash must be 32 bytes")
        if self.creation_tx_hash is not None and len(self.creation_tx_hash) != 32:
            raise ValueError("creation tx hash must be 32 bytes")
        if self.warnings is None:
            raise ValueError("warnings must be a list, not None")

    @property
    def contract_name(self) -> str:
        """Bare name, the only thing a non-disclosing query reveals."""
        return self.fully_qualified_target.rpartition(":")[2]


class RecordStore:
    """Address-keyed record directories with a grade-replacement lattice.

    Writes for one address are serialized; distinct addresses and all reads
    may proceed concurrently.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._registry_lock = threading.Lock()
        self._address_locks: dict[str, threading.Lock] = {}

    def _lock_for(self, address: str) -> threading.Lock:
        with self._registry_lock:
            return self._address_locks.setdefault(address, threading.Lock())

    def _record_dir(self, grade: Grade, address: str) -> Path:
        return self.root / grade.value / address

    def _find(self, address: str) -> tuple[Grade, Path] | None:
        for grade in _STORABLE_GRADES:
            directory = self._record_dir(grade, address)
            if (directory / RECORD_FILENAME).is_file():
                return grade, directory
        return None

    # --- writing ---

    def store_record(self, record: VerificationRecord, *,
                     allow_replacement: bool = True) -> VerificationRecord:
        """Store a record, honoring the replacement lattice.

        Exact may replace Partial.  Equal grades never replace (first
        submission wins) and Partial never replaces Exact.  With
        ``allow_replacement`` off, any second submission is refused.
        """
        with self._lock_for(record.address):
            found = self._find(record.address)
            if found is not None:
                old_grade, old_dir = found
                if not allow_replacement:
                    raise ReplacementDeniedError(
                        f"{record.address} already verified and this store "
                        f"does not permit replacement")
                if not (record.grade is Grade.EXACT and old_grade is Grade.PARTIAL):
                    raise ReplacementDeniedError(
                        f"{record.grade.value} may not replace {old_grade.value} "
                        f"for {record.address}")
                shutil.rmtree(old_dir)
            self._write(record)
        return record

    def _write(self, record: VerificationRecord) -> None:
        base = self._record_dir(record.grade, record.address)
        sources_dir = base / "sources"
        sources_dir.mkdir(parents=True, exist_ok=True)
        digests: dict[str, str] = {}
        for virtual_path, text in record.sources.items():
            body = text.encode("utf-8")
            target = sources_dir / Path(virtual_path)
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(body)
            digests[virtual_path] = _sha256_hex(body)
        manifest = {
            "address": record.address,
            "grade": record.grade.value,
            "target": record.fully_qualified_target,
            "settings": record.settings,
            "codeHash": "0x" + record.code_hash_at_verification.hex(),
            "creationTxHash": ("0x" + record.creation_tx_hash.hex()
                               if record.creation_tx_hash else None),
            "warnings": list(record.warnings),
            "timestamp": record.timestamp,
            "sourceDigests": digests,
        }
        (base / RECORD_FILENAME).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    # --- reading ---

    def has(self, address: str | bytes) -> bool:
        return self._find(normalize_address(address)) is not None

    def load(self, address: str | bytes) -> VerificationRecord:
        """Rebuild the record, reading source bodies from the tree.

        Bodies come from disk rather than the manifest so that on-disk
        tampering (the traversal overwrite) is visible to callers exactly
        the way it is visible to anyone browsing the store.
        """
        key = normalize_address(address)
        found = self._find(key)
        if found is None:
            raise NotVerifiedError(f"no record for {key}")
        grade, directory = found
        manifest = json.loads((directory / RECORD_FILENAME).read_text())
        sources = {}
        for virtual_path in manifest["sourceDigests"]:
            body_path = directory / "sources" / Path(virtual_path)
            sources[virtual_path] = body_path.read_text()
        tx_hex = manifest["creationTxHash"]
        return VerificationRecord(
            address=manifest["address"],
            grade=Grade(manifest["grade"]),
            sources=sources,
            fully_qualified_target=manifest["target"],
            settings=manifest["settings"],
            code_hash_at_verification=bytes.fromhex(manifest["codeHash"][2:]),
            creation_tx_hash=bytes.fromhex(tx_hex[2:]) if tx_hex else None,
            warnings=list(manifest["warnings"]),
            timestamp=manifest["timestamp"],
        )

    def stored_grade(self, address: str | bytes) -> Grade:
        found = self._find(normalize_address(address))
        if found is None:
            raise NotVerifiedError(f"no record for {normalize_address(address)}")
        return found[0]

    def list_addresses(self) -> list[str]:
        seen = set()
        for grade in _STORABLE_GRADES:
            grade_dir = self.root / grade.value
            if not grade_dir.is_dir():
                continue
            for child in grade_dir.iterdir():
                if (child / RECORD_FILENAME).is_file():
                    seen.add(child.name)
        return sorted(seen)

    def records(self) -> Iterator[VerificationRecord]:
        for address in self.list_addresses():
            yield self.load(address)

    def find_by_code_hash(self, code_hash: bytes) -> list[VerificationRecord]:
        """Donor candidates for runtime-identical inheritance."""
        want = "0x" + code_hash.hex()
        donors = []
        for address in self.list_addresses():
            grade, directory = self._find(address)
            manifest = json.loads((directory / RECORD_FILENAME).read_text())
            if manifest["codeHash"] == want:
                donors.append(self.load(address))
        return donors

    # --- integrity ---

    def verify_integrity(self, address: str | bytes) -> list[str]:
        """Virtual paths whose on-disk body no longer matches its digest."""
        key = normalize_address(address)
        found = self._find(key)
        if found is None:
            raise NotVerifiedError(f"no record for {key}")
        _, directory = found
        manifest = json.loads((directory / RECORD_FILENAME).read_text())
        tampered = []
        for virtual_path, digest in manifest["sourceDigests"].items():
            body_path = directory / "sources" / Path(virtual_path)
            if not body_path.is_file() or _sha256_hex(body_path.read_bytes()) != digest:
                tampered.append(virtual_path)
        return tampered

    def snapshot(self) -> dict[str, str]:
        """sha256 of every file under the root, keyed by relative path."""
        digests = {}
        for path in sorted(self.root.rglob("*")):
            if path.is_file():
                digests[str(path.relative_to(self.root))] = _sha256_hex(path.read_bytes())
        return digests
