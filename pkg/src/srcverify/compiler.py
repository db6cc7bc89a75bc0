"""Compiler seam: request/output types, a fixture compiler, a subprocess shim.

The engine never interprets source text itself; it hands sources and settings
to a CompilerInterface and works with the returned artifacts.  Tests and the
attack lab use FixtureCompiler, a deterministic table keyed by a digest of the
canonical (sources, settings) form.  ExternalCompiler shells out to a real
toolchain speaking standard-JSON for anyone wiring this against solc.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from ._keccak import keccak256
from .bytecode import parse_hex
from .errors import CompilerFailureError, MalformedRequestError
from .linker import (
    PlaceholderForm,
    PlaceholderSpan,
    declared_placeholders,
    splice_unlinked_text,
)
from .metadata import _HASH_SLICE, INJECTED_FILENAME, scan_metadata
from .simulator import ImmutableRef


@dataclass(frozen=True)
class CompileSettings:
    compiler_version: str = "0.8.4+fixture"
    optimizer_runs: int = 0  # 0 disables the optimizer
    evm_version: str = "default"
    target: str = ""  # "virtual/path.sol:ContractName"

    @property
    def target_path(self) -> str:
        path, sep, _ = self.target.rpartition(":")
        return path if sep else ""

    @property
    def target_name(self) -> str:
        return self.target.rpartition(":")[2]

    def as_dict(self) -> dict:
        return {
            "compilerVersion": self.compiler_version,
            "optimizerRuns": self.optimizer_runs,
            "evmVersion": self.evm_version,
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CompileSettings":
        return cls(
            compiler_version=data.get("compilerVersion", "0.8.4+fixture"),
            optimizer_runs=int(data.get("optimizerRuns", 0)),
            evm_version=data.get("evmVersion", "default"),
            target=data.get("target", ""),
        )


@dataclass
class CompilationOutput:
    creation_code: bytes
    runtime_template: bytes
    immutable_refs: list[ImmutableRef] = field(default_factory=list)
    link_refs: list[PlaceholderSpan] = field(default_factory=list)
    # ABI type strings of the constructor, or None when the ABI is undeclared
    ctor_params: list[str] | None = None
    uses_inline_assembly: bool = False

    def unlinked_runtime_text(self) -> str:
        return splice_unlinked_text(self.runtime_template, self.link_refs)


@dataclass
class VerificationRequest:
    sources: dict[str, str]
    settings: CompileSettings
    address: bytes | None = None
    # libName -> hex address supplied by the submitter
    declared_libraries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.sources:
            raise MalformedRequestError("request has no sources")
        target_path = self.settings.target_path
        if target_path and target_path not in self.sources:
            raise MalformedRequestError(
                f"target file {target_path!r} is not among the submitted sources")

    def to_json(self) -> str:
        payload = {
            "address": "0x" + self.address.hex() if self.address else None,
            "sources": self.sources,
            "settings": self.settings.as_dict(),
            "libraries": self.declared_libraries,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VerificationRequest":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedRequestError(f"request is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict) or "sources" not in payload:
            raise MalformedRequestError("request must be an object with sources")
        address = payload.get("address")
        return cls(
            sources=payload["sources"],
            settings=CompileSettings.from_dict(payload.get("settings", {})),
            address=parse_hex(address) if address else None,
            declared_libraries=payload.get("libraries", {}),
        )


class CompilerInterface(ABC):
    @abstractmethod
    def compile(self, sources: dict[str, str], settings: CompileSettings) -> CompilationOutput:
        """Produce artifacts or raise CompilerFailureError."""


def request_digest(sources: dict[str, str], settings: CompileSettings) -> str:
    canon = json.dumps(
        {"sources": sources, "settings": settings.as_dict()},
        sort_keys=True, separators=(",", ":"),
    )
    return hashlib.sha256(canon.encode()).hexdigest()


class FixtureCompiler(CompilerInterface):
    """Deterministic compiler backed by a registration table.

    Unregistered inputs fail, with one convenience: when the only difference
    from a registered input is the differential labeler's injected file, the
    base output is re-emitted with every metadata hash region replaced by a
    derived value.  That mimics a real compiler, where the injected file
    shifts the source hash but nothing else.  Explicit registrations take
    precedence, which is how attack fixtures model source text that actually
    references the injected file.
    """

    def __init__(self, auto_perturb: bool = True) -> None:
        self._table: dict[str, CompilationOutput] = {}
        self._auto_perturb = auto_perturb

    def register(self, sources: dict[str, str], settings: CompileSettings,
                 output: CompilationOutput) -> None:
        declared_placeholders(output)  # validates link_refs before storing
        self._table[request_digest(sources, settings)] = output

    def compile(self, sources: dict[str, str], settings: CompileSettings) -> CompilationOutput:
        key = request_digest(sources, settings)
        if key in self._table:
            return self._table[key]
        if self._auto_perturb:
            if INJECTED_FILENAME in sources:
                base = {k: v for k, v in sources.items() if k != INJECTED_FILENAME}
                base_key = request_digest(base, settings)
                if base_key in self._table:
                    return self._perturb(self._table[base_key])
        raise CompilerFailureError(f"no fixture registered for digest {key[:16]}")

    @staticmethod
    def _rehash_metadata(code: bytes) -> bytes:
        out = bytearray(code)
        for span in scan_metadata(code):
            region = slice(span.start + _HASH_SLICE.start, span.start + _HASH_SLICE.stop)
            out[region] = b"\x12\x20" + keccak256(bytes(out[region]) + b"\x01")
        return bytes(out)

    def _perturb(self, base: CompilationOutput) -> CompilationOutput:
        return CompilationOutput(
            creation_code=self._rehash_metadata(base.creation_code),
            runtime_template=self._rehash_metadata(base.runtime_template),
            immutable_refs=list(base.immutable_refs),
            link_refs=list(base.link_refs),
            ctor_params=None if base.ctor_params is None else list(base.ctor_params),
            uses_inline_assembly=base.uses_inline_assembly,
        )


class ExternalCompiler(CompilerInterface):
    """Subprocess adapter: standard-JSON in on stdin, flat artifact JSON out.

    Expected stdout shape:
      {"creation": "0x..", "runtime": "0x..",
       "immutableReferences": [{"offset": n, "length": n, "name": s}, ...],
       "linkReferences": [{"offset": n, "filePath": s, "libName": s,
                           "form": "legacy"|"hash"}, ...],
       "constructorParams": ["uint256", ...] | null,
       "usesInlineAssembly": bool}
    """

    def __init__(self, command: list[str], timeout: float = 120.0) -> None:
        self._command = list(command)
        self._timeout = timeout

    def compile(self, sources: dict[str, str], settings: CompileSettings) -> CompilationOutput:
        stdin = json.dumps({
            "language": "Solidity",
            "sources": {path: {"content": text} for path, text in sources.items()},
            "settings": settings.as_dict(),
        })
        try:
            proc = subprocess.run(
                self._command, input=stdin, capture_output=True,
                text=True, timeout=self._timeout, check=False,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise CompilerFailureError(f"compiler invocation failed: {exc}") from exc
        if proc.returncode != 0:
            raise CompilerFailureError(
                f"compiler exited {proc.returncode}: {proc.stderr.strip()[:500]}")
        try:
            payload = json.loads(proc.stdout)
            link_refs = [
                PlaceholderSpan(
                    offset=item["offset"],
                    file_path=item.get("filePath", ""),
                    lib_name=item["libName"],
                    form=(PlaceholderForm.LEGACY if item.get("form") == "legacy"
                          else PlaceholderForm.HASH),
                    declared=True,
                )
                for item in payload.get("linkReferences", [])
            ]
            params = payload.get("constructorParams")
            return CompilationOutput(
                creation_code=parse_hex(payload["creation"]),
                runtime_template=parse_hex(payload["runtime"]),
                immutable_refs=[
                    ImmutableRef(item["offset"], item["length"], item.get("name", ""))
                    for item in payload.get("immutableReferences", [])
                ],
                link_refs=link_refs,
                ctor_params=None if params is None else list(params),
                uses_inline_assembly=bool(payload.get("usesInlineAssembly", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CompilerFailureError(f"unusable compiler output: {exc}") from exc


def make_creation_code(runtime: bytes, extra: bytes = b"") -> bytes:
    """Canonical fixture constructor: copy runtime from code offset 12, return it.

    extra bytes (embedded metadata, unreachable data) follow the runtime and
    are not returned.
    """
    if len(runtime) > 0xFFFF:
        raise ValueError("runtime too large for the fixture constructor")
    prefix = b"\x61" + len(runtime).to_bytes(2, "big") + bytes.fromhex("80600c6000396000f3")
    assert len(prefix) == 12
    return prefix + runtime + extra
