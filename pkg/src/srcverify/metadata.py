"""Metadata block detection and removal.

Compilers append a CBOR-encoded block (source hash, compiler version) to the
runtime code.  It varies across otherwise identical builds, so partial
matching must locate and remove it before comparing.  Two labelers exist:

* scan_metadata: strict pattern matcher.  A span is reported only when every
  fixed byte of the known layout is present and the trailing two-byte length
  suffix equals the span length minus two.  Stripping what it reports and
  rescanning yields nothing (idempotent), and it never marks plain code.

* differential_extract: recompiles with an injected extra source file and
  diffs the outputs, expanding each difference to a nearby block start.  This
  reproduces the naive production behaviour behind R6: when the submitted
  source references the injected file, code differences that are NOT metadata
  get labelled as metadata, and the matcher then ignores attacker-chosen
  bytes.  Kept only for the naive profiles and the attack lab.

Only the ipfs+solc layout is recognized.  Other CBOR layouts (legacy swarm
hashes included) are deliberately not stripped: conservative stripping can
cause a false verification failure but never a false success.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import (
    NonConvergentError,
    OverlappingSpansError,
    SpanOutOfRangeError,
)

PATTERN_LENGTH = 53
_IPFS_HEAD = bytes.fromhex("a264697066735822")  # 0xa2, "ipfs" text-wrapped, 34-byte tag
_SOLC_HEAD = bytes.fromhex("64736f6c6343")      # "solc" text-wrapped, 3-byte tag
_HASH_SLICE = slice(8, 42)
_VERSION_SLICE = slice(48, 51)

# legacy 0.4-era trailing block: 0xa1, "bzzr0", 32-byte tag, hash, length suffix
LEGACY_MARKER = bytes.fromhex("a165627a7a7230")
LEGACY_BLOCK_LENGTH = 43

INJECTED_FILENAME = "SOME_TEXT_USED_AS_FILENAME"


class MetadataKind(Enum):
    TRAILING = "trailing"
    EMBEDDED = "embedded"


class SpanSource(Enum):
    PATTERN_SCAN = "pattern-scan"
    DIFFERENTIAL = "differential"


@dataclass(frozen=True)
class MetadataSpan:
    start: int
    end: int
    kind: MetadataKind
    source: SpanSource

    @property
    def length(self) -> int:
        return self.end - self.start


def make_metadata_block(ipfs_payload: bytes, solc_version: bytes = b"\x00\x08\x04") -> bytes:
    """Assemble a 53-byte block for fixtures.

    ipfs_payload may be the full 34-byte multihash or a bare 32-byte digest
    (the standard sha2-256 multihash prefix is prepended).
    """
    if len(ipfs_payload) == 32:
        ipfs_payload = b"\x12\x20" + ipfs_payload
    if len(ipfs_payload) != 34:
        raise ValueError(f"ipfs payload must be 32 or 34 bytes, got {len(ipfs_payload)}")
    if len(solc_version) != 3:
        raise ValueError(f"solc version must be 3 bytes, got {len(solc_version)}")
    block = _IPFS_HEAD + ipfs_payload + _SOLC_HEAD + solc_version
    block += (len(block) + 2 - 2).to_bytes(2, "big")
    assert len(block) == PATTERN_LENGTH
    return block


def make_legacy_metadata_block(swarm_hash: bytes) -> bytes:
    """Assemble the 43-byte 0.4-era trailing block (swarm hash form)."""
    if len(swarm_hash) != 32:
        raise ValueError(f"swarm hash must be 32 bytes, got {len(swarm_hash)}")
    block = LEGACY_MARKER + b"\x58\x20" + swarm_hash + b"\x00\x29"
    assert len(block) == LEGACY_BLOCK_LENGTH
    return block


def matches_pattern_at(code: bytes, start: int) -> bool:
    """True when a full, length-consistent block begins at start."""
    end = start + PATTERN_LENGTH
    if end > len(code):
        return False
    if code[start:start + 8] != _IPFS_HEAD:
        return False
    if code[start + 42:start + 48] != _SOLC_HEAD:
        return False
    return int.from_bytes(code[end - 2:end], "big") == PATTERN_LENGTH - 2


def scan_metadata(code: bytes) -> list[MetadataSpan]:
    """All strict pattern matches, non-overlapping, in offset order."""
    spans = []
    i = 0
    while i + PATTERN_LENGTH <= len(code):
        if matches_pattern_at(code, i):
            end = i + PATTERN_LENGTH
            kind = MetadataKind.TRAILING if end == len(code) else MetadataKind.EMBEDDED
            spans.append(MetadataSpan(i, end, kind, SpanSource.PATTERN_SCAN))
            i = end
        else:
            i += 1
    return spans


def _check_spans(code: bytes, spans: list[MetadataSpan]) -> list[MetadataSpan]:
    ordered = sorted(spans, key=lambda s: s.start)
    last_end = 0
    for span in ordered:
        if span.start < 0 or span.end <= span.start or span.end > len(code):
            raise SpanOutOfRangeError(
                f"span [{span.start}, {span.end}) outside code of {len(code)} bytes")
        if span.start < last_end:
            raise OverlappingSpansError(f"span at {span.start} overlaps previous")
        last_end = span.end
    return ordered


def strip_spans(code: bytes, spans: list[MetadataSpan]) -> bytes:
    """Delete span bytes, preserving the order of what remains."""
    pieces = []
    cursor = 0
    for span in _check_spans(code, spans):
        pieces.append(code[cursor:span.start])
        cursor = span.end
    pieces.append(code[cursor:])
    return b"".join(pieces)


def injected_library_source(contract_name: str) -> str:
    """The useless extra source the differential labeler injects."""
    lib = f"L_{contract_name}" if contract_name else "L_"
    return f"library {lib} {{}}\n"


@dataclass(frozen=True)
class DiffIteration:
    first_diff_index: int
    span: MetadataSpan


@dataclass
class DifferentialTrace:
    baseline: bytes
    perturbed: bytes
    iterations: list[DiffIteration]

    @property
    def first_diff_index(self) -> int | None:
        return self.iterations[0].first_diff_index if self.iterations else None

    @property
    def spans(self) -> list[MetadataSpan]:
        """Identified regions merged into disjoint, sorted spans."""
        ranges = sorted((it.span.start, it.span.end) for it in self.iterations)
        merged: list[list[int]] = []
        for start, end in ranges:
            if merged and start <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], end)
            else:
                merged.append([start, end])
        n = len(self.baseline)
        return [
            MetadataSpan(
                start,
                end,
                MetadataKind.TRAILING if end == n else MetadataKind.EMBEDDED,
                SpanSource.DIFFERENTIAL,
            )
            for start, end in merged
        ]


def _first_diff(a: bytes, b: bytearray) -> int | None:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return None


def _expand_to_block(baseline: bytes, index: int) -> MetadataSpan | None:
    """Nearest plausible block start at or before index.

    Naive on purpose: it anchors on the block's first byte alone, without
    validating the interior.  A stray 0xa2 in real code therefore drags a
    53-byte window of runtime bytes into the span, which is the R6 mislabel.
    """
    floor = max(index - (PATTERN_LENGTH - 1), 0)
    for start in range(index, floor - 1, -1):
        if baseline[start] == 0xA2 and start + PATTERN_LENGTH <= len(baseline):
            end = start + PATTERN_LENGTH
            kind = (MetadataKind.TRAILING if end == len(baseline)
                    else MetadataKind.EMBEDDED)
            return MetadataSpan(start, end, kind, SpanSource.DIFFERENTIAL)
    return None


def differential_extract(compiler, request, artifact: str = "runtime",
                         max_iterations: int = 16) -> DifferentialTrace:
    """Locate metadata by recompiling with an injected source and diffing.

    request needs .sources and .settings; settings needs .target for the
    injected library name.  artifact selects "runtime" or "creation".
    """
    baseline_out = compiler.compile(request.sources, request.settings)
    target = getattr(request.settings, "target", "")
    contract_name = target.rsplit(":", 1)[-1] if target else ""
    perturbed_sources = dict(request.sources)
    perturbed_sources[INJECTED_FILENAME] = injected_library_source(contract_name)
    perturbed_out = compiler.compile(perturbed_sources, request.settings)

    def pick(output) -> bytes:
        if artifact == "runtime":
            return output.runtime_template
        if artifact == "creation":
            return output.creation_code
        raise ValueError(f"unknown artifact {artifact!r}")

    baseline = pick(baseline_out)
    perturbed = pick(perturbed_out)
    if len(baseline) != len(perturbed):
        raise NonConvergentError(
            f"outputs differ in length ({len(baseline)} vs {len(perturbed)}); "
            "differential labeling needs aligned offsets")

    work = bytearray(perturbed)
    iterations: list[DiffIteration] = []
    for _ in range(max_iterations):
        index = _first_diff(baseline, work)
        if index is None:
            return DifferentialTrace(baseline, perturbed, iterations)
        span = _expand_to_block(baseline, index)
        if span is None:
            raise NonConvergentError(
                f"difference at offset {index} has no block start within "
                f"{PATTERN_LENGTH - 1} bytes")
        work[span.start:span.end] = baseline[span.start:span.end]
        iterations.append(DiffIteration(index, span))
    if _first_diff(baseline, work) is None:
        return DifferentialTrace(baseline, perturbed, iterations)
    raise NonConvergentError(f"differences remain after {max_iterations} iterations")
