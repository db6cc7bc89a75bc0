"""Library placeholder resolution.

An unlinked compilation keeps each library call site as a 20-byte zero-filled
region plus a declared link-reference table.  The compiler's *textual* output
renders such a site as a 40-character placeholder instead of hex: the legacy
form "__<filePath>:<libName>____..__" (solc <= 0.4) or the hash form
"__$<34 hex chars>$__".  Naive verifiers work at that text level — they scan
the text for placeholder shapes and substitute via regex built from the
placeholder itself, which is exactly the behavior resolve() reproduces in
RegexNaive mode.  Hardened resolution (OffsetLiteral) never leaves byte
space and touches only declared spans.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from .errors import LengthMismatchError, MalformedLinkReferenceError, SpanOutOfRangeError

if TYPE_CHECKING:  # pragma: no cover
    from .compiler import CompilationOutput

PLACEHOLDER_TEXT_CHARS = 40
PLACEHOLDER_CODE_BYTES = 20


class PlaceholderForm(Enum):
    LEGACY = "legacy"
    HASH = "hash"


class PlaceholderMode(Enum):
    """How resolve() substitutes library addresses."""

    OFFSET_LITERAL = "offset-literal"  # hardened: declared byte spans only
    REGEX_NAIVE = "regex-naive"        # naive: placeholder text compiled as a regex


@dataclass(frozen=True)
class PlaceholderSpan:
    """One library call site: 40 text characters, 20 bytes of code."""

    offset: int                 # byte offset in the (linked) code
    file_path: str
    lib_name: str
    form: PlaceholderForm = PlaceholderForm.LEGACY
    declared: bool = False      # True when taken from the compiler's link table

    @property
    def end(self) -> int:
        return self.offset + PLACEHOLDER_CODE_BYTES


@dataclass
class LibraryBinding:
    """Outcome of resolving one placeholder."""

    span: PlaceholderSpan
    address: bytes
    matched_offsets: list[int] = field(default_factory=list)
    unset: bool = False         # on-chain bytes at the site were all zero

    @property
    def extra_offsets(self) -> list[int]:
        """Sites rewritten beyond the declared one (naive-mode spillover)."""
        return [o for o in self.matched_offsets if o != self.span.offset]


def render_placeholder_text(span: PlaceholderSpan) -> str:
    """The placeholder as it appears in textual compiler output (40 chars)."""
    if span.form is PlaceholderForm.HASH:
        digest = span.lib_name
        if len(digest) != 34:
            raise MalformedLinkReferenceError(
                f"hash-form placeholder needs a 34-char digest, got {len(digest)}")
        return "__$" + digest + "$__"
    content = f"{span.file_path}:{span.lib_name}"[:36]  # truncate from the right
    return "__" + content.ljust(36, "_") + "__"


def splice_unlinked_text(code: bytes, spans: list[PlaceholderSpan]) -> str:
    """Hex text of `code` with placeholder text written over each span."""
    chars = list(code.hex())
    for span in spans:
        if span.end > len(code):
            raise SpanOutOfRangeError(f"placeholder at {span.offset} exceeds code")
        chars[2 * span.offset:2 * span.end] = render_placeholder_text(span)
    return "".join(chars)


_HASH_FORM_RE = re.compile(r"__\$([0-9a-f]{34})\$__")


def scan_placeholders(text: str | bytes, legacy: bool) -> list[PlaceholderSpan]:
    """Discover placeholder-shaped regions in textual compiler output.

    This is the naive path: nothing is cross-checked against a link table.
    Reported offsets are code-byte positions (text position // 2).
    """
    if isinstance(text, bytes):
        text = text.decode("latin-1")
    spans: list[PlaceholderSpan] = []
    if not legacy:
        for m in _HASH_FORM_RE.finditer(text):
            spans.append(PlaceholderSpan(
                offset=m.start() // 2, file_path="", lib_name=m.group(1),
                form=PlaceholderForm.HASH))
        return spans
    i = 0
    limit = len(text) - PLACEHOLDER_TEXT_CHARS
    while i <= limit:
        window = text[i:i + PLACEHOLDER_TEXT_CHARS]
        if window.startswith("__") and window.endswith("__") and ":" in window[2:38]:
            inner = window[2:38].rstrip("_")
            file_path, _, lib_name = inner.partition(":")
            spans.append(PlaceholderSpan(
                offset=i // 2, file_path=file_path, lib_name=lib_name,
                form=PlaceholderForm.LEGACY))
            i += PLACEHOLDER_TEXT_CHARS
        else:
            i += 1
    return spans


def declared_placeholders(output: "CompilationOutput") -> list[PlaceholderSpan]:
    """Validated spans from the compiler's link-reference table."""
    code_len = len(output.runtime_template)
    spans = sorted(output.link_refs, key=lambda s: s.offset)
    last_end = 0
    for span in spans:
        if span.offset < 0 or span.end > code_len:
            raise MalformedLinkReferenceError(
                f"link reference [{span.offset}, {span.end}) outside code of {code_len}")
        if span.offset < last_end:
            raise MalformedLinkReferenceError(
                f"link reference at {span.offset} overlaps the previous one")
        last_end = span.end
    return [PlaceholderSpan(s.offset, s.file_path, s.lib_name, s.form, declared=True)
            for s in spans]


def resolve(
    local: bytes,
    onchain: bytes,
    spans: list[PlaceholderSpan],
    mode: PlaceholderMode,
) -> tuple[bytes, list[LibraryBinding]]:
    """Substitute library addresses into `local` from `onchain`.

    OffsetLiteral replaces exactly the bytes inside each span with the
    on-chain bytes at the same offsets.  RegexNaive renders the unlinked hex
    text, compiles each placeholder's 40-char text as a regex (unescaped:
    that is the reproduced defect), and rewrites every 40-char match site
    with the address read at the span's own offset.
    """
    if len(local) != len(onchain):
        raise LengthMismatchError(
            f"local code is {len(local)} bytes, on-chain is {len(onchain)}")
    for span in spans:
        if span.offset < 0 or span.end > len(local):
            raise SpanOutOfRangeError(f"placeholder [{span.offset}, {span.end}) out of range")

    if mode is PlaceholderMode.OFFSET_LITERAL:
        out = bytearray(local)
        bindings = []
        for span in sorted(spans, key=lambda s: s.offset):
            address = onchain[span.offset:span.end]
            out[span.offset:span.end] = address
            bindings.append(LibraryBinding(
                span=span, address=address, matched_offsets=[span.offset],
                unset=address == bytes(PLACEHOLDER_CODE_BYTES)))
        return bytes(out), bindings

    # RegexNaive: work in hex-text space
    text = splice_unlinked_text(local, spans)
    onchain_hex = onchain.hex()
    bindings = []
    for span in sorted(spans, key=lambda s: s.offset):
        addr_hex = onchain_hex[2 * span.offset:2 * span.end]
        address = bytes.fromhex(addr_hex)
        matched = [span.offset]
        # the identified placeholder itself takes the address at its offset
        text = text[:2 * span.offset] + addr_hex + text[2 * span.end:]
        pattern_text = render_placeholder_text(span)
        try:
            pattern = re.compile(pattern_text)
        except re.error:
            pattern = re.compile(re.escape(pattern_text))
        # single pass over the current text; only 40-char windows are sites
        sites = [m.start() for m in pattern.finditer(text)
                 if m.end() - m.start() == PLACEHOLDER_TEXT_CHARS]
        for pos in reversed(sites):
            text = text[:pos] + addr_hex + text[pos + PLACEHOLDER_TEXT_CHARS:]
            matched.append(pos // 2)
        bindings.append(LibraryBinding(
            span=span, address=address, matched_offsets=sorted(set(matched)),
            unset=address == bytes(PLACEHOLDER_CODE_BYTES)))
    try:
        resolved = bytes.fromhex(text)
    except ValueError as exc:
        raise MalformedLinkReferenceError(
            f"unresolved placeholder text remains after naive linking: {exc}") from exc
    return resolved, bindings
