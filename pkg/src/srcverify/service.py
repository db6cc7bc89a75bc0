"""Verification service: intake, sanitize, compile, match, store, disclose.

This module wires the pipeline end to end and owns every behavior toggle.
The four named profiles span the design space: Hardened turns every guard
on; the three Naive profiles each reproduce a historically deployed
combination of unsafe defaults so the attack lab can replay the
corresponding exploits against them.
"""

from __future__ import annotations

import posixpath
import re
import time
from dataclasses import dataclass, replace
from types import SimpleNamespace

from ._keccak import keccak256
from .abi import parse_params
from .chain import ChainClient, RedeployStatus, detect_redeployment
from .compiler import CompilerInterface, VerificationRequest
from .errors import (
    AbsolutePathError,
    DuplicateAfterNormalizationError,
    ImportRefusedError,
    MalformedRequestError,
    NoDonorError,
    NoMatchError,
    NotFoundError,
    PathEscapeError,
    ReplacementDeniedError,
    StaleRecordError,
    VerifierError,
)
from .linker import PlaceholderMode
from .matching import (
    Grade,
    MatchPolicy,
    MatchResult,
    MetadataLabeler,
    Requirement,
    grade,
    match_creation,
    match_runtime,
)
from .metadata import differential_extract
from .simulator import ImmutableStrategy
from .store import RecordStore, VerificationRecord, normalize_address

INLINE_ASSEMBLY_WARNING = "inline-assembly"
IMPORTED_WARNING = "imported"


# --- configuration ---

@dataclass(frozen=True)
class VerifierConfig:
    """Every behavior toggle of the pipeline, plus a profile name."""

    name: str
    policy: MatchPolicy
    immutable_strategy: ImmutableStrategy
    placeholder_mode: PlaceholderMode
    metadata_labeler: MetadataLabeler
    trust_simulated_return: bool
    allow_parent_path_refs: bool
    disclose_full_paths: bool
    require_verified_libraries: bool
    recheck_code_hash_on_read: bool
    inherit_identical_runtime: bool
    inherit_flagged_donors: bool
    allow_record_replacement: bool
    accept_imported_records: bool


HARDENED = VerifierConfig(
    name="Hardened",
    policy=MatchPolicy.hardened(),
    immutable_strategy=ImmutableStrategy.SIM_GUARDED,
    placeholder_mode=PlaceholderMode.OFFSET_LITERAL,
    metadata_labeler=MetadataLabeler.PATTERN_SCAN,
    trust_simulated_return=False,
    allow_parent_path_refs=False,
    disclose_full_paths=True,
    require_verified_libraries=True,
    recheck_code_hash_on_read=True,
    inherit_identical_runtime=True,
    inherit_flagged_donors=False,
    allow_record_replacement=True,
    accept_imported_records=False,
)

NAIVE_ETHERSCAN_LIKE = VerifierConfig(
    name="NaiveEtherscanLike",
    policy=MatchPolicy(Requirement.BOTH),
    immutable_strategy=ImmutableStrategy.CHAIN_BACKFILL,
    placeholder_mode=PlaceholderMode.OFFSET_LITERAL,
    metadata_labeler=MetadataLabeler.PATTERN_SCAN,
    trust_simulated_return=False,
    allow_parent_path_refs=False,
    disclose_full_paths=False,
    require_verified_libraries=False,
    recheck_code_hash_on_read=False,
    inherit_identical_runtime=True,
    inherit_flagged_donors=True,
    allow_record_replacement=False,
    accept_imported_records=False,
)

NAIVE_SOURCIFY_LIKE = VerifierConfig(
    name="NaiveSourcifyLike",
    policy=MatchPolicy(Requirement.EITHER, allow_empty_prefix=True,
                       validate_ctor_args=False),
    immutable_strategy=ImmutableStrategy.SIM_GUARDED,
    placeholder_mode=PlaceholderMode.REGEX_NAIVE,
    metadata_labeler=MetadataLabeler.PATTERN_SCAN,
    trust_simulated_return=True,
    allow_parent_path_refs=True,
    disclose_full_paths=True,
    require_verified_libraries=False,
    recheck_code_hash_on_read=False,
    inherit_identical_runtime=True,
    inherit_flagged_donors=True,
    allow_record_replacement=True,
    accept_imported_records=False,
)

NAIVE_BLOCKSCOUT_LIKE = VerifierConfig(
    name="NaiveBlockscoutLike",
    policy=MatchPolicy(Requirement.CREATION_ONLY, allow_empty_prefix=True,
                       validate_ctor_args=False),
    immutable_strategy=ImmutableStrategy.SIM_GUARDED,
    placeholder_mode=PlaceholderMode.OFFSET_LITERAL,
    metadata_labeler=MetadataLabeler.DIFFERENTIAL,
    trust_simulated_return=True,
    allow_parent_path_refs=True,
    disclose_full_paths=False,
    require_verified_libraries=False,
    recheck_code_hash_on_read=False,
    inherit_identical_runtime=True,
    inherit_flagged_donors=True,
    allow_record_replacement=False,
    accept_imported_records=True,
)

PROFILES = {
    config.name: config
    for config in (HARDENED, NAIVE_ETHERSCAN_LIKE, NAIVE_SOURCIFY_LIKE,
                   NAIVE_BLOCKSCOUT_LIKE)
}


def get_profile(name: str) -> VerifierConfig:
    if name in PROFILES:
        return PROFILES[name]
    folded = name.replace("-", "").replace("_", "").lower()
    for key, config in PROFILES.items():
        if key.lower() == folded:
            return config
    raise ValueError(
        f"unknown profile {name!r}; choose from {', '.join(sorted(PROFILES))}")


# --- path sanitization ---

_SCHEME_PREFIX = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*://")
_DRIVE_PREFIX = re.compile(r"^[A-Za-z]:[/\\]")


def sanitize_path(path: str) -> str:
    """Normalize one virtual source path, rejecting anything that could
    write outside the record's own directory."""
    if not path or path == ".":
        raise MalformedRequestError("empty source path")
    if _SCHEME_PREFIX.match(path):
        raise AbsolutePathError(f"source path carries a URL scheme: {path!r}")
    if _DRIVE_PREFIX.match(path):
        raise AbsolutePathError(f"source path carries a drive prefix: {path!r}")
    if path.startswith(("/", "\\")):
        raise AbsolutePathError(f"source path is absolute: {path!r}")
    clean = posixpath.normpath(path.replace("\\", "/"))
    if clean == ".." or clean.startswith("../"):
        raise PathEscapeError(
            f"source path {path!r} escapes the record directory")
    return clean


def sanitize_paths(sources: dict[str, str], *,
                   allow_parent_refs: bool = False) -> dict[str, str]:
    """Normalize all virtual paths of a request.

    With allow_parent_refs the map passes through untouched, which is the
    naive behavior that lets a crafted ``../..`` path overwrite a foreign
    record once the store writes it verbatim.
    """
    if allow_parent_refs:
        return dict(sources)
    normalized: dict[str, str] = {}
    for path, body in sources.items():
        clean = sanitize_path(path)
        if clean in normalized:
            raise DuplicateAfterNormalizationError(
                f"{path!r} collides with another source at {clean!r}")
        normalized[clean] = body
    return normalized


# --- disclosure ---

@dataclass(frozen=True)
class DisclosureView:
    """What a query reveals about a stored record.

    A full-disclosure view names the target as "virtual/path.sol:Name" and
    keys every source by its full path.  A bare view gives only the
    contract name and basenames, which is ambiguous as soon as two files
    declare the same name.
    """

    address: str
    grade: Grade
    displayed_target: str
    source_files: dict[str, str]
    settings: dict
    warnings: tuple[str, ...]
    freshness: RedeployStatus | None = None


class VerifyService:
    """One verifier instance: a config, a compiler, a chain, a store.

    Writes are serialized per address by the store; everything before the
    store step may run concurrently for distinct submissions.
    """

    def __init__(self, config: VerifierConfig, compiler: CompilerInterface,
                 chain: ChainClient, store: RecordStore):
        self.config = config
        self.compiler = compiler
        self.chain = chain
        self.store = store

    # --- submission ---

    def submit_verification(self, request: VerificationRequest) -> VerificationRecord:
        cfg = self.config
        if request.address is None:
            raise MalformedRequestError("request names no contract address")
        if not request.settings.target:
            raise MalformedRequestError("request names no compilation target")
        address = normalize_address(request.address)
        address_bytes = bytes.fromhex(address[2:])

        sources = sanitize_paths(
            request.sources, allow_parent_refs=cfg.allow_parent_path_refs)
        settings = request.settings
        if not cfg.allow_parent_path_refs:
            clean_target = sanitize_path(settings.target_path)
            if clean_target != settings.target_path:
                settings = replace(
                    settings, target=f"{clean_target}:{settings.target_name}")
            if settings.target_path not in sources:
                raise MalformedRequestError(
                    f"target file {settings.target_path!r} missing after "
                    f"path normalization")

        output = self.compiler.compile(sources, settings)
        result, tx_hash = self._match(output, address_bytes, sources, settings)

        warnings = [INLINE_ASSEMBLY_WARNING] if output.uses_inline_assembly else []
        for report in (result.creation_report, result.runtime_report):
            if report is not None:
                warnings.extend(report.immutable_audit)
        if cfg.require_verified_libraries and result.runtime_report is not None:
            for binding in result.runtime_report.placeholder_bindings:
                if binding.unset:
                    continue
                bound = normalize_address(binding.address)
                if not self.store.has(bound):
                    warnings.append(
                        f"unverified-library:{binding.span.lib_name}@{bound}")

        settings_dict = settings.as_dict()
        if request.declared_libraries:
            settings_dict["libraries"] = dict(request.declared_libraries)

        record = VerificationRecord(
            address=address,
            grade=result.grade,
            sources=sources,
            fully_qualified_target=settings.target,
            settings=settings_dict,
            code_hash_at_verification=keccak256(
                self.chain.get_runtime_code(address_bytes)),
            creation_tx_hash=tx_hash,
            warnings=list(dict.fromkeys(warnings)),
        )
        return self.store.store_record(
            record, allow_replacement=cfg.allow_record_replacement)

    def _match(self, output, address_bytes: bytes, sources: dict[str, str],
               settings) -> tuple[MatchResult, bytes | None]:
        cfg = self.config
        requirement = cfg.policy.requirement

        creation_spans = runtime_spans = None
        if cfg.metadata_labeler is MetadataLabeler.DIFFERENTIAL:
            probe = SimpleNamespace(sources=sources, settings=settings)
            creation_spans = differential_extract(
                self.compiler, probe, artifact="creation").spans
            if requirement is not Requirement.CREATION_ONLY:
                runtime_spans = differential_extract(
                    self.compiler, probe, artifact="runtime").spans

        creation_report = runtime_report = None
        creation_exc = runtime_exc = None
        tx_hash = tx_input = None

        try:
            tx_hash, tx_input, _deployer = self.chain.get_creation_input(
                address_bytes)
        except NotFoundError as exc:
            creation_exc = exc
        if tx_input is not None:
            ctor_params = (parse_params(output.ctor_params)
                           if output.ctor_params is not None else None)
            try:
                creation_report = match_creation(
                    output.creation_code, tx_input, ctor_params, cfg.policy,
                    local_spans=creation_spans)
            except VerifierError as exc:
                creation_exc = exc

        if requirement is not Requirement.CREATION_ONLY:
            try:
                onchain = self.chain.get_runtime_code(address_bytes)
                if not onchain:
                    raise NotFoundError(
                        "no runtime code on chain at the requested address")
                args = b""
                if tx_input is not None and \
                        len(tx_input) >= len(output.creation_code):
                    args = tx_input[len(output.creation_code):]
                runtime_report = match_runtime(
                    output, onchain, cfg.immutable_strategy,
                    ctor_args=args,
                    trust_simulated_return=cfg.trust_simulated_return,
                    placeholder_mode=cfg.placeholder_mode,
                    labeler=cfg.metadata_labeler,
                    differential_spans=runtime_spans)
            except VerifierError as exc:
                runtime_exc = exc

        if requirement is Requirement.BOTH:
            for exc in (creation_exc, runtime_exc):
                if exc is not None:
                    raise exc
        elif requirement is Requirement.CREATION_ONLY:
            if creation_exc is not None:
                raise creation_exc
        elif creation_report is None and runtime_report is None:
            causes = [e for e in (creation_exc, runtime_exc) if e is not None]
            if len(causes) == 1:
                raise causes[0]
            raise NoMatchError(
                "both comparison legs failed: " +
                "; ".join(str(c) for c in causes), causes=causes)

        result = grade(creation_report, runtime_report, cfg.policy)
        if result.grade is Grade.NO_MATCH:
            raise NoMatchError(result.failure_reason or "bytecode mismatch",
                               result=result,
                               causes=[e for e in (creation_exc, runtime_exc)
                                       if e is not None])
        return result, tx_hash

    # --- query ---

    def query(self, address: str | bytes, *, strict: bool = True) -> DisclosureView:
        cfg = self.config
        record = self.store.load(address)
        address_bytes = bytes.fromhex(record.address[2:])
        freshness = None
        if cfg.recheck_code_hash_on_read:
            freshness = detect_redeployment(
                self.chain, address_bytes, record.code_hash_at_verification)
            if freshness is not RedeployStatus.UNCHANGED and strict:
                raise StaleRecordError(
                    f"code at {record.address} is {freshness.value} since "
                    f"verification; the stored sources no longer describe it")
        if cfg.disclose_full_paths:
            displayed = record.fully_qualified_target
            files = dict(record.sources)
        else:
            displayed = record.contract_name
            files = {posixpath.basename(p): body
                     for p, body in record.sources.items()}
        return DisclosureView(
            address=record.address,
            grade=record.grade,
            displayed_target=displayed,
            source_files=files,
            settings=dict(record.settings),
            warnings=tuple(record.warnings),
            freshness=freshness,
        )

    # --- shortcuts ---

    def inherit_identical_runtime(self, new_address: str | bytes) -> VerificationRecord:
        """Clone an existing record onto an address with identical runtime."""
        cfg = self.config
        if not cfg.inherit_identical_runtime:
            raise NoDonorError(f"profile {cfg.name} disables inheritance")
        address = normalize_address(new_address)
        code = self.chain.get_runtime_code(bytes.fromhex(address[2:]))
        if not code:
            raise NoDonorError(f"no runtime code at {address}")
        donors = [d for d in self.store.find_by_code_hash(keccak256(code))
                  if d.address != address]
        if not donors:
            raise NoDonorError(f"no verified record shares the runtime of {address}")
        if not cfg.inherit_flagged_donors:
            clean = [d for d in donors
                     if INLINE_ASSEMBLY_WARNING not in d.warnings]
            if not clean:
                raise NoDonorError(
                    "every donor carries the inline-assembly flag; refusing "
                    "to propagate a hand-crafted bytecode match")
            donors = clean
        donor = donors[0]
        record = VerificationRecord(
            address=address,
            grade=donor.grade,
            sources=dict(donor.sources),
            fully_qualified_target=donor.fully_qualified_target,
            settings=dict(donor.settings),
            code_hash_at_verification=donor.code_hash_at_verification,
            creation_tx_hash=None,
            warnings=donor.warnings + [f"inherited-from:{donor.address}"],
            timestamp=time.time(),
        )
        return self.store.store_record(
            record, allow_replacement=cfg.allow_record_replacement)

    def import_store(self, other: RecordStore) -> list[VerificationRecord]:
        """Adopt every record of another instance's store, marked imported.

        Models one platform recognizing another's verdicts wholesale, which
        extends any exploit stored there onto this instance.
        """
        if not self.config.accept_imported_records:
            raise ImportRefusedError(
                f"profile {self.config.name} does not accept imported records")
        accepted = []
        for donor in other.records():
            record = VerificationRecord(
                address=donor.address,
                grade=donor.grade,
                sources=dict(donor.sources),
                fully_qualified_target=donor.fully_qualified_target,
                settings=dict(donor.settings),
                code_hash_at_verification=donor.code_hash_at_verification,
                creation_tx_hash=donor.creation_tx_hash,
                warnings=donor.warnings + [IMPORTED_WARNING],
                timestamp=time.time(),
            )
            try:
                accepted.append(self.store.store_record(
                    record,
                    allow_replacement=self.config.allow_record_replacement))
            except ReplacementDeniedError:
                continue
        return accepted
