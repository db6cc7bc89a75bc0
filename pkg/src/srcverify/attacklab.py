"""Executable exploit scenarios against the verifier profiles.

Eight scenarios (R1..R8) each stage a deception on a fresh mock chain and
record store, run the attacker's submissions through a VerifyService built
from the profile under test, and evaluate an observable predicate:

  R1-R3  a record ends up holding sources the deployer never wrote
  R4-R7  what the service stores or displays diverges from live chain or
         store state
  R8     the disclosed identity admits two readings

assert_matrix() replays every (scenario, profile) cell and compares it
against the expected exploitability table.  scan_config() is the static
counterpart: it maps enabled unsafe toggles to the class they reproduce.
filter_r1_candidates() narrows a bytecode corpus to codes whose trailing
0.4-era metadata block makes them replayable by a hand-written twin.

Every scenario runs on its own chain, compiler, and store, so scenarios can
run in parallel.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from ._keccak import keccak256
from .bytecode import disassemble
from .chain import MockChain
from .compiler import (
    CompilationOutput,
    CompileSettings,
    FixtureCompiler,
    VerificationRequest,
    make_creation_code,
)
from .errors import (
    MatrixMismatchError,
    NoDonorError,
    SetupFailureError,
    StaleRecordError,
    UnknownScenarioError,
    VerifierError,
)
from .linker import PlaceholderForm, PlaceholderMode, PlaceholderSpan
from .matching import MatchPolicy, MetadataLabeler, Requirement
from .metadata import (
    INJECTED_FILENAME,
    LEGACY_BLOCK_LENGTH,
    LEGACY_MARKER,
    injected_library_source,
    make_metadata_block,
)
from .service import (
    HARDENED,
    NAIVE_SOURCIFY_LIKE,
    PROFILES,
    VerifierConfig,
    VerifyService,
    get_profile,
)
from .simulator import ImmutableStrategy
from .store import RecordStore

COMPETITIVE_VERIFICATION = "competitive-verification"
SOURCE_SCAM = "source-scam"

UNVERIFIED_LIBRARY_GUARD = "unverified-library"
DISCLOSURE_GUARD = "FullyQualifiedDisclosure"


@dataclass(frozen=True)
class PocScenario:
    """One replayable deception, described and executable."""

    id: str
    title: str
    consequence: str            # who profits: competitive-verification / source-scam
    violates: str               # which service promise the success breaks
    setup: str
    attack: str
    success_predicate: str
    run: Callable[[VerifierConfig, Path, Path | None], "ExploitOutcome"] = field(
        repr=False, compare=False)

    def describe(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "consequence": self.consequence,
            "violates": self.violates,
            "setup": self.setup,
            "attack": self.attack,
            "successPredicate": self.success_predicate,
        }


@dataclass(frozen=True)
class ExploitOutcome:
    """What one scenario did against one profile."""

    scenario_id: str
    profile: str
    exploited: bool
    guards: tuple[str, ...] = ()
    evidence: str = ""

    @property
    def result(self) -> str:
        return "exploited" if self.exploited else "blocked"


def _guard_names(exc: VerifierError) -> tuple[str, ...]:
    names = [type(exc).__name__.removesuffix("Error")]
    for cause in getattr(exc, "causes", ()):
        names.append(type(cause).__name__.removesuffix("Error"))
    return tuple(dict.fromkeys(names))


def _world(config: VerifierConfig, root: Path, subdir: str = "records",
           chain: MockChain | None = None):
    compiler = FixtureCompiler()
    chain = chain if chain is not None else MockChain()
    store = RecordStore(root / subdir)
    service = VerifyService(config, compiler, chain, store)
    return service, compiler, chain, store


def _note_request(export: Path | None, name: str,
                  request: VerificationRequest) -> None:
    if export is not None:
        (export / f"request-{name}.json").write_text(request.to_json())


def _note_chain(export: Path | None, chain: MockChain) -> None:
    if export is not None:
        chain.save_fixture(export / "chain.json")


# --- scenario bodies ---

_BODY = bytes.fromhex("6080604052600a600055")


def _run_r1(config, root, export):
    """Hand-assembled twin earns a partial match, inheritance labels the victim."""
    victim_runtime = _BODY + make_metadata_block(keccak256(b"victim project build"))
    forged_runtime = _BODY + make_metadata_block(keccak256(b"hand-assembled twin"))
    service, compiler, chain, store = _world(config, root)

    victim = chain.mock_deploy(victim_runtime, make_creation_code(victim_runtime),
                               deployer=bytes.fromhex("11" * 20))
    twin = chain.mock_deploy(victim_runtime, make_creation_code(victim_runtime),
                             deployer=bytes.fromhex("bb" * 20))
    _note_chain(export, chain)

    sources = {"asm/twin.sol": "contract Twin { /* verbatim runtime bytes */ }\n"}
    settings = CompileSettings(target="asm/twin.sol:Twin")
    compiler.register(sources, settings, CompilationOutput(
        creation_code=make_creation_code(forged_runtime),
        runtime_template=forged_runtime,
        uses_inline_assembly=True))
    request = VerificationRequest(sources=sources, settings=settings, address=twin)
    _note_request(export, "twin", request)

    try:
        twin_record = service.submit_verification(request)
    except VerifierError as exc:
        return ExploitOutcome("R1", config.name, False, _guard_names(exc),
                              f"twin submission rejected: {exc}")
    try:
        service.inherit_identical_runtime(victim)
    except NoDonorError as exc:
        return ExploitOutcome(
            "R1", config.name, False, _guard_names(exc),
            "victim address stays unlabeled; the twin's record is quarantined "
            f"behind warnings {twin_record.warnings}")
    labeled = store.load(victim)
    assert labeled.sources == sources
    return ExploitOutcome(
        "R1", config.name, True, (),
        f"victim 0x{victim.hex()} auto-labeled grade={labeled.grade.value} with "
        "attacker sources after a metadata-swap partial match on the twin")


def _run_r2(config, root, export):
    """Constructor that returns someone else's runtime bytes."""
    victim_runtime = _BODY + make_metadata_block(keccak256(b"victim defi build"))
    service, compiler, chain, store = _world(config, root)
    victim = chain.mock_deploy(victim_runtime, make_creation_code(victim_runtime),
                               deployer=bytes.fromhex("11" * 20))
    _note_chain(export, chain)

    claimed = bytes.fromhex("6001600101") + make_metadata_block(
        keccak256(b"forwarder claim"))
    sources = {"exploit/forwarder.sol":
               "contract Forwarder { constructor() { /* early return */ } }\n"}
    settings = CompileSettings(target="exploit/forwarder.sol:Forwarder")
    output = CompilationOutput(
        creation_code=make_creation_code(
            victim_runtime,
            extra=make_metadata_block(keccak256(b"forwarder wrapper"))),
        runtime_template=claimed)
    compiler.register(sources, settings, output)
    request = VerificationRequest(sources=sources, settings=settings,
                                  address=victim)
    _note_request(export, "forwarder", request)

    guards: tuple[str, ...] = ()
    try:
        record = service.submit_verification(request)
        return ExploitOutcome(
            "R2", config.name, True, (),
            f"attacker sources stored for victim 0x{victim.hex()} at grade "
            f"{record.grade.value}; the claimed template never matched the chain")
    except VerifierError as exc:
        guards = _guard_names(exc)

    if config.accept_imported_records:
        sidecar_service, sidecar_compiler, _, sidecar_store = _world(
            NAIVE_SOURCIFY_LIKE, root, subdir="sidecar", chain=chain)
        sidecar_compiler.register(sources, settings, output)
        sidecar_service.submit_verification(request)
        service.import_store(sidecar_store)
        record = store.load(victim)
        assert record.sources == sources
        return ExploitOutcome(
            "R2", config.name, True, (),
            "direct submission failed but the poisoned record was adopted "
            "wholesale from a naive sidecar store")
    return ExploitOutcome(
        "R2", config.name, False, guards,
        "foreign constructor return rejected and no import path exists")


def _run_r3(config, root, export):
    """Abstract contract with zero local bytecode claims a live deployment."""
    victim_runtime = _BODY + make_metadata_block(keccak256(b"victim wallet build"))
    service, compiler, chain, store = _world(config, root)
    victim = chain.mock_deploy(victim_runtime, make_creation_code(victim_runtime),
                               deployer=bytes.fromhex("11" * 20))
    _note_chain(export, chain)

    sources = {"abstract/hollow.sol":
               "abstract contract Hollow { function f() external virtual; }\n"}
    settings = CompileSettings(target="abstract/hollow.sol:Hollow")
    compiler.register(sources, settings, CompilationOutput(
        creation_code=b"", runtime_template=b""))
    request = VerificationRequest(sources=sources, settings=settings,
                                  address=victim)
    _note_request(export, "hollow", request)

    try:
        record = service.submit_verification(request)
    except VerifierError as exc:
        return ExploitOutcome("R3", config.name, False, _guard_names(exc),
                              f"empty local bytecode rejected: {exc}")
    return ExploitOutcome(
        "R3", config.name, True, (),
        f"zero-byte compilation graded {record.grade.value} for victim "
        f"0x{victim.hex()}; every byte of the creation tx passed as 'arguments'")


def _run_r4(config, root, export):
    """Metamorphic redeploy: same address, different code, stale record."""
    factory = bytes.fromhex("fa" * 20)
    salt = keccak256(b"metamorphic slot")
    v1 = _BODY + make_metadata_block(keccak256(b"honest vault v1"))
    v2 = bytes.fromhex("33ff") + make_metadata_block(keccak256(b"drainer v2"))
    service, compiler, chain, store = _world(config, root)

    sources = {"vault/vault.sol": "contract Vault { uint256 shares; }\n"}
    settings = CompileSettings(target="vault/vault.sol:Vault")
    output = CompilationOutput(creation_code=make_creation_code(v1),
                               runtime_template=v1)
    compiler.register(sources, settings, output)
    address = chain.mock_create2_deploy(factory, salt, output.creation_code, v1)
    request = VerificationRequest(sources=sources, settings=settings,
                                  address=address)
    _note_request(export, "vault", request)
    record = service.submit_verification(request)

    chain.mock_selfdestruct(address)
    revived = chain.mock_create2_deploy(factory, salt, output.creation_code, v2)
    if revived != address:
        raise SetupFailureError("create2 revival produced a different address")
    _note_chain(export, chain)

    try:
        view = service.query(address)
    except StaleRecordError as exc:
        lenient = service.query(address, strict=False)
        return ExploitOutcome(
            "R4", config.name, False, _guard_names(exc),
            f"read-time recheck stamped the record {lenient.freshness.value} "
            "and refused to serve it as current")
    live_hash = keccak256(chain.get_runtime_code(address))
    assert live_hash != record.code_hash_at_verification
    return ExploitOutcome(
        "R4", config.name, True, (),
        f"query serves the v1 sources with no staleness signal "
        f"(freshness={view.freshness}) although the code at 0x{address.hex()} "
        "was destroyed and replaced")


def _run_r5(config, root, export):
    """Linked library address hosts code nobody verified; no one is told."""
    lib_runtime = bytes.fromhex("33ff") + make_metadata_block(
        keccak256(b"scam math lib"))
    service, compiler, chain, store = _world(config, root)
    library = chain.mock_deploy(lib_runtime, bytes.fromhex("00"),
                                deployer=bytes.fromhex("bb" * 20))

    template = (b"\x60\x80" + b"\x73" + bytes(20) + b"\x00"
                + make_metadata_block(keccak256(b"vault with lib")))
    linked = bytearray(template)
    linked[3:23] = library
    sources = {
        "contracts/vault.sol": "contract Vault { /* uses SafeMath */ }\n",
        "lib/safemath.sol": "library SafeMath { /* looks audited */ }\n",
    }
    settings = CompileSettings(target="contracts/vault.sol:Vault")
    output = CompilationOutput(
        creation_code=make_creation_code(template),
        runtime_template=template,
        link_refs=[PlaceholderSpan(3, "lib/safemath.sol", "SafeMath",
                                   PlaceholderForm.LEGACY)])
    compiler.register(sources, settings, output)
    # the mock records the unlinked creation as tx input: the factory-style
    # deploy keeps the creation leg byte-identical on every profile
    address = chain.mock_deploy(bytes(linked), output.creation_code)
    _note_chain(export, chain)
    request = VerificationRequest(sources=sources, settings=settings,
                                  address=address)
    _note_request(export, "vault", request)

    try:
        record = service.submit_verification(request)
    except VerifierError as exc:
        return ExploitOutcome("R5", config.name, False, _guard_names(exc),
                              f"submission rejected outright: {exc}")
    flagged = [w for w in record.warnings
               if w.startswith(UNVERIFIED_LIBRARY_GUARD)]
    if flagged:
        return ExploitOutcome(
            "R5", config.name, False, (UNVERIFIED_LIBRARY_GUARD,),
            f"record stored but the binding is called out: {flagged[0]}")
    return ExploitOutcome(
        "R5", config.name, True, (),
        f"record binds library at 0x{library.hex()} whose live code was never "
        "verified, and carries no warning about it")


def _run_r6(config, root, export):
    """Comparison-masking abuse: regex spillover and differential mislabel."""
    service, compiler, chain, store = _world(config, root)
    guards: list[str] = []

    # arm one: a link table whose placeholder text is a regex that also
    # matches the owner constant, so naive linking rewrites both sites
    controller = bytes.fromhex("ab" * 20)
    local = (bytes.fromhex("6080604052") + b"\x73" + bytes(20)
             + bytes.fromhex("601457") + b"\x73" + b"\x22" * 20
             + bytes.fromhex("5b600055f3"))
    onchain = (bytes.fromhex("6080604052") + b"\x73" + controller
               + bytes.fromhex("601457") + b"\x73" + controller
               + bytes.fromhex("5b600055f3"))
    puzzle_sources = {"contracts/puzzle.sol":
                      "contract Puzzle { address constant OWNER = "
                      "0x2222222222222222222222222222222222222222; }\n"}
    puzzle_settings = CompileSettings(target="contracts/puzzle.sol:Puzzle")
    compiler.register(puzzle_sources, puzzle_settings, CompilationOutput(
        creation_code=make_creation_code(local),
        runtime_template=local,
        link_refs=[PlaceholderSpan(6, "$.{37}|2{40}|", "foo",
                                   PlaceholderForm.LEGACY)]))
    puzzle = chain.mock_deploy(onchain, make_creation_code(onchain),
                               deployer=bytes.fromhex("bb" * 20))
    puzzle_request = VerificationRequest(
        sources=puzzle_sources, settings=puzzle_settings, address=puzzle)
    _note_request(export, "puzzle", puzzle_request)
    try:
        record = service.submit_verification(puzzle_request)
        return ExploitOutcome(
            "R6", config.name, True, (),
            f"stored source displays owner 0x22..22 but live code at "
            f"0x{puzzle.hex()} holds 0x{controller.hex()} at that site "
            f"(grade {record.grade.value}, regex placeholder spillover)")
    except VerifierError as exc:
        guards.extend(_guard_names(exc))

    # arm two: a stray 0xa2 in real code drags a 53-byte window into the
    # differential metadata span, masking the backdoor byte at offset 9
    innocent = (bytes.fromhex("6080604052") + b"\xa2"
                + bytes.fromhex("6001600055") + bytes(8)
                + make_metadata_block(keccak256(b"token build")))
    backdoored = bytearray(innocent)
    backdoored[9] = 0xFF
    variant = bytearray(innocent[:19] + make_metadata_block(
        keccak256(b"token build with injected lib")))
    variant[9] = 0x01
    token_sources = {"contracts/token.sol":
                     "contract Token { uint8 fee = 1; }\n"}
    token_settings = CompileSettings(target="contracts/token.sol:Token")
    compiler.register(token_sources, token_settings, CompilationOutput(
        creation_code=make_creation_code(innocent), runtime_template=innocent))
    injected = dict(token_sources)
    injected[INJECTED_FILENAME] = injected_library_source("Token")
    compiler.register(injected, token_settings, CompilationOutput(
        creation_code=make_creation_code(bytes(variant)),
        runtime_template=bytes(variant)))
    token = chain.mock_deploy(bytes(backdoored),
                              make_creation_code(bytes(backdoored)),
                              deployer=bytes.fromhex("bb" * 20))
    _note_chain(export, chain)
    token_request = VerificationRequest(
        sources=token_sources, settings=token_settings, address=token)
    _note_request(export, "token", token_request)
    try:
        record = service.submit_verification(token_request)
        return ExploitOutcome(
            "R6", config.name, True, (),
            f"differential labeling masked the 0xff byte at offset 9; live "
            f"token at 0x{token.hex()} diverges from the stored source "
            f"(grade {record.grade.value})")
    except VerifierError as exc:
        guards.extend(_guard_names(exc))

    return ExploitOutcome(
        "R6", config.name, False, tuple(dict.fromkeys(guards)),
        "both masking arms failed: spans stay anchored to declared offsets "
        "and scanned patterns")


def _run_r7(config, root, export):
    """Source path that climbs out of its record and rewrites a foreign one."""
    service, compiler, chain, store = _world(config, root)

    treasury_runtime = _BODY + make_metadata_block(keccak256(b"treasury build"))
    treasury_sources = {"contracts/treasury.sol":
                        "contract Treasury { address owner; }\n"}
    treasury_settings = CompileSettings(target="contracts/treasury.sol:Treasury")
    compiler.register(treasury_sources, treasury_settings, CompilationOutput(
        creation_code=make_creation_code(treasury_runtime),
        runtime_template=treasury_runtime))
    treasury = chain.mock_deploy(treasury_runtime,
                                 make_creation_code(treasury_runtime),
                                 deployer=bytes.fromhex("11" * 20))
    victim_record = service.submit_verification(VerificationRequest(
        sources=treasury_sources, settings=treasury_settings, address=treasury))

    shell_runtime = (bytes.fromhex("6002600055")
                     + make_metadata_block(keccak256(b"shell build")))
    evil_path = (f"../../../{victim_record.grade.value}/"
                 f"{victim_record.address}/sources/contracts/treasury.sol")
    shell_sources = {
        "contracts/shell.sol": "contract Shell { uint256 x; }\n",
        evil_path: "contract Treasury { address owner = tx.origin; }\n",
    }
    shell_settings = CompileSettings(target="contracts/shell.sol:Shell")
    compiler.register(shell_sources, shell_settings, CompilationOutput(
        creation_code=make_creation_code(shell_runtime),
        runtime_template=shell_runtime))
    shell = chain.mock_deploy(shell_runtime, make_creation_code(shell_runtime),
                              deployer=bytes.fromhex("bb" * 20))
    _note_chain(export, chain)
    request = VerificationRequest(sources=shell_sources,
                                  settings=shell_settings, address=shell)
    _note_request(export, "shell", request)

    before = store.snapshot()
    try:
        service.submit_verification(request)
    except VerifierError as exc:
        untouched = store.snapshot() == before
        return ExploitOutcome(
            "R7", config.name, False, _guard_names(exc),
            f"path rejected at intake; store unchanged: {untouched}")
    tampered = store.verify_integrity(treasury)
    assert tampered == ["contracts/treasury.sol"]
    assert "tx.origin" in store.load(treasury).sources["contracts/treasury.sol"]
    return ExploitOutcome(
        "R7", config.name, True, (),
        f"foreign record 0x{treasury.hex()} now serves attacker text; its "
        f"manifest digests flag {tampered} as tampered")


def _run_r8(config, root, export):
    """Two same-named contracts, one bare display name."""
    runtime = _BODY + make_metadata_block(keccak256(b"token pair build"))
    service, compiler, chain, store = _world(config, root)
    sources = {
        "contracts/token.sol": "contract Token { function mint() internal {} }\n",
        "test/token.sol": "contract Token { function mint() public {} }\n",
    }
    settings = CompileSettings(target="test/token.sol:Token")
    compiler.register(sources, settings, CompilationOutput(
        creation_code=make_creation_code(runtime), runtime_template=runtime))
    address = chain.mock_deploy(runtime, make_creation_code(runtime),
                                deployer=bytes.fromhex("bb" * 20))
    _note_chain(export, chain)
    request = VerificationRequest(sources=sources, settings=settings,
                                  address=address)
    _note_request(export, "token", request)

    record = service.submit_verification(request)
    view = service.query(address)
    same_named = [p for p, body in record.sources.items()
                  if "contract Token" in body]
    assert len(same_named) == 2
    if ":" not in view.displayed_target:
        return ExploitOutcome(
            "R8", config.name, True, (),
            f"view names the contract {view.displayed_target!r} and serves "
            f"{len(view.source_files)} file(s) for {len(same_named)} "
            "same-named declarations; a reader cannot tell which one is live")
    return ExploitOutcome(
        "R8", config.name, False, (DISCLOSURE_GUARD,),
        f"view pins the identity to {view.displayed_target!r}")


SCENARIOS: dict[str, PocScenario] = {
    scenario.id: scenario for scenario in (
        PocScenario(
            id="R1",
            title="metadata-swap twin plus inheritance",
            consequence=COMPETITIVE_VERIFICATION,
            violates="only-genuine-sources-verify",
            setup="victim and attacker deployments share one runtime; the "
                  "attacker's fixture output equals it with a swapped "
                  "metadata hash and is flagged as hand-written assembly",
            attack="verify the attacker's twin (partial match), then inherit "
                   "the record onto the victim address",
            success_predicate="the victim address holds a record whose "
                              "sources the deployer never submitted",
            run=_run_r1),
        PocScenario(
            id="R2",
            title="constructor returns foreign runtime",
            consequence=COMPETITIVE_VERIFICATION,
            violates="only-genuine-sources-verify",
            setup="a victim contract is live; the attacker's creation code "
                  "returns the victim's runtime while claiming an unrelated "
                  "template",
            attack="submit the forwarder source for the victim address; if "
                   "refused, poison a naive sidecar and import its records",
            success_predicate="the victim address holds a record with the "
                              "attacker's sources",
            run=_run_r2),
        PocScenario(
            id="R3",
            title="empty local bytecode prefix",
            consequence=COMPETITIVE_VERIFICATION,
            violates="only-genuine-sources-verify",
            setup="a victim contract is live; the attacker's source is "
                  "abstract and compiles to zero bytes",
            attack="submit the abstract source for the victim address",
            success_predicate="the victim address holds a record although "
                              "nothing was compared",
            run=_run_r3),
        PocScenario(
            id="R4",
            title="destroy and redeploy behind a verified record",
            consequence=SOURCE_SCAM,
            violates="display-matches-live-code",
            setup="a factory places honest code at a create2 address and it "
                  "verifies; the factory then destroys it and revives the "
                  "address with different code",
            attack="query the verified record after the swap",
            success_predicate="the old sources are served with no staleness "
                              "signal while live code differs",
            run=_run_r4),
        PocScenario(
            id="R5",
            title="unverified linked library",
            consequence=SOURCE_SCAM,
            violates="display-matches-live-code",
            setup="the main contract links a library address that hosts "
                  "never-verified attacker code",
            attack="verify the main contract with a benign-looking library "
                   "source file",
            success_predicate="the record stores without any unverified-"
                              "library warning",
            run=_run_r5),
        PocScenario(
            id="R6",
            title="comparison masking via placeholders or differential spans",
            consequence=SOURCE_SCAM,
            violates="display-matches-live-code",
            setup="arm one plants a regex-shaped link table entry next to an "
                  "owner constant; arm two plants a stray block-head byte so "
                  "differential labeling swallows a code window",
            attack="verify attacker deployments whose live bytes differ from "
                   "the claimed template only inside the masked regions",
            success_predicate="a record stores although live code diverges "
                              "from the template outside real metadata",
            run=_run_r6),
        PocScenario(
            id="R7",
            title="path traversal into a foreign record",
            consequence=SOURCE_SCAM,
            violates="display-matches-live-code",
            setup="a victim record is stored; the attacker submits sources "
                  "whose virtual path climbs into the victim's directory",
            attack="verify the attacker's own contract with the crafted path",
            success_predicate="the victim record's source file changes and "
                              "no longer matches its manifest digest",
            run=_run_r7),
        PocScenario(
            id="R8",
            title="ambiguous bare-name disclosure",
            consequence=SOURCE_SCAM,
            violates="disclosure-unambiguous",
            setup="one submission carries two files that both declare the "
                  "same contract name; the deceptive one is the real target",
            attack="verify, then query the record",
            success_predicate="the view cannot tell a reader which of the "
                              "two declarations is the live one",
            run=_run_r8),
    )
}


def run_poc(scenario_id: str, profile: str | VerifierConfig,
            export_dir: str | Path | None = None) -> ExploitOutcome:
    """Stage one scenario against one profile on fresh state."""
    scenario = SCENARIOS.get(scenario_id.upper())
    if scenario is None:
        raise UnknownScenarioError(
            f"unknown scenario {scenario_id!r}; choose from "
            f"{', '.join(sorted(SCENARIOS))}")
    config = profile if isinstance(profile, VerifierConfig) else get_profile(profile)
    export = Path(export_dir) if export_dir is not None else None
    if export is not None:
        export.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix=f"poc-{scenario.id.lower()}-") as tmp:
        try:
            return scenario.run(config, Path(tmp), export)
        except VerifierError as exc:
            raise SetupFailureError(
                f"{scenario.id} against {config.name} leaked {type(exc).__name__}: "
                f"{exc}") from exc
        except OSError as exc:
            raise SetupFailureError(f"{scenario.id} could not stage: {exc}") from exc


# --- the expected exploitability table ---

_E = "NaiveEtherscanLike"
_S = "NaiveSourcifyLike"
_B = "NaiveBlockscoutLike"
_H = "Hardened"

EXPECTED_MATRIX: dict[tuple[str, str], tuple[str, str | None]] = {
    ("R1", _E): ("exploited", None),
    ("R1", _S): ("exploited", None),
    ("R1", _B): ("exploited", None),
    ("R1", _H): ("blocked", "NoDonor"),
    ("R2", _E): ("blocked", "NotAPrefix"),
    ("R2", _S): ("exploited", None),
    ("R2", _B): ("exploited", None),
    ("R2", _H): ("blocked", "ForeignReturnData"),
    ("R3", _E): ("blocked", "EmptyLocalBytecode"),
    ("R3", _S): ("exploited", None),
    ("R3", _B): ("exploited", None),
    ("R3", _H): ("blocked", "EmptyLocalBytecode"),
    ("R4", _E): ("exploited", None),
    ("R4", _S): ("exploited", None),
    ("R4", _B): ("exploited", None),
    ("R4", _H): ("blocked", "StaleRecord"),
    ("R5", _E): ("exploited", None),
    ("R5", _S): ("exploited", None),
    ("R5", _B): ("exploited", None),
    ("R5", _H): ("blocked", UNVERIFIED_LIBRARY_GUARD),
    ("R6", _E): ("blocked", "NotAPrefix"),
    ("R6", _S): ("exploited", None),
    ("R6", _B): ("exploited", None),
    ("R6", _H): ("blocked", "NoMatch"),
    ("R7", _E): ("blocked", "PathEscape"),
    ("R7", _S): ("exploited", None),
    ("R7", _B): ("exploited", None),
    ("R7", _H): ("blocked", "PathEscape"),
    ("R8", _E): ("exploited", None),
    ("R8", _S): ("blocked", DISCLOSURE_GUARD),
    ("R8", _B): ("exploited", None),
    ("R8", _H): ("blocked", DISCLOSURE_GUARD),
}


def assert_matrix() -> dict[tuple[str, str], ExploitOutcome]:
    """Run all 32 cells and compare against the expected table."""
    outcomes: dict[tuple[str, str], ExploitOutcome] = {}
    deviations: list[str] = []
    for scenario_id in sorted(SCENARIOS):
        for profile in PROFILES.values():
            outcome = run_poc(scenario_id, profile)
            outcomes[(scenario_id, profile.name)] = outcome
            expected_result, required_guard = EXPECTED_MATRIX[
                (scenario_id, profile.name)]
            if outcome.result != expected_result:
                deviations.append(
                    f"{scenario_id} x {profile.name}: expected "
                    f"{expected_result}, got {outcome.result} "
                    f"(guards={list(outcome.guards)})")
            elif required_guard is not None and required_guard not in outcome.guards:
                deviations.append(
                    f"{scenario_id} x {profile.name}: blocked, but guard "
                    f"{required_guard} missing from {list(outcome.guards)}")
    if deviations:
        raise MatrixMismatchError(
            "exploitability matrix deviates:\n" + "\n".join(deviations))
    return outcomes


# --- config lint ---

_RESIDUAL_NOTE = (
    "partial-matching", "R1",
    "a hand-crafted twin can still earn a metadata-stripped partial match; "
    "the hardened stance surfaces it (inline-assembly warning, donor "
    "refusal) rather than eliminating it")


def scan_config(config: VerifierConfig) -> list[tuple[str, str, str]]:
    """Map enabled unsafe toggles to the vulnerability class each reproduces."""
    findings = [_RESIDUAL_NOTE]
    if config.inherit_identical_runtime and config.inherit_flagged_donors:
        findings.append((
            "inherit_flagged_donors", "R1",
            "runtime-hash inheritance accepts donors whose match came from "
            "hand-written assembly, auto-labeling every identical deployment"))
    if config.trust_simulated_return:
        findings.append((
            "trust_simulated_return", "R2",
            "simulated constructor return is compared against the chain "
            "without checking it against the compiled template"))
    if config.accept_imported_records:
        findings.append((
            "accept_imported_records", "R2",
            "records imported from another instance are adopted wholesale, "
            "extending any upstream exploit"))
    if config.policy.allow_empty_prefix:
        findings.append((
            "policy.allow_empty_prefix", "R3",
            "zero local bytes prefix-match any creation transaction"))
    if not config.policy.validate_ctor_args:
        findings.append((
            "policy.validate_ctor_args", "R3",
            "trailing creation-tx bytes pass unchecked as constructor "
            "arguments"))
    if not config.recheck_code_hash_on_read:
        findings.append((
            "recheck_code_hash_on_read", "R4",
            "queries serve stored sources without comparing the live code "
            "hash, so destroy-and-redeploy goes unnoticed"))
    if not config.require_verified_libraries:
        findings.append((
            "require_verified_libraries", "R5",
            "library bindings to never-verified addresses are stored "
            "without a warning"))
    if config.placeholder_mode is PlaceholderMode.REGEX_NAIVE:
        findings.append((
            "placeholder_mode", "R6",
            "placeholder text is compiled as an unescaped regex, so crafted "
            "link names rewrite code sites beyond the declared span"))
    if config.metadata_labeler is MetadataLabeler.DIFFERENTIAL:
        findings.append((
            "metadata_labeler", "R6",
            "differential span expansion anchors on a bare block-head byte "
            "and can swallow real code into the masked region"))
    if config.allow_parent_path_refs:
        findings.append((
            "allow_parent_path_refs", "R7",
            "virtual source paths pass through unsanitized and can rewrite "
            "a foreign record's files"))
    if not config.disclose_full_paths:
        findings.append((
            "disclose_full_paths", "R8",
            "views show bare contract names and basenames, which collide "
            "when two files declare the same name"))
    return findings


# --- single-field sensitivity ---

CANONICAL_TOGGLE: dict[str, str] = {
    "R1": "inherit_flagged_donors",
    "R2": "trust_simulated_return",
    "R3": "policy",
    "R4": "recheck_code_hash_on_read",
    "R5": "require_verified_libraries",
    "R6": "metadata_labeler",
    "R7": "allow_parent_path_refs",
    "R8": "disclose_full_paths",
}

TOGGLE_RISKS: dict[str, str | None] = {
    "policy": "R3",
    "immutable_strategy": None,
    "placeholder_mode": "R6",
    "metadata_labeler": "R6",
    "trust_simulated_return": "R2",
    "allow_parent_path_refs": "R7",
    "disclose_full_paths": "R8",
    "require_verified_libraries": "R5",
    "recheck_code_hash_on_read": "R4",
    "inherit_identical_runtime": None,
    "inherit_flagged_donors": "R1",
    "allow_record_replacement": None,
    "accept_imported_records": "R2",
}

_NAIVE_FIELD_VALUES = {
    "policy": MatchPolicy(Requirement.EITHER, allow_empty_prefix=True,
                          validate_ctor_args=False),
    "immutable_strategy": ImmutableStrategy.CHAIN_BACKFILL,
    "placeholder_mode": PlaceholderMode.REGEX_NAIVE,
    "metadata_labeler": MetadataLabeler.DIFFERENTIAL,
}


def flip_field(config: VerifierConfig, field_name: str) -> VerifierConfig:
    """Toggle one config field between its hardened and naive setting."""
    if field_name not in TOGGLE_RISKS:
        raise ValueError(f"{field_name!r} is not a tunable config field")
    current = getattr(config, field_name)
    if isinstance(current, bool):
        return replace(config, **{field_name: not current})
    if field_name not in _NAIVE_FIELD_VALUES:
        raise ValueError(f"{field_name!r} has no naive alternative to flip to")
    naive = _NAIVE_FIELD_VALUES[field_name]
    flipped = getattr(HARDENED, field_name) if current == naive else naive
    return replace(config, **{field_name: flipped})


# --- the 0.4-era candidate filter ---

_LEGACY_HEAD = LEGACY_MARKER + b"\x58\x20"
_LEGACY_TAIL = b"\x00\x29"


def _is_r1_candidate(code: bytes) -> bool:
    if len(code) < LEGACY_BLOCK_LENGTH:
        return False
    block_start = len(code) - LEGACY_BLOCK_LENGTH
    if not code.startswith(_LEGACY_HEAD, block_start):
        return False
    if not code.endswith(_LEGACY_TAIL):
        return False
    body = code[:block_start]
    instructions = disassemble(body)
    for ins in instructions:
        if ins.truncated:
            # the final push would swallow the trailing block as data
            return False
        if ins.is_push and ins.opcode - 0x60 + 1 >= 2 and \
                ins.immediate[:1] == b"\x00":
            return False
        if body.startswith(LEGACY_MARKER, ins.offset):
            return False
    return True


def filter_r1_candidates(
        corpus: list[tuple[str, bytes]]) -> list[tuple[str, bytes]]:
    """Keep codes a hand-written twin could replay.

    A candidate ends with exactly one well-formed 0.4-era trailing metadata
    block, contains no second block head at any instruction boundary, and
    has no multi-byte push whose immediate starts with a zero octet (the
    optimizer never emits those, so the body cannot be regenerated).
    Decoding walks real instructions so push immediates are never misread
    as opcodes.
    """
    return [(address, code) for address, code in corpus
            if _is_r1_candidate(code)]


# --- scenario corpus on disk ---

def export_scenario_corpus(root: str | Path,
                           profile: str | VerifierConfig = HARDENED) -> list[Path]:
    """Write one folder per scenario: chain fixture, requests, manifest."""
    root = Path(root)
    written = []
    for scenario_id in sorted(SCENARIOS):
        scenario = SCENARIOS[scenario_id]
        directory = root / scenario_id.lower()
        directory.mkdir(parents=True, exist_ok=True)
        outcome = run_poc(scenario_id, profile, export_dir=directory)
        manifest = scenario.describe()
        manifest["expected"] = {
            name: {"result": result, "guard": guard}
            for (sid, name), (result, guard) in EXPECTED_MATRIX.items()
            if sid == scenario_id
        }
        manifest["observed"] = {
            "profile": outcome.profile,
            "result": outcome.result,
            "guards": list(outcome.guards),
        }
        (directory / "manifest.json").write_text(
            json.dumps(manifest, indent=2) + "\n")
        written.append(directory)
    return written
