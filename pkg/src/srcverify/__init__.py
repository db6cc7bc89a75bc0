"""srcverify: smart-contract source verification engine with an attack lab.

The package verifies that submitted source code corresponds to on-chain
bytecode: compile, resolve immutables and library placeholders, strip
compiler metadata, compare, grade, store.  Every historically unsafe
behavior is kept reproducible behind configuration toggles; the Hardened
profile turns all of them off.
"""

__version__ = "0.1.0"

from ._keccak import keccak256
from .attacklab import (
    EXPECTED_MATRIX,
    SCENARIOS,
    ExploitOutcome,
    PocScenario,
    assert_matrix,
    export_scenario_corpus,
    filter_r1_candidates,
    flip_field,
    run_poc,
    scan_config,
)
from .bytecode import code_hash, disassemble, parse_hex, render_hex
from .chain import MockChain, RedeployStatus, create2_address, detect_redeployment
from .compiler import (
    CompilationOutput,
    CompileSettings,
    ExternalCompiler,
    FixtureCompiler,
    VerificationRequest,
)
from .metadata import scan_metadata, strip_spans
from .service import (
    HARDENED,
    NAIVE_BLOCKSCOUT_LIKE,
    NAIVE_ETHERSCAN_LIKE,
    NAIVE_SOURCIFY_LIKE,
    PROFILES,
    DisclosureView,
    VerifierConfig,
    VerifyService,
    get_profile,
    sanitize_path,
    sanitize_paths,
)
from .store import Grade, RecordStore, VerificationRecord

__all__ = [
    "__version__",
    "CompilationOutput",
    "CompileSettings",
    "DisclosureView",
    "EXPECTED_MATRIX",
    "ExploitOutcome",
    "ExternalCompiler",
    "FixtureCompiler",
    "Grade",
    "HARDENED",
    "MockChain",
    "NAIVE_BLOCKSCOUT_LIKE",
    "NAIVE_ETHERSCAN_LIKE",
    "NAIVE_SOURCIFY_LIKE",
    "PROFILES",
    "PocScenario",
    "RecordStore",
    "RedeployStatus",
    "SCENARIOS",
    "VerificationRecord",
    "VerificationRequest",
    "VerifierConfig",
    "VerifyService",
    "assert_matrix",
    "code_hash",
    "create2_address",
    "detect_redeployment",
    "disassemble",
    "export_scenario_corpus",
    "filter_r1_candidates",
    "flip_field",
    "get_profile",
    "keccak256",
    "parse_hex",
    "render_hex",
    "run_poc",
    "scan_config",
    "scan_metadata",
    "sanitize_path",
    "sanitize_paths",
    "strip_spans",
]
