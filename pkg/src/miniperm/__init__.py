"""Executable model of two-layer mini-program permission handling.

The model layer (:mod:`.model`, :mod:`.profiles`, :mod:`.scenario`)
simulates a host app running mini-programs on top of an OS permission
layer and records everything in a deterministic event trace.  The
analysis layer (:mod:`.detectors`, :mod:`.scanner`) turns traces,
registries, and packaged source trees into findings.  :mod:`.cli`
exposes all of it as the ``miniperm`` command.
"""

from .model import (
    ApiSpec,
    CallOutcome,
    CasePath,
    Channel,
    ClipboardPromptMode,
    DataClass,
    EventKind,
    GrantStatus,
    Layer,
    ModelError,
    OS_RUNTIME_CLASSES,
    ParamLeakRule,
    TraceEvent,
    UserChoice,
    WebviewBridgeMode,
    World,
    new_world,
    replay_events,
)
from .profiles import (
    HostProfile,
    OsEnvProfile,
    Platform,
    ProfileError,
    bundled_env,
    bundled_envs,
    bundled_patched_profile,
    bundled_patched_profiles,
    bundled_profile,
    bundled_profiles,
    bundled_registry,
    load_env,
    load_profile,
)
from .scenario import (
    Scenario,
    ScenarioError,
    StepResult,
    bundled_scenario,
    bundled_scenarios,
    load_scenario,
    run_scenario,
)
from .detectors import (
    CATEGORY_CODES,
    Finding,
    MatrixReport,
    MatrixStatus,
    MgmtSubMode,
    PelSubMode,
    StealthSubMode,
    VulnCategory,
    WebviewSubMode,
    build_matrix,
    category_status,
    detect_cache_reuse,
    detect_env_divergence,
    detect_mgmt_issues,
    detect_pel_api,
    detect_stealth_transfer,
    detect_webview_bypass,
    pel_classification,
    run_all,
)
from .jslex import (
    LexError,
    Token,
    tokenize,
)
from .scanner import (
    CallForm,
    CallSite,
    MatchedSite,
    ScanError,
    ScanReport,
    corpus_stats,
    extract_call_sites,
    load_package,
    load_registry_file,
    match_sites,
    scan_package,
)

__version__ = "0.1.0"

__all__ = [
    "ApiSpec", "CallOutcome", "CasePath", "Channel", "ClipboardPromptMode",
    "DataClass", "EventKind", "GrantStatus", "Layer", "ModelError",
    "OS_RUNTIME_CLASSES", "ParamLeakRule", "TraceEvent", "UserChoice",
    "WebviewBridgeMode", "World", "new_world", "replay_events",
    "HostProfile", "OsEnvProfile", "Platform", "ProfileError",
    "bundled_env", "bundled_envs", "bundled_patched_profile",
    "bundled_patched_profiles", "bundled_profile", "bundled_profiles",
    "bundled_registry", "load_env", "load_profile",
    "Scenario", "ScenarioError", "StepResult", "bundled_scenario",
    "bundled_scenarios", "load_scenario", "run_scenario",
    "CATEGORY_CODES", "Finding", "MatrixReport", "MatrixStatus",
    "MgmtSubMode", "PelSubMode", "StealthSubMode", "VulnCategory",
    "WebviewSubMode", "build_matrix", "category_status",
    "detect_cache_reuse", "detect_env_divergence", "detect_mgmt_issues",
    "detect_pel_api", "detect_stealth_transfer", "detect_webview_bypass",
    "pel_classification", "run_all",
    "LexError", "Token", "tokenize",
    "CallForm", "CallSite", "MatchedSite", "ScanError", "ScanReport",
    "corpus_stats", "extract_call_sites", "load_package",
    "load_registry_file", "match_sites", "scan_package",
    "__version__",
]
