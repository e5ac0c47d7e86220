"""Gap-closing prover: tactic cascade with hammer fallback, over scripted
or external wire-protocol backends."""

from .config import (
    DEFAULT_TACTICS,
    HAMMER_NAME,
    Backend,
    BackendReply,
    Closed,
    ConnectError,
    Failed,
    GapResult,
    Invalid,
    ProverConfig,
    ScriptError,
    SessionBusy,
    SessionDead,
    TimedOut,
    Valid,
    step_text,
)
from .driver import (
    BackendSpec,
    CheatViolation,
    ExternalSpec,
    FullProofResult,
    ProverSession,
    ScriptedSpec,
    SessionState,
    SketchFailure,
    close_gap,
    direct_prove,
    open_session,
    prove_sketch,
    sketch_prefix,
    verify_full,
)
from .scripted import ProverScript, ScriptedBackend, extract_goal, load_script
from .wire import WireBackend, WireServer

__all__ = [
    "DEFAULT_TACTICS",
    "HAMMER_NAME",
    "Backend",
    "BackendReply",
    "BackendSpec",
    "CheatViolation",
    "Closed",
    "ConnectError",
    "ExternalSpec",
    "Failed",
    "FullProofResult",
    "GapResult",
    "Invalid",
    "ProverConfig",
    "ProverScript",
    "ProverSession",
    "ScriptError",
    "ScriptedBackend",
    "ScriptedSpec",
    "SessionBusy",
    "SessionDead",
    "SessionState",
    "SketchFailure",
    "TimedOut",
    "Valid",
    "WireBackend",
    "WireServer",
    "close_gap",
    "direct_prove",
    "extract_goal",
    "load_script",
    "open_session",
    "prove_sketch",
    "sketch_prefix",
    "step_text",
    "verify_full",
]
