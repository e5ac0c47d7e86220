"""Prover cascade configuration, result types, and errors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Union

# Quick closing tactics tried in order before falling back to the hammer.
DEFAULT_TACTICS = (
    "auto",
    "simp",
    "blast",
    "fastforce",
    "force",
    "eval",
    "presburger",
    "sos",
    "arith",
    "linarith",
    "auto simp: field_simps",
)

HAMMER_NAME = "sledgehammer"


@dataclass(frozen=True)
class ProverConfig:
    tactic_list: tuple[str, ...] = DEFAULT_TACTICS
    tactic_timeout_ms: int = 10_000
    hammer_timeout_ms: int = 120_000
    per_gap_budget_ms: int = 11 * 10_000 + 120_000 + 5_000
    theory: str = "Main"

    def __post_init__(self) -> None:
        if not self.tactic_list:
            raise ValueError("tactic_list must not be empty")
        if min(self.tactic_timeout_ms, self.hammer_timeout_ms, self.per_gap_budget_ms) <= 0:
            raise ValueError("all timeouts must be positive")


def step_text(tactic: str) -> str:
    """Render a cascade tactic as a closing step."""
    return f"by ({tactic})" if " " in tactic else f"by {tactic}"


@dataclass(frozen=True)
class Closed:
    closing_step: str
    tactic_index: int | None  # None: closed by the hammer
    elapsed_ms: int


@dataclass(frozen=True)
class Failed:
    attempts: tuple[tuple[str, str], ...]  # (tactic or hammer name, outcome)
    elapsed_ms: int = 0


@dataclass(frozen=True)
class TimedOut:
    elapsed_ms: int


GapResult = Union[Closed, Failed, TimedOut]


@dataclass(frozen=True)
class Valid:
    proof_text: str | None = None


@dataclass(frozen=True)
class Invalid:
    reason: str = ""


@dataclass
class ConnectError(Exception):
    address: str
    detail: str

    def __str__(self) -> str:
        return f"cannot reach prover backend at {self.address}: {self.detail}"


@dataclass
class ScriptError(Exception):
    path: str
    message: str

    def __str__(self) -> str:
        return f"bad prover script {self.path}: {self.message}"


@dataclass
class SessionDead(Exception):
    detail: str

    def __str__(self) -> str:
        return f"prover backend lost: {self.detail}"


@dataclass
class SessionBusy(Exception):
    session_id: str

    def __str__(self) -> str:
        return f"session {self.session_id} already has a command in flight"


@dataclass(frozen=True)
class BackendReply:
    status: str  # ok | fail | timeout
    elapsed_ms: int = 0
    state_id: str | None = None
    reconstruction: str | None = None
    reason: str | None = None


class Backend(Protocol):
    """One prover conversation. All methods may raise SessionDead."""

    def init(self, theory: str, statement: str) -> BackendReply: ...

    def step(self, text: str, timeout_ms: int) -> BackendReply: ...

    def hammer(self, timeout_ms: int) -> BackendReply: ...

    def check_full(self, proof_text: str, timeout_ms: int) -> BackendReply: ...

    def reset(self) -> BackendReply: ...

    def quit(self) -> None: ...
