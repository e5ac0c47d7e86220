"""Gap-closing driver: the tactic cascade with hammer fallback.

Each open conjecture is attacked by trying the configured quick tactics in
order under a short per-step timeout, then falling back to the hammer with
its long timeout. A strict per-gap wall budget is enforced: an attempt is
never started if its timeout could overrun the budget. Sketches are closed
gap by gap in document order, substituting each closing step before moving
on, and a fully closed sketch gets one final end-to-end verification.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Union

from ..sketch import (
    GapSite,
    SketchAst,
    check_no_cheat,
    extract_gaps,
    fill_gap,
    serialize,
)
from .config import (
    Backend,
    Closed,
    ConnectError,
    Failed,
    GapResult,
    HAMMER_NAME,
    Invalid,
    ProverConfig,
    SessionBusy,
    SessionDead,
    TimedOut,
    Valid,
    step_text,
)
from .scripted import ScriptedBackend, load_script, new_session_id
from .wire import WireBackend


@dataclass(frozen=True)
class ScriptedSpec:
    script_path: str


@dataclass(frozen=True)
class ExternalSpec:
    address: str


BackendSpec = Union[ScriptedSpec, ExternalSpec]


class SessionState(Enum):
    IDLE = "idle"
    BUSY = "busy"
    DEAD = "dead"


@dataclass
class CheatViolation(Exception):
    offending: tuple[tuple[str, int], ...]

    def __str__(self) -> str:
        words = ", ".join(sorted({kw for kw, _ in self.offending}))
        return f"proof contains cheating keywords: {words}"


class ProverSession:
    """One prover conversation; exactly one command in flight at a time."""

    def __init__(self, backend: Backend, config: ProverConfig, session_id: str | None = None):
        self.session_id = session_id or new_session_id()
        self.backend = backend
        self.config = config
        self.state = SessionState.IDLE

    @contextlib.contextmanager
    def exclusive(self) -> Iterator[Backend]:
        if self.state is SessionState.DEAD:
            raise SessionDead("session is dead; reopen it")
        if self.state is SessionState.BUSY:
            raise SessionBusy(self.session_id)
        self.state = SessionState.BUSY
        try:
            yield self.backend
        except SessionDead:
            self.state = SessionState.DEAD
            raise
        else:
            self.state = SessionState.IDLE

    def close(self) -> None:
        with contextlib.suppress(SessionDead):
            self.backend.quit()
        self.state = SessionState.DEAD


def open_session(spec: BackendSpec, config: ProverConfig) -> ProverSession:
    """Connect a backend and initialize the theory context."""
    if isinstance(spec, ScriptedSpec):
        backend: Backend = ScriptedBackend(load_script(spec.script_path))
    else:
        backend = WireBackend(spec.address)
    session = ProverSession(backend, config)
    with session.exclusive() as b:
        reply = b.init(config.theory, "")
        if reply.status != "ok":
            raise ConnectError(getattr(spec, "address", "scripted"), reply.reason or "init failed")
    return session


def sketch_prefix(ast: SketchAst, site: GapSite) -> str:
    """Serialized context up to (and including) the gap's step, with the
    justification removed: the text a prover replays to reach the goal."""
    sentinel = "by sketchprove_goal_sentinel"
    marked = fill_gap(ast, site, sentinel)
    text = serialize(marked)
    cut = text.find(sentinel)
    assert cut != -1
    return text[:cut].rstrip() + "\n"


def close_gap(session: ProverSession, site: GapSite, context: str) -> GapResult:
    """Run the cascade on one open conjecture. Wall time never exceeds the
    per-gap budget: attempts that could overrun are not started."""
    config = session.config
    with session.exclusive() as backend:
        backend.reset()
        backend.init(config.theory, context)
        elapsed = 0
        attempts: list[tuple[str, str]] = []
        for index, tactic in enumerate(config.tactic_list):
            if elapsed + config.tactic_timeout_ms > config.per_gap_budget_ms:
                return TimedOut(elapsed)
            reply = backend.step(step_text(tactic), config.tactic_timeout_ms)
            elapsed += reply.elapsed_ms
            if reply.status == "ok":
                return Closed(step_text(tactic), index, elapsed)
            attempts.append((tactic, reply.status))
        if elapsed + config.hammer_timeout_ms > config.per_gap_budget_ms:
            return TimedOut(elapsed)
        reply = backend.hammer(config.hammer_timeout_ms)
        elapsed += reply.elapsed_ms
        if reply.status == "ok" and reply.reconstruction:
            return Closed(reply.reconstruction, None, elapsed)
        attempts.append((HAMMER_NAME, reply.status))
        return Failed(tuple(attempts), elapsed)


@dataclass(frozen=True)
class FullProofResult:
    proof_text: str
    per_gap: tuple[GapResult, ...]


@dataclass(frozen=True)
class SketchFailure:
    failed_site: GapSite | None  # None: the final whole-proof check failed
    partial: tuple[GapResult, ...]
    reason: str


def prove_sketch(session: ProverSession, ast: SketchAst) -> FullProofResult | SketchFailure:
    """Close all gaps in document order, substituting each closing step so
    later gaps see earlier closures; abort on the first gap that does not
    close. A fully closed sketch must also pass end-to-end verification."""
    report = check_no_cheat(serialize(ast))
    if not report.clean:
        raise CheatViolation(report.offending)

    per_gap: list[GapResult] = []
    current = ast
    while True:
        gaps = extract_gaps(current)
        if not gaps:
            break
        site = gaps[0]
        result = close_gap(session, site, sketch_prefix(current, site))
        per_gap.append(result)
        if not isinstance(result, Closed):
            kind = "timed out" if isinstance(result, TimedOut) else "failed"
            return SketchFailure(site, tuple(per_gap), f"gap {kind}: {site.proposition}")
        current = fill_gap(current, site, result.closing_step)

    proof_text = serialize(current)
    verdict = verify_full(session, proof_text)
    if isinstance(verdict, Invalid):
        return SketchFailure(None, tuple(per_gap), f"final check: {verdict.reason}")
    return FullProofResult(proof_text, tuple(per_gap))


def verify_full(session: ProverSession, proof_text: str) -> Valid | Invalid:
    """End-to-end acceptance of a complete proof. Proofs with cheating
    keywords are Invalid outright; the backend is never consulted."""
    report = check_no_cheat(proof_text)
    if not report.clean:
        words = ", ".join(sorted({kw for kw, _ in report.offending}))
        return Invalid(f"cheating keyword: {words}")
    with session.exclusive() as backend:
        reply = backend.check_full(proof_text, session.config.hammer_timeout_ms)
    if reply.status == "ok":
        return Valid(proof_text)
    if reply.status == "timeout":
        return Invalid("verification timed out")
    return Invalid(reply.reason or "backend rejected the proof")


def direct_prove(session: ProverSession, formal_statement: str) -> Valid | Invalid:
    """Baseline: attack the whole statement as a single goal with the same
    cascade. The assembled proof still passes the cheat gate."""
    config = session.config
    with session.exclusive() as backend:
        backend.reset()
        backend.init(config.theory, formal_statement)
        elapsed = 0
        closing: str | None = None
        for tactic in config.tactic_list:
            if elapsed + config.tactic_timeout_ms > config.per_gap_budget_ms:
                return Invalid("per-gap budget exhausted")
            reply = backend.step(step_text(tactic), config.tactic_timeout_ms)
            elapsed += reply.elapsed_ms
            if reply.status == "ok":
                closing = step_text(tactic)
                break
        if closing is None:
            if elapsed + config.hammer_timeout_ms > config.per_gap_budget_ms:
                return Invalid("per-gap budget exhausted")
            reply = backend.hammer(config.hammer_timeout_ms)
            if reply.status == "ok" and reply.reconstruction:
                closing = reply.reconstruction
    if closing is None:
        return Invalid("cascade exhausted without a proof")
    proof_text = formal_statement.rstrip() + "\n  " + closing + "\n"
    if not check_no_cheat(proof_text).clean:
        return Invalid("cheating keyword in assembled proof")
    return Valid(proof_text)
