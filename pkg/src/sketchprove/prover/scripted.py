"""Rule-scripted mock prover for deterministic tests.

A script file decides, per goal, how the cascade plays out: which tactic
closes it, whether the hammer rescues it with a reconstruction step, or
whether everything fails or times out. First matching rule wins and a
default outcome is mandatory, so every goal has a scripted answer.

Script schema (JSON):

    {
      "schema": "prover-script/1",
      "rules": [
        {"match": {"kind": "substring", "pattern": "4 * x = 168"},
         "outcome": {"kind": "tactic", "index": 0}},
        {"match": {"kind": "exact", "pattern": "?thesis"},
         "outcome": {"kind": "hammer", "step": "by (metis assms)"}},
        {"match": {"kind": "glob", "pattern": "*mod 9*"},
         "outcome": {"kind": "timeout", "ms": 50}}
      ],
      "default": {"kind": "fail"},
      "verify": {"default": "accept", "reject_substrings": []},
      "latency": {"step_ms": 0, "hammer_ms": 0, "real_sleep": false}
    }

Outcome kinds: tactic (the index-th cascade attempt succeeds), hammer (all
tactics fail, the hammer returns `step`), fail, timeout (steps time out,
optionally after `ms`).
"""

from __future__ import annotations

import json
import re
import time
import uuid
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from pathlib import Path

from .config import BackendReply, ScriptError

SCRIPT_SCHEMA = "prover-script/1"

_MATCH_KINDS = ("exact", "substring", "glob")
_OUTCOME_KINDS = ("tactic", "hammer", "fail", "timeout")


@dataclass(frozen=True)
class Outcome:
    kind: str
    index: int | None = None
    step: str | None = None
    ms: int | None = None


@dataclass(frozen=True)
class Rule:
    kind: str
    pattern: str
    outcome: Outcome

    def matches(self, goal: str) -> bool:
        if self.kind == "exact":
            return goal == self.pattern
        if self.kind == "substring":
            return self.pattern in goal
        return fnmatchcase(goal, self.pattern)


@dataclass(frozen=True)
class Latency:
    step_ms: int = 0
    hammer_ms: int = 0
    real_sleep: bool = False


@dataclass(frozen=True)
class ProverScript:
    rules: tuple[Rule, ...]
    default: Outcome
    verify_default_accept: bool = True
    verify_reject_substrings: tuple[str, ...] = ()
    latency: Latency = Latency()

    def outcome_for(self, goal: str) -> Outcome:
        for rule in self.rules:
            if rule.matches(goal):
                return rule.outcome
        return self.default

    def verify_accepts(self, proof_text: str) -> str | None:
        """Returns a rejection reason, or None when the proof is accepted."""
        for marker in self.verify_reject_substrings:
            if marker in proof_text:
                return f"rejected: contains {marker!r}"
        return None if self.verify_default_accept else "rejected by default"


def _parse_outcome(raw: object, path: str, where: str) -> Outcome:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ScriptError(path, f"{where}: outcome must be an object with a 'kind'")
    kind = raw["kind"]
    if kind not in _OUTCOME_KINDS:
        raise ScriptError(path, f"{where}: unknown outcome kind {kind!r}")
    if kind == "tactic":
        index = raw.get("index")
        if not isinstance(index, int) or index < 0:
            raise ScriptError(path, f"{where}: tactic outcome needs index >= 0")
        return Outcome("tactic", index=index)
    if kind == "hammer":
        step = raw.get("step")
        if not isinstance(step, str) or not step.strip():
            raise ScriptError(path, f"{where}: hammer outcome needs a step text")
        return Outcome("hammer", step=step)
    if kind == "timeout":
        ms = raw.get("ms")
        if ms is not None and (not isinstance(ms, int) or ms < 0):
            raise ScriptError(path, f"{where}: timeout ms must be >= 0")
        return Outcome("timeout", ms=ms)
    return Outcome("fail")


def load_script(path: str | Path) -> ProverScript:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScriptError(str(path), f"cannot read: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScriptError(str(path), f"invalid JSON: {exc}") from None
    if raw.get("schema") != SCRIPT_SCHEMA:
        raise ScriptError(str(path), f"schema must be {SCRIPT_SCHEMA!r}")
    if "default" not in raw:
        raise ScriptError(str(path), "a default outcome is required")
    rules = []
    for i, entry in enumerate(raw.get("rules", [])):
        match = entry.get("match")
        if not isinstance(match, dict) or match.get("kind") not in _MATCH_KINDS:
            raise ScriptError(
                str(path), f"rule {i}: match kind must be one of {_MATCH_KINDS}"
            )
        pattern = match.get("pattern")
        if not isinstance(pattern, str):
            raise ScriptError(str(path), f"rule {i}: match pattern must be a string")
        rules.append(
            Rule(match["kind"], pattern, _parse_outcome(entry.get("outcome"), str(path), f"rule {i}"))
        )
    verify = raw.get("verify", {})
    latency = raw.get("latency", {})
    return ProverScript(
        rules=tuple(rules),
        default=_parse_outcome(raw["default"], str(path), "default"),
        verify_default_accept=verify.get("default", "accept") == "accept",
        verify_reject_substrings=tuple(verify.get("reject_substrings", ())),
        latency=Latency(
            step_ms=int(latency.get("step_ms", 0)),
            hammer_ms=int(latency.get("hammer_ms", 0)),
            real_sleep=bool(latency.get("real_sleep", False)),
        ),
    )


def extract_goal(statement: str) -> str:
    """Matcher input for a proof context: the quoted proposition on the last
    nonblank line, a ?thesis/?case target, or the raw line itself."""
    lines = [line for line in statement.strip().splitlines() if line.strip()]
    if not lines:
        return ""
    last = lines[-1].strip()
    quoted = re.findall(r'"([^"]*)"', last)
    if quoted:
        return quoted[-1]
    target = re.search(r"\?[A-Za-z_][A-Za-z0-9_']*", last)
    if target:
        return target.group(0)
    return last


@dataclass
class ScriptedBackend:
    """In-process Backend that answers from a ProverScript. Elapsed times
    are logical (derived from the script), so replayed runs agree; with
    real_sleep the backend also sleeps them away for wall-clock tests."""

    script: ProverScript
    calls: list[tuple[str, str]] = field(default_factory=list)
    _goal: str = ""
    _ordinal: int = 0
    _states: int = 0

    def _reply(self, status: str, elapsed_ms: int, **extra) -> BackendReply:
        if self.script.latency.real_sleep and elapsed_ms > 0:
            time.sleep(elapsed_ms / 1000.0)
        return BackendReply(status=status, elapsed_ms=elapsed_ms, **extra)

    def _next_state(self) -> str:
        self._states += 1
        return f"s{self._states}"

    def init(self, theory: str, statement: str) -> BackendReply:
        self.calls.append(("init", statement))
        self._goal = extract_goal(statement)
        self._ordinal = 0
        return BackendReply("ok", 0, state_id=self._next_state())

    def step(self, text: str, timeout_ms: int) -> BackendReply:
        self.calls.append(("step", text))
        outcome = self.script.outcome_for(self._goal)
        ordinal = self._ordinal
        self._ordinal += 1
        cost = min(self.script.latency.step_ms, timeout_ms)
        if outcome.kind == "timeout":
            burn = timeout_ms if outcome.ms is None else min(outcome.ms, timeout_ms)
            return self._reply("timeout", burn)
        if outcome.kind == "tactic" and ordinal == outcome.index:
            return self._reply("ok", cost, state_id=self._next_state())
        return self._reply("fail", cost, reason="step does not close the goal")

    def hammer(self, timeout_ms: int) -> BackendReply:
        self.calls.append(("hammer", self._goal))
        outcome = self.script.outcome_for(self._goal)
        cost = min(self.script.latency.hammer_ms, timeout_ms)
        if outcome.kind == "hammer":
            return self._reply(
                "ok", cost, state_id=self._next_state(), reconstruction=outcome.step
            )
        if outcome.kind == "timeout":
            burn = timeout_ms if outcome.ms is None else min(outcome.ms, timeout_ms)
            return self._reply("timeout", burn)
        return self._reply("fail", cost, reason="no prover found a proof")

    def check_full(self, proof_text: str, timeout_ms: int) -> BackendReply:
        self.calls.append(("check_full", proof_text))
        reason = self.script.verify_accepts(proof_text)
        cost = min(self.script.latency.step_ms, timeout_ms)
        if reason is None:
            return self._reply("ok", cost, state_id=self._next_state())
        return self._reply("fail", cost, reason=reason)

    def reset(self) -> BackendReply:
        self.calls.append(("reset", ""))
        self._goal = ""
        self._ordinal = 0
        return BackendReply("ok", 0, state_id=self._next_state())

    def quit(self) -> None:
        self.calls.append(("quit", ""))


def new_session_id() -> str:
    return uuid.uuid4().hex[:12]
