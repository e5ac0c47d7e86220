"""Prompt construction for the drafting and sketching stages.

Builds few-shot prompts from a pool of worked examples, with category
filtering by problem name, uniform example selection, and the ablation
modes that strip comments, informal proofs, or open gaps from the shown
examples.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

from .sketch import count_comments, count_gaps, parse_sketch, serialize, strip_comments
from .sketch.parser import ParseError


class Category(str, Enum):
    ALGEBRA = "algebra"
    NUMBER_THEORY = "numbertheory"
    UNKNOWN = "unknown"


class PromptMode(str, Enum):
    FULL = "full"
    NO_COMMENTS = "no-comments"
    NO_INFORMAL_PROOF = "no-informal"
    FULL_PROOF = "full-proof"


@dataclass
class PoolTooSmall(Exception):
    needed: int
    available: int

    def __str__(self) -> str:
        return f"need {self.needed} examples, only {self.available} eligible"


@dataclass
class MissingFullProof(Exception):
    quad_id: str

    def __str__(self) -> str:
        return f"example {self.quad_id!r} has no gap-free full proof"


@dataclass
class PoolFormatError(Exception):
    message: str

    def __str__(self) -> str:
        return self.message


@dataclass(frozen=True)
class ExampleQuad:
    id: str
    category: Category
    informal_statement: str
    informal_proof: str
    formal_statement: str
    formal_sketch: str
    full_proof: str | None = None


@dataclass(frozen=True)
class ExamplePool:
    quads: tuple[ExampleQuad, ...]

    def __post_init__(self) -> None:
        ids = [q.id for q in self.quads]
        if len(ids) != len(set(ids)):
            raise PoolFormatError("duplicate example ids in pool")

    def of_category(self, category: Category) -> tuple[ExampleQuad, ...]:
        if category is Category.UNKNOWN:
            return self.quads
        return tuple(q for q in self.quads if q.category is category)


@dataclass(frozen=True)
class PromptConfig:
    k_examples: int = 3
    mode: PromptMode = PromptMode.FULL
    rng_seed: int = 0
    max_prompt_chars: int | None = None

    def __post_init__(self) -> None:
        if self.k_examples < 1:
            raise ValueError("k_examples must be >= 1")


POOL_FIELDS = (
    "id",
    "category",
    "informal_statement",
    "informal_proof",
    "formal_statement",
    "formal_sketch",
)


def load_pool(path: str | Path, validate: bool = True) -> ExamplePool:
    """Load the example pool from its JSON document and check the quad
    invariants (sketch parses, has gaps and in-line comments; any full
    proof parses gap-free)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PoolFormatError(f"pool file is not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise PoolFormatError("pool document must be a list of examples")
    quads = []
    for i, entry in enumerate(raw):
        missing = [f for f in POOL_FIELDS if f not in entry]
        if missing:
            raise PoolFormatError(f"pool entry {i} missing fields: {missing}")
        try:
            category = Category(entry["category"])
        except ValueError:
            raise PoolFormatError(
                f"pool entry {i} has unknown category {entry['category']!r}"
            ) from None
        quad = ExampleQuad(
            id=entry["id"],
            category=category,
            informal_statement=entry["informal_statement"],
            informal_proof=entry["informal_proof"],
            formal_statement=entry["formal_statement"],
            formal_sketch=entry["formal_sketch"],
            full_proof=entry.get("full_proof"),
        )
        if validate:
            _validate_quad(quad)
        quads.append(quad)
    return ExamplePool(tuple(quads))


def _validate_quad(quad: ExampleQuad) -> None:
    try:
        ast = parse_sketch(quad.formal_sketch)
    except ParseError as exc:
        raise PoolFormatError(f"example {quad.id!r}: sketch does not parse: {exc}")
    if count_gaps(ast) < 1:
        raise PoolFormatError(f"example {quad.id!r}: sketch has no open gap")
    if count_comments(ast) < 1:
        raise PoolFormatError(f"example {quad.id!r}: sketch has no in-line comment")
    if quad.full_proof is not None:
        try:
            full = parse_sketch(quad.full_proof)
        except ParseError as exc:
            raise PoolFormatError(
                f"example {quad.id!r}: full proof does not parse: {exc}"
            )
        if count_gaps(full) != 0:
            raise PoolFormatError(f"example {quad.id!r}: full proof still has gaps")


def infer_category(problem_name: str) -> Category:
    """Categorize by name substring; ambiguous or uninformative names give
    UNKNOWN."""
    has_algebra = "algebra" in problem_name
    has_numtheory = "numbertheory" in problem_name
    if has_algebra and not has_numtheory:
        return Category.ALGEBRA
    if has_numtheory and not has_algebra:
        return Category.NUMBER_THEORY
    return Category.UNKNOWN


def select_examples(
    pool: ExamplePool,
    problem_id: str,
    category: Category,
    config: PromptConfig,
    rng: random.Random,
) -> list[ExampleQuad]:
    """Sample k distinct examples uniformly without replacement from the
    category-restricted pool, never including the problem being solved."""
    eligible = [q for q in pool.of_category(category) if q.id != problem_id]
    if len(eligible) < config.k_examples:
        raise PoolTooSmall(config.k_examples, len(eligible))
    return rng.sample(eligible, config.k_examples)


def apply_mode(quad: ExampleQuad, mode: PromptMode) -> ExampleQuad:
    """Rewrite one example for an ablation mode."""
    if mode is PromptMode.FULL:
        return quad
    if mode is PromptMode.FULL_PROOF:
        if quad.full_proof is None:
            raise MissingFullProof(quad.id)
        return replace(quad, formal_sketch=quad.full_proof)
    stripped = serialize(strip_comments(parse_sketch(quad.formal_sketch)))
    if mode is PromptMode.NO_COMMENTS:
        return replace(quad, formal_sketch=stripped)
    assert mode is PromptMode.NO_INFORMAL_PROOF
    return replace(quad, informal_proof="", formal_sketch=stripped)


class HasProblemFields(Protocol):
    informal_statement: str
    formal_statement: str


_STATEMENT = "Informal Statement:"
_PROOF = "Informal Proof:"
_FORMAL = "Formal Statement:"
_SKETCH = "Formal Proof Sketch:"
_FULL = "Formal Proof:"


def _sketch_section(mode: PromptMode) -> str:
    return _FULL if mode is PromptMode.FULL_PROOF else _SKETCH


def _example_block(quad: ExampleQuad, mode: PromptMode) -> str:
    parts = [f"{_STATEMENT}\n{quad.informal_statement.rstrip()}"]
    if mode is not PromptMode.NO_INFORMAL_PROOF:
        parts.append(f"{_PROOF}\n{quad.informal_proof.rstrip()}")
    parts.append(f"{_FORMAL}\n{quad.formal_statement.rstrip()}")
    parts.append(f"{_sketch_section(mode)}\n{quad.formal_sketch.rstrip()}")
    return "\n\n".join(parts)


def build_sketch_prompt(
    examples: Sequence[ExampleQuad],
    problem: HasProblemFields,
    draft: str,
    config: PromptConfig,
) -> str:
    """Assemble the sketching prompt: example blocks, then the target
    problem up to the point where the model must continue with the sketch.
    Whole examples are dropped from the front if a character budget is set
    and exceeded."""
    if not examples:
        raise ValueError("at least one example is required")
    mode = config.mode

    target_parts = [f"{_STATEMENT}\n{problem.informal_statement.rstrip()}"]
    if mode is not PromptMode.NO_INFORMAL_PROOF:
        target_parts.append(f"{_PROOF}\n{draft.rstrip()}")
    target_parts.append(f"{_FORMAL}\n{problem.formal_statement.rstrip()}")
    target_parts.append(_sketch_section(mode))
    target = "\n\n".join(target_parts)

    blocks = [_example_block(q, mode) for q in examples]
    while True:
        prompt = "\n\n".join(blocks + [target]) + "\n"
        if config.max_prompt_chars is None or len(prompt) <= config.max_prompt_chars:
            return prompt
        if not blocks:
            return prompt
        blocks.pop(0)


DRAFT_CUE = "Proof:"


def build_draft_prompt(
    problem: HasProblemFields,
    draft_examples: Sequence[tuple[str, str]] = (),
) -> str:
    """Prompt for sampling informal proof drafts: optional few-shot
    (statement, proof) pairs, then the target statement and the cue."""
    blocks = [
        f"{statement.rstrip()}\n\n{DRAFT_CUE}\n{proof.rstrip()}"
        for statement, proof in draft_examples
    ]
    blocks.append(f"{problem.informal_statement.rstrip()}\n\n{DRAFT_CUE}")
    return "\n\n".join(blocks)
