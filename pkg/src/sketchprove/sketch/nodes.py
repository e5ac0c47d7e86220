"""AST for declarative proof sketches.

Nodes are immutable; structural equality ignores source spans. A sketch is a
theorem header plus a proof body, where any step's justification may be an
open gap, a concrete closing tactic, or a nested proof block.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Union

# Rendered for every Gap justification; parse_sketch also accepts the
# figure-style markers "<...>", "ATP" and "<ATP> ... </ATP>".
GAP_TOKEN = "sledgehammer"


@dataclass(frozen=True)
class Gap:
    """Open conjecture: justification left for an automated prover."""


@dataclass(frozen=True)
class Tactic:
    """Concrete closing step, e.g. 'by auto' or 'by (smt (z3) foo bar)'."""

    text: str


@dataclass(frozen=True)
class Nested:
    """Justification by a nested proof ... qed block."""

    block: "ProofBlock"


Justification = Union[Gap, Tactic, Nested]


@dataclass(frozen=True)
class TheoremHeader:
    name: str | None
    fixes: tuple[tuple[str, str], ...]
    assumes: tuple[tuple[str | None, str], ...]
    shows: str

    def __post_init__(self) -> None:
        if not self.shows:
            raise ValueError("theorem header must state a goal")
        names = [v for v, _ in self.fixes]
        if len(names) != len(set(names)):
            raise ValueError("duplicate fixed variable names: %r" % (names,))


@dataclass(frozen=True)
class HaveStep:
    label: str | None
    proposition: str
    uses: tuple[str, ...]
    unfolds: tuple[str, ...]
    justification: Justification
    chain: str | None = None
    preceding_comment: str | None = None

    @property
    def facts_used(self) -> tuple[str, ...]:
        return self.uses + self.unfolds


@dataclass(frozen=True)
class ShowStep:
    target: str
    uses: tuple[str, ...]
    unfolds: tuple[str, ...]
    justification: Justification
    chain: str | None = None
    preceding_comment: str | None = None

    @property
    def facts_used(self) -> tuple[str, ...]:
        return self.uses + self.unfolds


@dataclass(frozen=True)
class ObtainStep:
    bound_vars: tuple[str, ...]
    label: str | None
    proposition: str
    uses: tuple[str, ...]
    unfolds: tuple[str, ...]
    justification: Justification
    chain: str | None = None
    preceding_comment: str | None = None

    @property
    def facts_used(self) -> tuple[str, ...]:
        return self.uses + self.unfolds


@dataclass(frozen=True)
class AssumeStep:
    """Local assumption inside a block; carries no justification."""

    label: str | None
    proposition: str
    preceding_comment: str | None = None


@dataclass(frozen=True)
class Comment:
    text: str


@dataclass(frozen=True)
class QedMarker:
    """Explicit block terminator; kept for completeness, blocks normally
    close implicitly when their ProofBlock node ends."""


@dataclass(frozen=True)
class ProofBlock:
    method: str | None
    children: tuple["ProofNode", ...]
    cases: tuple[tuple[str, tuple["ProofNode", ...]], ...] = ()

    def __post_init__(self) -> None:
        if self.cases and self.children and not _only_comments(self.children):
            raise ValueError("a block with cases may only hold leading comments")

    def indexed_children(self) -> tuple["ProofNode", ...]:
        """Children in document order, case bodies flattened after any
        leading comments. GapSite paths index into this sequence."""
        flat = list(self.children)
        for _, body in self.cases:
            flat.extend(body)
        return tuple(flat)


ProofNode = Union[
    HaveStep, ShowStep, ObtainStep, AssumeStep, Comment, ProofBlock, QedMarker
]
StepNode = (HaveStep, ShowStep, ObtainStep)


def _only_comments(nodes: tuple[ProofNode, ...]) -> bool:
    return all(isinstance(n, Comment) for n in nodes)


@dataclass(frozen=True)
class SketchAst:
    """Parsed sketch. `root_justification` holds the whole-theorem closing
    step when the proof is a bare justification instead of a block (or None
    for a statement-only sketch)."""

    header: TheoremHeader
    body: tuple[ProofNode, ...] = ()
    root_justification: Justification | None = None
    spans: dict[tuple[int, ...], tuple[int, int]] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        if self.root_justification is not None and any(
            not isinstance(n, Comment) for n in self.body
        ):
            raise ValueError("proof body and direct closing step are exclusive")

    def child_at(self, path: tuple[int, ...]) -> ProofNode:
        node: ProofNode | None = None
        children = self.body
        for index in path:
            try:
                node = children[index]
            except IndexError:
                raise KeyError(path) from None
            children = child_nodes(node)
        if node is None:
            raise KeyError(path)
        return node


@dataclass(frozen=True)
class GapSite:
    """One open conjecture: where it sits, what it claims, and which labels
    are visible to a prover working on it."""

    path: tuple[int, ...]
    label: str | None
    proposition: str
    facts_in_scope: tuple[str, ...]
    preceding_comment: str | None = None


def child_nodes(node: ProofNode) -> tuple[ProofNode, ...]:
    """Addressable children of a node (nested justification blocks count as
    a single child)."""
    if isinstance(node, ProofBlock):
        return node.indexed_children()
    if isinstance(node, StepNode) and isinstance(node.justification, Nested):
        return (node.justification.block,)
    return ()


def walk(ast: SketchAst) -> Iterator[tuple[tuple[int, ...], ProofNode]]:
    """Document-order traversal yielding (path, node) pairs."""

    def visit(nodes: tuple[ProofNode, ...], prefix: tuple[int, ...]):
        for i, node in enumerate(nodes):
            path = prefix + (i,)
            yield path, node
            yield from visit(child_nodes(node), path)

    yield from visit(ast.body, ())


def replace_at(ast: SketchAst, path: tuple[int, ...], new_node: ProofNode) -> SketchAst:
    """Return a copy of `ast` with the node at `path` swapped out."""
    if not path:
        raise KeyError(path)

    def rebuild(nodes: tuple[ProofNode, ...], rest: tuple[int, ...]) -> tuple[ProofNode, ...]:
        index = rest[0]
        if index >= len(nodes):
            raise KeyError(path)
        out = list(nodes)
        if len(rest) == 1:
            out[index] = new_node
        else:
            out[index] = _rebuild_node(nodes[index], rest[1:])
        return tuple(out)

    def _rebuild_node(node: ProofNode, rest: tuple[int, ...]) -> ProofNode:
        if isinstance(node, ProofBlock):
            index = rest[0]
            n_plain = len(node.children)
            if index < n_plain:
                return replace(node, children=rebuild(node.children, rest))
            offset = n_plain
            for case_pos, (name, body) in enumerate(node.cases):
                if index < offset + len(body):
                    new_body = rebuild(body, (index - offset,) + rest[1:])
                    new_cases = list(node.cases)
                    new_cases[case_pos] = (name, new_body)
                    return replace(node, cases=tuple(new_cases))
                offset += len(body)
            raise KeyError(path)
        if isinstance(node, StepNode) and isinstance(node.justification, Nested):
            if rest[0] != 0:
                raise KeyError(path)
            if len(rest) == 1:
                if not isinstance(new_node, ProofBlock):
                    raise KeyError(path)
                return replace(node, justification=Nested(new_node))
            inner = _rebuild_node(node.justification.block, rest[1:])
            assert isinstance(inner, ProofBlock)
            return replace(node, justification=Nested(inner))
        raise KeyError(path)

    return replace(ast, body=rebuild(ast.body, path), spans={})
