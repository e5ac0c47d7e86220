"""Canonical text rendering for sketch ASTs.

Reparsing the output yields a structurally equal AST. Gap justifications
render as the canonical gap token; figure-style markers never survive a
round trip.
"""

from __future__ import annotations

import re

from .parser import RESERVED
from .nodes import (
    GAP_TOKEN,
    AssumeStep,
    Comment,
    Gap,
    HaveStep,
    Justification,
    Nested,
    ObtainStep,
    ProofBlock,
    ProofNode,
    QedMarker,
    ShowStep,
    SketchAst,
    Tactic,
    TheoremHeader,
)

_INDENT = "  "


def _render_header(header: TheoremHeader, out: list[str]) -> None:
    title = "theorem"
    if header.name:
        title += f" {header.name}:"
    out.append(title)
    if header.fixes:
        groups: list[tuple[list[str], str]] = []
        for var, sort in header.fixes:
            if groups and groups[-1][1] == sort:
                groups[-1][0].append(var)
            else:
                groups.append(([var], sort))
        rendered = " and ".join(
            "%s :: %s" % (" ".join(vs), _quote_sort(sort)) for vs, sort in groups
        )
        out.append(f"{_INDENT}fixes {rendered}")
    for i, (label, prop) in enumerate(header.assumes):
        keyword = "assumes" if i == 0 else f"{_INDENT}and"
        prefix = f"{label}: " if label else ""
        out.append(f'{_INDENT}{keyword} {prefix}"{prop}"')
    out.append(f'{_INDENT}shows "{header.shows}"')


def _quote_sort(sort: str) -> str:
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_'.]*", sort) and sort not in RESERVED:
        return sort
    return f'"{sort}"'


def _render_justification(just: Justification) -> str:
    if isinstance(just, Gap):
        return GAP_TOKEN
    if isinstance(just, Tactic):
        return just.text
    raise TypeError(f"not an inline justification: {just!r}")


def _step_clauses(uses: tuple[str, ...], unfolds: tuple[str, ...]) -> str:
    text = ""
    if uses:
        text += " using " + " ".join(uses)
    if unfolds:
        text += " unfolding " + " ".join(unfolds)
    return text


def _render_node(node: ProofNode, level: int, out: list[str]) -> None:
    ind = _INDENT * level
    if isinstance(node, Comment):
        out.append(f"{ind}(* {node.text} *)")
        return
    if isinstance(node, QedMarker):
        out.append(f"{ind}qed")
        return
    if isinstance(node, ProofBlock):
        _render_block(node, level, out)
        return
    if isinstance(node, AssumeStep):
        if node.preceding_comment is not None:
            out.append(f"{ind}(* {node.preceding_comment} *)")
        prefix = f"{node.label}: " if node.label else ""
        out.append(f'{ind}assume {prefix}"{node.proposition}"')
        return

    if node.preceding_comment is not None:
        out.append(f"{ind}(* {node.preceding_comment} *)")
    head = f"{node.chain} " if node.chain else ""
    if isinstance(node, HaveStep):
        prefix = f"{node.label}: " if node.label else ""
        line = f'{head}have {prefix}"{node.proposition}"'
    elif isinstance(node, ShowStep):
        target = node.target if node.target.startswith("?") else f'"{node.target}"'
        line = f"{head}show {target}"
    elif isinstance(node, ObtainStep):
        prefix = f"{node.label}: " if node.label else ""
        line = f'{head}obtain {" ".join(node.bound_vars)} where {prefix}"{node.proposition}"'
    else:
        raise TypeError(f"unknown node: {node!r}")
    line += _step_clauses(node.uses, node.unfolds)

    if isinstance(node.justification, Nested):
        out.append(ind + line)
        _render_block(node.justification.block, level, out)
    else:
        out.append(ind + line + " " + _render_justification(node.justification))


def _render_block(block: ProofBlock, level: int, out: list[str]) -> None:
    ind = _INDENT * level
    out.append(f"{ind}proof {block.method}" if block.method else f"{ind}proof")
    for child in block.children:
        _render_node(child, level + 1, out)
    for i, (name, body) in enumerate(block.cases):
        if i > 0:
            out.append(f"{ind}next")
        out.append(f"{ind}case {name}")
        for child in body:
            _render_node(child, level + 1, out)
    out.append(f"{ind}qed")


def serialize(ast: SketchAst) -> str:
    """Render the AST to canonical sketch text ending with a newline."""
    out: list[str] = []
    _render_header(ast.header, out)
    for node in ast.body:
        _render_node(node, 0, out)
    if ast.root_justification is not None:
        out.append(_INDENT + _render_justification(ast.root_justification))
    return "\n".join(out) + "\n"


def serialize_statement(header: TheoremHeader) -> str:
    """Render just the theorem statement (no proof)."""
    out: list[str] = []
    _render_header(header, out)
    return "\n".join(out) + "\n"
