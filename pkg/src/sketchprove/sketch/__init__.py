"""Declarative proof sketch grammar: parse, transform, serialize."""

from .cheat import CHEAT_KEYWORDS, CheatReport, check_no_cheat
from .nodes import (
    GAP_TOKEN,
    AssumeStep,
    Comment,
    Gap,
    GapSite,
    HaveStep,
    Justification,
    Nested,
    ObtainStep,
    ProofBlock,
    ProofNode,
    QedMarker,
    ShowStep,
    SketchAst,
    StepNode,
    Tactic,
    TheoremHeader,
    child_nodes,
    walk,
)
from .ops import (
    InvalidSite,
    count_comments,
    count_gaps,
    extract_gaps,
    fill_gap,
    strip_comments,
    unresolved_facts,
)
from .parser import ParseError, parse_sketch
from .render import serialize, serialize_statement

__all__ = [
    "GAP_TOKEN",
    "CHEAT_KEYWORDS",
    "AssumeStep",
    "CheatReport",
    "Comment",
    "Gap",
    "GapSite",
    "HaveStep",
    "InvalidSite",
    "Justification",
    "Nested",
    "ObtainStep",
    "ParseError",
    "ProofBlock",
    "ProofNode",
    "QedMarker",
    "ShowStep",
    "SketchAst",
    "StepNode",
    "Tactic",
    "TheoremHeader",
    "check_no_cheat",
    "child_nodes",
    "count_comments",
    "count_gaps",
    "extract_gaps",
    "fill_gap",
    "parse_sketch",
    "serialize",
    "serialize_statement",
    "strip_comments",
    "unresolved_facts",
    "walk",
]
