"""Recursive-descent parser for declarative proof sketches.

The grammar covers the constructs the pipeline actually emits and consumes:
theorem headers (fixes/assumes/shows), proof/qed blocks with optional method
and case lists, have/show/obtain/assume steps with then/also/finally chain
prefixes, using/unfolding clauses, comments, and open-gap markers. Anything
else is a ParseError with a byte offset and the expected-token set; the
parser never raises anything else, no matter the input bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

from .nodes import (
    AssumeStep,
    Comment,
    Gap,
    HaveStep,
    Justification,
    Nested,
    ObtainStep,
    ProofBlock,
    ProofNode,
    ShowStep,
    SketchAst,
    Tactic,
    TheoremHeader,
    walk,
)

MAX_BLOCK_DEPTH = 200

RESERVED = frozenset(
    """theorem fixes assumes shows and proof qed have show obtain assume
    where using unfolding by then also finally case next sledgehammer
    sorry oops""".split()
)
CHAIN_WORDS = ("then", "also", "finally")
GAP_WORDS = frozenset({"sledgehammer", "ATP"})


@dataclass
class ParseError(Exception):
    offset: int
    message: str
    expected: frozenset[str] = frozenset()

    def __str__(self) -> str:
        text = f"{self.message} at byte {self.offset}"
        if self.expected:
            text += " (expected: %s)" % ", ".join(sorted(self.expected))
        return text


class _Token(NamedTuple):
    kind: str  # ident | number | string | qident | symbol | comment | other | eof
    text: str
    start: int  # character offsets into the source
    end: int


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment_open>\(\*)
      | (?P<string>"[^"]*")
      | (?P<atp_open><ATP>)
      | (?P<atp_close></ATP>)
      | (?P<gapmark><\.\.\.>)
      | (?P<coloncolon>::)
      | (?P<colon>:)
      | (?P<lparen>\()
      | (?P<rparen>\))
      | (?P<qident>\?[A-Za-z_][A-Za-z0-9_']*)
      | (?P<number>[0-9]+)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_'.]*)
      | (?P<dash>-)
    """,
    re.VERBOSE,
)

_SYMBOL_GROUPS = {
    "atp_open": "<ATP>",
    "atp_close": "</ATP>",
    "gapmark": "<...>",
    "coloncolon": "::",
    "colon": ":",
    "lparen": "(",
    "rparen": ")",
    "dash": "-",
}


def _scan_comment(source: str, open_pos: int) -> tuple[str, int]:
    """Scan a possibly nested (* ... *) comment starting at `open_pos`.
    Returns (inner text, end position past the closing marker)."""
    depth = 1
    pos = open_pos + 2
    while depth:
        next_open = source.find("(*", pos)
        next_close = source.find("*)", pos)
        if next_close == -1:
            raise _RawParseError(open_pos, "unterminated comment")
        if next_open != -1 and next_open < next_close:
            depth += 1
            pos = next_open + 2
        else:
            depth -= 1
            pos = next_close + 2
    return source[open_pos + 2 : pos - 2], pos


class _RawParseError(Exception):
    """Internal: carries character offsets; converted to byte offsets at the
    parse_sketch boundary."""

    def __init__(self, pos: int, message: str, expected: frozenset[str] = frozenset()):
        self.pos = pos
        self.message = message
        self.expected = expected


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    n = len(source)
    while pos < n:
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            # Unknown characters only survive inside opaque regions (method
            # parentheses, <ATP> spans); the parser rejects strays.
            if source[pos] == '"':
                raise _RawParseError(pos, "unterminated string literal")
            tokens.append(_Token("other", source[pos], pos, pos + 1))
            pos += 1
            continue
        kind = match.lastgroup
        if kind == "ws":
            pos = match.end()
            continue
        if kind == "comment_open":
            text, end = _scan_comment(source, pos)
            tokens.append(_Token("comment", text.strip(), pos, end))
            pos = end
            continue
        if kind == "string":
            tokens.append(_Token("string", match.group()[1:-1], pos, match.end()))
        elif kind in ("ident", "number", "qident"):
            tokens.append(_Token(kind, match.group(), pos, match.end()))
        else:
            tokens.append(_Token("symbol", _SYMBOL_GROUPS[kind], pos, match.end()))
        pos = match.end()
    tokens.append(_Token("eof", "", n, n))
    return tokens


def _squash(text: str) -> str:
    return " ".join(text.split())


def _is_closing_step(text: str) -> bool:
    """True when `text` stands alone as a concrete justification (serialized
    ATP span contents must reparse)."""
    try:
        probe = _Parser(f'theorem t: shows "True"\n  {text}\n').parse()
    except _RawParseError:
        return False
    return isinstance(probe.root_justification, Tactic)


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        # (node, start, end) in creation order; resolved to path-keyed spans
        # once the tree is assembled.
        self.span_records: list[tuple[ProofNode, int, int]] = []

    # -- token plumbing ----------------------------------------------------
    # advance() never moves past the eof sentinel, so self.i always indexes
    # a valid token.

    def peek(self, ahead: int = 0) -> _Token:
        if ahead:
            return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at_ident(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.text in words

    def at_symbol(self, sym: str) -> bool:
        tok = self.peek()
        return tok.kind == "symbol" and tok.text == sym

    def fail(self, message: str, expected: tuple[str, ...] = ()) -> _RawParseError:
        return _RawParseError(self.peek().start, message, frozenset(expected))

    def expect_ident(self, word: str) -> _Token:
        if not self.at_ident(word):
            raise self.fail(f"expected keyword '{word}'", (word,))
        return self.advance()

    def expect_string(self, what: str) -> _Token:
        if self.peek().kind != "string":
            raise self.fail(f"expected quoted {what}", ('"..."',))
        return self.advance()

    def record_span(self, node: ProofNode, start: int, end: int) -> None:
        self.span_records.append((node, start, end))

    # -- header ------------------------------------------------------------

    def parse_header(self) -> TheoremHeader:
        self.expect_ident("theorem")
        name = None
        if self.peek().kind == "ident" and self.peek().text not in RESERVED:
            name = self.advance().text
            if self.at_symbol(":"):
                self.advance()
        fixes: list[tuple[str, str]] = []
        assumes: list[tuple[str | None, str]] = []
        shows: str | None = None

        if self.peek().kind == "string":
            shows = self.advance().text
        else:
            while True:
                if self.at_ident("fixes"):
                    self.advance()
                    self.parse_fixes_groups(fixes)
                elif self.at_ident("assumes"):
                    self.advance()
                    self.parse_assumes_items(assumes)
                elif self.at_ident("shows"):
                    self.advance()
                    shows = self.expect_string("goal proposition").text
                    break
                else:
                    raise self.fail(
                        "expected header clause", ("fixes", "assumes", "shows")
                    )
        if shows is None:
            raise self.fail("theorem header lacks a goal", ("shows",))
        try:
            return TheoremHeader(name, tuple(fixes), tuple(assumes), shows)
        except ValueError as exc:
            raise _RawParseError(self.peek().start, str(exc))

    def parse_fixes_groups(self, out: list[tuple[str, str]]) -> None:
        while True:
            variables = []
            while self.peek().kind == "ident" and self.peek().text not in RESERVED:
                variables.append(self.advance().text)
            if not variables:
                raise self.fail("expected fixed variable name", ("identifier",))
            if not self.at_symbol("::"):
                raise self.fail("expected sort annotation", ("::",))
            self.advance()
            tok = self.peek()
            if tok.kind == "string":
                sort = self.advance().text
            elif tok.kind == "ident" and tok.text not in RESERVED:
                sort = self.advance().text
            else:
                raise self.fail("expected sort", ("identifier", '"..."'))
            out.extend((v, sort) for v in variables)
            if self.at_ident("and"):
                self.advance()
                continue
            return

    def parse_assumes_items(self, out: list[tuple[str | None, str]]) -> None:
        while True:
            label = None
            if (
                self.peek().kind == "ident"
                and self.peek().text not in RESERVED
                and self.peek(1).kind == "symbol"
                and self.peek(1).text == ":"
            ):
                label = self.advance().text
                self.advance()
            out.append((label, self.expect_string("assumption").text))
            if self.at_ident("and"):
                self.advance()
                continue
            return

    # -- proof body --------------------------------------------------------

    def parse_paren_group(self) -> str:
        """Consume a balanced ( ... ) token run; returns the raw text with
        whitespace runs collapsed."""
        if not self.at_symbol("("):
            raise self.fail("expected parenthesized text", ("(",))
        start = self.peek().start
        depth = 0
        while True:
            tok = self.advance()
            if tok.kind == "eof":
                raise _RawParseError(start, "unbalanced parenthesis")
            if tok.kind == "symbol" and tok.text == "(":
                depth += 1
            elif tok.kind == "symbol" and tok.text == ")":
                depth -= 1
                if depth == 0:
                    return _squash(self.source[start : tok.end])

    def parse_fact_names(self) -> tuple[str, ...]:
        facts = []
        while self.peek().kind == "ident" and self.peek().text not in RESERVED:
            facts.append(self.advance().text)
        if not facts:
            raise self.fail("expected fact name", ("identifier",))
        return tuple(facts)

    def at_justification(self) -> bool:
        return (
            self.at_symbol("<...>")
            or self.at_symbol("<ATP>")
            or self.at_ident("by", "proof", "sorry", "oops")
            or self.at_ident(*GAP_WORDS)
        )

    def parse_justification(self, depth: int) -> Justification:
        if self.at_symbol("<...>"):
            self.advance()
            return Gap()
        if self.at_ident(*GAP_WORDS):
            self.advance()
            return Gap()
        if self.at_symbol("<ATP>"):
            open_tok = self.advance()
            inner_start = self.peek().start
            inner_end = inner_start
            while not self.at_symbol("</ATP>"):
                if self.peek().kind == "eof":
                    raise _RawParseError(open_tok.start, "unterminated <ATP> span")
                inner_end = self.advance().end
            self.advance()
            inner = _squash(self.source[inner_start:inner_end])
            if not inner:
                return Gap()
            if not _is_closing_step(inner):
                raise _RawParseError(
                    open_tok.start, "<ATP> span does not hold a closing step"
                )
            return Tactic(inner)
        if self.at_ident("sorry", "oops"):
            return Tactic(self.advance().text)
        if self.at_ident("by"):
            start = self.advance().start
            if self.at_symbol("("):
                method = self.parse_paren_group()
            elif self.peek().kind == "ident" and self.peek().text not in RESERVED:
                method = self.advance().text
            else:
                raise self.fail("expected proof method", ("identifier", "("))
            return Tactic(_squash(self.source[start : start + 2]) + " " + method)
        if self.at_ident("proof"):
            return Nested(self.parse_block(depth))
        raise self.fail(
            "expected justification",
            ("by", "proof", "sledgehammer", "<...>", "<ATP>"),
        )

    def parse_using_clauses(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        uses: list[str] = []
        unfolds: list[str] = []
        while self.at_ident("using", "unfolding"):
            keyword = self.advance().text
            names = self.parse_fact_names()
            (uses if keyword == "using" else unfolds).extend(names)
        return tuple(uses), tuple(unfolds)

    def parse_optional_label(self) -> str | None:
        if (
            self.peek().kind == "ident"
            and self.peek().text not in RESERVED
            and self.peek(1).kind == "symbol"
            and self.peek(1).text == ":"
        ):
            label = self.advance().text
            self.advance()
            return label
        return None

    def parse_step(self, depth: int, comment: str | None, start: int) -> ProofNode:
        chain = None
        if self.at_ident(*CHAIN_WORDS):
            chain = self.advance().text
        keyword_tok = self.peek()
        if self.at_ident("have"):
            self.advance()
            label = self.parse_optional_label()
            prop = self.expect_string("proposition").text
            uses, unfolds = self.parse_using_clauses()
            just = self.parse_justification(depth)
            node: ProofNode = HaveStep(label, prop, uses, unfolds, just, chain, comment)
        elif self.at_ident("show"):
            self.advance()
            tok = self.peek()
            if tok.kind == "qident":
                target = self.advance().text
            elif tok.kind == "string":
                target = self.advance().text
            else:
                raise self.fail("expected show target", ("?thesis", "?case", '"..."'))
            uses, unfolds = self.parse_using_clauses()
            just = self.parse_justification(depth)
            node = ShowStep(target, uses, unfolds, just, chain, comment)
        elif self.at_ident("obtain"):
            self.advance()
            bound = []
            while self.peek().kind == "ident" and self.peek().text not in RESERVED:
                bound.append(self.advance().text)
            if not bound:
                raise self.fail("expected bound variable", ("identifier",))
            self.expect_ident("where")
            label = self.parse_optional_label()
            prop = self.expect_string("proposition").text
            uses, unfolds = self.parse_using_clauses()
            just = self.parse_justification(depth)
            node = ObtainStep(tuple(bound), label, prop, uses, unfolds, just, chain, comment)
        elif self.at_ident("assume"):
            if chain is not None:
                raise _RawParseError(
                    keyword_tok.start, "assume does not take a chain prefix"
                )
            self.advance()
            label = self.parse_optional_label()
            prop = self.expect_string("assumption").text
            node = AssumeStep(label, prop, comment)
        else:
            raise self.fail(
                "expected proof step", ("have", "show", "obtain", "assume")
            )
        self.record_span(node, start, self.tokens[self.i - 1].end)
        return node

    def parse_statements(self, depth: int, stop_words: tuple[str, ...]) -> list[ProofNode]:
        """Parse a statement run until one of `stop_words`; attaches a comment
        to the step right after it, otherwise keeps it standalone."""
        nodes: list[ProofNode] = []
        pending: _Token | None = None

        def flush_pending() -> None:
            nonlocal pending
            if pending is not None:
                node = Comment(pending.text)
                self.record_span(node, pending.start, pending.end)
                nodes.append(node)
                pending = None

        while True:
            tok = self.peek()
            if tok.kind == "eof" or (tok.kind == "ident" and tok.text in stop_words):
                flush_pending()
                return nodes
            if tok.kind == "comment":
                flush_pending()
                pending = self.advance()
                continue
            comment_text = pending.text if pending is not None else None
            start = pending.start if pending is not None else tok.start
            pending = None
            nodes.append(self.parse_step(depth, comment_text, start))

    def parse_case_name(self) -> str:
        tok = self.peek()
        if tok.kind in ("ident", "number") and tok.text not in RESERVED:
            return self.advance().text
        if self.at_symbol("("):
            return self.parse_paren_group()
        raise self.fail("expected case name", ("identifier", "("))

    def parse_block(self, depth: int) -> ProofBlock:
        if depth >= MAX_BLOCK_DEPTH:
            raise _RawParseError(self.peek().start, "proof nesting too deep")
        start = self.expect_ident("proof").start
        method = None
        if self.at_symbol("-"):
            self.advance()
            method = "-"
        elif self.at_symbol("("):
            method = self.parse_paren_group()

        children = self.parse_statements(depth + 1, ("qed", "case", "next"))
        cases: list[tuple[str, tuple[ProofNode, ...]]] = []
        while self.at_ident("case"):
            self.advance()
            name = self.parse_case_name()
            body = self.parse_statements(depth + 1, ("qed", "case", "next"))
            cases.append((name, tuple(body)))
            if self.at_ident("next"):
                self.advance()
                if not self.at_ident("case"):
                    raise self.fail("expected another case after 'next'", ("case",))
        if self.at_ident("next"):
            raise self.fail("'next' outside a case list", ("qed",))
        end_tok = self.expect_ident("qed")
        node = ProofBlock(method, tuple(children), tuple(cases))
        self.record_span(node, start, end_tok.end)
        return node

    # -- entry point ---------------------------------------------------------

    def parse(self) -> SketchAst:
        header = self.parse_header()
        body: list[ProofNode] = []
        root_just: Justification | None = None

        def take_comments() -> None:
            while self.peek().kind == "comment":
                tok = self.advance()
                node = Comment(tok.text)
                self.record_span(node, tok.start, tok.end)
                body.append(node)

        take_comments()
        if self.at_ident("proof"):
            body.append(self.parse_block(0))
        elif self.at_justification():
            root_just = self.parse_justification(0)
        take_comments()
        if self.peek().kind != "eof":
            raise self.fail("trailing input after proof", ("end of input",))
        ast = SketchAst(header, tuple(body), root_just)
        ast.spans.update(self.resolve_spans(ast))
        return ast

    def resolve_spans(self, ast: SketchAst) -> dict[tuple[int, ...], tuple[int, int]]:
        by_identity = {id(node): (s, e) for node, s, e in self.span_records}
        node_spans = {}
        for path, node in walk(ast):
            char_span = by_identity.get(id(node))
            if char_span is not None:
                node_spans[path] = char_span
        if self.source.isascii():
            return node_spans  # byte offsets coincide with char offsets
        positions = sorted({p for span in node_spans.values() for p in span})
        byte_of = _byte_offsets_at(self.source, positions)
        return {
            path: (byte_of[span[0]], byte_of[span[1]]) for path, span in node_spans.items()
        }


def _byte_offsets_at(source: str, positions: list[int]) -> dict[int, int]:
    """Byte offsets for the given sorted char positions, one pass."""
    offsets: dict[int, int] = {}
    previous = 0
    total = 0
    for pos in positions:
        total += len(source[previous:pos].encode("utf-8"))
        offsets[pos] = total
        previous = pos
    return offsets


def parse_sketch(source: str | bytes) -> SketchAst:
    """Parse sketch text into an AST. Raises ParseError (with a byte offset
    and expected-token set) on any malformed input; never anything else."""
    if isinstance(source, bytes):
        try:
            text = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(exc.start, "invalid UTF-8") from None
    else:
        text = source
    try:
        return _Parser(text).parse()
    except _RawParseError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(offset, exc.message, exc.expected) from None
    except RecursionError:
        raise ParseError(0, "input nests too deeply") from None
