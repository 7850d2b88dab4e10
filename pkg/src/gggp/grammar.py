"""BNF grammar parsing and the structural tables the mappers rely on.

A grammar file is plain BNF::

    <start> ::= <expr>
    <expr>  ::= <expr> <op> <expr> | (<expr> <op> <expr>) | <var>

Non-terminals sit in angle brackets, ``|`` separates alternatives and
everything else is a whitespace separated terminal. Text from ``#`` to the
end of a line is ignored, so ``#(n)`` index annotations are legal.
Alternatives are indexed in source order; duplicates are kept.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Sequence

__all__ = [
    "Grammar",
    "GrammarError",
    "Production",
    "Symbol",
    "load_grammar",
    "min_depths",
    "parse_grammar",
    "shipped_grammar_path",
    "validate_phenotype",
]

_TOKEN = re.compile(r"(::=)|(\|)|(<[^<>\s|]+>)|([^\s|<]+|<)")


class GrammarError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class Symbol(NamedTuple):
    text: str
    nonterminal: bool

    def __str__(self) -> str:
        return f"<{self.text}>" if self.nonterminal else self.text


class Production(NamedTuple):
    symbols: tuple[Symbol, ...]
    index: int

    def __str__(self) -> str:
        return " ".join(str(s) for s in self.symbols)


class Grammar:
    """Indexed context-free grammar. Treat as immutable once built."""

    def __init__(self, nonterminals: Sequence[str], productions: dict[str, Sequence[Production]],
                 start: str | None = None):
        self.nonterminals = tuple(nonterminals)
        self.productions = {nt: tuple(productions[nt]) for nt in self.nonterminals}
        self.start = start if start is not None else self.nonterminals[0]
        if self.start not in self.productions:
            raise GrammarError(f"start symbol <{self.start}> has no rule")
        for nt in self.nonterminals:
            if not self.productions[nt]:
                raise GrammarError(f"<{nt}> has no alternatives")
            for prod in self.productions[nt]:
                for sym in prod.symbols:
                    if sym.nonterminal and sym.text not in self.productions:
                        raise GrammarError(f"<{sym.text}> is referenced by <{nt}> but never defined")
        self.min_depth = min_depths(self)
        # min depth of the subtree rooted at a node that picks each alternative
        self.alt_depth = {
            nt: tuple(_production_depth(p, self.min_depth) for p in self.productions[nt])
            for nt in self.nonterminals
        }
        self.recursive = _recursive_flags(self)
        self.alt_recursive = {
            nt: tuple(any(s.nonterminal and self.recursive[s.text] for s in p.symbols)
                      for p in self.productions[nt])
            for nt in self.nonterminals
        }
        self._feasible: dict[tuple[str, int], tuple[int, ...]] = {}
        self._recognizer: _Recognizer | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grammar):
            return NotImplemented
        return (self.nonterminals == other.nonterminals and self.start == other.start
                and self.productions == other.productions)

    def __repr__(self) -> str:
        counts = ", ".join(f"{nt}:{len(self.productions[nt])}" for nt in self.nonterminals)
        return f"Grammar(start={self.start!r}, {counts})"

    def n_alternatives(self, nt: str) -> int:
        return len(self.productions[nt])

    def feasible(self, nt: str, budget: int) -> tuple[int, ...]:
        """Indices of alternatives of ``nt`` whose shallowest completion fits in ``budget`` levels."""
        key = (nt, budget)
        hit = self._feasible.get(key)
        if hit is None:
            hit = tuple(i for i, d in enumerate(self.alt_depth[nt]) if d <= budget)
            self._feasible[key] = hit
        return hit

    def to_bnf(self) -> str:
        lines = []
        for nt in self.nonterminals:
            head = f"<{nt}> ::= "
            alts = [str(p) for p in self.productions[nt]]
            lines.append(head + alts[0])
            pad = " " * (len(head) - 2)
            lines.extend(f"{pad}| {a}" for a in alts[1:])
            lines.append("")
        return "\n".join(lines)

    def with_terminals(self, nt: str, tokens: Sequence[str]) -> Grammar:
        """Copy of the grammar where ``nt`` expands to exactly one of ``tokens``.

        Used to inject dataset column names into the ``<var>`` rule.
        """
        if nt not in self.productions:
            raise GrammarError(f"grammar has no <{nt}> rule")
        if not tokens:
            raise GrammarError(f"cannot rewrite <{nt}> with zero alternatives")
        prods = dict(self.productions)
        prods[nt] = [Production((Symbol(t, False),), i) for i, t in enumerate(tokens)]
        return Grammar(self.nonterminals, prods, self.start)

    def terminals(self) -> list[str]:
        seen: dict[str, None] = {}
        for nt in self.nonterminals:
            for p in self.productions[nt]:
                for s in p.symbols:
                    if not s.nonterminal:
                        seen.setdefault(s.text)
        return list(seen)


def _production_depth(prod: Production, depth: dict[str, int | None]) -> int:
    sub = [depth[s.text] for s in prod.symbols if s.nonterminal]
    return 1 + max(sub) if sub else 1


def min_depths(g: Grammar) -> dict[str, int]:
    """Minimum derivation-tree depth of each non-terminal (terminal-only rule = 1)."""
    depth: dict[str, int | None] = {nt: None for nt in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for nt in g.nonterminals:
            best = depth[nt]
            for prod in g.productions[nt]:
                subs = [depth[s.text] for s in prod.symbols if s.nonterminal]
                if any(d is None for d in subs):
                    continue
                d = 1 + max(subs) if subs else 1
                if best is None or d < best:
                    best = d
            if best != depth[nt]:
                depth[nt] = best
                changed = True
    stuck = [nt for nt, d in depth.items() if d is None]
    if stuck:
        names = ", ".join(f"<{nt}>" for nt in stuck)
        raise GrammarError(f"no finite terminal derivation exists for {names}")
    return depth  # type: ignore[return-value]


def _recursive_flags(g: Grammar) -> dict[str, bool]:
    edges = {nt: {s.text for p in g.productions[nt] for s in p.symbols if s.nonterminal}
             for nt in g.nonterminals}
    flags = {}
    for nt in g.nonterminals:
        seen: set[str] = set()
        stack = list(edges[nt])
        found = False
        while stack:
            cur = stack.pop()
            if cur == nt:
                found = True
                break
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(edges[cur])
        flags[nt] = found
    return flags


def parse_grammar(text: str) -> Grammar:
    tokens: list[tuple[str, int, int, int]] = []  # (token, kind, line, column)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for m in _TOKEN.finditer(line):
            tokens.append((m.group(0), m.lastindex, lineno, m.start() + 1))

    order: list[str] = []
    rules: dict[str, list[list[Symbol]]] = {}
    current: list[list[Symbol]] | None = None
    i = 0
    while i < len(tokens):
        tok, kind, line, col = tokens[i]
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if kind == 3 and nxt is not None and nxt[1] == 1:
            name = tok[1:-1]
            if name in rules:
                raise GrammarError(f"<{name}> is defined twice", line, col)
            order.append(name)
            current = rules[name] = [[]]
            i += 2
            continue
        if kind == 1:
            raise GrammarError("'::=' must follow a single non-terminal", line, col)
        if current is None:
            if kind == 3:
                raise GrammarError(f"expected '::=' after {tok}", line, col)
            raise GrammarError(f"expected a rule head, found {tok!r}", line, col)
        if kind == 2:
            if not current[-1]:
                raise GrammarError("empty alternative", line, col)
            current.append([])
        else:
            current[-1].append(Symbol(tok[1:-1], True) if kind == 3 else Symbol(tok, False))
        i += 1

    if not order:
        raise GrammarError("grammar contains no rules")
    for name in order:
        if not rules[name][-1]:
            raise GrammarError(f"<{name}> ends with an empty alternative")
    productions = {nt: [Production(tuple(alt), k) for k, alt in enumerate(rules[nt])]
                   for nt in order}
    return Grammar(order, productions, order[0])


def shipped_grammar_path(name: str) -> Path:
    """Path of one of the bundled grammar files (``base.bnf``, ``nodiv.bnf``, ``nobias.bnf``)."""
    path = Path(str(resources.files("gggp") / "grammars" / name))
    if not path.exists():
        raise FileNotFoundError(f"no bundled grammar named {name!r}")
    return path


def load_grammar(path: str | Path) -> Grammar:
    """Read a grammar file; bare names fall back to the bundled grammars."""
    p = Path(path)
    if not p.exists() and p.parent == Path("."):
        p = shipped_grammar_path(p.name)
    return parse_grammar(p.read_text(encoding="utf-8"))


class _Recognizer:
    """CYK chart over bitmasks of start positions.

    Productions are binarized with helper symbols; terminals inside longer
    productions get a pre-terminal; single non-terminal productions are
    folded in through a unit closure after each span length.
    """

    def __init__(self, g: Grammar):
        self.start = ("N", g.start)
        lexical: dict[str, list] = {}
        binary: dict[object, list[tuple[object, object]]] = {}
        unit_edges: dict[object, set] = {}

        def sym_id(s: Symbol):
            if s.nonterminal:
                return ("N", s.text)
            pre = ("T", s.text)
            lexical.setdefault(s.text, [])
            if pre not in lexical[s.text]:
                lexical[s.text].append(pre)
            return pre

        fresh = 0
        for nt in g.nonterminals:
            head = ("N", nt)
            for prod in g.productions[nt]:
                syms = prod.symbols
                if len(syms) == 1:
                    s = syms[0]
                    if s.nonterminal:
                        unit_edges.setdefault(("N", s.text), set()).add(head)
                    else:
                        lexical.setdefault(s.text, [])
                        if head not in lexical[s.text]:
                            lexical[s.text].append(head)
                    continue
                ids = [sym_id(s) for s in syms]
                left = head
                while len(ids) > 2:
                    fresh += 1
                    rest = ("R", fresh)
                    binary.setdefault(ids[0], []).append((left, rest))
                    left, ids = rest, ids[1:]
                binary.setdefault(ids[0], []).append((left, ids[1]))

        # unit closure: every symbol reachable upward through unit productions
        closure: dict[object, list] = {}
        for s in unit_edges:
            seen = []
            stack = list(unit_edges[s])
            while stack:
                cur = stack.pop()
                if cur in seen:
                    continue
                seen.append(cur)
                stack.extend(unit_edges.get(cur, ()))
            closure[s] = seen
        self.lexical = lexical
        self.binary = binary  # left child -> [(parent, right child)]
        self.closure = closure

    def _close(self, cell: dict) -> None:
        for s, m in list(cell.items()):
            for parent in self.closure.get(s, ()):
                cell[parent] = cell.get(parent, 0) | m

    def accepts(self, tokens: Sequence[str]) -> bool:
        n = len(tokens)
        if n == 0:
            return False
        chart: list[dict] = [{}]
        first: dict = {}
        for i, tok in enumerate(tokens):
            heads = self.lexical.get(tok)
            if not heads:
                return False
            for h in heads:
                first[h] = first.get(h, 0) | (1 << i)
        self._close(first)
        chart.append(first)
        for length in range(2, n + 1):
            cell: dict = {}
            for k in range(1, length):
                left_cell = chart[k]
                right_cell = chart[length - k]
                for b, bmask in left_cell.items():
                    rules = self.binary.get(b)
                    if not rules:
                        continue
                    for parent, c in rules:
                        cmask = right_cell.get(c)
                        if cmask:
                            m = bmask & (cmask >> k)
                            if m:
                                cell[parent] = cell.get(parent, 0) | m
            self._close(cell)
            chart.append(cell)
        return bool(chart[n].get(self.start, 0) & 1)


def validate_phenotype(g: Grammar, tokens: Sequence[str]) -> bool:
    """True iff ``tokens`` is derivable from the grammar's start symbol."""
    if g._recognizer is None:
        g._recognizer = _Recognizer(g)
    return g._recognizer.accepts(list(tokens))
