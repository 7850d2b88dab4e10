"""Genotype representations, their mappings to derivation trees, and variation.

Three encodings share one tree type:

* GE: a flat codon list read left to right, ``codon % n_alternatives``,
  with wrapping.
* DSGE: one integer list per non-terminal, consumed in derivation order,
  extended on underflow and clamped to depth-feasible alternatives.
* CFG-GP: the derivation tree itself.

Tree depth counts non-terminal levels only (root = 1), so a tree whose
deepest non-terminal expands straight to terminals at level ``d`` has
depth ``d``; this matches ``Grammar.min_depth``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple, Union

from .expr import Expr, ast_from_tree, node_count, to_text
from .grammar import Grammar

GE = "GE"
CFG = "CFG-GP"
DSGE = "DSGE"
VARIANTS = (GE, CFG, DSGE)

Genes = dict[str, list[int]]


class Node:
    """Derivation tree node. ``alt`` is -1 for terminal leaves."""

    __slots__ = ("symbol", "alt", "children")

    def __init__(self, symbol: str, alt: int | None = -1, children: list[Node] | None = None):
        self.symbol = symbol
        self.alt = alt
        self.children = children if children is not None else []

    @property
    def terminal(self) -> bool:
        return self.alt == -1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Node):
            return NotImplemented
        return (self.symbol == other.symbol and self.alt == other.alt
                and self.children == other.children)

    def __repr__(self) -> str:
        if self.terminal:
            return repr(self.symbol)
        return f"<{self.symbol}>:{self.alt}{self.children!r}"


def tree_depth(node: Node) -> int:
    if node.alt == -1:
        return 0
    best = 0
    for c in node.children:
        if c.alt != -1:
            d = tree_depth(c)
            if d > best:
                best = d
    return best + 1


def leaves(node: Node) -> list[str]:
    out: list[str] = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur.alt == -1:
            out.append(cur.symbol)
        else:
            stack.extend(reversed(cur.children))
    return out


def phenotype_text(node: Node) -> str:
    return " ".join(leaves(node))


def choices(node: Node) -> list[tuple[str, int]]:
    """(non-terminal, alternative) pairs in leftmost-derivation order."""
    out = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur.alt != -1:
            out.append((cur.symbol, cur.alt))
            stack.extend(reversed(cur.children))
    return out


def record_genes(g: Grammar, node: Node) -> Genes:
    genes: Genes = {nt: [] for nt in g.nonterminals}
    for nt, alt in choices(node):
        genes[nt].append(alt)
    return genes


def check_tree(g: Grammar, node: Node) -> None:
    """Raise ``ValueError`` if ``node`` is not a complete derivation under ``g``."""
    if node.alt == -1:
        raise ValueError(f"terminal {node.symbol!r} where a non-terminal was expected")
    alts = g.productions.get(node.symbol)
    if alts is None or node.alt is None or not 0 <= node.alt < len(alts):
        raise ValueError(f"bad expansion <{node.symbol}>:{node.alt}")
    rhs = alts[node.alt].symbols
    if len(rhs) != len(node.children):
        raise ValueError(f"<{node.symbol}>:{node.alt} has wrong arity")
    for sym, child in zip(rhs, node.children):
        if sym.nonterminal:
            if child.symbol != sym.text:
                raise ValueError(f"expected <{sym.text}>, found {child.symbol!r}")
            check_tree(g, child)
        elif child.alt != -1 or child.symbol != sym.text:
            raise ValueError(f"expected terminal {sym.text!r}")


# ---------------------------------------------------------------- GE

class _Invalid(Exception):
    pass


def ge_decode(g: Grammar, codons: list[int], max_wraps: int = 3, max_depth: int = 17) -> Node | None:
    """Leftmost GE mapping. Returns ``None`` for an invalid individual.

    Non-terminals with a single alternative do not consume a codon.
    """
    n = len(codons)
    if n == 0:
        return None
    budget = n * (max_wraps + 1)
    pos = 0
    prods = g.productions

    def expand(nt: str, level: int) -> Node:
        nonlocal pos
        if level > max_depth:
            raise _Invalid
        alts = prods[nt]
        k = len(alts)
        if k > 1:
            if pos >= budget:
                raise _Invalid
            choice = codons[pos % n] % k
            pos += 1
        else:
            choice = 0
        node = Node(nt, choice)
        node.children = [expand(s.text, level + 1) if s.nonterminal else Node(s.text)
                         for s in alts[choice].symbols]
        return node

    try:
        return expand(g.start, 1)
    except _Invalid:
        return None


def ge_init(g: Grammar, length: int, codon_max: int, rng: random.Random) -> list[int]:
    return [rng.randrange(codon_max) for _ in range(length)]


def ge_crossover(a: list[int], b: list[int], rng: random.Random,
                 cuts: tuple[int, int] | None = None) -> tuple[list[int], list[int]]:
    """One-point crossover with an independent cut point in each parent."""
    if cuts is not None:
        ca, cb = cuts
        return a[:ca] + b[cb:], b[:cb] + a[ca:]
    while True:
        ca = rng.randint(0, len(a))
        cb = rng.randint(0, len(b))
        c1, c2 = a[:ca] + b[cb:], b[:cb] + a[ca:]
        if c1 and c2:
            return c1, c2


def ge_mutate(codons: list[int], pm: float, codon_max: int, rng: random.Random) -> list[int]:
    if pm <= 0:
        return codons
    return [rng.randrange(codon_max) if rng.random() < pm else c for c in codons]


# ---------------------------------------------------------------- DSGE

class DsgeDecoded(NamedTuple):
    tree: Node
    genes: Genes
    trace: list[tuple[str, Genes]] | None


def _frontier(root: Node) -> str:
    out = []
    stack = [root]
    while stack:
        cur = stack.pop()
        if cur.alt is None:
            out.append(f"<{cur.symbol}>")
        elif cur.alt == -1:
            out.append(cur.symbol)
        else:
            stack.extend(reversed(cur.children))
    return " ".join(out)


def dsge_decode(g: Grammar, genes: Genes, max_depth: int, rng: random.Random | None = None,
                trace: bool = False) -> DsgeDecoded:
    """Map per-non-terminal gene lists to a derivation tree.

    Each expansion of non-terminal ``n`` consumes the next integer of
    ``genes[n]``. An integer naming an alternative that cannot finish within
    the remaining depth is replaced by ``feasible[value % len(feasible)]``.
    A gene that runs out is extended with a uniform draw from the feasible
    alternatives. The returned genes hold exactly the consumed integers.

    With ``trace=True`` the result carries one ``(sentential form, remaining
    integers)`` pair per derivation step, starting from the start symbol.
    """
    if max_depth < g.min_depth[g.start]:
        raise ValueError(f"max_depth {max_depth} is below the minimum depth "
                         f"{g.min_depth[g.start]} of <{g.start}>")
    if rng is None:
        rng = random.Random(0)
    out = {nt: list(genes.get(nt, ())) for nt in g.nonterminals}
    pos = dict.fromkeys(g.nonterminals, 0)
    prods = g.productions
    alt_depth = g.alt_depth
    feasible = g.feasible
    steps: list[tuple[str, Genes]] | None = [] if trace else None
    root = Node(g.start, None)

    def snapshot() -> None:
        steps.append((_frontier(root), {nt: out[nt][pos[nt]:] for nt in g.nonterminals}))

    def expand(node: Node, level: int) -> None:
        nt = node.symbol
        gene = out[nt]
        i = pos[nt]
        budget = max_depth - level + 1
        if i < len(gene):
            choice = gene[i]
            if not 0 <= choice < len(prods[nt]) or alt_depth[nt][choice] > budget:
                options = feasible(nt, budget)
                choice = options[choice % len(options)]
                gene[i] = choice
        else:
            choice = rng.choice(feasible(nt, budget))
            gene.append(choice)
        pos[nt] = i + 1
        node.alt = choice
        node.children = [Node(s.text, None) if s.nonterminal else Node(s.text)
                         for s in prods[nt][choice].symbols]
        if steps is not None:
            snapshot()
        for child in node.children:
            if child.alt is None:
                expand(child, level + 1)

    if steps is not None:
        snapshot()
    expand(root, 1)
    for nt in g.nonterminals:
        del out[nt][pos[nt]:]
    return DsgeDecoded(root, out, steps)


def dsge_init(g: Grammar, max_depth: int, rng: random.Random) -> tuple[Genes, Node]:
    tree = cfg_random_tree(g, max_depth, "grow", rng)
    return record_genes(g, tree), tree


def dsge_crossover(a: Genes, b: Genes, rng: random.Random,
                   mask: dict[str, bool] | None = None) -> tuple[Genes, Genes]:
    """Gene-wise uniform crossover; ``mask[nt]`` true swaps that gene."""
    if mask is None:
        mask = {nt: rng.random() < 0.5 for nt in a}
    c1, c2 = {}, {}
    for nt in a:
        if mask.get(nt, False):
            c1[nt], c2[nt] = list(b[nt]), list(a[nt])
        else:
            c1[nt], c2[nt] = list(a[nt]), list(b[nt])
    return c1, c2


def dsge_mutate(g: Grammar, genes: Genes, pm: float, rng: random.Random) -> Genes:
    if pm <= 0:
        return genes
    out = {}
    for nt, gene in genes.items():
        k = len(g.productions[nt])
        if k < 2:
            out[nt] = list(gene)
            continue
        out[nt] = [rng.randrange(k) if rng.random() < pm else v for v in gene]
    return out


# ---------------------------------------------------------------- CFG-GP

def cfg_random_tree(g: Grammar, max_depth: int, method: str, rng: random.Random,
                    root: str | None = None) -> Node:
    """Random derivation tree of depth at most ``max_depth``.

    ``grow`` picks uniformly among depth-feasible alternatives. ``full``
    restricts the pick to alternatives that reach a recursive non-terminal
    while any of them is feasible.
    """
    if method not in ("grow", "full"):
        raise ValueError(f"unknown method {method!r}")
    root = g.start if root is None else root
    if max_depth < g.min_depth[root]:
        raise ValueError(f"max_depth {max_depth} is below the minimum depth "
                         f"{g.min_depth[root]} of <{root}>")
    prods = g.productions
    full = method == "full"

    def build(nt: str, level: int) -> Node:
        options = g.feasible(nt, max_depth - level + 1)
        if full:
            rec = g.alt_recursive[nt]
            deep = [i for i in options if rec[i]]
            if deep:
                options = deep
        choice = options[rng.randrange(len(options))]
        node = Node(nt, choice)
        node.children = [build(s.text, level + 1) if s.nonterminal else Node(s.text)
                         for s in prods[nt][choice].symbols]
        return node

    return build(root, 1)


def _nonterminal_sites(node: Node, skip_root: bool) -> list[tuple[tuple[int, ...], int, Node]]:
    """(path, level, node) for every non-terminal node in preorder."""
    sites = []
    stack: list[tuple[Node, tuple[int, ...], int]] = [(node, (), 1)]
    while stack:
        cur, path, level = stack.pop()
        if cur.alt == -1:
            continue
        if path or not skip_root:
            sites.append((path, level, cur))
        for i in range(len(cur.children) - 1, -1, -1):
            stack.append((cur.children[i], path + (i,), level + 1))
    return sites


def replace_subtree(node: Node, path: tuple[int, ...], new: Node) -> Node:
    """Copy of ``node`` with the subtree at ``path`` replaced; untouched branches are shared."""
    if not path:
        return new
    children = list(node.children)
    children[path[0]] = replace_subtree(children[path[0]], path[1:], new)
    return Node(node.symbol, node.alt, children)


def cfg_crossover(a: Node, b: Node, max_depth: int, rng: random.Random,
                  attempts: int = 10) -> tuple[Node, Node]:
    """Exchange two subtrees rooted at the same non-terminal."""
    sites_a = _nonterminal_sites(a, skip_root=True)
    sites_b = _nonterminal_sites(b, skip_root=True)
    if not sites_a or not sites_b:
        return a, b
    by_symbol: dict[str, list] = {}
    for site in sites_b:
        by_symbol.setdefault(site[2].symbol, []).append(site)
    for _ in range(attempts):
        pa, la, na = sites_a[rng.randrange(len(sites_a))]
        matches = by_symbol.get(na.symbol)
        if not matches:
            continue
        pb, lb, nb = matches[rng.randrange(len(matches))]
        if la - 1 + tree_depth(nb) > max_depth or lb - 1 + tree_depth(na) > max_depth:
            continue
        return replace_subtree(a, pa, nb), replace_subtree(b, pb, na)
    return a, b


def cfg_mutate(g: Grammar, tree: Node, pm: float, max_depth: int, rng: random.Random) -> Node:
    """With probability ``pm`` regrow one uniformly chosen non-terminal subtree."""
    if pm <= 0 or rng.random() >= pm:
        return tree
    sites = _nonterminal_sites(tree, skip_root=False)
    path, level, node = sites[rng.randrange(len(sites))]
    fresh = cfg_random_tree(g, max_depth - level + 1, "grow", rng, root=node.symbol)
    return replace_subtree(tree, path, fresh)


# ---------------------------------------------------------------- individuals

Genotype = Union[list[int], Genes, Node]


@dataclass
class Individual:
    """One member of a population.

    ``fitness`` is the training RMSE, or ``None`` (worst) when the genotype
    maps to no phenotype.
    """

    variant: str
    genotype: Genotype
    tree: Node | None
    ast: Expr | None = None
    text: str | None = None
    fitness: float | None = None
    nodes: int = 0
    birth: int = 0
    evaluated: bool = field(default=False, compare=False)

    @property
    def valid(self) -> bool:
        return self.ast is not None

    def sort_key(self) -> tuple:
        # worst after every finite RMSE; ties -> smaller AST, then older
        if self.fitness is None:
            return (1, 0.0, self.nodes, self.birth)
        return (0, self.fitness, self.nodes, self.birth)

    def genotype_ints(self) -> str:
        if self.variant == GE:
            return ",".join(map(str, self.genotype))
        if self.variant == DSGE:
            return ";".join(f"{nt}:" + ",".join(map(str, v)) for nt, v in self.genotype.items())
        return ",".join(str(alt) for _, alt in choices(self.genotype))

    def to_line(self) -> str:
        fit = "worst" if self.fitness is None else repr(self.fitness)
        return "\t".join([self.variant, self.genotype_ints(), self.text or "invalid", fit])


def develop(variant: str, genotype: Genotype, g: Grammar, max_depth: int, max_wraps: int = 3,
            rng: random.Random | None = None, birth: int = 0) -> Individual:
    """Decode a genotype and attach its phenotype expression."""
    if variant == GE:
        tree = ge_decode(g, genotype, max_wraps, max_depth)
    elif variant == DSGE:
        tree, genotype, _ = dsge_decode(g, genotype, max_depth, rng)
    elif variant == CFG:
        tree = genotype
    else:
        raise ValueError(f"unknown variant {variant!r}")
    ind = Individual(variant, genotype, tree, birth=birth)
    if tree is not None:
        ind.ast = ast_from_tree(tree)
        ind.text = to_text(ind.ast)
        ind.nodes = node_count(ind.ast)
    return ind


def random_individual(variant: str, g: Grammar, cfg, rng: random.Random, birth: int = 0) -> Individual:
    if variant == GE:
        geno = ge_init(g, cfg.ge_init_length, cfg.codon_max, rng)
    elif variant == DSGE:
        geno, _ = dsge_init(g, cfg.max_tree_depth, rng)
    elif variant == CFG:
        geno = cfg_random_tree(g, cfg.max_tree_depth, "grow", rng)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return develop(variant, geno, g, cfg.max_tree_depth, cfg.max_wraps, rng, birth)


def crossover(a: Individual, b: Individual, g: Grammar, cfg, rng: random.Random) -> tuple[Genotype, Genotype]:
    if a.variant == GE:
        return ge_crossover(a.genotype, b.genotype, rng)
    if a.variant == DSGE:
        return dsge_crossover(a.genotype, b.genotype, rng)
    return cfg_crossover(a.genotype, b.genotype, cfg.max_tree_depth, rng)


def mutate_genotype(variant: str, genotype: Genotype, g: Grammar, cfg, rng: random.Random) -> Genotype:
    pm = cfg.p_mutation
    if variant == GE:
        return ge_mutate(genotype, pm, cfg.codon_max, rng)
    if variant == DSGE:
        return dsge_mutate(g, genotype, pm, rng)
    return cfg_mutate(g, genotype, pm, cfg.max_tree_depth, rng)


def mutate(ind: Individual, g: Grammar, cfg, rng: random.Random, birth: int = 0) -> Individual:
    geno = mutate_genotype(ind.variant, ind.genotype, g, cfg, rng)
    if geno is ind.genotype:
        return ind
    return develop(ind.variant, geno, g, cfg.max_tree_depth, cfg.max_wraps, rng, birth)
