"""Generational evolutionary loop shared by the three variants."""

from __future__ import annotations

import hashlib
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import genotypes as gt
from .data import Dataset
from .expr import compile_program, simplify, to_text
from .grammar import Grammar, load_grammar
from . import kernels
from .metrics import MetricReport, rmse


@dataclass(frozen=True)
class EvolutionConfig:
    variant: str = gt.DSGE
    grammar_path: str = "base.bnf"
    population_size: int = 1000
    generations: int = 1000
    p_crossover: float = 0.9
    p_mutation: float = 0.05
    max_tree_depth: int = 17
    max_wraps: int = 3
    tournament_size: int = 3
    elitism_count: int = 1
    seed: int = 0
    log_points: int = 10
    codon_max: int = 256
    ge_init_length: int = 64
    var_rule: str = "var"
    inject_variables: bool = True
    label: str = ""

    def __post_init__(self):
        if self.variant not in gt.VARIANTS:
            raise ValueError(f"variant must be one of {', '.join(gt.VARIANTS)}, got {self.variant!r}")
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")
        if self.generations < 0 or self.log_points < 1:
            raise ValueError("generations must be >= 0 and log_points >= 1")
        for name in ("p_crossover", "p_mutation"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.codon_max < 2 or self.ge_init_length < 1 or self.max_wraps < 0:
            raise ValueError("codon_max >= 2, ge_init_length >= 1 and max_wraps >= 0 required")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        return f"{self.variant}-{Path(self.grammar_path).stem}-d{self.max_tree_depth}"


@dataclass(frozen=True)
class Snapshot:
    generation: int
    best_rmse: float | None
    mean_rmse: float
    std_rmse: float


@dataclass
class RunLog:
    snapshots: list[Snapshot] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["generation,best_rmse,mean_rmse,std_rmse"]
        for s in self.snapshots:
            best = "worst" if s.best_rmse is None else repr(s.best_rmse)
            lines.append(f"{s.generation},{best},{s.mean_rmse!r},{s.std_rmse!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> RunLog:
        rows = text.strip().splitlines()
        if not rows or rows[0].strip() != "generation,best_rmse,mean_rmse,std_rmse":
            raise ValueError("not a run log")
        snaps = []
        for row in rows[1:]:
            gen, best, mean, std = row.split(",")
            snaps.append(Snapshot(int(gen), None if best == "worst" else float(best),
                                  float(mean), float(std)))
        return cls(snaps)


def log_schedule(generations: int, log_points: int) -> list[int]:
    step = max(1, math.ceil(generations / log_points)) if generations else 1
    gens = list(range(0, generations + 1, step))
    if gens[-1] != generations:
        gens.append(generations)
    return gens


@dataclass
class RunResult:
    config: EvolutionConfig
    best: gt.Individual
    expression: str | None
    simplified: str | None
    train_metrics: MetricReport | None
    test_metrics: MetricReport | None
    log: RunLog
    wall_time: float = 0.0
    replicate: int = 0

    @property
    def valid(self) -> bool:
        return self.best.valid

    def to_text(self) -> str:
        """Key-value result document. Wall time is left out so reruns are byte-identical."""
        lines = ["# gggp run result v1"]
        for k, v in asdict(self.config).items():
            lines.append(f"config.{k} = {v}")
        lines.append(f"config.name = {self.config.name}")
        lines.append(f"replicate = {self.replicate}")
        lines.append(f"valid = {str(self.valid).lower()}")
        lines.append(f"expression = {self.expression or ''}")
        lines.append(f"simplified = {self.simplified or ''}")
        lines.append(f"nodes = {self.best.nodes}")
        lines.append(f"individual = {self.best.to_line()}")
        for side, rep in (("train", self.train_metrics), ("test", self.test_metrics)):
            for key in ("rmse", "r2", "avg_error", "n"):
                val = "" if rep is None else repr(getattr(rep, key))
                lines.append(f"{side}.{key} = {val}")
        lines.append(f"generations_logged = {len(self.log.snapshots)}")
        return "\n".join(lines) + "\n"


def read_result(text: str) -> dict[str, str]:
    """Parse a result document into a flat key -> raw value mapping."""
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition(" = ")
        out[key.strip()] = value
    return out


@dataclass
class RunFailure:
    config: EvolutionConfig
    replicate: int
    error: str


class FitnessEvaluator:
    """Training-RMSE fitness with a phenotype cache.

    ``on_evaluate(split, n_rows)`` is called for every uncached evaluation.
    """

    def __init__(self, data: Dataset, split_name: str = "train",
                 on_evaluate: Callable[[str, int], None] | None = None, backend: str | None = None):
        self.X = data.features()
        self.y = data.target()
        self.columns = {name: i for i, name in enumerate(data.feature_columns)}
        self.split_name = split_name
        self.on_evaluate = on_evaluate
        self.backend = backend
        self.cache: dict[str, float] = {}

    def predict(self, ast) -> np.ndarray:
        if self.on_evaluate is not None:
            self.on_evaluate(self.split_name, len(self.y))
        code, arg, consts = compile_program(ast, self.columns)
        return kernels.eval_program(code, arg, consts, self.X, self.backend)

    def fitness(self, ind: gt.Individual) -> float | None:
        if ind.ast is None:
            return None
        hit = self.cache.get(ind.text)
        if hit is None:
            hit = rmse(self.predict(ind.ast), self.y)
            self.cache[ind.text] = hit
        return hit

    def report(self, ast) -> MetricReport:
        return MetricReport.compute(self.predict(ast), self.y)


def prepare_grammar(cfg: EvolutionConfig, features) -> Grammar:
    g = load_grammar(cfg.grammar_path)
    if cfg.inject_variables and cfg.var_rule in g.productions:
        g = g.with_terminals(cfg.var_rule, list(features))
    return g


def _tournament(pop: list[gt.Individual], k: int, rng: random.Random) -> gt.Individual:
    best = pop[rng.randrange(len(pop))]
    for _ in range(k - 1):
        other = pop[rng.randrange(len(pop))]
        if other.sort_key() < best.sort_key():
            best = other
    return best


def _snapshot(gen: int, best: gt.Individual, pop: list[gt.Individual]) -> Snapshot:
    fits = np.array([p.fitness for p in pop if p.fitness is not None], dtype=np.float64)
    if fits.size:
        mean, std = float(fits.mean()), float(fits.std())
    else:
        mean = std = math.nan
    return Snapshot(gen, best.fitness, mean, std)


def run(cfg: EvolutionConfig, train: Dataset, test: Dataset,
        on_evaluate: Callable[[str, int], None] | None = None,
        on_generation: Callable[[int, list], None] | None = None) -> RunResult:
    """One evolutionary run; the test split is only touched after the loop."""
    t0 = time.perf_counter()
    if train.feature_columns != test.feature_columns or train.target_column != test.target_column:
        raise ValueError("train and test datasets have different schemas")
    g = prepare_grammar(cfg, train.feature_columns)
    rng = random.Random(cfg.seed)
    evaluator = FitnessEvaluator(train, "train", on_evaluate)
    births = 0

    def evaluate(ind: gt.Individual) -> gt.Individual:
        if not ind.evaluated:
            ind.fitness = evaluator.fitness(ind)
            ind.evaluated = True
        return ind

    pop = []
    for _ in range(cfg.population_size):
        pop.append(evaluate(gt.random_individual(cfg.variant, g, cfg, rng, births)))
        births += 1
    best = min(pop, key=gt.Individual.sort_key)
    schedule = set(log_schedule(cfg.generations, cfg.log_points))
    log = RunLog([_snapshot(0, best, pop)])
    if on_generation is not None:
        on_generation(0, pop)

    for gen in range(1, cfg.generations + 1):
        ranked = sorted(pop, key=gt.Individual.sort_key)
        nxt = ranked[:cfg.elitism_count]
        while len(nxt) < cfg.population_size:
            a = _tournament(pop, cfg.tournament_size, rng)
            b = _tournament(pop, cfg.tournament_size, rng)
            if rng.random() < cfg.p_crossover:
                ga, gb = gt.crossover(a, b, g, cfg, rng)
            else:
                ga, gb = a.genotype, b.genotype
            for parent, geno in ((a, ga), (b, gb)):
                if len(nxt) >= cfg.population_size:
                    break
                geno = gt.mutate_genotype(cfg.variant, geno, g, cfg, rng)
                if geno is parent.genotype:
                    nxt.append(parent)
                    continue
                child = gt.develop(cfg.variant, geno, g, cfg.max_tree_depth, cfg.max_wraps, rng, births)
                births += 1
                nxt.append(evaluate(child))
        pop = nxt
        cand = min(pop, key=gt.Individual.sort_key)
        if cand.sort_key() < best.sort_key():
            best = cand
        if gen in schedule:
            log.snapshots.append(_snapshot(gen, best, pop))
        if on_generation is not None:
            on_generation(gen, pop)

    if best.valid:
        expression = best.text
        simplified = to_text(simplify(best.ast))
        train_rep = evaluator.report(best.ast)
        test_rep = FitnessEvaluator(test, "test", on_evaluate).report(best.ast)
    else:
        expression = simplified = None
        train_rep = test_rep = None
    return RunResult(cfg, best, expression, simplified, train_rep, test_rep, log,
                     time.perf_counter() - t0)


def replicate_seed(base_seed: int, config_name: str, replicate: int) -> int:
    digest = hashlib.sha256(f"{config_name}\x00{replicate}".encode()).digest()
    return (base_seed ^ int.from_bytes(digest[:4], "big")) & 0xFFFFFFFF


def _run_one(args):
    cfg, replicate, train, test = args
    try:
        res = run(cfg, train, test)
    except Exception as exc:  # recorded per run; the batch keeps going
        return RunFailure(cfg, replicate, f"{type(exc).__name__}: {exc}")
    res.replicate = replicate
    return res


def batch_configs(cfgs: list[EvolutionConfig], replicates: int, base_seed: int) -> list[tuple[EvolutionConfig, int]]:
    jobs = []
    for cfg in cfgs:
        for r in range(replicates):
            jobs.append((replace(cfg, seed=replicate_seed(base_seed, cfg.name, r)), r))
    return jobs


def run_batch(cfgs: list[EvolutionConfig], replicates: int, base_seed: int,
              train: Dataset, test: Dataset, workers: int = 1,
              on_result: Callable | None = None) -> list[RunResult | RunFailure]:
    """All (config, replicate) runs, ordered by config then replicate."""
    jobs = [(cfg, r, train, test) for cfg, r in batch_configs(cfgs, replicates, base_seed)]
    results: list = []
    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            res = _run_one(job)
            if on_result is not None:
                on_result(res)
            results.append(res)
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(_run_one, jobs):
            if on_result is not None:
                on_result(res)
            results.append(res)
    return results
