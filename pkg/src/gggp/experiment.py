"""Experiment files: INI-style key-value text with one section per config.

::

    [experiment]
    dataset = data/nhanes.csv        ; relative to this file
    target = DXDTOPF
    features = RIAGENDR, RIDAGEYR, BMXWT
    seed = 2025
    replicates = 10
    output = results/pilot

    [defaults]
    population_size = 1000
    generations = 1000

    [config pilot]
    variant = GE, CFG-GP, DSGE       ; comma lists expand to a grid
    grammar = base.bnf, nodiv.bnf
    max_tree_depth = 4, 17

Keys in ``[defaults]`` and ``[config ...]`` sections mirror
``EvolutionConfig`` field names (``grammar`` is short for ``grammar_path``).
Every random choice derives from the single ``seed`` key.
"""

from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, fields
from pathlib import Path

from .data import FEATURES, TARGET, SplitSpec
from .engine import EvolutionConfig
from .grammar import load_grammar, shipped_grammar_path


class ExperimentError(ValueError):
    pass


_INT_KEYS = {f.name for f in fields(EvolutionConfig) if f.type in ("int", int)}
_FLOAT_KEYS = {f.name for f in fields(EvolutionConfig) if f.type in ("float", float)}
_BOOL_KEYS = {f.name for f in fields(EvolutionConfig) if f.type in ("bool", bool)}
_CONFIG_KEYS = {f.name for f in fields(EvolutionConfig)} - {"seed", "label"}


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: Path
    target: str
    features: tuple[str, ...]
    split: SplitSpec
    configs: tuple[EvolutionConfig, ...]
    replicates: int
    output: Path
    seed: int
    workers: int = 1
    min_age: float | None = 18
    pregnancy_column: str | None = None
    apply_filter: bool = True


def _split_list(raw: str) -> list[str]:
    return [v.strip() for v in raw.split(",") if v.strip()]


def _convert(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
    except ValueError:
        raise ExperimentError(f"bad value for {key}: {raw!r}") from None
    return raw


def _resolve_grammar(raw: str, base: Path) -> str:
    p = Path(raw)
    if not p.is_absolute():
        local = base / p
        if local.exists():
            return str(local)
        if p.parent == Path("."):
            try:
                return str(shipped_grammar_path(p.name))
            except FileNotFoundError:
                pass
    if p.exists():
        return str(p)
    raise ExperimentError(f"grammar file not found: {raw}")


_LABEL_ORDER = {"variant": 0, "grammar_path": 1, "max_tree_depth": 2}


def _label_part(key: str, value: str) -> str:
    if key == "grammar_path":
        return Path(value).stem
    if key == "max_tree_depth":
        return f"d{value}"
    if key == "variant":
        return value
    return f"{key}{value}"


def parse_experiment(text: str, base_dir: str | Path = ".") -> ExperimentSpec:
    base = Path(base_dir)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ExperimentError(f"cannot parse experiment file: {exc}") from None
    if "experiment" not in cp:
        raise ExperimentError("missing [experiment] section")
    ex = cp["experiment"]

    def get(key, default=None, conv=str):
        if key not in ex:
            if default is None:
                raise ExperimentError(f"[experiment] needs a {key!r} key")
            return default
        try:
            return conv(ex[key])
        except ValueError:
            raise ExperimentError(f"bad value for {key}: {ex[key]!r}") from None

    known = {"dataset", "target", "features", "seed", "replicates", "output", "workers",
             "train_fraction", "gender_filter", "min_age", "pregnancy_column", "nhanes_filter"}
    unknown = set(ex) - known
    if unknown:
        raise ExperimentError(f"unknown [experiment] key(s): {', '.join(sorted(unknown))}")

    seed = get("seed", conv=int)
    dataset = base / get("dataset")
    if not dataset.exists():
        raise ExperimentError(f"dataset not found: {dataset}")
    try:
        split_spec = SplitSpec(get("train_fraction", 0.8, float), seed, get("gender_filter", "all"))
    except ValueError as exc:
        raise ExperimentError(str(exc)) from None
    min_age_raw = get("min_age", "18")
    pregnancy = get("pregnancy_column", "") or None

    defaults: dict[str, str] = dict(cp["defaults"]) if "defaults" in cp else {}
    sections = [s for s in cp.sections() if s.startswith("config")]
    if not sections:
        raise ExperimentError("no [config ...] sections")
    configs: list[EvolutionConfig] = []
    grammar_cache: dict[str, str] = {}
    for sec in sections:
        name = sec[len("config"):].strip() or "config"
        merged = {**defaults, **dict(cp[sec])}
        if "grammar" in merged:
            merged["grammar_path"] = merged.pop("grammar")
        bad = set(merged) - _CONFIG_KEYS
        if bad:
            raise ExperimentError(f"[{sec}] unknown key(s): {', '.join(sorted(bad))}")
        grid_keys = sorted((k for k, v in merged.items() if len(_split_list(v)) > 1),
                           key=lambda k: (_LABEL_ORDER.get(k, len(_LABEL_ORDER)), k))
        value_lists = [_split_list(merged[k]) for k in grid_keys]
        for combo in itertools.product(*value_lists):
            values = dict(merged)
            values.update(zip(grid_keys, combo))
            kwargs = {k: _convert(k, v) for k, v in values.items()}
            if "grammar_path" in kwargs:
                raw = kwargs["grammar_path"]
                if raw not in grammar_cache:
                    grammar_cache[raw] = _resolve_grammar(raw, base)
                kwargs["grammar_path"] = grammar_cache[raw]
            label = "_".join([name, *(_label_part(k, v) for k, v in zip(grid_keys, combo))])
            try:
                configs.append(EvolutionConfig(seed=seed, label=label, **kwargs))
            except (TypeError, ValueError) as exc:
                raise ExperimentError(f"[{sec}] {exc}") from None
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ExperimentError("config labels are not unique")
    for path in grammar_cache.values():
        try:
            load_grammar(path)
        except ValueError as exc:
            raise ExperimentError(f"{path}: {exc}") from None

    return ExperimentSpec(
        dataset=dataset,
        target=get("target", TARGET),
        features=tuple(_split_list(get("features", ",".join(FEATURES)))),
        split=split_spec,
        configs=tuple(configs),
        replicates=get("replicates", 1, int),
        output=base / get("output"),
        seed=seed,
        workers=get("workers", 1, int),
        min_age=None if min_age_raw.lower() in ("", "none") else float(min_age_raw),
        pregnancy_column=pregnancy,
        apply_filter=get("nhanes_filter", "true").lower() in ("true", "1", "yes"),
    )


def load_experiment(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    if not path.exists():
        raise ExperimentError(f"experiment file not found: {path}")
    return parse_experiment(path.read_text(encoding="utf-8"), path.parent)
