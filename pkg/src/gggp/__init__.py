"""Grammar-guided genetic programming (GE, CFG-GP, DSGE) for symbolic regression."""

from .grammar import Grammar, GrammarError, load_grammar, parse_grammar, validate_phenotype
from .expr import BinOp, Const, Var, parse_text, simplify, to_text
from .metrics import MetricReport, mean_abs_error, r2, rmse

__version__ = "0.1.0"

__all__ = [
    "BinOp", "Const", "Grammar", "GrammarError", "MetricReport", "Var",
    "load_grammar", "mean_abs_error", "parse_grammar", "parse_text", "r2",
    "rmse", "simplify", "to_text", "validate_phenotype",
]
