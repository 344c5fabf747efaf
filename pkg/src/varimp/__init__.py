"""Unbiased variable importance for regression.

Importance scores are read off shallow piecewise-constant regression trees
whose split variables are chosen by chi-squared tests on residual signs
rather than by exhaustive impurity search, which keeps the selection fair
across variables with different numbers of candidate splits.  Raw scores
are then calibrated against response permutations so that an uninformative
variable scores about 1, and a permutation-based threshold flags the
variables whose scores exceed chance level.
"""

from .backend import backend_name
from .errors import SchemaError, ValidationError, VarimpError, ZeroVarianceError

__version__ = "0.1.0"


def _lazy_api():
    # Imported here so that `import varimp` stays cheap and the circular
    # import risk between submodules stays local to them.
    from .data import Dataset, from_arrays, load_csv
    from .importance import ImportanceReport, bias_adjusted, score, threshold
    from .tree import Tree, TreeConfig, grow

    return {
        "Dataset": Dataset,
        "from_arrays": from_arrays,
        "load_csv": load_csv,
        "ImportanceReport": ImportanceReport,
        "bias_adjusted": bias_adjusted,
        "score": score,
        "threshold": threshold,
        "Tree": Tree,
        "TreeConfig": TreeConfig,
        "grow": grow,
    }


def __getattr__(name):
    api = _lazy_api()
    if name in api:
        return api[name]
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "__version__",
    "backend_name",
    "VarimpError",
    "ValidationError",
    "SchemaError",
    "ZeroVarianceError",
    "Dataset",
    "from_arrays",
    "load_csv",
    "ImportanceReport",
    "bias_adjusted",
    "score",
    "threshold",
    "Tree",
    "TreeConfig",
    "grow",
]
