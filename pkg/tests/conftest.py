import numpy as np
import pytest

from boxlens.data import Column, Table


def make_table(**cols) -> Table:
    """Build a Table from kwargs: numeric for array-likes of numbers,
    categorical for lists of strings (None = missing in both)."""
    built = []
    for name, values in cols.items():
        vals = list(values)
        if any(isinstance(v, str) for v in vals):
            built.append(Column.categorical(name, vals))
        else:
            arr = np.array([np.nan if v is None else float(v) for v in vals])
            built.append(Column.numeric(name, arr))
    return Table(tuple(built))


def random_numeric_table(rng, n_rows, names=("x1", "x2", "x3")) -> Table:
    return make_table(**{n: rng.random(n_rows) for n in names})


@pytest.fixture
def rng():
    return np.random.default_rng(7)
