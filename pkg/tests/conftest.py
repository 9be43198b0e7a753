import numpy as np
import pytest

from kmslab.exponents import ProblemParams
from kmslab.grids import Field, Grid
from kmslab.nonlinearity import NonlinearitySpec
from kmslab.solver import SolveConfig, picard_system_solve

# Reference coupled solve shared by the fixed-point, proof-chain and
# continuation tests: prototype coupling, p = 2, constant datum, k = 10.
REF_PARAMS = ProblemParams(N=3.0, p=2.0, r=2.0, theta=0.5, m=1.3)
REF_SPEC = NonlinearitySpec.prototype(2.0, 0.5)
REF_K = 10.0


def reference_datum(grid: Grid) -> Field:
    return Field(grid, np.ones(grid.shape))


@pytest.fixture(scope="session")
def reference_solve():
    grid = Grid(d=1, n_per_axis=129)
    f = reference_datum(grid)
    config = SolveConfig(k=REF_K, outer_tol=1e-9)
    result = picard_system_solve(f, REF_SPEC, REF_PARAMS, config)
    return result, f, config
