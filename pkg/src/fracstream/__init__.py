"""Time-fractional PDE solvers whose solution history is compressed by a streaming SVD."""
from .errors import ConfigError, FactorizationError, FracStreamError, InvalidInputError, ZeroColumnError
from .fracpde import (
    Discretization,
    FracConfig,
    RunReport,
    example1,
    example2,
    l1_weights,
    l2_discrepancy,
    solve_heat_isvd,
    solve_heat_standard,
    solve_wave_isvd,
    solve_wave_standard,
    wave_weights,
)
from .isvd import SvdState, build_full, finalize, initialize, reconstruct_column, update
from .linalg import SparseSpdMatrix, SvdTriple, dense_svd_econ, dense_svd_full, spd_solve, spmv

__version__ = "0.1.0"
