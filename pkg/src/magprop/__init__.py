"""Numerical operator calculus for the constant-magnetic-field propagator.

The package has three layers:

* ``magprop.grid``: midpoint discretization of the integral operators on
  [0, t) and the 4-component block algebra over them.
* ``magprop.gaussians``: evaluators for Gaussian white-noise expectations
  (characteristic-operator kernels, normalized exponentials, endpoint
  pinning, Donsker delta) plus a Monte Carlo cross-check and a growth/
  analyticity probe.
* ``magprop.magnetic`` / ``magprop.oracle``: the charged-particle model in
  a constant field (closed-form inverse, preimages, spectrum, determinant,
  generating functional, propagator) and the independent verification
  oracles (time slicing, PDE residual, short-time limit, adjudication).
"""

__version__ = "0.1.0"

from .errors import (
    AdjudicationError,
    CausticError,
    ConvergenceError,
    DegeneratePinningError,
    IllConditionedError,
    MagpropError,
    NumericalError,
    SingularOperatorError,
    ValidationError,
)
from .gaussians import (
    PinnedGaussSpec,
    TTValue,
    UFuncReport,
    mc_gauss_expectation,
    tt_donsker,
    tt_gauss_kernel,
    tt_linear_shift,
    tt_nexp_product,
    tt_pinned_gauss,
    ufunc_probe,
)
from .grid import (
    BlockOperator,
    GridFunction,
    GridSpec,
    OperatorMatrix,
    block_assemble,
    block_identity,
    block_invert,
    discretize,
    make_grid,
    pair,
)
from .magnetic import (
    ADJUDICATED_VARIANT,
    CAUSTIC_TOL,
    VARIANTS,
    CPOperators,
    CPQuery,
    KernelVariant,
    MMatrixResult,
    SpectrumResult,
    build_cp_operators,
    det_idlk,
    generating_functional,
    kernel_value,
    m_matrix,
    n_inverse_closed,
    propagator,
    solve_preimage,
    spectrum_idlk,
)
from .oracle import (
    OracleReport,
    adjudicate,
    pde_residual,
    short_time_check,
    time_sliced_propagator,
)

__all__ = [
    "__version__",
    # errors
    "MagpropError", "ValidationError", "CausticError", "DegeneratePinningError",
    "NumericalError", "SingularOperatorError", "IllConditionedError",
    "ConvergenceError", "AdjudicationError",
    # grid
    "GridSpec", "make_grid", "GridFunction", "OperatorMatrix", "BlockOperator",
    "discretize", "pair", "block_assemble", "block_identity", "block_invert",
    # gaussians
    "TTValue", "UFuncReport", "PinnedGaussSpec", "tt_gauss_kernel",
    "mc_gauss_expectation", "tt_nexp_product", "tt_linear_shift", "tt_donsker",
    "tt_pinned_gauss", "ufunc_probe",
    # magnetic
    "CAUSTIC_TOL", "KernelVariant", "VARIANTS", "ADJUDICATED_VARIANT",
    "CPQuery", "CPOperators", "SpectrumResult", "MMatrixResult",
    "build_cp_operators", "n_inverse_closed", "solve_preimage", "m_matrix",
    "spectrum_idlk", "det_idlk", "generating_functional", "propagator",
    "kernel_value",
    # oracle
    "OracleReport", "time_sliced_propagator", "pde_residual",
    "short_time_check", "adjudicate",
]
