"""Planar charged particle in a constant magnetic field, natural units.

The phase-space model on [0, t): Hamiltonian
H = 1/2 |p|^2 - k (x1 p2 - x2 p1) + 1/2 k^2 |x|^2 with cyclotron parameter
k = qB_z/(mc) and m = hbar = 1. This module builds the block operators K
(kinetic/multiplication part) and L (potential couplings through the
integral operators A, B, B*), implements the closed-form inverse of
N = Id + K + L, solves the endpoint-preimage boundary value problem, and
evaluates spectrum, determinant, generating functional, and propagator.

Everything divides by cos(kt) somewhere, so times with |cos(kt)| below
CAUSTIC_TOL are rejected up front (focal/caustic times). The k -> 0 limit is
evaluated through series-stable helpers rather than division by k, so k = 0
reproduces the free kernel exactly.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.special import polygamma

from .errors import CausticError, NumericalError, ValidationError
from .gaussians import TTValue
from .grid import (
    BlockOperator,
    GridFunction,
    GridSpec,
    block_assemble,
    block_identity,
    discretize,
    pair,
)

__all__ = [
    "CAUSTIC_TOL",
    "KernelVariant",
    "VARIANTS",
    "ADJUDICATED_VARIANT",
    "CPQuery",
    "CPOperators",
    "SpectrumResult",
    "MMatrixResult",
    "build_cp_operators",
    "n_inverse_closed",
    "solve_preimage",
    "m_matrix",
    "spectrum_idlk",
    "det_idlk",
    "generating_functional",
    "propagator",
    "kernel_value",
]

CAUSTIC_TOL = 1e-6

# Below this |kt| the trig ratios switch to their Taylor forms. The crossover
# keeps relative error at the 1e-16 level and makes k = 0 exact.
_SERIES_CUT = 1e-4


def _k_over_sin(k: float, t: float) -> float:
    """k / sin(kt), continued through k = 0 as 1/t."""
    x = k * t
    if abs(x) < _SERIES_CUT:
        return (1.0 + x * x / 6.0 + 7.0 * x**4 / 360.0) / t
    return k / math.sin(x)


def _k_over_tan(k: float, t: float) -> float:
    """k / tan(kt), continued through k = 0 as 1/t."""
    x = k * t
    if abs(x) < _SERIES_CUT:
        return (1.0 - x * x / 3.0 - x**4 / 45.0) / t
    return k / math.tan(x)


def _tan_over_k(k: float, t: float) -> float:
    """tan(kt) / k, continued through k = 0 as t."""
    x = k * t
    if abs(x) < _SERIES_CUT:
        return t * (1.0 + x * x / 3.0 + 2.0 * x**4 / 15.0)
    return math.tan(x) / k


def _check_caustic(t: float, k: float):
    if not (np.isfinite(t) and t > 0):
        raise ValidationError(f"t must be positive and finite, got {t}")
    if not np.isfinite(k):
        raise ValidationError(f"k must be finite, got {k}")
    if k != 0 and abs(math.cos(k * t)) < CAUSTIC_TOL:
        raise CausticError(
            f"t={t}, k={k} lies within tolerance of a caustic time "
            f"(|cos(kt)| = {abs(math.cos(k * t)):.2e} < {CAUSTIC_TOL:.0e}); "
            "times with cos(kt) = 0 are excluded"
        )


@dataclass(frozen=True)
class KernelVariant:
    """One candidate reading of the closed-form kernel.

    prefactor_form "k_over" means k/(2 pi i sin kt); "kt_over" carries an
    extra factor t. phase_sign is the sign of the quadratic phase
    exp(+- i k (y1^2+y2^2) / (2 tan kt)).
    """

    prefactor_form: str
    phase_sign: str

    def __post_init__(self):
        if self.prefactor_form not in ("k_over", "kt_over"):
            raise ValidationError(f"unknown prefactor_form {self.prefactor_form!r}")
        if self.phase_sign not in ("plus", "minus"):
            raise ValidationError(f"unknown phase_sign {self.phase_sign!r}")

    def label(self) -> str:
        return f"{self.prefactor_form}/{self.phase_sign}"


VARIANTS = (
    KernelVariant("k_over", "plus"),
    KernelVariant("k_over", "minus"),
    KernelVariant("kt_over", "plus"),
    KernelVariant("kt_over", "minus"),
)

# Selected by the adjudication engine (see magprop.oracle.adjudicate, which
# reproduces this choice; the test suite asserts they agree). The k_over/plus
# kernel is the unique variant that solves the magnetic Schroedinger equation,
# reproduces the delta initial condition as t -> 0+, and matches the
# time-sliced phase-space integral.
ADJUDICATED_VARIANT = KernelVariant("k_over", "plus")


def kernel_value(variant: KernelVariant, t: float, k: float, y1, y2):
    """Closed-form planar kernel for one variant; vectorized over y1, y2."""
    pref = _k_over_sin(k, t) / (2j * np.pi)
    if variant.prefactor_form == "kt_over":
        pref = pref * t
    sign = 1.0 if variant.phase_sign == "plus" else -1.0
    phase = sign * 0.5 * _k_over_tan(k, t) * (np.asarray(y1) ** 2 + np.asarray(y2) ** 2)
    out = pref * np.exp(1j * phase)
    return complex(out) if np.isscalar(y1) and np.isscalar(y2) else out


def _free_factor_1d(t: float, y3: float) -> complex:
    # (2 pi i t)^(-1/2) exp(i y3^2 / (2t)), principal root, t > 0
    return complex(np.exp(-0.25j * np.pi) / math.sqrt(2.0 * np.pi * t) * np.exp(0.5j * y3 * y3 / t))


@dataclass(frozen=True)
class CPQuery:
    """Propagator query: end time t, cyclotron parameter k, endpoint y."""

    t: float
    k: float
    y1: float
    y2: float
    y3: Optional[float] = None

    def validate(self):
        _check_caustic(self.t, self.k)
        for name in ("y1", "y2"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if self.y3 is not None and not np.isfinite(self.y3):
            raise ValidationError("y3 must be finite")
        return self


@dataclass(frozen=True)
class CPOperators:
    grid: GridSpec
    K: BlockOperator
    L: BlockOperator
    N: BlockOperator


def build_cp_operators(grid: GridSpec, k: float) -> CPOperators:
    """Assemble K, L, and N = Id + K + L on the grid.

    K is the constant multiplication-type block matrix of the kinetic part;
    L carries the magnetic/potential couplings through A, B, B*. Component
    order is (x1-type, p1-type, x2-type, p2-type).
    """
    a_op = discretize("A", grid)
    b_op = discretize("B", grid)
    bs_op = discretize("Bstar", grid)
    meta = {"t": grid.t_end, "k": k}
    kmat = block_assemble(
        grid,
        [
            [-1.0, -1.0j, None, None],
            [-1.0j, -1.0 + 1.0j, None, None],
            [None, None, -1.0, -1.0j],
            [None, None, -1.0j, -1.0 + 1.0j],
        ],
        meta={**meta, "label": "K"},
    )
    lmat = block_assemble(
        grid,
        [
            [(1j * k * k, a_op), None, None, (-2j * k, bs_op)],
            [None, None, (2j * k, b_op), None],
            [None, None, (1j * k * k, a_op), None],
            [None, None, None, None],
        ],
        meta={**meta, "label": "L"},
    )
    nmat = block_identity(grid) + kmat + lmat
    nmat = BlockOperator(grid, nmat.blocks, meta={**meta, "label": "N"})
    return CPOperators(grid, kmat, lmat, nmat)


def _resolvent_g(grid: GridSpec, k: float) -> np.ndarray:
    """Application matrix of (k^2 A - 1)^-1 from its analytic kernel.

    The resolvent is -1 plus an integral operator with kernel
    g(s, q) = k [ 1_{q<s} sin(k(s-q)) - cos(ks) sin(k(t-q)) / cos(kt) ],
    obtained by variation of parameters for (k^2 A - 1) w = v, i.e.
    w'' + k^2 w = -v'' with w(t) = -v(t), w'(0) = -v'(0). Using the analytic
    kernel (rather than numerically inverting the discretized operator)
    keeps this an independent route: the only remaining error is quadrature.
    """
    n = grid.n
    t = grid.t_end
    if k == 0:
        return -np.eye(n, dtype=complex)
    s = grid.nodes
    ckt = math.cos(k * t)
    diff = np.subtract.outer(s, s)
    lower = np.where(diff > 0, np.sin(k * diff), 0.0)
    gkern = k * (lower - np.outer(np.cos(k * s), np.sin(k * (t - s))) / ckt)
    return -np.eye(n, dtype=complex) + gkern * grid.weight


def n_inverse_closed(grid: GridSpec, k: float) -> BlockOperator:
    """Closed-form inverse of N = Id + K + L on [0, t).

    Built from the resolvent G = (k^2 A - 1)^-1 and the integral operators:
    N = i [[M, P], [0, M]] with M = [[k^2 A, -1], [-1, 1]],
    P = [[0, -2k B*], [2k B, 0]], so N^-1 = -i [[M^-1, -M^-1 P M^-1],
    [0, M^-1]] with M^-1 = [[G, G], [G, k^2 A G]]. The expanded off-diagonal
    blocks only use that A and G commute.
    """
    _check_caustic(grid.t_end, k)
    g = _resolvent_g(grid, k)
    blocks: dict = {
        (0, 0): -1j * g,
        (0, 1): -1j * g,
        (2, 2): -1j * g,
        (2, 3): -1j * g,
    }
    blocks[(1, 0)] = -1j * g
    blocks[(3, 2)] = -1j * g
    if k != 0:
        a_app = discretize("A", grid).application
        b_app = discretize("B", grid).application
        bs_app = b_app.T
        k3 = k**3
        ag = a_app @ g
        blocks[(1, 1)] = -1j * (k * k) * ag
        blocks[(3, 3)] = -1j * (k * k) * ag
        blocks[(0, 2)] = -1j * (-2.0 * k) * (g @ (b_app - bs_app) @ g)
        blocks[(0, 3)] = -1j * (-2.0) * (g @ (k * b_app - k3 * (bs_app @ a_app)) @ g)
        blocks[(1, 2)] = -1j * (2.0) * (g @ (k * bs_app - k3 * (a_app @ b_app)) @ g)
        blocks[(1, 3)] = -1j * (-2.0 * k3) * (g @ (a_app @ b_app - bs_app @ a_app) @ g)
    return BlockOperator(grid, blocks, meta={"t": grid.t_end, "k": k, "label": "N^-1 closed"})


def _fd_weights(xs: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 on nodes xs
    (Fornberg's recurrence)."""
    xs = np.asarray(xs, dtype=float)
    npts = len(xs)
    c = np.zeros((npts, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for sdx in range(mn, 0, -1):
                    c[i, sdx] = c1 * (sdx * c[i - 1, sdx - 1] - c5 * c[i - 1, sdx]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for sdx in range(mn, 0, -1):
                c[j, sdx] = (c4 * c[j, sdx] - sdx * c[j, sdx - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


_PIN_ALIASES = {"eta1": "eta1", "eta3": "eta3", 1: "eta1", 3: "eta3"}


def solve_preimage(grid: GridSpec, k: float, which) -> GridFunction:
    """Solve N f = eta for the endpoint pins by a finite-difference BVP.

    which selects the pin: "eta1" (indicator in component 0) or "eta3"
    (indicator in component 2). The coupled system for (f1, f2, f3), with
    f4 = f3, is

        f1'' + k^2 f1 - 4k f3' = 0
        f2'  - f1' + 2k f3     = 0
        f3'' + k^2 f3          = 0

    with boundary values f1(0) = f2(0), f2'(0) = 2k f3(0), f3'(0) = 0,
    f2(t) = i or 0, f3(t) = 0 or i (eta1 / eta3 respectively). Interior
    stencils are second-order central; the first-derivative equation is
    enforced on cell faces (midpoint averages), which suppresses the
    odd-even null mode; boundary rows use 4-point one-sided stencils so the
    boundary error does not dominate the pairing integrals. The sparse
    banded system is solved directly.
    """
    key = _PIN_ALIASES.get(which)
    if key is None:
        raise ValidationError(f"which must be 'eta1' or 'eta3', got {which!r}")
    _check_caustic(grid.t_end, k)
    n = grid.n
    h = grid.weight
    s = grid.nodes
    t = grid.t_end
    if n < 8:
        raise ValidationError("preimage BVP needs n >= 8")

    i1, i2, i3 = 0, n, 2 * n
    rows, cols, vals = [], [], []
    rhs = np.zeros(3 * n, dtype=complex)
    eq = 0

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    kh2 = k * k * h * h
    for j in range(1, n - 1):
        add(eq, i1 + j - 1, 1.0)
        add(eq, i1 + j, kh2 - 2.0)
        add(eq, i1 + j + 1, 1.0)
        add(eq, i3 + j + 1, -2.0 * k * h)
        add(eq, i3 + j - 1, 2.0 * k * h)
        eq += 1
    for j in range(n - 1):
        add(eq, i2 + j + 1, 1.0)
        add(eq, i2 + j, -1.0)
        add(eq, i1 + j + 1, -1.0)
        add(eq, i1 + j, 1.0)
        add(eq, i3 + j + 1, k * h)
        add(eq, i3 + j, k * h)
        eq += 1
    for j in range(1, n - 1):
        add(eq, i3 + j - 1, 1.0)
        add(eq, i3 + j, kh2 - 2.0)
        add(eq, i3 + j + 1, 1.0)
        eq += 1

    w0 = _fd_weights(s[:4], 0.0, 0)
    d0 = _fd_weights(s[:4], 0.0, 1)
    wt = _fd_weights(s[-4:], t, 0)

    for p in range(4):
        add(eq, i1 + p, w0[p])
        add(eq, i2 + p, -w0[p])
    eq += 1
    for p in range(4):
        add(eq, i2 + p, d0[p])
        add(eq, i3 + p, -2.0 * k * w0[p])
    eq += 1
    for p in range(4):
        add(eq, i3 + p, d0[p])
    eq += 1
    for p in range(4):
        add(eq, i2 + n - 4 + p, wt[p])
    rhs[eq] = 1j if key == "eta1" else 0.0
    eq += 1
    for p in range(4):
        add(eq, i3 + n - 4 + p, wt[p])
    rhs[eq] = 1j if key == "eta3" else 0.0
    eq += 1
    assert eq == 3 * n

    mat = sp.csc_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(3 * n, 3 * n)
    )
    sol = spsolve(mat, rhs)
    if not np.all(np.isfinite(sol)):
        raise NumericalError(f"preimage solve produced non-finite values (t={t}, k={k})")
    f1, f2, f3 = sol[i1:i2], sol[i2:i3], sol[i3:]
    return GridFunction(grid, np.stack([f1, f2, f3, f3.copy()]))


def _closed_preimage(grid: GridSpec, k: float, which) -> GridFunction:
    """Analytic preimages N^-1 eta (trig closed forms), for cross-checks and
    the generating functional."""
    key = _PIN_ALIASES.get(which)
    if key is None:
        raise ValidationError(f"which must be 'eta1' or 'eta3', got {which!r}")
    _check_caustic(grid.t_end, k)
    s = grid.nodes
    t = grid.t_end
    ckt = math.cos(k * t)
    cks = np.cos(k * s)
    zero = np.zeros_like(s)
    if key == "eta1":
        f = 1j * cks / ckt
        return GridFunction(grid, np.stack([f, f.copy(), zero, zero.copy()]).astype(complex))
    h1 = (2j * np.sin(k * s) + 2j * k * (s - t) * cks) / ckt
    h2 = 2j * k * cks * (s - t) / ckt
    h3 = 1j * cks / ckt
    return GridFunction(grid, np.stack([h1, h2, h3, h3.copy()]))


MMatrixResult = namedtuple("MMatrixResult", ["closed", "numerical"])


def m_matrix(t: float, k: float, grid: Optional[GridSpec] = None):
    """Pinning matrix (eta_i, N^-1 eta_j): closed form i tan(kt)/k * Id_2.

    Without a grid, returns the closed 2x2 array. With a grid, also computes
    the quadrature value through the BVP preimages and returns an
    MMatrixResult(closed, numerical) pair for comparison.
    """
    _check_caustic(t, k)
    closed = 1j * _tan_over_k(k, t) * np.eye(2, dtype=complex)
    if grid is None:
        return closed
    if not math.isclose(grid.t_end, t, rel_tol=1e-12, abs_tol=0.0):
        raise ValidationError(f"grid spans [0, {grid.t_end}) but t = {t}")
    pre1 = solve_preimage(grid, k, "eta1")
    pre3 = solve_preimage(grid, k, "eta3")
    h = grid.weight
    numerical = np.array(
        [
            [h * pre1.values[0].sum(), h * pre3.values[0].sum()],
            [h * pre1.values[2].sum(), h * pre3.values[2].sum()],
        ]
    )
    return MMatrixResult(closed=closed, numerical=numerical)


@dataclass(frozen=True)
class SpectrumResult:
    """Non-unit spectrum of Id + L(Id+K)^-1 on [0, t).

    eigenvalues holds one representative per detected cluster, sorted by
    distance from 1 (descending); multiplicities counts members per cluster
    (2 per distinct mode: the two planar degrees of freedom). closed_form is
    the analytic sequence v_m = 1 - (kt)^2 / ((m - 1/2) pi)^2.
    """

    eigenvalues: tuple
    closed_form: tuple
    multiplicities: tuple


def spectrum_idlk(grid: GridSpec, k: float, count: int) -> SpectrumResult:
    """Leading non-unit eigenvalues of Id + L(Id+K)^-1, with multiplicities.

    The operator block-triangularizes exactly at the discrete level with
    diagonal blocks (1 - k^2 A, 1, 1 - k^2 A, 1), so its non-unit spectrum is
    {1 - k^2 lambda : lambda eigenvalue of A}, each twice, plus an exact
    eigenvalue 1 of multiplicity 2n. One real-symmetric n x n eigensolve of A
    therefore replaces the dense 4n x 4n problem (the dense route is kept as
    a small-n cross-check in the tests).
    """
    if count < 1 or count > grid.n:
        raise ValidationError(f"count must be in [1, {grid.n}], got {count}")
    a_app = discretize("A", grid).application
    try:
        lam = np.linalg.eigvalsh(a_app.real)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigensolve failed for the quadratic-kernel operator (n={grid.n}, "
            f"t={grid.t_end}, k={k}): {exc}"
        ) from exc
    # Largest lambda = farthest from 1 after v = 1 - k^2 lambda.
    v_sorted = 1.0 - k * k * lam[::-1]
    candidates = v_sorted[:count]

    reps, mults = [], []
    idx = 0
    while idx < len(candidates):
        jdx = idx + 1
        while jdx < len(candidates) and abs(candidates[jdx] - candidates[idx]) <= 1e-6 * max(
            1.0, abs(candidates[idx])
        ):
            jdx += 1
        cluster = candidates[idx:jdx]
        reps.append(complex(cluster.mean()))
        mults.append(2 * len(cluster))
        idx = jdx

    t = grid.t_end
    closed = tuple(
        1.0 - (k * t) ** 2 / ((m - 0.5) * math.pi) ** 2 for m in range(1, count + 1)
    )
    return SpectrumResult(eigenvalues=tuple(reps), closed_form=closed, multiplicities=tuple(mults))


def det_idlk(t: float, k: float, method: str, order: int) -> complex:
    """Determinant of Id + L(Id+K)^-1; the closed target is cos^2(kt).

    method "product": truncated eigenvalue product prod v_m^2 over `order`
    modes, times the analytic tail exp(-2 (kt)^2 / pi^2 * psi_1(order + 1/2))
    (psi_1 is the trigamma function; the tail sums the remaining
    log(1 - x/(m-1/2)^2) terms to first order, which is all that survives at
    these magnitudes). method "dense": slogdet of the literally assembled
    discretized operator on a grid with n = order cells.
    """
    if not (np.isfinite(t) and t > 0):
        raise ValidationError(f"t must be positive and finite, got {t}")
    if order < 1:
        raise ValidationError(f"order must be >= 1, got {order}")
    if method == "product":
        m = np.arange(1, order + 1, dtype=float)
        v = 1.0 - (k * t) ** 2 / ((m - 0.5) * math.pi) ** 2
        if np.any(v == 0.0):
            return 0.0 + 0j
        body = np.exp(2.0 * np.sum(np.log(np.abs(v))))
        tail = math.exp(-2.0 * (k * t) ** 2 / math.pi**2 * float(polygamma(1, order + 0.5)))
        return complex(body * tail)
    if method == "dense":
        grid = GridSpec(t, order)
        ops = build_cp_operators(grid, k)
        # (Id + K)^-1 restricted to [0, t) is the constant block matrix below
        # (direct 2x2 inversion of each diagonal pair of K + Id).
        ik_inv = BlockOperator(
            grid,
            {(0, 0): 1j, (0, 1): 1j, (1, 0): 1j, (2, 2): 1j, (2, 3): 1j, (3, 2): 1j},
        )
        target = block_identity(grid) + ops.L.compose(ik_inv)
        sign, logabs = np.linalg.slogdet(target.dense())
        return complex(sign * np.exp(logabs))
    raise ValidationError(f"method must be 'product' or 'dense', got {method!r}")


def _closed_tt(q: CPQuery) -> TTValue:
    t, k = q.t, q.k
    value = kernel_value(ADJUDICATED_VARIANT, t, k, q.y1, q.y2)
    if q.y3 is not None:
        value *= _free_factor_1d(t, q.y3)
    tk = _tan_over_k(k, t)
    return TTValue(
        value=value,
        det_NK=complex(math.cos(k * t) ** 2),
        det_M=complex(-(tk * tk)),
        branch_note=f"closed form, variant {ADJUDICATED_VARIANT.label()}; "
        "per-eigenvalue principal square roots",
    )


def generating_functional(q: CPQuery, xi: Optional[GridFunction] = None) -> TTValue:
    """Generating functional of the propagator at test function xi.

    value = pref * exp(-1/2 <xi, N^-1 xi>) * exp(+1/2 sum_j u_j^2 / (i tan(kt)/k))
    with u_j = i y_j + 1/2 <eta_j, N^-1 xi> + 1/2 <N^-1 eta_j, xi> and pref
    the adjudicated kernel prefactor. Uses the closed-form N^-1 and the
    analytic preimages; at xi = 0 this takes the same code path as
    ``propagator`` so the two agree exactly.
    """
    q.validate()
    if xi is None or not np.any(xi.values):
        return _closed_tt(q)
    if xi.d != 4:
        raise ValidationError("test function must have 4 components")
    grid = xi.grid
    if not math.isclose(grid.t_end, q.t, rel_tol=1e-12, abs_tol=0.0):
        raise ValidationError(
            f"test function grid spans [0, {grid.t_end}) but the query has t = {q.t}"
        )
    t, k = q.t, q.k
    ninv = n_inverse_closed(grid, k)
    x = ninv.apply(xi)
    gauss = np.exp(-0.5 * pair(xi, x))

    pre1 = _closed_preimage(grid, k, "eta1")
    pre3 = _closed_preimage(grid, k, "eta3")
    h = grid.weight
    u1 = 1j * q.y1 + 0.5 * h * x.values[0].sum() + 0.5 * pair(pre1, xi)
    u2 = 1j * q.y2 + 0.5 * h * x.values[2].sum() + 0.5 * pair(pre3, xi)

    minv_diag = -1j * _k_over_tan(k, t)  # inverse of the diagonal pinning matrix
    pin = np.exp(0.5 * minv_diag * (u1 * u1 + u2 * u2))

    pref = kernel_value(ADJUDICATED_VARIANT, t, k, 0.0, 0.0)
    value = complex(pref * gauss * pin)
    if q.y3 is not None:
        value *= _free_factor_1d(t, q.y3)
    tk = _tan_over_k(k, t)
    return TTValue(
        value=value,
        det_NK=complex(math.cos(k * t) ** 2),
        det_M=complex(-(tk * tk)),
        branch_note=f"closed form, variant {ADJUDICATED_VARIANT.label()}; "
        "per-eigenvalue principal square roots",
    )


def propagator(q: CPQuery) -> complex:
    """Closed-form propagator at q (adjudicated variant), with the optional
    free third-axis factor when y3 is given."""
    q.validate()
    value = kernel_value(ADJUDICATED_VARIANT, q.t, q.k, q.y1, q.y2)
    if q.y3 is not None:
        value *= _free_factor_1d(q.t, q.y3)
    return complex(value)
