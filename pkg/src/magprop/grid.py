"""Midpoint grids on [0, t), discretized integral operators, and 4x4 block algebra.

Everything downstream works on a uniform midpoint grid: n cells of width
h = t/n with nodes s_j = (j + 1/2) h. Midpoint quadrature is second-order
accurate and never evaluates an indicator at its jump.

Conventions that the rest of the package relies on:

* ``pair`` is the bilinear form h * sum(f * g), with no complex conjugation.
* Kernel-type operators are stored as plain kernel samples; their application
  matrix is ``entries * h``. Multiplication-type operators (diagonal) apply
  exactly, with no quadrature weight.
* The cumulative integral B carries a half-cell self term (1/2 on the
  diagonal), which makes its pairing-adjoint equal to its transpose exactly
  at the discrete level.
* Four-component functions interleave each planar degree of freedom with its
  conjugate momentum: component 0 is x1-type, 1 is p1-type, 2 is x2-type,
  3 is p2-type. Endpoint pins therefore live in components 0 and 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import IllConditionedError, SingularOperatorError, ValidationError

__all__ = [
    "GridSpec",
    "GridFunction",
    "OperatorMatrix",
    "BlockOperator",
    "make_grid",
    "discretize",
    "pair",
    "block_assemble",
    "block_identity",
    "block_invert",
    "RCOND_MIN",
]

# Reciprocal-condition estimates below this are treated as "do not trust the inverse".
RCOND_MIN = 1e-13

_OPERATOR_NAMES = ("indicator", "B", "Bstar", "A")


@dataclass(frozen=True)
class GridSpec:
    """Uniform midpoint grid with n cells on [0, t_end)."""

    t_end: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ValidationError(f"t_end must be positive and finite, got {self.t_end}")
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def weight(self) -> float:
        return self.t_end / self.n

    @property
    def nodes(self) -> np.ndarray:
        h = self.weight
        return (np.arange(self.n) + 0.5) * h


def make_grid(t_end: float, n: int) -> GridSpec:
    """Build the uniform midpoint grid; rejects t_end <= 0 and n < 2."""
    return GridSpec(float(t_end), n)


@dataclass(frozen=True)
class GridFunction:
    """Complex samples of a 1- or 4-component function on a grid.

    values has shape (d, n). Use :meth:`flat` for the component-major vector
    that block operators act on.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[1] != self.grid.n:
            raise ValidationError(
                f"values must have shape (d, {self.grid.n}), got {np.shape(self.values)}"
            )
        if v.shape[0] not in (1, 4):
            raise ValidationError(f"component count must be 1 or 4, got {v.shape[0]}")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_compatible(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def scaled(self, c: complex) -> "GridFunction":
        return GridFunction(self.grid, c * self.values)

    @classmethod
    def zero(cls, grid: GridSpec, d: int = 1) -> "GridFunction":
        return cls(grid, np.zeros((d, grid.n), dtype=complex))

    @classmethod
    def sample(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """One-component function from a vectorized callable on the nodes."""
        return cls(grid, np.asarray(fn(grid.nodes), dtype=complex)[None, :])

    @classmethod
    def stack(cls, grid: GridSpec, components: Sequence) -> "GridFunction":
        """Four-component function from per-component arrays or callables."""
        cols = []
        for comp in components:
            arr = comp(grid.nodes) if callable(comp) else comp
            cols.append(np.broadcast_to(np.asarray(arr, dtype=complex), (grid.n,)))
        return cls(grid, np.stack(cols))

    @classmethod
    def from_flat(cls, grid: GridSpec, flat: np.ndarray, d: int) -> "GridFunction":
        return cls(grid, np.asarray(flat, dtype=complex).reshape(d, grid.n))


def _check_compatible(f: GridFunction, g: GridFunction):
    if f.grid != g.grid:
        raise ValidationError("grid functions live on different grids")
    if f.d != g.d:
        raise ValidationError(f"component counts differ: {f.d} vs {g.d}")


def pair(f: GridFunction, g: GridFunction) -> complex:
    """Bilinear pairing h * sum over components and nodes of f * g.

    No conjugation: pair(i*1, i*1) on [0,1) is -1, not +1. Symmetric by
    construction.
    """
    _check_compatible(f, g)
    return complex(f.grid.weight * np.sum(f.values * g.values))


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense one-component operator on a grid.

    kind "kernel": entries are kernel samples k(s_i, s_j) and the operator
    applies as (entries * h) @ f. kind "mult": entries is a diagonal matrix
    applied exactly (no weight); this is how indicator functions act.
    """

    grid: GridSpec
    entries: np.ndarray
    kind: str = "kernel"

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        n = self.grid.n
        if e.shape != (n, n):
            raise ValidationError(f"entries must be {n}x{n}, got {e.shape}")
        if self.kind not in ("kernel", "mult"):
            raise ValidationError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "entries", e)

    @property
    def application(self) -> np.ndarray:
        """Matrix mapping node values to node values of the image."""
        if self.kind == "mult":
            return self.entries
        return self.entries * self.grid.weight

    def apply(self, f):
        """Apply to a one-component GridFunction (or a raw sample vector)."""
        if isinstance(f, GridFunction):
            if f.grid != self.grid:
                raise ValidationError("operator and function grids differ")
            if f.d != 1:
                raise ValidationError("one-component operators act on one-component functions")
            return GridFunction(self.grid, self.application @ f.values[0])
        return self.application @ np.asarray(f, dtype=complex)


def discretize(name: str, grid: GridSpec) -> OperatorMatrix:
    """Discretize one of the basic operators on [0, t).

    Parameters
    ----------
    name : {"indicator", "B", "Bstar", "A"}
        indicator: multiplication by 1 on [0, t), i.e. the identity here.
        B: cumulative integral (B f)(s) = int_0^s f, lower-triangular kernel
        with the half-cell diagonal.
        Bstar: the pairing-adjoint (B* f)(s) = int_s^t f, exactly B transposed.
        A: (A f)(s) = int_s^t int_0^r f(q) dq dr, symmetric kernel
        a(s, q) = t - max(s, q). Coincides with B* B up to quadrature error.
    """
    n = grid.n
    if name == "indicator":
        return OperatorMatrix(grid, np.eye(n), kind="mult")
    if name == "B":
        kern = np.tril(np.ones((n, n)), -1) + 0.5 * np.eye(n)
        return OperatorMatrix(grid, kern)
    if name == "Bstar":
        kern = np.triu(np.ones((n, n)), 1) + 0.5 * np.eye(n)
        return OperatorMatrix(grid, kern)
    if name == "A":
        s = grid.nodes
        kern = grid.t_end - np.maximum.outer(s, s)
        return OperatorMatrix(grid, kern)
    raise ValidationError(f"unknown operator name {name!r}; expected one of {_OPERATOR_NAMES}")


# A block is either a complex scalar (meaning scalar * identity, exact) or an
# (n, n) application matrix. Zero blocks are simply absent from the dict.
Block = "complex | np.ndarray"


@dataclass(frozen=True)
class BlockOperator:
    """4x4 block operator over one grid.

    blocks maps (i, j) to either a scalar (scalar multiple of the identity,
    applied exactly) or a dense application matrix. Missing keys are zero
    blocks. meta carries context (t, k, a label) for diagnostics only.
    """

    grid: GridSpec
    blocks: Mapping
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        n = self.grid.n
        clean = {}
        for (i, j), blk in dict(self.blocks).items():
            if not (0 <= i < 4 and 0 <= j < 4):
                raise ValidationError(f"block index out of range: {(i, j)}")
            if np.isscalar(blk):
                c = complex(blk)
                if c != 0:
                    clean[(i, j)] = c
            else:
                arr = np.asarray(blk, dtype=complex)
                if arr.shape != (n, n):
                    raise ValidationError(
                        f"block {(i, j)} must be {n}x{n}, got {arr.shape}"
                    )
                clean[(i, j)] = arr
        object.__setattr__(self, "blocks", clean)

    @property
    def upper_triangular_2x2(self) -> bool:
        """True when the lower-left 2x2 superblock vanishes identically."""
        return all((i, j) not in self.blocks for i in (2, 3) for j in (0, 1))

    def block(self, i: int, j: int) -> np.ndarray:
        """Materialize one block as a dense application matrix."""
        blk = self.blocks.get((i, j))
        n = self.grid.n
        if blk is None:
            return np.zeros((n, n), dtype=complex)
        if np.isscalar(blk):
            return complex(blk) * np.eye(n, dtype=complex)
        return blk

    def apply(self, f: GridFunction) -> GridFunction:
        if f.grid != self.grid:
            raise ValidationError("operator and function grids differ")
        if f.d != 4:
            raise ValidationError("block operators act on 4-component functions")
        out = np.zeros_like(f.values)
        for (i, j), blk in self.blocks.items():
            if np.isscalar(blk):
                out[i] += blk * f.values[j]
            else:
                out[i] += blk @ f.values[j]
        return GridFunction(self.grid, out)

    def dense(self) -> np.ndarray:
        n = self.grid.n
        out = np.zeros((4 * n, 4 * n), dtype=complex)
        for (i, j), blk in self.blocks.items():
            view = out[i * n:(i + 1) * n, j * n:(j + 1) * n]
            if np.isscalar(blk):
                view[np.diag_indices(n)] = blk
            else:
                view[:] = blk
        return out

    def superblock(self, rows, cols) -> np.ndarray:
        """Dense 2n x 2n matrix of the (rows x cols) sub-grid of blocks."""
        n = self.grid.n
        out = np.zeros((len(rows) * n, len(cols) * n), dtype=complex)
        for a, i in enumerate(rows):
            for b, j in enumerate(cols):
                if (i, j) in self.blocks:
                    out[a * n:(a + 1) * n, b * n:(b + 1) * n] = self.block(i, j)
        return out

    def compose(self, other: "BlockOperator") -> "BlockOperator":
        """Block-wise product self @ other (application composition)."""
        if self.grid != other.grid:
            raise ValidationError("operator grids differ")
        out: dict = {}
        for (i, m), left in self.blocks.items():
            for j in range(4):
                right = other.blocks.get((m, j))
                if right is None:
                    continue
                if np.isscalar(left) and np.isscalar(right):
                    term = left * right
                elif np.isscalar(left):
                    term = left * right
                elif np.isscalar(right):
                    term = right * left
                else:
                    term = left @ right
                prev = out.get((i, j))
                if prev is None:
                    out[(i, j)] = term
                elif np.isscalar(prev) and np.isscalar(term):
                    out[(i, j)] = prev + term
                else:
                    base = prev if not np.isscalar(prev) else prev * np.eye(self.grid.n)
                    add = term if not np.isscalar(term) else term * np.eye(self.grid.n)
                    out[(i, j)] = base + add
        return BlockOperator(self.grid, out, meta=dict(self.meta))

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        if self.grid != other.grid:
            raise ValidationError("operator grids differ")
        out = dict(self.blocks)
        n = self.grid.n
        for key, blk in other.blocks.items():
            if key not in out:
                out[key] = blk
            else:
                prev = out[key]
                if np.isscalar(prev) and np.isscalar(blk):
                    out[key] = prev + blk
                else:
                    base = prev if not np.isscalar(prev) else prev * np.eye(n)
                    add = blk if not np.isscalar(blk) else blk * np.eye(n)
                    out[key] = base + add
        return BlockOperator(self.grid, out, meta={**other.meta, **self.meta})


def block_identity(grid: GridSpec) -> BlockOperator:
    return BlockOperator(grid, {(i, i): 1.0 for i in range(4)})


def block_assemble(grid: GridSpec, rows, meta: dict | None = None) -> BlockOperator:
    """Assemble a BlockOperator from a 4x4 nested sequence.

    Each entry may be None/0 (zero block), a complex scalar (scalar multiple
    of the identity), an OperatorMatrix, or a (scalar, OperatorMatrix) pair.
    """
    if len(rows) != 4 or any(len(r) != 4 for r in rows):
        raise ValidationError("expected a 4x4 nested sequence of entries")
    blocks = {}
    for i in range(4):
        for j in range(4):
            entry = rows[i][j]
            if entry is None:
                continue
            if isinstance(entry, tuple):
                scal, op = entry
                if not isinstance(op, OperatorMatrix):
                    raise ValidationError("tuple entries must be (scalar, OperatorMatrix)")
                if op.grid != grid:
                    raise ValidationError(f"block {(i, j)} lives on a different grid")
                if scal != 0:
                    blocks[(i, j)] = complex(scal) * op.application
            elif isinstance(entry, OperatorMatrix):
                if entry.grid != grid:
                    raise ValidationError(f"block {(i, j)} lives on a different grid")
                blocks[(i, j)] = entry.application
            elif np.isscalar(entry):
                if entry != 0:
                    blocks[(i, j)] = complex(entry)
            else:
                raise ValidationError(f"unsupported block entry at {(i, j)}: {type(entry)}")
    return BlockOperator(grid, blocks, meta=dict(meta or {}))


def _checked_inverse(mat: np.ndarray, context: str) -> np.ndarray:
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise SingularOperatorError(f"singular operator while inverting {context}") from exc
    # One-norm reciprocal condition estimate; cheap once the inverse exists.
    rcond = 1.0 / (np.linalg.norm(mat, 1) * np.linalg.norm(inv, 1))
    if rcond < RCOND_MIN:
        raise IllConditionedError(
            f"operator {context} is ill-conditioned (rcond ~ {rcond:.2e} < {RCOND_MIN:.0e})"
        )
    return inv


def block_invert(op: BlockOperator) -> BlockOperator:
    """Invert a BlockOperator by dense solve.

    When the lower-left 2x2 superblock vanishes the inverse is assembled from
    the two diagonal superblocks:

        [[M1, P], [0, M2]]^-1 = [[M1^-1, -M1^-1 P M2^-1], [0, M2^-1]]

    which halves the dense work. Condition estimates below RCOND_MIN raise
    IllConditionedError naming the operator's (t, k) context when available.
    """
    n = op.grid.n
    ctx = op.meta.get("label", "block operator")
    if "t" in op.meta or "k" in op.meta:
        ctx = f"{ctx} (t={op.meta.get('t')}, k={op.meta.get('k')})"

    def split(mat: np.ndarray, row0: int, col0: int, out: dict):
        for a in range(2):
            for b in range(2):
                blk = mat[a * n:(a + 1) * n, b * n:(b + 1) * n]
                if np.any(blk):
                    out[(row0 + a, col0 + b)] = blk.copy()

    blocks: dict = {}
    if op.upper_triangular_2x2:
        m1 = op.superblock((0, 1), (0, 1))
        m2 = op.superblock((2, 3), (2, 3))
        p = op.superblock((0, 1), (2, 3))
        m1i = _checked_inverse(m1, ctx)
        m2i = _checked_inverse(m2, ctx)
        split(m1i, 0, 0, blocks)
        split(m2i, 2, 2, blocks)
        if np.any(p):
            split(-(m1i @ p @ m2i), 0, 2, blocks)
    else:
        dense = op.dense()
        inv = _checked_inverse(dense, ctx)
        for i in range(4):
            for j in range(4):
                blk = inv[i * n:(i + 1) * n, j * n:(j + 1) * n]
                if np.any(blk):
                    blocks[(i, j)] = blk.copy()
    return BlockOperator(op.grid, blocks, meta={**op.meta, "inverse_of": ctx})
