"""Four-parameter stationary binary MRF on the second-order (8-neighbour) lattice.

The field is described by its generic 2x2 block law ``[A B; C D]`` (``A`` top
left, ``D`` bottom right).  Horizontal and vertical neighbours follow the same
two-state chain with ``P(0 | 1) = p`` and ``P(1 | 0) = q``.  The block law
satisfies the three conditional independences

    B _|_ C | A,    A _|_ D | B,    A _|_ D | C,

which make the raster-scan (top-left to bottom-right) construction stationary
and make the product/quotient formula over blocks, pairs and singletons an
exact joint law on every rectangle.  Given the chain, these constraints leave
two degrees of freedom, fixed by

    r = P(C = 1 | A = 0, B = 0, D = 0),    s = P(D = 0 | A = 1, B = 1, C = 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateMeasureError,
    InconsistentParametersError,
    UnsupportedDimensionError,
    WindowTooLargeError,
)
from .lattice import LatticeShape

__all__ = [
    "MrfParams",
    "BlockJoint",
    "WindowDistribution",
    "binary_configurations",
    "derive_block_joint",
    "rectangle_marginal",
    "window_marginal",
    "bernoulli_window",
    "sample_field",
    "DobrushinResult",
    "dobrushin_coefficients",
]

MAX_ENUMERATED_CELLS = 20
CONSISTENCY_TOL = 1e-10


@dataclass(frozen=True)
class MrfParams:
    p: float
    q: float
    r: float
    s: float

    def __post_init__(self):
        for name in ("p", "q", "r", "s"):
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                raise InconsistentParametersError(f"{name}={val} must lie strictly inside (0, 1)")

    def as_tuple(self):
        return (self.p, self.q, self.r, self.s)

    @property
    def stationary(self) -> np.ndarray:
        """Stationary law ``(pi(0), pi(1))`` of the two-state chain."""
        return np.array([self.p, self.q]) / (self.p + self.q)

    @property
    def transition(self) -> np.ndarray:
        """``T[a, b] = P(next = b | prev = a)``."""
        return np.array([[1.0 - self.q, self.q], [self.p, 1.0 - self.p]])


@dataclass(frozen=True, eq=False)
class BlockJoint:
    table: np.ndarray  # (2, 2, 2, 2) indexed [A, B, C, D]
    params: MrfParams | None = None

    @property
    def singleton(self) -> np.ndarray:
        return self.table.sum(axis=(1, 2, 3))

    @property
    def pair_h(self) -> np.ndarray:
        """Law of a horizontal pair (top row of the block)."""
        return self.table.sum(axis=(2, 3))

    @property
    def pair_v(self) -> np.ndarray:
        """Law of a vertical pair (left column of the block)."""
        return self.table.sum(axis=(1, 3))

    def corner_conditional(self) -> np.ndarray:
        """``P(D = 1 | A, B, C)`` as a (2, 2, 2) array."""
        return self.table[..., 1] / self.table.sum(axis=3)


def _complete_table(m_bc, m_bd, m_cd, cell, value):
    """2x2x2 table over (b, c, d) with the given two-way margins and one known cell."""
    b0, c0, d0 = cell
    b1, c1, d1 = 1 - b0, 1 - c0, 1 - d0
    x = np.empty((2, 2, 2))
    x[b0, c0, d0] = value
    x[b0, c0, d1] = m_bc[b0, c0] - x[b0, c0, d0]
    x[b0, c1, d0] = m_bd[b0, d0] - x[b0, c0, d0]
    x[b1, c0, d0] = m_cd[c0, d0] - x[b0, c0, d0]
    x[b0, c1, d1] = m_bc[b0, c1] - x[b0, c1, d0]
    x[b1, c0, d1] = m_bc[b1, c0] - x[b1, c0, d0]
    x[b1, c1, d0] = m_bd[b1, d0] - x[b1, c0, d0]
    x[b1, c1, d1] = m_bc[b1, c1] - x[b1, c1, d0]
    return x


def derive_block_joint(params: MrfParams) -> BlockJoint:
    """Generic 2x2 block law for ``params``; raises if it is not a valid measure."""
    pi = params.stationary
    tr = params.transition
    table = np.empty((2, 2, 2, 2))
    for a in (0, 1):
        # two-way margins of (B, C, D) jointly with A = a
        m_bc = pi[a] * np.outer(tr[a], tr[a])
        m_bd = np.array([[pi[b] * tr[b, a] * tr[b, d] for d in (0, 1)] for b in (0, 1)])
        m_cd = np.array([[pi[c] * tr[c, a] * tr[c, d] for d in (0, 1)] for c in (0, 1)])
        if a == 0:
            cell, value = (0, 1, 0), params.r * m_bd[0, 0]
        else:
            cell, value = (1, 1, 0), params.s * m_bc[1, 1]
        x = _complete_table(m_bc, m_bd, m_cd, cell, value)
        err = max(
            np.abs(x.sum(axis=2) - m_bc).max(),
            np.abs(x.sum(axis=1) - m_bd).max(),
            np.abs(x.sum(axis=0) - m_cd).max(),
        )
        if err > CONSISTENCY_TOL:
            raise InconsistentParametersError(f"block margins inconsistent by {err:.3g}")
        table[a] = x
    if table.min() < 0:
        raise InconsistentParametersError(
            f"parameters {params.as_tuple()} give a negative block probability ({table.min():.3g})"
        )
    if table.min() == 0:
        raise InconsistentParametersError("block law is not strictly positive")
    block = BlockJoint(table=table, params=params)
    _check_block(block)
    return block


def _check_block(block: BlockJoint):
    t = block.table
    checks = {
        "normalization": abs(t.sum() - 1.0),
        "pair_h top/bottom": np.abs(t.sum(axis=(2, 3)) - t.sum(axis=(0, 1))).max(),
        "pair_v left/right": np.abs(t.sum(axis=(1, 3)) - t.sum(axis=(0, 2))).max(),
        "pair_h vs pair_v": np.abs(block.pair_h - block.pair_v).max(),
        "pair vs singleton": np.abs(block.pair_h.sum(axis=1) - block.singleton).max(),
    }
    bad = {k: v for k, v in checks.items() if v > CONSISTENCY_TOL}
    if bad:
        raise InconsistentParametersError(f"block law violates consistency identities: {bad}")


def binary_configurations(n: int) -> np.ndarray:
    """All ``2**n`` binary vectors, lexicographic (first coordinate most significant)."""
    idx = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def rectangle_marginal(block: BlockJoint, rows: int, cols: int):
    """Exact law of a ``rows x cols`` rectangle from the block/pair/singleton formula.

    Returns ``(probs, mass)`` where ``probs`` has length ``2**(rows*cols)``
    (row-major cell order, lexicographic configurations) and is renormalized;
    ``mass`` is the total before renormalization.
    """
    if rows < 2 or cols < 2:
        raise DegenerateMeasureError("the product formula needs at least one 2x2 block")
    n = rows * cols
    if n > MAX_ENUMERATED_CELLS:
        raise WindowTooLargeError(f"{rows}x{cols} rectangle has 2**{n} configurations")
    for name, arr in (("block", block.table), ("pair", block.pair_h), ("pair", block.pair_v),
                      ("singleton", block.singleton)):
        if np.any(arr <= 0):
            raise DegenerateMeasureError(f"zero {name} factor in the product formula")
    x = binary_configurations(n).reshape(-1, rows, cols)
    lt = np.log(block.table)
    lh = np.log(block.pair_h)
    lv = np.log(block.pair_v)
    ls = np.log(block.singleton)
    logp = lt[x[:, :-1, :-1], x[:, :-1, 1:], x[:, 1:, :-1], x[:, 1:, 1:]].sum(axis=(1, 2))
    logp += ls[x[:, 1:-1, 1:-1]].sum(axis=(1, 2))
    logp -= lh[x[:, 1:-1, :-1], x[:, 1:-1, 1:]].sum(axis=(1, 2))
    logp -= lv[x[:, :-1, 1:-1], x[:, 1:, 1:-1]].sum(axis=(1, 2))
    probs = np.exp(logp)
    mass = probs.sum()
    return probs / mass, mass


@dataclass(frozen=True, eq=False)
class WindowDistribution:
    """Law of the binary window ``Lambda`` (configurations in lexicographic order)."""

    dim: int
    half_width: int
    probs: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.size != 2**self.n_cells:
            raise ValueError(f"expected {2**self.n_cells} probabilities, got {probs.size}")
        if probs.min() < 0 or abs(probs.sum() - 1.0) > 1e-12:
            raise DegenerateMeasureError("window probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def n_cells(self) -> int:
        return (2 * self.half_width + 1) ** self.dim

    @property
    def center(self) -> int:
        return (self.n_cells - 1) // 2

    @cached_property
    def configs(self) -> np.ndarray:
        return binary_configurations(self.n_cells)

    @cached_property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def cell_marginal(self, cell: int | None = None) -> float:
        """``P(x_cell = 1)``; defaults to the centre."""
        cell = self.center if cell is None else cell
        return float(self.probs @ self.configs[:, cell])

    def second_moment(self) -> float:
        """``E[x_c^2]`` at the centre cell."""
        xc = self.configs[:, self.center].astype(float)
        return float(self.probs @ xc**2)

    def as_array(self) -> np.ndarray:
        return self.probs.reshape((2,) * self.n_cells)


def bernoulli_window(pi1: float, dim: int = 1) -> WindowDistribution:
    """Single-cell prior ``P(x = 1) = pi1`` (the separable, i.i.d. model)."""
    return WindowDistribution(dim=dim, half_width=0, probs=np.array([1.0 - pi1, pi1]))


def window_marginal(params: MrfParams, dim: int, k: int) -> WindowDistribution:
    """Exact law ``mu_Lambda`` of a ``(2k+1)^dim`` window.

    ``k = 0`` returns the single-site law.  In 2-D only ``k <= 1`` is
    enumerated (``k = 2`` would need ``2**25`` states).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    pi = params.stationary
    if k == 0:
        return WindowDistribution(dim=dim, half_width=0, probs=pi.copy())
    if dim == 1:
        width = 2 * k + 1
        if width > MAX_ENUMERATED_CELLS:
            raise WindowTooLargeError(f"window of {width} cells is too large to enumerate")
        x = binary_configurations(width)
        tr = params.transition
        logp = np.log(pi)[x[:, 0]] + np.log(tr)[x[:, :-1], x[:, 1:]].sum(axis=1)
        probs = np.exp(logp)
        mass = probs.sum()
        return WindowDistribution(dim=1, half_width=k, probs=probs / mass, mass=mass)
    if dim == 2:
        if (2 * k + 1) ** 2 > MAX_ENUMERATED_CELLS:
            raise WindowTooLargeError(
                f"2-D window with k={k} has 2**{(2 * k + 1) ** 2} configurations; only k <= 1 is supported"
            )
        block = derive_block_joint(params)
        probs, mass = rectangle_marginal(block, 2 * k + 1, 2 * k + 1)
        if abs(mass - 1.0) > 1e-9:
            raise DegenerateMeasureError(f"product formula mass {mass!r} differs from 1")
        return WindowDistribution(dim=2, half_width=k, probs=probs, mass=mass)
    raise UnsupportedDimensionError(f"window marginals are implemented for dim 1 and 2, not {dim}")


def sample_field(params: MrfParams, shape: LatticeShape, seed=None) -> np.ndarray:
    """Exact stationary sample on ``shape`` (int8 array of 0/1).

    1-D: stationary two-state chain.  2-D: unilateral raster scan; the first row
    and column are chains, every other site is drawn from ``P(D | A, B, C)``.
    Uniforms are drawn once in row-major order, so the result depends only on
    ``seed``.
    """
    rng = np.random.default_rng(seed)
    pi = params.stationary
    tr = params.transition
    n = shape.side
    if shape.dim == 1:
        u = rng.random(n)
        x = np.empty(n, dtype=np.int8)
        x[0] = u[0] < pi[1]
        for i in range(1, n):
            x[i] = u[i] < tr[x[i - 1], 1]
        return x
    if shape.dim != 2:
        raise UnsupportedDimensionError(f"sampling is implemented for dim 1 and 2, not {shape.dim}")

    cond = derive_block_joint(params).corner_conditional()
    u = rng.random((n, n))
    x = np.empty((n, n), dtype=np.int8)
    x[0, 0] = u[0, 0] < pi[1]
    for j in range(1, n):
        x[0, j] = u[0, j] < tr[x[0, j - 1], 1]
        x[j, 0] = u[j, 0] < tr[x[j - 1, 0], 1]
    # sites on one anti-diagonal only depend on the previous two
    for diag in range(2, 2 * n - 1):
        m = np.arange(max(1, diag - n + 1), min(n - 1, diag - 1) + 1)
        if m.size == 0:
            continue
        c = diag - m
        prob = cond[x[m - 1, c - 1], x[m - 1, c], x[m, c - 1]]
        x[m, c] = u[m, c] < prob
    return x


@dataclass(frozen=True)
class DobrushinResult:
    c: float
    c_star: float
    coefficients: np.ndarray  # (3, 3) over neighbour offsets, centre is 0

    @property
    def satisfied(self) -> bool:
        return self.c < 1.0 and self.c_star < 1.0


def dobrushin_coefficients(params: MrfParams) -> DobrushinResult:
    """Dobrushin interdependence coefficients of a bulk site.

    The single-site conditional given the 8 neighbours is read off the exact
    3x3 window law (the field is second-order Markov, so it equals the
    conditional given the whole lattice).  For binary spins the total-variation
    distance between two conditionals is ``|P(1 | xi) - P(1 | xi')|``.
    """
    w = window_marginal(params, 2, 1).as_array()  # axes = 9 cells, row-major
    cond = w.take(1, axis=4) / w.sum(axis=4)  # P(centre = 1 | 8 neighbours)
    coeffs = np.zeros(9)
    neighbour_cells = [0, 1, 2, 3, 5, 6, 7, 8]
    for axis, cell in enumerate(neighbour_cells):
        diff = np.abs(cond.take(1, axis=axis) - cond.take(0, axis=axis))
        coeffs[cell] = diff.max()
    coeffs = coeffs.reshape(3, 3)

    # interdependence matrix on a small lattice with translation-invariant bulk rows
    side = 5
    sites = [(i, j) for i in range(side) for j in range(side)]
    index = {s: n for n, s in enumerate(sites)}
    mat = np.zeros((len(sites), len(sites)))
    for (i, j), row in index.items():
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                nb = (i + di, j + dj)
                if nb in index and (di, dj) != (0, 0):
                    mat[row, index[nb]] = coeffs[di + 1, dj + 1]
    centre = index[(side // 2, side // 2)]
    c = float(mat[centre].sum())
    c_star = float(mat[:, centre].sum())
    if abs(c - c_star) > 1e-12:
        raise AssertionError(f"row sum {c} and column sum {c_star} differ")
    return DobrushinResult(c=c, c_star=c_star, coefficients=coeffs)
