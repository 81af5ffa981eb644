"""Cubic lattices, sliding windows and the edge-fill rule.

Signals live on ``Gamma = [N]^dim`` and are stored as numpy arrays of shape
``(N,) * dim``.  Indices are 0-based tuples.  The canonical vectorization is
row-major (C order).

A window ``Lambda_i`` is the cube of side ``2k + 1`` centred at ``i``.  Cells of
a window that fall outside the lattice are filled with the arithmetic mean of
the cells that fall inside it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidOffsetError, InvalidWindowError, ShapeError

__all__ = [
    "LatticeShape",
    "WindowSpec",
    "partition_indices",
    "extract_window",
    "window_patches",
    "shift_window_fill",
    "shift_fill_matrix",
    "vectorize",
    "devectorize",
]


@dataclass(frozen=True)
class LatticeShape:
    dim: int
    side: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ShapeError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.side < 1:
            raise ShapeError(f"side must be >= 1, got {self.side}")

    @property
    def size(self) -> int:
        return self.side**self.dim

    @property
    def array_shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dim


@dataclass(frozen=True, eq=False)
class WindowSpec:
    """Half-width ``k`` plus an optional boolean processing mask over the window.

    The mask marks which window cells the denoiser looks at (``True`` =
    processed).  Edge fills are computed for every cell regardless of the mask.
    """

    half_width: int
    mask: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.half_width < 0:
            raise InvalidWindowError(f"half_width must be >= 0, got {self.half_width}")
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            w = self.width
            if mask.ndim < 1 or any(s != w for s in mask.shape):
                raise InvalidWindowError(f"mask must have shape ({w},)*dim, got {mask.shape}")
            if not mask[(self.half_width,) * mask.ndim]:
                raise InvalidWindowError("mask must include the window centre")
            mask.setflags(write=False)
            object.__setattr__(self, "mask", mask)

    @property
    def width(self) -> int:
        return 2 * self.half_width + 1

    def size(self, dim: int) -> int:
        return self.width**dim

    def mask_for(self, dim: int) -> np.ndarray:
        """Flattened (row-major) boolean mask for a ``dim``-dimensional window."""
        if self.mask is None:
            return np.ones(self.size(dim), dtype=bool)
        if self.mask.ndim != dim:
            raise InvalidWindowError(f"mask is {self.mask.ndim}-D but lattice is {dim}-D")
        return self.mask.ravel()

    def center_flat(self, dim: int) -> int:
        return (self.size(dim) - 1) // 2

    def __eq__(self, other):
        if not isinstance(other, WindowSpec):
            return NotImplemented
        if self.half_width != other.half_width:
            return False
        if self.mask is None or other.mask is None:
            return self.mask is None and other.mask is None
        return np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.half_width, None if self.mask is None else self.mask.tobytes()))


def _check_fits(shape: LatticeShape, k: int):
    if 2 * k + 1 > shape.side:
        raise InvalidWindowError(f"window width {2 * k + 1} exceeds lattice side {shape.side}")


def partition_indices(shape: LatticeShape, window: WindowSpec):
    """Split the lattice into sites whose window fits (mid) and the rest (edge).

    Returns two sorted arrays of flat (row-major) indices.
    """
    k = window.half_width
    _check_fits(shape, k)
    coords = np.indices(shape.array_shape).reshape(shape.dim, -1)
    inside = np.all((coords >= k) & (coords <= shape.side - 1 - k), axis=0)
    flat = np.arange(shape.size)
    return flat[inside], flat[~inside]


def _window_offsets(dim: int, k: int) -> np.ndarray:
    """Offsets of the window cells relative to the centre, row-major, shape (d, dim)."""
    rng = range(-k, k + 1)
    return np.array(list(itertools.product(rng, repeat=dim)), dtype=np.int64).reshape(-1, dim)


@lru_cache(maxsize=32)
def _index_map(dim: int, side: int, k: int):
    """Gather table for all windows plus the edge windows grouped by fill pattern.

    Returns ``(gather, groups)`` where ``gather`` is ``(N^dim, d)`` flat source
    indices (clipped into the lattice) and ``groups`` is a list of
    ``(rows, inside_cols, outside_cols)`` for windows that need a fill.
    """
    offsets = _window_offsets(dim, k)
    coords = np.indices((side,) * dim).reshape(dim, -1).T  # (|Gamma|, dim)
    cells = coords[:, None, :] + offsets[None, :, :]  # (|Gamma|, d, dim)
    valid = np.all((cells >= 0) & (cells < side), axis=2)
    clipped = np.clip(cells, 0, side - 1)
    gather = np.ravel_multi_index(tuple(np.moveaxis(clipped, 2, 0)), (side,) * dim)
    gather.setflags(write=False)

    groups = {}
    for row in np.flatnonzero(~valid.all(axis=1)):
        groups.setdefault(valid[row].tobytes(), []).append(row)
    out = []
    for key, rows in groups.items():
        pattern = np.frombuffer(key, dtype=bool)
        out.append((np.array(rows), np.flatnonzero(pattern), np.flatnonzero(~pattern)))
    return gather, out


def _fill_rows(values: np.ndarray, inside: np.ndarray, outside: np.ndarray) -> None:
    """In place: overwrite ``values[:, outside]`` with the row mean of ``values[:, inside]``."""
    # left-to-right accumulation: identical bits for one window or a batch
    acc = values[:, inside[0]].copy()
    for col in inside[1:]:
        acc += values[:, col]
    mean = acc / inside.size
    values[:, outside] = mean[:, None]


def extract_window(v: np.ndarray, center, window: WindowSpec) -> np.ndarray:
    """Window of ``v`` centred at ``center`` with out-of-lattice cells filled.

    Returns an array of shape ``(2k+1,) * dim``.
    """
    v = np.asarray(v, dtype=float)
    dim, side = v.ndim, v.shape[0]
    shape = LatticeShape(dim, side)
    if v.shape != shape.array_shape:
        raise ShapeError(f"field must be a cube, got shape {v.shape}")
    center = tuple(int(c) for c in np.atleast_1d(center))
    if len(center) != dim or any(c < 0 or c >= side for c in center):
        raise ShapeError(f"centre {center} is not in the lattice")
    k = window.half_width
    offsets = _window_offsets(dim, k)
    cells = np.asarray(center)[None, :] + offsets
    valid = np.all((cells >= 0) & (cells < side), axis=1)
    values = np.zeros((1, offsets.shape[0]))
    values[0, valid] = v[tuple(cells[valid].T)]
    if not valid.all():
        _fill_rows(values, np.flatnonzero(valid), np.flatnonzero(~valid))
    return values[0].reshape((window.width,) * dim)


def window_patches(v: np.ndarray, window: WindowSpec) -> np.ndarray:
    """All filled windows of ``v`` as a ``(N^dim, (2k+1)^dim)`` array.

    Row ``i`` is the flattened window centred at flat site ``i``; identical to
    ``extract_window(v, unravel(i), window).ravel()``.
    """
    v = np.asarray(v, dtype=float)
    dim, side = v.ndim, v.shape[0]
    if v.shape != (side,) * dim:
        raise ShapeError(f"field must be a cube, got shape {v.shape}")
    _check_fits(LatticeShape(dim, side), window.half_width)
    gather, groups = _index_map(dim, side, window.half_width)
    patches = v.ravel()[gather]
    for rows, inside, outside in groups:
        block = patches[rows]
        _fill_rows(block, inside, outside)
        patches[rows] = block
    return patches


def shift_window_fill(patch: np.ndarray, offset) -> np.ndarray:
    """Re-centre a full window at ``c + offset``.

    Cells of the shifted window that stay inside the original window are copied;
    the ones that slide off are set to the mean of those that stay.
    """
    patch = np.asarray(patch, dtype=float)
    dim = patch.ndim
    width = patch.shape[0]
    k = (width - 1) // 2
    if patch.shape != (width,) * dim or width % 2 == 0:
        raise ShapeError(f"patch must be an odd-sided cube, got {patch.shape}")
    offset = np.atleast_1d(np.asarray(offset, dtype=np.int64))
    if offset.shape != (dim,):
        raise InvalidOffsetError(f"offset must have {dim} components")
    if np.any(np.abs(offset) > k):
        raise InvalidOffsetError(f"offset {tuple(offset)} exceeds half-width {k}")

    rel = _window_offsets(dim, k) + k  # (d, dim) in [0, 2k]
    src = rel + offset[None, :]
    valid = np.all((src >= 0) & (src < width), axis=1)
    values = np.zeros((1, rel.shape[0]))
    values[0, valid] = patch[tuple(src[valid].T)]
    if not valid.all():
        _fill_rows(values, np.flatnonzero(valid), np.flatnonzero(~valid))
    return values[0].reshape(patch.shape)


@lru_cache(maxsize=128)
def _shift_fill_matrix(dim: int, k: int, offset: tuple[int, ...]) -> np.ndarray:
    width = 2 * k + 1
    d = width**dim
    rel = _window_offsets(dim, k) + k
    src = rel + np.asarray(offset)[None, :]
    valid = np.all((src >= 0) & (src < width), axis=1)
    src_flat = np.ravel_multi_index(tuple(np.clip(src, 0, width - 1).T), (width,) * dim)
    mat = np.zeros((d, d))
    survivors = src_flat[valid]
    for j in range(d):
        if valid[j]:
            mat[j, src_flat[j]] = 1.0
        else:
            mat[j, survivors] = 1.0 / survivors.size
    mat.setflags(write=False)
    return mat


def shift_fill_matrix(dim: int, k: int, offset) -> np.ndarray:
    """Linear operator ``F`` with ``F @ patch.ravel() == shift_window_fill(patch, offset).ravel()``."""
    offset = tuple(int(o) for o in np.atleast_1d(offset))
    if len(offset) != dim:
        raise InvalidOffsetError(f"offset must have {dim} components")
    if any(abs(o) > k for o in offset):
        raise InvalidOffsetError(f"offset {offset} exceeds half-width {k}")
    return _shift_fill_matrix(dim, k, offset)


def vectorize(v: np.ndarray) -> np.ndarray:
    """Row-major flattening of a lattice field."""
    v = np.asarray(v)
    if v.ndim < 1 or any(s != v.shape[0] for s in v.shape):
        raise ShapeError(f"field must be a cube, got shape {v.shape}")
    return v.reshape(-1).copy()


def devectorize(x: np.ndarray, shape: LatticeShape) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.size != shape.size:
        raise ShapeError(f"expected a vector of length {shape.size}, got shape {x.shape}")
    return x.reshape(shape.array_shape).copy()
