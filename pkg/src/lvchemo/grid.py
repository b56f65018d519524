"""Cell-centered finite-volume primitives on intervals and rectangles.

All operators close the boundary with homogeneous Neumann conditions: the
flux through every boundary face is identically zero, so ``divergence`` of
any face field integrates to zero and ``laplacian`` conserves mass.

Arrays have shape ``(nx,)`` in 1D and ``(nx, ny)`` in 2D. The array-level
helpers (``grad_x``, ``div_arrays``, ...) are what the solvers call in
their inner loops; the ``Field``-level functions wrap them with validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    dim: int
    nx: int
    lx: float = 1.0
    ny: int = 1
    ly: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if self.nx < 4:
            raise GridError(f"nx must be >= 4, got {self.nx}")
        if self.dim == 1 and self.ny != 1:
            raise GridError("ny must be 1 for a 1D grid")
        if self.dim == 2 and self.ny < 4:
            raise GridError(f"ny must be >= 4, got {self.ny}")
        if not (self.lx > 0 and math.isfinite(self.lx)):
            raise GridError(f"lx must be positive, got {self.lx}")
        if self.dim == 2 and not (self.ly > 0 and math.isfinite(self.ly)):
            raise GridError(f"ly must be positive, got {self.ly}")

    @classmethod
    def line(cls, nx: int, lx: float = 1.0) -> "GridSpec":
        return cls(dim=1, nx=nx, lx=lx)

    @classmethod
    def rect(cls, nx: int, ny: int, lx: float = 1.0, ly: float = 1.0) -> "GridSpec":
        return cls(dim=2, nx=nx, lx=lx, ny=ny, ly=ly)

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny if self.dim == 2 else 1.0

    @property
    def h(self) -> float:
        return min(self.dx, self.dy) if self.dim == 2 else self.dx

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nx,) if self.dim == 1 else (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.dx if self.dim == 1 else self.dx * self.dy

    @property
    def measure(self) -> float:
        return self.lx if self.dim == 1 else self.lx * self.ly

    def centers(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates, broadcast to the field shape."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        if self.dim == 1:
            return (x,)
        y = (np.arange(self.ny) + 0.5) * self.dy
        X, Y = np.meshgrid(x, y, indexing="ij")
        return X, Y

    def x_faces(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.dx

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def full(self, value: float) -> "Field":
        return Field(self, np.full(self.shape, float(value)))


@dataclass(frozen=True, eq=False)
class Field:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            if vals.size != self.grid.size:
                raise GridError(
                    f"field has {vals.size} values, grid needs {self.grid.size}"
                )
            vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise GridError("field contains non-finite values")
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class FaceField:
    """Normal components on cell faces.

    ``fx[i]`` sits on the face between cells ``i-1`` and ``i`` along x, so
    ``fx[0]`` and ``fx[-1]`` are boundary faces. Same for ``fy`` along y.
    """

    grid: GridSpec
    fx: np.ndarray
    fy: np.ndarray | None = field(default=None)

    def __post_init__(self):
        g = self.grid
        fx = np.asarray(self.fx, dtype=float)
        want = (g.nx + 1,) if g.dim == 1 else (g.nx + 1, g.ny)
        if fx.shape != want:
            raise GridError(f"fx shape {fx.shape}, expected {want}")
        if fx[0].any() or fx[-1].any():
            raise GridError("boundary x-faces must be zero")
        object.__setattr__(self, "fx", fx)
        if g.dim == 2:
            if self.fy is None:
                raise GridError("2D face field needs fy")
            fy = np.asarray(self.fy, dtype=float)
            if fy.shape != (g.nx, g.ny + 1):
                raise GridError(f"fy shape {fy.shape}, expected {(g.nx, g.ny + 1)}")
            if fy[:, 0].any() or fy[:, -1].any():
                raise GridError("boundary y-faces must be zero")
            object.__setattr__(self, "fy", fy)

    def max_abs(self) -> float:
        m = float(np.max(np.abs(self.fx)))
        if self.fy is not None:
            m = max(m, float(np.max(np.abs(self.fy))))
        return m


def _check(f: Field) -> np.ndarray:
    if not isinstance(f, Field):
        raise TypeError(f"expected Field, got {type(f).__name__}")
    return f.values


# -- array-level kernels ---------------------------------------------------


def grad_x(a: np.ndarray, dx: float) -> np.ndarray:
    """x-face differences with zero boundary faces; shape (nx+1, ...)."""
    out = np.zeros((a.shape[0] + 1,) + a.shape[1:])
    out[1:-1] = (a[1:] - a[:-1]) / dx
    return out


def grad_y(a: np.ndarray, dy: float) -> np.ndarray:
    out = np.zeros((a.shape[0], a.shape[1] + 1))
    out[:, 1:-1] = (a[:, 1:] - a[:, :-1]) / dy
    return out


def div_arrays(fx: np.ndarray, fy: np.ndarray | None, dx: float, dy: float) -> np.ndarray:
    d = (fx[1:] - fx[:-1]) / dx
    if fy is not None:
        d = d + (fy[:, 1:] - fy[:, :-1]) / dy
    return d


def laplacian_array(a: np.ndarray, grid: GridSpec) -> np.ndarray:
    fx = grad_x(a, grid.dx)
    fy = grad_y(a, grid.dy) if grid.dim == 2 else None
    return div_arrays(fx, fy, grid.dx, grid.dy)


def total(a: np.ndarray) -> float:
    # math.fsum is exactly rounded; keeps conservation checks at the 1e-16 level
    return math.fsum(a.ravel().tolist())


# -- Field-level operations -------------------------------------------------


def integrate(f: Field) -> float:
    return total(_check(f)) * f.grid.cell_volume


def lp_norm(f: Field, p: float) -> float:
    """Discrete L^p norm; ``p=math.inf`` gives the max norm."""
    a = np.abs(_check(f))
    if math.isinf(p) and p > 0:
        return float(a.max())
    if not p >= 1:
        raise GridError(f"p must be >= 1, got {p}")
    if p == 1:
        return total(a) * f.grid.cell_volume
    # scale by the max to avoid overflow for large p
    m = float(a.max())
    if m == 0.0:
        return 0.0
    return m * (total((a / m) ** p) * f.grid.cell_volume) ** (1.0 / p)


def gradient_faces(f: Field) -> FaceField:
    a = _check(f)
    g = f.grid
    fy = grad_y(a, g.dy) if g.dim == 2 else None
    return FaceField(g, grad_x(a, g.dx), fy)


def divergence(F: FaceField) -> Field:
    g = F.grid
    return Field(g, div_arrays(F.fx, F.fy, g.dx, g.dy))


def laplacian(f: Field) -> Field:
    return Field(f.grid, laplacian_array(_check(f), f.grid))


def cell_gradient(a: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, ...]:
    """Per-cell gradient: mean of the adjacent interior face differences.

    Boundary faces carry no information (they are zero by construction), so
    a boundary cell takes its single interior face value.
    """
    comps = []
    fx = grad_x(a, grid.dx)
    cnt = np.full(grid.nx, 2.0)
    cnt[0] = cnt[-1] = 1.0
    if grid.dim == 2:
        cnt = cnt[:, None]
    comps.append((fx[1:] + fx[:-1]) / cnt)
    if grid.dim == 2:
        fy = grad_y(a, grid.dy)
        cy = np.full(grid.ny, 2.0)
        cy[0] = cy[-1] = 1.0
        comps.append((fy[:, 1:] + fy[:, :-1]) / cy[None, :])
    return tuple(comps)


def grad_norm_q_array(a: np.ndarray, grid: GridSpec, q: float) -> float:
    comps = cell_gradient(a, grid)
    mag2 = sum(c * c for c in comps)
    return total(mag2 ** (q / 2.0)) * grid.cell_volume


def grad_norm_q(f: Field, q: float) -> float:
    """Discrete ``int |grad f|^q`` using cell-averaged face gradients."""
    if not q > 1:
        raise GridError(f"q must be > 1, got {q}")
    return grad_norm_q_array(_check(f), f.grid, q)
