"""Signal equation ``0 = d3*lap(w) + alpha*u + beta*v - gamma*w`` with Neumann BC.

The discrete operator ``gamma*I - d3*L_h`` is a symmetric, strictly
diagonally dominant M-matrix. 1D grids are solved directly (tridiagonal),
2D grids with conjugate gradients, optionally warm-started.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from .grid import Field, GridSpec, laplacian_array, lp_norm, total
from .params import ModelParams


class EllipticError(RuntimeError):
    def __init__(self, msg: str, iterations: int = 0, residual: float = math.nan):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class EllipticConfig:
    tol: float = 1e-10
    max_iter: int = 20000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class EllipticStats:
    iterations: int
    final_residual: float


def apply_operator(w: np.ndarray, grid: GridSpec, d3: float, gamma: float) -> np.ndarray:
    return gamma * w - d3 * laplacian_array(w, grid)


@lru_cache(maxsize=32)
def _banded(grid: GridSpec, d3: float, gamma: float) -> np.ndarray:
    n = grid.nx
    c = d3 / grid.dx**2
    ab = np.zeros((3, n))
    ab[0, 1:] = -c
    ab[2, :-1] = -c
    ab[1, :] = gamma + 2 * c
    ab[1, 0] = ab[1, -1] = gamma + c
    return ab


@lru_cache(maxsize=32)
def _sparse(grid: GridSpec, d3: float, gamma: float) -> sp.csr_matrix:
    def lap1(n, h):
        main = np.full(n, -2.0)
        main[0] = main[-1] = -1.0
        off = np.ones(n - 1)
        return sp.diags([off, main, off], [-1, 0, 1]) / h**2

    Lx = lap1(grid.nx, grid.dx)
    Ly = lap1(grid.ny, grid.dy)
    # C-order flattening of (nx, ny): y is the fast index
    L = sp.kron(Lx, sp.identity(grid.ny)) + sp.kron(sp.identity(grid.nx), Ly)
    return (gamma * sp.identity(grid.size) - d3 * L).tocsr()


def _cg(A, b, x0, tol, max_iter):
    """Unpreconditioned CG; the diagonal of A is constant, so Jacobi is a no-op."""
    x = x0.copy()
    r = b - A @ x
    bnorm = math.sqrt(float(b @ b))
    target = tol * bnorm
    rr = float(r @ r)
    if math.sqrt(rr) <= target:
        return x, 0, math.sqrt(rr)
    p = r.copy()
    for k in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rr / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= target:
            return x, k, math.sqrt(rr_new)
        p *= rr_new / rr
        p += r
        rr = rr_new
    raise EllipticError(
        f"CG did not converge in {max_iter} iterations "
        f"(relative residual {math.sqrt(rr) / bnorm if bnorm else math.inf:.3e})",
        iterations=max_iter,
        residual=math.sqrt(rr),
    )


def solve_array(
    rhs: np.ndarray,
    grid: GridSpec,
    d3: float,
    gamma: float,
    cfg: EllipticConfig = EllipticConfig(),
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, EllipticStats]:
    """Solve ``(gamma - d3*L_h) w = rhs`` on ``grid``."""
    if not np.all(np.isfinite(rhs)):
        raise EllipticError("non-finite right-hand side")
    if grid.dim == 1:
        w = solve_banded((1, 1), _banded(grid, d3, gamma), rhs, check_finite=False)
        iters = 1
    else:
        A = _sparse(grid, d3, gamma)
        b = rhs.ravel()
        x0 = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).ravel()
        iters = 0
        # the recursively updated CG residual drifts from the true one on
        # ill-conditioned systems; restart from the corrected iterate until
        # the true residual meets tol
        while True:
            try:
                w, k, _ = _cg(A, b, x0, cfg.tol, cfg.max_iter - iters)
            except EllipticError as exc:
                raise EllipticError(str(exc), iters + exc.iterations, exc.residual) from None
            iters += k
            w = _constant_mode_fix(w, rhs, gamma, grid)
            rel = _rel_residual(w, rhs, grid, d3, gamma)
            if rel <= cfg.tol or k == 0 or iters >= cfg.max_iter:
                break
            x0 = w
        w = w.reshape(grid.shape)
        if rel > cfg.tol:
            raise EllipticError(f"residual {rel:.3e} above tol {cfg.tol:.1e}", iters, rel)
        return w, EllipticStats(iterations=iters, final_residual=rel)
    w = _constant_mode_fix(w, rhs, gamma, grid)
    return w, EllipticStats(iterations=iters, final_residual=_rel_residual(w, rhs, grid, d3, gamma))


def _constant_mode_fix(w, rhs, gamma, grid):
    """Exact correction in the constant eigenmode: pins gamma*sum(w) = sum(rhs)."""
    return w + (total(rhs) / gamma - total(w)) / grid.size


def _rel_residual(w, rhs, grid, d3, gamma) -> float:
    res = rhs - apply_operator(w.reshape(grid.shape), grid, d3, gamma)
    rel = float(np.linalg.norm(res.ravel()))
    bn = float(np.linalg.norm(rhs.ravel()))
    return rel / bn if bn > 0 else rel


def signal_rhs(u: np.ndarray, v: np.ndarray, params: ModelParams) -> np.ndarray:
    return params.alpha * u + params.beta * v


def solve_w(
    u: Field,
    v: Field,
    params: ModelParams,
    cfg: EllipticConfig = EllipticConfig(),
    warm_start: Field | None = None,
) -> tuple[Field, EllipticStats]:
    if u.grid != v.grid:
        raise ValueError("u and v live on different grids")
    x0 = None if warm_start is None else warm_start.values
    w, stats = solve_array(
        signal_rhs(u.values, v.values, params), u.grid, params.d3, params.gamma, cfg, x0
    )
    return Field(u.grid, w), stats


def verify_lp_bound(u: Field, v: Field, w: Field, params: ModelParams, p: float) -> float:
    """Margin in ``||w||_p <= (alpha/gamma)||u||_p + (beta/gamma)||v||_p``."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    g = params.gamma
    return params.alpha / g * lp_norm(u, p) + params.beta / g * lp_norm(v, p) - lp_norm(w, p)
