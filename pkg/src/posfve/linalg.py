"""Sparse matrix-vector products and restarted GMRES with Jacobi preconditioning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, SingularMatrix


@dataclass(frozen=True)
class KrylovConfig:
    restart: int = 30
    rel_tol: float = 1e-12
    abs_tol: float = 1e-300
    max_iters: int = 5000

    def __post_init__(self):
        if self.restart < 1:
            raise InvalidArgument("restart must be >= 1")
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise InvalidArgument("tolerances must be positive")


@dataclass
class KrylovResult:
    x: np.ndarray
    iters: int
    residual_norm: float
    converged: bool


def spmv(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise InvalidArgument(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def krylov_solve(A, b, cfg: KrylovConfig = KrylovConfig(), x0=None) -> KrylovResult:
    """GMRES(m) on ``D^{-1} A x = D^{-1} b`` with D = diag(A).

    Convergence is judged on the true residual: ``||b - A x|| <= rel_tol ||b||``.
    The inner cycle stops early once its (preconditioned) residual estimate
    has dropped by the factor still needed; the true residual is then
    recomputed and another cycle started if necessary. Non-convergence is
    reported via ``converged=False``, never raised.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise InvalidArgument("matrix must be square")
    b = np.asarray(b, dtype=float)
    if b.shape != (n,) or not np.all(np.isfinite(b)):
        raise InvalidArgument("right-hand side must be a finite vector of matching size")
    d = A.diagonal()
    if np.any(d == 0.0):
        raise SingularMatrix("zero diagonal entry, Jacobi preconditioner undefined")
    dinv = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)

    bnorm = float(np.linalg.norm(b))
    target = max(cfg.rel_tol * bnorm, cfg.abs_tol)
    m = min(cfg.restart, n)
    iters = 0
    r = b - A @ x
    rnorm = float(np.linalg.norm(r))
    V = np.empty((m + 1, n))
    H = np.zeros((m + 1, m))
    while rnorm > target and iters < cfg.max_iters:
        z = dinv * r
        beta = float(np.linalg.norm(z))
        if beta == 0.0:
            break
        # aim a bit below the remaining reduction; the preconditioned norm is only a proxy
        inner_tol = 0.5 * beta * target / rnorm
        V[0] = z / beta
        H[:] = 0.0
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        k = 0
        for j in range(m):
            w = dinv * (A @ V[j])
            # classical Gram-Schmidt, applied twice
            h = V[: j + 1] @ w
            w -= h @ V[: j + 1]
            h2 = V[: j + 1] @ w
            w -= h2 @ V[: j + 1]
            h += h2
            hn = float(np.linalg.norm(w))
            H[: j + 1, j] = h
            H[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                raise SingularMatrix("GMRES breakdown with zero Hessenberg column")
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            iters += 1
            k = j + 1
            if hn <= 1e-14 * beta or abs(g[j + 1]) <= inner_tol or iters >= cfg.max_iters:
                break
            V[j + 1] = w / hn
        y = np.zeros(k)
        for i in range(k - 1, -1, -1):
            y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:k]) / H[i, i]
        x += y @ V[:k]
        r = b - A @ x
        rnorm_new = float(np.linalg.norm(r))
        if rnorm_new >= rnorm and k == 0:
            break
        rnorm = rnorm_new
    return KrylovResult(x=x, iters=iters, residual_norm=rnorm, converged=rnorm <= target)
