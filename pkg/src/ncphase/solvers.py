"""Eigensolvers: dense symmetric, block Lanczos, and Williamson normal form."""

from __future__ import annotations

import csv
import heapq
import io
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular

from .fockspace import FockOperator
from .hamiltonians import QuadraticForm

log = logging.getLogger(__name__)


class NotHermitianError(ValueError):
    pass


class IndefiniteFormError(ValueError):
    pass


def dense_eigen(matrix, tol: float = 1e-12):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    a = np.asarray(matrix.toarray() if sp.issparse(matrix) else matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {a.shape}")
    if a.size and np.abs(a - a.conj().T).max() > tol * max(1.0, np.abs(a).max()):
        raise NotHermitianError("matrix is not symmetric/Hermitian")
    return np.linalg.eigh((a + a.conj().T) / 2)


# --------------------------------------------------------------------------
# Lanczos


@dataclass(frozen=True)
class LanczosConfig:
    """Settings of the block Lanczos eigensolver.

    ``max_iter`` bounds the number of matrix-vector products.  The block
    size defaults to ``n_eigen`` (capped at 8) so that degenerate levels up to
    that multiplicity are all found; ``krylov_dim`` is the basis size at
    which the iteration is thick-restarted.
    """

    n_eigen: int = 4
    max_iter: int = 20000
    tolerance: float = 1e-10
    reorthogonalization: str = "full"
    seed: int = 0
    block_size: int | None = None
    krylov_dim: int | None = None

    def __post_init__(self):
        if self.n_eigen < 1:
            raise ValueError("n_eigen must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.reorthogonalization not in ("full", "selective"):
            raise ValueError("reorthogonalization must be 'full' or 'selective'")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass(frozen=True)
class LanczosResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    eigenvectors: np.ndarray
    converged: bool
    matvecs: int
    norm_estimate: float

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.eigenvalues.tolist(), self.residuals.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "residual"])
        for k, (e, r) in enumerate(zip(self.eigenvalues, self.residuals)):
            w.writerow([k, f"{e:.17g}", f"{r:.6e}"])
        return buf.getvalue()


class ConvergenceError(RuntimeError):
    def __init__(self, message, result: LanczosResult):
        super().__init__(message)
        self.result = result


def _as_matrix(op):
    if isinstance(op, FockOperator):
        return op.matrix
    return op


def _orthonormalize(w, vt, passes=2):
    """Project the columns of w against the rows of vt in place; return coefficients."""
    coef = np.zeros((vt.shape[0], w.shape[1]), dtype=np.result_type(vt, w))
    if vt.shape[0] == 0:
        return coef
    cplx = np.iscomplexobj(vt)
    for _ in range(passes):
        c = (vt @ w.conj()).conj() if cplx else vt @ w
        w -= vt.T @ c
        coef += c
    return coef


def _cholqr(w):
    """Thin QR by two Cholesky-QR sweeps; falls back to Householder."""
    try:
        r_total = None
        q = w
        for _ in range(2):
            g = q.conj().T @ q
            r = np.linalg.cholesky(g).conj().T
            q = solve_triangular(r, q.T, trans="T").T
            r_total = r if r_total is None else r @ r_total
        return q, r_total
    except np.linalg.LinAlgError:
        return np.linalg.qr(w)


def lanczos_lowest(op, cfg: LanczosConfig = LanczosConfig(), raise_on_failure: bool = False) -> LanczosResult:
    """Lowest ``cfg.n_eigen`` eigenpairs of a Hermitian operator.

    Block Lanczos with thick restart.  Every new block is orthogonalized
    against the whole Krylov basis (``full``) or against the retained Ritz
    vectors and the two previous blocks with a periodic full pass
    (``selective``).  Residual norms are recomputed by explicit matvec
    before returning; a pair counts as converged when its residual is at
    most ``tolerance * ||A||`` with ||A|| estimated by the largest Ritz
    value magnitude seen.
    """
    a = _as_matrix(op)
    n = a.shape[0]
    k_want = cfg.n_eigen
    if k_want >= n:
        raise ValueError(f"n_eigen={k_want} must be smaller than the dimension {n}")
    is_complex = np.issubdtype(a.dtype, np.complexfloating)
    dtype = np.complex128 if is_complex else np.float64
    b = min(cfg.block_size or min(k_want, 8), n)
    kmax = cfg.krylov_dim or max(20 * b, 3 * k_want + 2 * b, 40)
    kmax = min(kmax, n - b)
    if kmax < k_want + b:
        # small problems: Krylov space is the whole space
        from numpy.linalg import eigh

        dense = a.toarray() if sp.issparse(a) else np.asarray(a)
        vals, vecs = eigh((dense + dense.conj().T) / 2)
        vals, vecs = vals[:k_want], vecs[:, :k_want]
        res = np.linalg.norm(dense @ vecs - vecs * vals, axis=0)
        return LanczosResult(vals, res, vecs, True, n, float(np.abs(vals).max()))

    rng = np.random.default_rng(cfg.seed)
    cols = kmax + 2 * b
    # Krylov vectors are stored as rows so slices are contiguous
    V = np.zeros((cols, n), dtype=dtype)
    H = np.zeros((cols, cols), dtype=dtype)
    start = rng.standard_normal((n, b))
    if is_complex:
        start = start + 1j * rng.standard_normal((n, b))
    V[:b] = np.linalg.qr(start)[0].T

    kept = 0          # leading columns holding retained Ritz vectors
    processed = 0     # columns whose A-image has been folded into H
    matvecs = 0
    anorm = 0.0
    blocks_since_full = 0
    theta = U = None
    m = 0
    converged = False

    while True:
        while processed < kmax:
            cur = processed + b
            q = V[processed:cur].T
            w = np.array(a @ q, dtype=dtype, order="F")
            matvecs += b
            if cfg.reorthogonalization == "full" or blocks_since_full >= 5:
                coef = _orthonormalize(w, V[:cur])
                H[:cur, processed:cur] = coef
                blocks_since_full = 0
            else:
                lo = max(kept, processed - 2 * b)
                H[:kept, processed:cur] = _orthonormalize(w, V[:kept])
                H[lo:cur, processed:cur] = _orthonormalize(w, V[lo:cur])
                blocks_since_full += 1
            qn, r = _cholqr(w)
            scale = max(anorm, np.abs(np.diag(H[processed:cur, processed:cur])).max(), 1e-300)
            small = np.abs(np.diag(r)) < 1e-12 * scale
            if np.any(small):
                # invariant subspace found: continue with fresh random directions
                for i in np.flatnonzero(small):
                    z = rng.standard_normal((n, 1)).astype(dtype)
                    _orthonormalize(z, V[:cur])
                    _orthonormalize(z, qn[:, :i].T.copy())
                    qn[:, i:i + 1] = z / np.linalg.norm(z)
                    r[i, :] = 0.0
            V[cur:cur + b] = qn.T
            H[cur:cur + b, processed:cur] = r
            processed = cur

        m = processed
        t = H[:m, :m]
        t = (t + t.conj().T) / 2
        theta, U = np.linalg.eigh(t)
        anorm = max(anorm, float(np.abs(theta).max()))
        coupling = H[m:m + b, :m] @ U[:, :k_want]
        est = np.linalg.norm(coupling, axis=0)
        if np.all(est <= cfg.tolerance * anorm):
            converged = True
            break
        if matvecs >= cfg.max_iter:
            break
        # thick restart keeping the lowest Ritz vectors
        keep = min(max(k_want + b, m // 2), m - b)
        V[:keep] = U[:, :keep].T @ V[:m]
        V[keep:keep + b] = V[m:m + b]
        new_coupling = H[m:m + b, :m] @ U[:, :keep]
        H[:] = 0.0
        H[:keep, :keep] = np.diag(theta[:keep])
        H[keep:keep + b, :keep] = new_coupling
        kept = processed = keep

    vecs = (U[:, :k_want].T @ V[:m]).T
    vals = theta[:k_want].copy()
    resid = np.linalg.norm(np.asarray(a @ vecs) - vecs * vals, axis=0)
    matvecs += k_want
    ok = converged and bool(np.all(resid <= cfg.tolerance * anorm))
    result = LanczosResult(vals, resid, vecs, ok, matvecs, anorm)
    if not ok:
        log.warning("Lanczos stopped after %d matvecs without convergence (max residual %.3g)",
                    matvecs, resid.max())
        if raise_on_failure:
            raise ConvergenceError("Lanczos did not converge", result)
    return result


# --------------------------------------------------------------------------
# Williamson


@dataclass(frozen=True)
class SymplecticSpectrum:
    frequencies: np.ndarray
    zero_modes: int

    @property
    def n_dof(self) -> int:
        return len(self.frequencies) + self.zero_modes

    def levels(self, count: int) -> np.ndarray:
        """Lowest ``count`` eigenvalues of sum_k nu_k (n_k + 1/2)."""
        if self.zero_modes:
            raise ValueError("spectrum with zero modes is continuous/infinitely degenerate")
        return quantum_levels(self.frequencies, count)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "frequency"])
        for k, nu in enumerate(self.frequencies):
            w.writerow([k, f"{nu:.17g}"])
        buf.write(f"# zero_modes={self.zero_modes}\n")
        return buf.getvalue()


def symplectic_unit(n: int) -> np.ndarray:
    eye, zero = np.eye(n), np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def williamson(form: QuadraticForm, zero_tol: float = 1e-10, definite_tol: float = 1e-12) -> SymplecticSpectrum:
    """Symplectic eigenvalues of a positive semidefinite quadratic form.

    With S the symmetric square root of M, the skew matrix S J S has
    eigenvalues +-i nu_k.  Values below ``zero_tol`` times the largest are
    reported as zero modes.
    """
    mat = form.matrix
    n = form.n_dof
    w, u = np.linalg.eigh(mat)
    top = max(float(np.abs(w).max()), 1e-300)
    if w.min() < -definite_tol * top:
        raise IndefiniteFormError(f"form has a negative direction (eigenvalue {w.min():.3g})")
    # null directions are set to exactly zero; the square root would turn
    # their roundoff into O(sqrt(eps)) spurious frequencies
    w = np.where(w > definite_tol * top, w, 0.0)
    s = (u * np.sqrt(w)) @ u.T
    k = s @ symplectic_unit(n) @ s
    ev = np.linalg.eigvalsh(1j * k)
    nus = np.sort(np.abs(ev[n:]))
    big = nus.max() if nus.size else 0.0
    mask = nus > zero_tol * big if big > 0 else np.zeros(n, dtype=bool)
    return SymplecticSpectrum(nus[mask], int(n - mask.sum()))


def quantum_levels(frequencies, count: int) -> np.ndarray:
    """Lowest ``count`` values of sum_k nu_k (n_k + 1/2) over occupations n_k >= 0."""
    nus = np.asarray(frequencies, dtype=float)
    if np.any(nus <= 0):
        raise ValueError("frequencies must be positive")
    ground = 0.5 * nus.sum()
    start = (0,) * len(nus)
    heap, seen, out = [(ground, start)], {start}, []
    while heap and len(out) < count:
        e, occ = heapq.heappop(heap)
        out.append(e)
        for k in range(len(nus)):
            nxt = occ[:k] + (occ[k] + 1,) + occ[k + 1:]
            if nxt not in seen:
                seen.add(nxt)
                heapq.heappush(heap, (e + nus[k], nxt))
    return np.array(out)
