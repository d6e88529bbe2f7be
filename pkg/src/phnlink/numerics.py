"""Complex vector/matrix primitives shared by every other module.

Conventions used throughout the package:

* Signal transforms (``dft``/``idft``) are unitary, i.e. scaled by 1/sqrt(N)
  in both directions.  Phase-noise spectral coefficients use a separate 1/N
  convention which lives in :mod:`phnlink.phase_noise`; the two are never
  mixed silently.
* Linear solves go through factorizations, never explicit inverses.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import blas as _blas
from scipy.linalg import lapack as _lapack

from .exceptions import DimensionError, SingularMatrixError

# Condition-number estimate above which a lambda=0 solve is declared singular.
SINGULAR_COND = 1e12


def as_cvec(x, n: int | None = None) -> np.ndarray:
    """Validate and return ``x`` as a 1-D complex128 array.

    Raises DimensionError if the length differs from ``n`` (when given),
    the array is empty, or any element is non-finite.
    """
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    if v.size == 0:
        raise DimensionError("empty vector")
    if n is not None and v.size != n:
        raise DimensionError(f"expected length {n}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise DimensionError("vector contains NaN/Inf")
    return v


def as_cmat(a) -> np.ndarray:
    """Validate and return ``a`` as a 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    if m.size == 0:
        raise DimensionError("empty matrix")
    if not np.all(np.isfinite(m)):
        raise DimensionError("matrix contains NaN/Inf")
    return m


def dft(x, n: int | None = None) -> np.ndarray:
    """Unitary DFT: X(k) = (1/sqrt(N)) sum_n x(n) exp(-j 2 pi k n / N)."""
    v = as_cvec(x, n)
    return np.fft.fft(v, norm="ortho")


def idft(x, n: int | None = None) -> np.ndarray:
    """Unitary inverse DFT, the exact inverse of :func:`dft`."""
    v = as_cvec(x, n)
    return np.fft.ifft(v, norm="ortho")


def dft_matrix(n: int) -> np.ndarray:
    """The N x N unitary DFT matrix F with F[l, p] = exp(-j 2 pi p l / N)/sqrt(N)."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def circular_convolve(a, b) -> np.ndarray:
    """Circular convolution c(n) = sum_l a(l) b((n-l) mod N).

    ``b`` may be shorter than ``a`` (e.g. a CIR with L < N); it is zero-padded.
    Under the unitary transform convention, dft(c) = sqrt(N) * dft(a) * dft(b)
    elementwise.
    """
    av = as_cvec(a)
    bv = as_cvec(b)
    n = av.size
    if bv.size > n:
        raise DimensionError(f"kernel longer ({bv.size}) than signal ({n})")
    if bv.size < n:
        bv = np.concatenate([bv, np.zeros(n - bv.size, dtype=np.complex128)])
    # Plain (non-unitary) FFT pair implements the convolution sum exactly.
    return np.fft.ifft(np.fft.fft(av) * np.fft.fft(bv))


def cholesky_factor(gram: np.ndarray, check_singular: bool = False) -> np.ndarray:
    """Upper Cholesky factor of a Hermitian positive-definite Gram matrix.

    With ``check_singular`` the reciprocal condition estimate is verified
    against the 1e12 singularity threshold.
    """
    factor, info = _lapack.zpotrf(gram, lower=0, clean=0, overwrite_a=0)
    if info != 0:
        raise SingularMatrixError(f"Cholesky factorization failed (info={info})")
    if check_singular:
        anorm = np.linalg.norm(gram, 1)
        rcond, pinfo = _lapack.zpocon(factor, anorm)
        if pinfo != 0 or rcond < 1.0 / SINGULAR_COND:
            raise SingularMatrixError(
                f"Gram matrix numerically singular (cond > {SINGULAR_COND:.0e})"
            )
    return factor


def gram_cholesky(a: np.ndarray, lam: float, check_singular: bool = False) -> np.ndarray:
    """Upper Cholesky factor of A^H A + lam I, built via a Hermitian rank-k update.

    Only the upper triangle of the Gram matrix is formed; the 1-norm needed
    for the singularity estimate is reconstructed from it.
    """
    gram = _blas.zherk(1.0, a, trans=2, lower=0)
    idx = np.arange(gram.shape[0])
    gram[idx, idx] = gram[idx, idx].real + lam
    anorm = None
    if check_singular:
        mags = np.abs(gram)
        anorm = float(np.max(mags.sum(axis=0) + mags.sum(axis=1) - mags[idx, idx]))
    factor, info = _lapack.zpotrf(gram, lower=0, clean=0, overwrite_a=1)
    if info != 0:
        raise SingularMatrixError(f"Cholesky factorization failed (info={info})")
    if check_singular:
        rcond, pinfo = _lapack.zpocon(factor, anorm)
        if pinfo != 0 or rcond < 1.0 / SINGULAR_COND:
            raise SingularMatrixError(
                f"Gram matrix numerically singular (cond > {SINGULAR_COND:.0e})"
            )
    return factor


def cholesky_solve(factor: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve against a factor from :func:`cholesky_factor`."""
    rhs2d = rhs if rhs.ndim == 2 else rhs[:, None]
    x, info = _lapack.zpotrs(factor, np.ascontiguousarray(rhs2d), lower=0)
    if info != 0:
        raise SingularMatrixError(f"triangular solve failed (info={info})")
    return x if rhs.ndim == 2 else x[:, 0]


def gram_inverse_diagonal(factor: np.ndarray) -> np.ndarray:
    """diag(G^-1) from G's upper Cholesky factor, via a triangular inverse."""
    rinv, info = _lapack.ztrtri(factor, lower=0, unitdiag=0)
    if info != 0:
        raise SingularMatrixError(f"triangular inverse failed (info={info})")
    return np.sum(np.abs(rinv) ** 2, axis=1)


def regularized_solve(a, y, lam: float) -> np.ndarray:
    """Solve min_x ||y - A x||^2 + lam ||x||^2 via Cholesky on the normal equations.

    With lam == 0 this is the plain least-squares solution; the Gram matrix
    must then be numerically invertible (condition estimate <= 1e12).
    """
    a = as_cmat(a)
    y = as_cvec(y, a.shape[0])
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    factor = gram_cholesky(a, lam, check_singular=(lam == 0))
    return cholesky_solve(factor, a.conj().T @ y)


def gram_solve_with_diagonal(a, y, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`regularized_solve` but also return diag((A^H A + lam I)^-1).

    The diagonal is what an MMSE demapper needs for per-component bias and
    post-equalization noise variance.
    """
    a = as_cmat(a)
    y = as_cvec(y, a.shape[0])
    factor = gram_cholesky(a, lam, check_singular=(lam == 0))
    x = cholesky_solve(factor, a.conj().T @ y)
    return x, gram_inverse_diagonal(factor)
