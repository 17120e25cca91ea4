"""Dense matrix/vector kernels shared by every other module.

Everything here is deterministic, desk-scale, and pure: the in-place fast
Walsh-Hadamard butterfly, a cyclic Jacobi eigensolver for small symmetric
matrices, extreme singular values through the smaller Gram matrix, least
squares via normal equations, and direct circular convolution.

Hadamard matrices are never materialized; only the butterfly is exposed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractError, DimensionError, SingularMatrixError

# Jacobi sweep target: off-diagonal Frobenius norm below this times ||M||_F.
_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 60


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    if n <= 1:
        return 1
    return 1 << (n - 1).bit_length()


def require_finite(a: np.ndarray, what: str = "input") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ContractError(f"{what} contains NaN or Inf entries")
    return a


def fwht_normalized(v: np.ndarray) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform W @ v, entries of W are +-1/sqrt(n).

    Accepts a vector of power-of-two length, or a matrix whose axis-0 length
    is a power of two (each column is transformed).  O(n log n) butterfly;
    the transform is an involution.
    """
    a = np.array(v, dtype=float, copy=True, order="C")
    n = a.shape[0]
    if not is_power_of_two(n):
        raise DimensionError(f"fwht length must be a power of two, got {n}")
    flat_vector = a.ndim == 1
    if flat_vector:
        a = a[:, None]
    cols = a.shape[1]
    h = 1
    while h < n:
        pairs = a.reshape(n // (2 * h), 2, h, cols)
        top = pairs[:, 0]
        bot = pairs[:, 1]
        diff = top - bot
        top += bot
        bot[...] = diff
        h *= 2
    a /= math.sqrt(n)
    return a[:, 0] if flat_vector else a


def symmetric_eigenvalues(m: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi sweeps.

    Iterates until the off-diagonal Frobenius norm drops below
    1e-12 * ||M||_F.  Intended for the small matrices this package works
    with (Gram matrices of restricted supports, lifted spectra checks).
    """
    a = require_finite(m, "matrix")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    if np.max(np.abs(a - a.T)) > 1e-10 * max(1.0, scale):
        raise ContractError("matrix is not symmetric within 1e-10")
    a = 0.5 * (a + a.T)
    if n == 1:
        return a.diagonal().copy()

    for _ in range(_JACOBI_MAX_SWEEPS):
        off = math.sqrt(max(0.0, np.sum(a * a) - np.sum(a.diagonal() ** 2)))
        if off <= _JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 0.25 * _JACOBI_TOL * scale / (n * n):
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
    return np.sort(a.diagonal())


def spectral_extremes(m: np.ndarray) -> tuple[float, float]:
    """(sigma_min, sigma_max) of an arbitrary matrix.

    Square roots of the extreme eigenvalues of the smaller of M^T M
    and M M^T.
    """
    a = require_finite(m, "matrix")
    if a.ndim == 1:
        a = a[None, :]
    rows, cols = a.shape
    gram = a.T @ a if cols <= rows else a @ a.T
    lam = symmetric_eigenvalues(gram)
    lo = math.sqrt(max(lam[0], 0.0))
    hi = math.sqrt(max(lam[-1], 0.0))
    return lo, hi


def least_squares(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """argmin_x ||A x - b||_2 through the normal equations.

    A must have at least as many rows as columns and a numerically
    nonsingular Gram matrix; rank-deficient systems raise
    SingularMatrixError carrying the condition estimate.
    """
    a = require_finite(a, "matrix")
    b = require_finite(b, "right-hand side")
    if a.ndim != 2:
        raise DimensionError("A must be a matrix")
    if b.ndim != 1 or b.shape[0] != a.shape[0]:
        raise DimensionError(
            f"b has length {b.shape[0] if b.ndim == 1 else '?'}, expected {a.shape[0]}"
        )
    rows, cols = a.shape
    if rows < cols:
        raise DimensionError(f"underdetermined system {rows}x{cols}")
    gram = a.T @ a
    lam = symmetric_eigenvalues(gram)
    if lam[0] <= 1e-12 * lam[-1]:
        cond = math.inf if lam[0] <= 0 else math.sqrt(lam[-1] / lam[0])
        raise SingularMatrixError(
            f"rank-deficient least-squares system (condition ~ {cond:.3e})",
            condition_estimate=cond,
        )
    # Eigendecomposition of the Gram matrix doubles as the solver.
    vecs = _eigenvectors_for(gram, lam)
    rhs = a.T @ b
    y = vecs.T @ rhs
    return vecs @ (y / lam)


def _eigenvectors_for(gram: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Orthonormal eigenvectors matching symmetric_eigenvalues' output order.

    Runs the same Jacobi iteration but accumulates the rotations.  Kept
    separate so symmetric_eigenvalues stays allocation-light.
    """
    a = gram.astype(float).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return v
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = math.sqrt(max(0.0, np.sum(a * a) - np.sum(a.diagonal() ** 2)))
        if off <= _JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 0.25 * _JACOBI_TOL * scale / (n * n):
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    order = np.argsort(a.diagonal())
    return v[:, order]


def circular_convolve(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y_i = sum_j g_{(i-j) mod n} x_j, computed directly in O(n^2).

    Real arithmetic only; sized for the attack and benchmark uses
    (n <= 4096), so no FFT.
    """
    g = require_finite(g, "generator")
    x = require_finite(x, "input")
    if g.ndim != 1 or x.ndim != 1 or g.shape[0] != x.shape[0]:
        raise DimensionError("circular_convolve requires equal-length vectors")
    n = g.shape[0]
    out = np.empty(n)
    idx = np.arange(n)
    for i in range(n):
        out[i] = np.dot(g[(i - idx) % n], x)
    return out


def circulant_rows(g: np.ndarray, count: int) -> np.ndarray:
    """First `count` rows of the circulant matrix generated by g."""
    g = require_finite(g, "generator")
    n = g.shape[0]
    idx = np.arange(n)
    return np.stack([g[(i - idx) % n] for i in range(count)])


def save_matrix_csv(path, m: np.ndarray) -> None:
    """Write a matrix as CSV: first line "rows,cols", then row-major values.

    Values are written with shortest round-trip notation (exact at 17
    significant digits).
    """
    a = np.atleast_2d(np.asarray(m, dtype=float))
    rows, cols = a.shape
    with open(path, "w") as fh:
        fh.write(f"{rows},{cols}\n")
        for i in range(rows):
            fh.write(",".join(repr(float(v)) for v in a[i]) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            rows, cols = (int(part) for part in header.split(","))
        except ValueError as exc:
            raise DimensionError(f"bad matrix header {header!r}") from exc
        values = []
        for line in fh:
            line = line.strip()
            if line:
                values.extend(float(tok) for tok in line.split(","))
    if len(values) != rows * cols:
        raise DimensionError(
            f"expected {rows * cols} values, found {len(values)}"
        )
    return np.array(values).reshape(rows, cols)
