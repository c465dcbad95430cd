"""Dense small-matrix kernels: exponential, induced 2-norm, spectra, envelopes.

Every function accepts anything ``numpy.asarray`` turns into a square real
matrix and validates it on entry. Matrices larger than ``MAX_DIM`` are
rejected; the package targets hand-sized systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError

MAX_DIM = 64

#: Eigenvalues closer than this to a stability boundary mark a summary marginal.
MARGINAL_TOL = 1e-10

# Pade coefficients and 1-norm thresholds from Higham (2005), "The scaling
# and squaring method for the matrix exponential revisited".
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def as_matrix(A) -> np.ndarray:
    """Return ``A`` as a validated float64 square matrix (a new array)."""
    try:
        M = np.array(A, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"not a real matrix: {exc}") from None
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {M.shape}")
    if M.shape[0] > MAX_DIM:
        raise InvalidInputError(f"dimension {M.shape[0]} exceeds supported maximum {MAX_DIM}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    return M


def _pade_low(A, m):
    b = _PADE[m]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    powers = [ident, A2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ A2)
    U = sum(b[2 * k + 1] * powers[k] for k in range(m // 2 + 1))
    V = sum(b[2 * k] * powers[k] for k in range(m // 2 + 1))
    return A @ U, V


def _pade13(A):
    b = _PADE[13]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def matrix_exp(A, t: float = 1.0) -> np.ndarray:
    """Compute ``exp(t*A)`` by scaling and squaring with Pade approximants.

    The lowest Pade degree whose error bound covers ``||t*A||_1`` is used;
    beyond the degree-9 threshold the argument is scaled by ``2**-s`` for a
    degree-13 approximant and the result squared ``s`` times.

    Parameters
    ----------
    A : array_like
        Square real matrix.
    t : float
        Time (may be zero or negative).

    Returns
    -------
    numpy.ndarray
        The matrix exponential, a fresh array.
    """
    M = as_matrix(A)
    if not math.isfinite(t):
        raise InvalidInputError(f"time must be finite, got {t!r}")
    M *= t
    n = M.shape[0]
    norm1 = np.linalg.norm(M, 1)
    if norm1 == 0.0:
        return np.eye(n)
    s = 0
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            U, V = _pade_low(M, m)
            break
    else:
        s = max(0, int(math.ceil(math.log2(norm1 / _THETA[13]))))
        if s:
            M = M / 2.0 ** s
        U, V = _pade13(M)
    try:
        E = np.linalg.solve(V - U, V + U)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Pade denominator singular: {exc}") from None
    for _ in range(s):
        E = E @ E
    if not np.all(np.isfinite(E)):
        raise NumericalError("matrix exponential overflowed")
    return E


def induced_norm(A) -> float:
    """Euclidean-induced operator norm, ``sqrt(lambda_max(A^T A))``."""
    M = as_matrix(A)
    lam = np.linalg.eigvalsh(M.T @ M)
    return float(math.sqrt(max(lam[-1], 0.0)))


@dataclass(frozen=True)
class SpectralSummary:
    """Eigenvalue-derived stability indicators of one matrix.

    ``abscissa`` is the largest real part, ``radius`` the largest modulus.
    The flags use strict inequalities; ``marginal`` is set when an
    eigenvalue sits within ``MARGINAL_TOL`` of either boundary.
    """

    abscissa: float
    radius: float
    hurwitz: bool
    schur: bool
    marginal: bool = False


def spectral_summary(A) -> SpectralSummary:
    M = as_matrix(A)
    try:
        eig = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solver did not converge: {exc}") from None
    abscissa = float(np.max(eig.real))
    radius = float(np.max(np.abs(eig)))
    marginal = bool(np.any(np.abs(eig.real) <= MARGINAL_TOL)
                    or np.any(np.abs(np.abs(eig) - 1.0) <= MARGINAL_TOL))
    return SpectralSummary(abscissa=abscissa, radius=radius,
                           hurwitz=abscissa < 0.0, schur=radius < 1.0,
                           marginal=marginal)


def spectral_abscissa(A) -> float:
    return spectral_summary(A).abscissa


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, a, b, tol=1e-10, maxiter=200):
    """Golden-section search for a maximum of ``f`` on ``[a, b]``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best_t, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(maxiter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
            if fc > best_f:
                best_t, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
            if fd > best_f:
                best_t, best_f = d, fd
    return best_t, best_f


def envelope_bound(A, T: float, grid: int = 1024) -> tuple[float, float]:
    """Constants ``(k, alpha)`` with ``||exp(tA)|| <= k exp(alpha t)`` on ``[0, T]``.

    ``alpha`` is the spectral abscissa. ``k`` is the maximum of
    ``||exp(tA)|| exp(-alpha t)`` over ``grid`` uniform points, refined by a
    golden-section search on the two cells around the grid maximum. The
    bound is exact on the grid; between grid points it is a heuristic.
    """
    M = as_matrix(A)
    if not (math.isfinite(T) and T > 0):
        raise InvalidInputError(f"envelope horizon must be positive, got {T!r}")
    alpha = spectral_abscissa(M)

    def weighted(t):
        return induced_norm(matrix_exp(M, t)) * math.exp(-alpha * t)

    ts = np.linspace(0.0, T, grid)
    vals = np.array([weighted(t) for t in ts])
    j = int(np.argmax(vals))
    k = float(vals[j])
    lo, hi = ts[max(j - 1, 0)], ts[min(j + 1, grid - 1)]
    if hi > lo:
        _, refined = _golden_max(weighted, lo, hi)
        k = max(k, refined)
    return max(k, 1.0), alpha
