"""Spectral objects of one draw X: resolvents and their exact identities.

Everything is computed from a single symmetric eigendecomposition of
K = X X^T / n, cached on the sample; each evaluation at a new z then costs
O(p^2).  Evaluation points must keep away from the spectrum: z counts as
singular when its distance to the eigenvalues is below 1e-12 * max(1, lambda_1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePivotError, DivergenceError, SingularPointError

SINGULAR_RTOL = 1e-12
PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class SpectralPoint:
    """Evaluation point with its exact distance to a sample's spectrum."""

    z: complex
    dist_to_spectrum: float


class ResolventSample:
    """One draw X with the eigendecomposition of K = X X^T / n cached.

    Immutable after construction; evaluations at distinct z are read-only
    and safe to run concurrently.
    """

    def __init__(self, X: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"X must be a matrix, got shape {X.shape}")
        self.X = X
        self.p, self.n = X.shape
        self.K = X @ X.T / self.n
        w, U = np.linalg.eigh(self.K)
        # K is PSD up to roundoff; clamp the roundoff, reject real defects
        if w[0] < -1e-10 * max(1.0, abs(w[-1])):
            raise ValueError(f"K has a significantly negative eigenvalue {w[0]:.3e}")
        w = np.maximum(w, 0.0)
        self.eigenvalues = w[::-1].copy()          # descending
        self.eigenvectors = U[:, ::-1].copy()
        self.X.setflags(write=False)
        self.K.setflags(write=False)
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])

    def dist_to_spectrum(self, z: complex) -> float:
        return float(np.min(np.abs(z - self.eigenvalues)))

    def spectral_point(self, z: complex) -> SpectralPoint:
        return SpectralPoint(complex(z), self.dist_to_spectrum(z))

    def _check_off_spectrum(self, z: complex) -> None:
        if self.dist_to_spectrum(z) < SINGULAR_RTOL * max(1.0, self.lambda_max):
            raise SingularPointError(f"z={z!r} is on the spectrum")


def _narrow(z: complex):
    """Return z as a float when its imaginary part is exactly zero."""
    z = complex(z)
    return z.real if z.imag == 0.0 else z


def resolvent(s: ResolventSample, z: complex) -> np.ndarray:
    """Q^z = (z I - K)^{-1}, real for real z, complex otherwise."""
    s._check_off_spectrum(z)
    zz = _narrow(z)
    vals = 1.0 / (zz - s.eigenvalues)
    return (s.eigenvectors * vals) @ s.eigenvectors.T


def stieltjes(s: ResolventSample, z: complex):
    """(1/p) tr Q^z.

    This is the +trace convention; callers wanting the opposite sign
    negate it themselves.
    """
    s._check_off_spectrum(z)
    zz = _narrow(z)
    return (1.0 / (zz - s.eigenvalues)).mean()


def abs_resolvent_sq(s: ResolventSample, z: complex) -> np.ndarray:
    """|Q^z|^2 = (Im(z)^2 + (Re(z) I - K)^2)^{-1}, a real symmetric matrix.

    Satisfies Re(Q^z) = (Re(z) I - K) |Q^z|^2 and Im(Q^z) = -Im(z) |Q^z|^2.
    """
    z = complex(z)
    if z.imag == 0.0:
        s._check_off_spectrum(z)
    vals = 1.0 / (z.imag ** 2 + (z.real - s.eigenvalues) ** 2)
    return (s.eigenvectors * vals) @ s.eigenvectors.T


def leave_one_out_sample(s: ResolventSample, i: int) -> ResolventSample:
    """Sample for X with column i zeroed (fresh eigendecomposition)."""
    if not 0 <= i < s.n:
        raise ValueError(f"column index {i} out of range")
    X = s.X.copy()
    X[:, i] = 0.0
    return ResolventSample(X)


def leave_one_out(s: ResolventSample, i: int, z: complex) -> np.ndarray:
    """Resolvent of the column-zeroed matrix, Q_{-i}^z."""
    return resolvent(leave_one_out_sample(s, i), z)


def schur_check(s: ResolventSample, i: int, z: complex,
                sub: ResolventSample | None = None) -> float:
    """Relative residual of Q^z x_i = Q_{-i}^z x_i / (1 - x_i^T Q_{-i}^z x_i / n).

    Exact algebra: anything above ~1e-12 is a bug.  Pass ``sub`` to reuse a
    leave-one-out sample across evaluation points.
    """
    if sub is None:
        sub = leave_one_out_sample(s, i)
    x = s.X[:, i]
    Q = resolvent(s, z)
    Qm_x = resolvent(sub, z) @ x
    denom = 1.0 - (x @ Qm_x) / s.n
    if abs(denom) < PIVOT_TOL:
        raise DegeneratePivotError(f"Schur pivot {denom!r} below {PIVOT_TOL}")
    lhs = Q @ x
    scale = np.linalg.norm(lhs)
    if scale == 0.0:
        return float(np.linalg.norm(Qm_x / denom))
    return float(np.linalg.norm(lhs - Qm_x / denom) / scale)


def neumann_partial(s: ResolventSample, z: complex, m_terms: int) -> np.ndarray:
    """(1/z) * sum_{i=0}^{m_terms} (K/z)^i, evaluated by Horner on K.

    Converges to Q^z only when |z| > lambda_1; anything else raises.
    """
    z = complex(z)
    if m_terms < 0:
        raise ValueError("m_terms must be >= 0")
    if abs(z) <= s.lambda_max:
        raise DivergenceError(
            f"|z|={abs(z):.6g} <= lambda_1={s.lambda_max:.6g}: series diverges"
        )
    zz = _narrow(z)
    eye = np.eye(s.p)
    acc = np.array(eye, dtype=np.result_type(np.float64, type(zz)))
    for _ in range(m_terms):
        acc = eye + (s.K @ acc) / zz
    return acc / zz


def neumann_tail_bound(s: ResolventSample, z: complex, m_terms: int) -> float:
    """Geometric bound on the spectral-norm truncation error."""
    r = s.lambda_max / abs(z)
    return r ** (m_terms + 1) / (abs(z) - s.lambda_max)
