"""Self-consistent deterministic equivalent of the resolvent.

Given the per-column second moments Sigma_i, the equivalent is the unique
Lambda in C^n with

    Lambda_i = (1/n) tr(Sigma_i Qt),
    Qt = (z I - (1/n) sum_j Sigma_j / (1 - Lambda_j))^{-1},

which we locate by damped Picard iteration.  Columns sharing a model class
share their Lambda entry exactly, so the state lives per class.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import (
    BranchError,
    NoConvergenceError,
    OnSupportError,
    PoleError,
)

POLE_TOL = 1e-10
DAMPING_FLOOR = 1.0 / 64.0


@dataclass(frozen=True)
class CovarianceFamily:
    """Per-class symmetric PSD matrices with column multiplicities."""

    matrices: tuple
    counts: tuple

    def __post_init__(self):
        mats = []
        for S in self.matrices:
            S = np.asarray(S, dtype=np.float64)
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise ValueError(f"covariance must be square, got {S.shape}")
            if not np.allclose(S, S.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(S).max())):
                raise ValueError("covariance matrix is not symmetric")
            w = np.linalg.eigvalsh(S)
            if w[0] < -1e-10 * max(1.0, w[-1]):
                raise ValueError(f"covariance has negative eigenvalue {w[0]:.3e}")
            mats.append(S)
        if len({S.shape[0] for S in mats}) != 1:
            raise ValueError("covariance matrices must share one dimension")
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != len(mats) or any(c <= 0 for c in counts):
            raise ValueError("counts must be positive, one per class")
        object.__setattr__(self, "matrices", tuple(mats))
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_ensemble(cls, ens) -> "CovarianceFamily":
        counts = ens.class_counts()
        keep = [c for c in range(ens.n_classes) if counts[c] > 0]
        return cls(
            tuple(ens.models[c].covariance() for c in keep),
            tuple(int(counts[c]) for c in keep),
        )

    @classmethod
    def isotropic(cls, p: int, n: int, sigma2: float) -> "CovarianceFamily":
        return cls((sigma2 * np.eye(p),), (n,))

    @property
    def p(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def n_classes(self) -> int:
        return len(self.matrices)

    def expand(self, per_class: np.ndarray) -> np.ndarray:
        """Per-class vector -> per-column vector (class blocks contiguous)."""
        return np.repeat(np.asarray(per_class), self.counts)


@dataclass(frozen=True)
class FixedPointSolution:
    """Converged state of the trace fixed point at one z."""

    z: complex
    lam_by_class: np.ndarray
    counts: tuple
    q_tilde: np.ndarray
    residual: float
    iterations: int
    damping_used: float

    @property
    def lambda_full(self) -> np.ndarray:
        return np.repeat(self.lam_by_class, self.counts)

    @property
    def trace_q_tilde(self) -> complex:
        return complex(np.trace(self.q_tilde))

    @property
    def stieltjes(self) -> complex:
        return self.trace_q_tilde / self.q_tilde.shape[0]


def _q_tilde(family: CovarianceFamily, z: complex, lam: np.ndarray) -> np.ndarray:
    denom = 1.0 - lam
    if np.min(np.abs(denom)) < POLE_TOL:
        raise PoleError(f"|1 - lambda| below {POLE_TOL} at z={z!r}")
    M = z * np.eye(family.p, dtype=np.complex128)
    n = family.n
    for S, c, d in zip(family.matrices, family.counts, denom):
        M -= (c / (n * d)) * S
    return np.linalg.inv(M)


def _apply_map(family: CovarianceFamily, z: complex, lam: np.ndarray):
    """Qt at lam, F(lam), and the residual ||lam - F(lam)||_inf."""
    Q = _q_tilde(family, z, lam)
    n = family.n
    F = np.array([np.sum(S * Q.T) / n for S in family.matrices], dtype=np.complex128)
    return Q, F, float(np.max(np.abs(lam - F)))


def solve_fixed_point(family: CovarianceFamily, z: complex, tol: float = 1e-10,
                      max_iter: int = 1000,
                      warm_start: np.ndarray | None = None,
                      damping: float = 1.0) -> FixedPointSolution:
    """Damped Picard iteration for the trace fixed point.

    Starts from Lambda = 0 (exact as |z| -> infinity) unless warm-started.
    The step Lambda <- (1-a) Lambda + a F(Lambda) halves its damping a on
    residual increase, down to 1/64; running out of iterations raises
    NoConvergenceError carrying the residual trajectory.  For Im(z) != 0
    the converged branch must satisfy sign(Im tr Qt) = -sign(Im z), else
    BranchError.
    """
    z = complex(z)
    k = family.n_classes
    if warm_start is not None:
        lam = np.array(warm_start, dtype=np.complex128)
        if lam.shape == (family.n,):
            # collapse a per-column warm start; classes are contiguous blocks
            lam = np.array([b[0] for b in np.split(lam, np.cumsum(family.counts)[:-1])])
        if lam.shape != (k,):
            raise ValueError(f"warm start must have {k} class entries")
    else:
        lam = np.zeros(k, dtype=np.complex128)
    alpha = float(damping)
    trajectory = []
    Q, F, res = _apply_map(family, z, lam)
    trajectory.append(res)
    iterations = 0
    while res > tol and iterations < max_iter:
        candidate = (1.0 - alpha) * lam + alpha * F
        Qc, Fc, resc = _apply_map(family, z, candidate)
        iterations += 1
        if resc > res and alpha > DAMPING_FLOOR:
            alpha *= 0.5
            continue
        lam, Q, F, res = candidate, Qc, Fc, resc
        trajectory.append(res)
    if res > tol:
        raise NoConvergenceError(
            f"no convergence at z={z!r}: residual {res:.3e} after "
            f"{iterations} iterations at damping {alpha:.4g}",
            trajectory,
        )
    if z.imag != 0.0:
        im_trace = np.trace(Q).imag
        if im_trace * z.imag >= 0.0:
            raise BranchError(
                f"half-plane convention violated at z={z!r}: Im tr Qt = {im_trace:.3e}"
            )
    return FixedPointSolution(z, lam, family.counts, Q, res, iterations, alpha)


@dataclass
class GridSolveResult:
    """Per-point solutions (None where the solver failed) plus failures."""

    solutions: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def solve_along_grid(family: CovarianceFamily, z_list, tol: float = 1e-10,
                     max_iter: int = 1000, damping: float = 1.0,
                     warm_start: np.ndarray | None = None) -> GridSolveResult:
    """Solve sequentially, warm-starting each point from the previous one.

    Callers order z_list so consecutive points are close (continuation);
    per-point failures are recorded with their index and the remaining
    points still run, warm-started from the last success.
    """
    solutions = []
    failures = []
    warm = warm_start
    for idx, z in enumerate(z_list):
        try:
            sol = solve_fixed_point(family, z, tol=tol, max_iter=max_iter,
                                    warm_start=warm, damping=damping)
        except Exception as exc:  # noqa: BLE001  (reported per node)
            failures.append((idx, exc))
            solutions.append(None)
            continue
        solutions.append(sol)
        warm = sol.lam_by_class
    return GridSolveResult(solutions, failures)


def mp_support(c: float, sigma2: float) -> tuple:
    """Bulk edges sigma2 (1 +- sqrt(c))^2 of the isotropic limit law."""
    lo = sigma2 * (1.0 - np.sqrt(c)) ** 2
    hi = sigma2 * (1.0 + np.sqrt(c)) ** 2
    return float(lo), float(hi)


def _mp_roots(c: float, sigma2: float, z: complex) -> tuple:
    """Both roots of z d^2 - (z - sigma2 (1-c)) d + c sigma2 = 0."""
    b = -(z - sigma2 * (1.0 - c))
    disc = cmath.sqrt(b * b - 4.0 * z * c * sigma2)
    # pick the larger |b -+ disc| combination to avoid cancellation
    if abs(b - disc) >= abs(b + disc):
        q = -0.5 * (b - disc)
    else:
        q = -0.5 * (b + disc)
    r1 = q / z
    r2 = (c * sigma2) / q
    return r1, r2


def mp_oracle_stieltjes(c: float, sigma2: float, z: complex) -> complex:
    """Closed-form (1/p) tr Qt for the isotropic family Sigma_i = sigma2 I.

    Solves the scalar quadratic for delta = c sigma2 m and selects the
    branch with Im(m) Im(z) < 0; on the real axis the branch is picked by
    an infinitesimal upward perturbation (selection only, the returned
    value is the exact real root).  Points on the support raise.
    """
    if c <= 0 or sigma2 <= 0:
        raise ValueError("c and sigma2 must be positive")
    z = complex(z)
    lo, hi = mp_support(c, sigma2)
    margin = 1e-12 * max(1.0, hi)
    if z.imag == 0.0:
        x = z.real
        if lo - margin <= x <= hi + margin:
            raise OnSupportError(f"z={x!r} lies in the bulk [{lo:.6g}, {hi:.6g}]")
        if c >= 1.0 and abs(x) <= margin:
            raise OnSupportError("z=0 is an atom of the limit law for c >= 1")
    if z == 0:
        # c < 1 only (guarded above): m(0) = -1 / (sigma2 (1 - c))
        return complex(-1.0 / (sigma2 * (1.0 - c)))

    def pick(at: complex):
        d1, d2 = _mp_roots(c, sigma2, at)
        m1 = d1 / (c * sigma2)
        m2 = d2 / (c * sigma2)
        good1 = m1.imag * at.imag < 0
        good2 = m2.imag * at.imag < 0
        if good1 == good2:
            raise OnSupportError(f"branch ambiguity at z={at!r}")
        return m1 if good1 else m2

    if z.imag != 0.0:
        return pick(z)
    probe = complex(z.real, 1e-9 * max(1.0, abs(z.real)))
    target = pick(probe)
    d1, d2 = _mp_roots(c, sigma2, z)
    m1, m2 = d1 / (c * sigma2), d2 / (c * sigma2)
    m = m1 if abs(m1 - target) <= abs(m2 - target) else m2
    return complex(m.real)


@dataclass(frozen=True)
class FirstEquivalent:
    """Plug-in equivalent built from a Monte Carlo estimate of E[Q]."""

    z: complex
    lam_bar_by_class: np.ndarray
    counts: tuple
    q_tilde: np.ndarray

    @property
    def lambda_full(self) -> np.ndarray:
        return np.repeat(self.lam_bar_by_class, self.counts)


def first_equiv_from_mc(family: CovarianceFamily, mean_q: np.ndarray,
                        z: complex) -> FirstEquivalent:
    """Lambda-bar_i = (1/n) tr(Sigma_i mean_q) and the matching Qt."""
    mean_q = np.asarray(mean_q)
    n = family.n
    lam_bar = np.array(
        [np.sum(S * mean_q.T) / n for S in family.matrices],
        dtype=np.complex128,
    )
    Q = _q_tilde(family, complex(z), lam_bar)
    return FirstEquivalent(complex(z), lam_bar, family.counts, Q)
