"""Random matrices X in R^{p x n} with independent, bounded-law columns.

A column is an affine image x_i = mu_i + A_i w_i of a vector w_i with
independent entries supported in an interval of length at most one, so
convex concentration holds for the whole matrix.  Columns are grouped into
classes sharing one ColumnModel; the exact second moments
Sigma_i = E[x_i x_i^T] are available in closed form per class.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError
from .rng import ColumnStreams

#: above this, a column mean norm triggers an AssumptionWarning (the theory
#: wants sup_i ||E[x_i]|| bounded by a constant; 10 is our desk-scale line)
MEAN_NORM_WARN = 10.0


class AssumptionWarning(UserWarning):
    """A generator parameter leaves the regime the guarantees assume."""


class BaseLaw(str, Enum):
    """Bounded entry laws for the latent vector w.

    Every law is supported in an interval of length <= 1, which is what the
    convex concentration of the sampled matrix rests on.
    """

    UNIFORM_CENTERED = "uniform_centered"   # U[-1/2, 1/2]
    RADEMACHER_HALF = "rademacher_half"     # +-1/2 equiprobable
    UNIFORM_UNIT = "uniform_unit"           # U[0, 1]

    @property
    def variance(self) -> float:
        return 0.25 if self is BaseLaw.RADEMACHER_HALF else 1.0 / 12.0

    @property
    def mean(self) -> float:
        return 0.5 if self is BaseLaw.UNIFORM_UNIT else 0.0

    @property
    def sup_abs(self) -> float:
        """Largest possible |entry|."""
        return 1.0 if self is BaseLaw.UNIFORM_UNIT else 0.5

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        if self is BaseLaw.UNIFORM_CENTERED:
            return gen.random(size) - 0.5
        if self is BaseLaw.RADEMACHER_HALF:
            return gen.integers(0, 2, size=size).astype(np.float64) - 0.5
        return gen.random(size)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ColumnModel:
    """Generative description of one column: x = mean + factor @ w.

    ``factor`` is a (p, d) matrix, a scalar (multiple of the identity,
    d = p) or None (identity, d = p).
    """

    mean: np.ndarray
    factor: np.ndarray | float | None
    base: BaseLaw

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        if self.mean.ndim != 1:
            raise ConfigError(f"column mean must be a vector, got shape {self.mean.shape}")
        if isinstance(self.factor, np.ndarray) or isinstance(self.factor, list):
            f = _frozen(self.factor)
            if f.ndim != 2 or f.shape[0] != self.p:
                raise ConfigError(
                    f"factor shape {f.shape} incompatible with column dimension {self.p}"
                )
            object.__setattr__(self, "factor", f)
        elif self.factor is not None:
            object.__setattr__(self, "factor", float(self.factor))
        if not isinstance(self.base, BaseLaw):
            object.__setattr__(self, "base", BaseLaw(self.base))
        norm = float(np.linalg.norm(self.effective_mean()))
        if norm > MEAN_NORM_WARN:
            warnings.warn(
                f"column mean norm {norm:.3g} exceeds {MEAN_NORM_WARN}; "
                "concentration constants degrade",
                AssumptionWarning,
                stacklevel=2,
            )

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    @property
    def d(self) -> int:
        if isinstance(self.factor, np.ndarray):
            return self.factor.shape[1]
        return self.p

    def effective_mean(self) -> np.ndarray:
        """E[x], accounting for a non-centered base law."""
        b = self.base.mean
        if b == 0.0:
            return self.mean.copy()
        if isinstance(self.factor, np.ndarray):
            return self.mean + b * self.factor.sum(axis=1)
        scale = 1.0 if self.factor is None else self.factor
        return self.mean + b * scale * np.ones(self.p)

    def covariance(self) -> np.ndarray:
        """Exact second moment Sigma = E[x x^T] = Var(base) A A^T + m m^T."""
        v = self.base.variance
        if isinstance(self.factor, np.ndarray):
            core = v * (self.factor @ self.factor.T)
        else:
            scale = 1.0 if self.factor is None else self.factor
            core = v * scale * scale * np.eye(self.p)
        m = self.effective_mean()
        return core + np.outer(m, m)

    def sup_entry_bound(self) -> float:
        """Upper bound on ||x||_inf over all realizations."""
        k = self.base.sup_abs
        if isinstance(self.factor, np.ndarray):
            spread = k * np.abs(self.factor).sum(axis=1)
        else:
            scale = 1.0 if self.factor is None else abs(self.factor)
            spread = k * scale
        return float(np.max(np.abs(self.mean) + spread))

    def sample(self, gen: np.random.Generator) -> np.ndarray:
        w = self.base.sample(gen, self.d)
        if isinstance(self.factor, np.ndarray):
            return self.mean + self.factor @ w
        if self.factor is None:
            return self.mean + w
        return self.mean + self.factor * w


@dataclass(frozen=True, eq=False)
class ColumnEnsemble:
    """n mutually independent columns in R^p, grouped into model classes.

    ``assignment[i]`` selects the ColumnModel of column i.  Sampling is a
    pure function of (seed, draw index): identical arguments reproduce the
    identical matrix bit-for-bit.
    """

    p: int
    n: int
    models: tuple
    assignment: np.ndarray
    seed: int
    gamma: float = 0.0

    def __post_init__(self):
        models = tuple(self.models)
        object.__setattr__(self, "models", models)
        assignment = np.array(self.assignment, dtype=np.int64, copy=True)
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)
        if not models:
            raise ConfigError("ensemble needs at least one column model")
        if assignment.shape != (self.n,):
            raise ConfigError(f"assignment length {assignment.shape} != n={self.n}")
        if assignment.min() < 0 or assignment.max() >= len(models):
            raise ConfigError("assignment references a missing model class")
        for m in models:
            if m.p != self.p:
                raise ConfigError(f"model dimension {m.p} != ensemble p={self.p}")
        gamma = float(self.gamma) if self.gamma else self.p / self.n
        object.__setattr__(self, "gamma", gamma)
        if self.p > gamma * self.n + 1e-9:
            raise ConfigError(
                f"p={self.p} exceeds gamma*n={gamma * self.n:.6g}; "
                "declare a larger gamma"
            )

    @classmethod
    def single_class(cls, model: ColumnModel, n: int, seed: int, gamma: float = 0.0):
        return cls(model.p, n, (model,), np.zeros(n, dtype=np.int64), seed, gamma)

    @property
    def n_classes(self) -> int:
        return len(self.models)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_classes)

    def class_columns(self, class_index: int) -> np.ndarray:
        return np.nonzero(self.assignment == class_index)[0]

    def streams(self) -> ColumnStreams:
        return ColumnStreams(self.seed)


def isotropic_ensemble(p: int, n: int, seed: int,
                       base: BaseLaw = BaseLaw.UNIFORM_CENTERED,
                       scale: float | None = None,
                       gamma: float = 0.0) -> ColumnEnsemble:
    """Single-class ensemble with zero mean and (scaled) identity factor.

    The population covariance is Var(base) * scale^2 * I_p.
    """
    model = ColumnModel(np.zeros(p), scale, BaseLaw(base))
    return ColumnEnsemble.single_class(model, n, seed, gamma)


def spiked_ensemble(p: int, n: int, seed: int, spike_scale: float,
                    direction: np.ndarray | None = None,
                    base: BaseLaw = BaseLaw.UNIFORM_CENTERED,
                    gamma: float = 0.0) -> ColumnEnsemble:
    """Isotropic ensemble plus a shared rank-one mean shift.

    Every column gets mean spike_scale * u, so the population covariance is
    Var(base) I + spike_scale^2 u u^T and the top sample eigenvalue
    separates from the bulk once spike_scale is large enough.
    """
    if direction is None:
        u = np.ones(p) / np.sqrt(p)
    else:
        u = np.asarray(direction, dtype=np.float64)
        u = u / np.linalg.norm(u)
    model = ColumnModel(spike_scale * u, None, BaseLaw(base))
    return ColumnEnsemble.single_class(model, n, seed, gamma)


def sample_matrix(ens: ColumnEnsemble, draw_index: int,
                  streams: ColumnStreams | None = None) -> np.ndarray:
    """One draw of X; column i follows its assigned model.

    Pass a ColumnStreams cursor to amortize generator setup across draws in
    Monte Carlo loops; the output does not depend on whether one is passed.
    """
    if draw_index < 0:
        raise ConfigError("draw_index must be nonnegative")
    if streams is None:
        streams = ens.streams()
    X = np.empty((ens.p, ens.n))
    for ci, model in enumerate(ens.models):
        cols = ens.class_columns(ci)
        if cols.size == 0:
            continue
        W = np.empty((model.d, cols.size))
        for j, i in enumerate(cols):
            W[:, j] = model.base.sample(streams.at(draw_index, int(i)), model.d)
        if isinstance(model.factor, np.ndarray):
            block = model.factor @ W
        elif model.factor is None:
            block = W
        else:
            block = model.factor * W
        X[:, cols] = block + model.mean[:, None]
    return X


def sample_column(ens: ColumnEnsemble, draw_index: int, column_index: int,
                  streams: ColumnStreams | None = None) -> np.ndarray:
    """Column ``column_index`` of draw ``draw_index``, without the rest of X."""
    if draw_index < 0:
        raise ConfigError("draw_index must be nonnegative")
    if not 0 <= column_index < ens.n:
        raise ConfigError(f"column index {column_index} out of range")
    if streams is None:
        streams = ens.streams()
    model = ens.models[ens.assignment[column_index]]
    return model.sample(streams.at(draw_index, column_index))


def class_covariances(ens: ColumnEnsemble) -> list[np.ndarray]:
    """Exact Sigma per model class."""
    return [m.covariance() for m in ens.models]


def population_covariances(ens: ColumnEnsemble) -> list[np.ndarray]:
    """Sigma_i for every column; classes share one array (no copies)."""
    per_class = class_covariances(ens)
    return [per_class[c] for c in ens.assignment]


@dataclass(frozen=True)
class SpectrumStats:
    """Monte Carlo summary of the eigenvalues of K = X X^T / n."""

    mean_eigenvalues: np.ndarray       # descending, E[lambda_i]
    nu_hat: float                      # E[lambda_1]
    eps: float
    support_intervals: tuple           # merged [lo, hi] around mean eigenvalues
    a_eps_frequency: float             # P(all eigenvalues within eps/2 of the means)
    n_draws: int

    def support_upper(self) -> float:
        return max(hi for _, hi in self.support_intervals)

    def distance_to_support(self, x: float) -> float:
        d = np.inf
        for lo, hi in self.support_intervals:
            if lo <= x <= hi:
                return 0.0
            d = min(d, abs(x - lo), abs(x - hi))
        return d


def _merge_intervals(centers: np.ndarray, eps: float) -> tuple:
    intervals = []
    for c in np.sort(centers):
        lo, hi = c - eps, c + eps
        if intervals and lo <= intervals[-1][1]:
            intervals[-1][1] = max(intervals[-1][1], hi)
        else:
            intervals.append([lo, hi])
    return tuple((float(lo), float(hi)) for lo, hi in intervals)


def eigenvalues_of_k(X: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of X X^T / n."""
    n = X.shape[1]
    w = np.linalg.eigvalsh(X @ X.T / n)
    return w[::-1]


def spectrum_stats(ens: ColumnEnsemble, n_draws: int, z_support_eps: float) -> SpectrumStats:
    """Estimate E[lambda_i], the fattened support, and the A_eps frequency.

    A_eps is the event that every sample eigenvalue lies within eps/2 of the
    set of mean eigenvalues; its frequency is estimated on the same draws
    used for the means.
    """
    if n_draws < 2:
        raise ConfigError("spectrum_stats needs at least 2 draws")
    eps = float(z_support_eps)
    streams = ens.streams()
    eigs = np.empty((n_draws, ens.p))
    for k in range(n_draws):
        eigs[k] = eigenvalues_of_k(sample_matrix(ens, k, streams))
    mean_eigs = eigs.mean(axis=0)
    ascending = np.sort(mean_eigs)
    # distance from each sample eigenvalue to the set of mean eigenvalues
    pos = np.searchsorted(ascending, eigs)
    pos = np.clip(pos, 1, ens.p - 1) if ens.p > 1 else np.zeros_like(pos)
    if ens.p > 1:
        left = np.abs(eigs - ascending[pos - 1])
        right = np.abs(eigs - ascending[pos])
        dist = np.minimum(left, right)
    else:
        dist = np.abs(eigs - ascending[0])
    inside = (dist <= eps / 2).all(axis=1)
    return SpectrumStats(
        mean_eigenvalues=mean_eigs,
        nu_hat=float(mean_eigs[0]),
        eps=eps,
        support_intervals=_merge_intervals(mean_eigs, eps),
        a_eps_frequency=float(inside.mean()),
        n_draws=n_draws,
    )
