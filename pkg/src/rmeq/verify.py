"""Monte Carlo concentration measurements and exact-identity checks.

The harness estimates observable diameters of scalar functionals of random
matrix draws through the moment route

    sigma_hat = max over r in {2,4,6,8} of (E|Z - EZ|^r)^(1/r) / sqrt(r),

records tail tables and Gaussian/exponential log-tail slopes, fits
log-log rates across n, and validates the algebraic identities that must
hold to machine precision.  Every measurement is a pure function of the
ensemble seed: identical configurations produce identical reports.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .detequiv import CovarianceFamily, solve_fixed_point
from .ensembles import ColumnEnsemble, SpectrumStats, sample_column, sample_matrix
from .errors import ConfigError, RejectionRateError
from .resolvent import ResolventSample, leave_one_out_sample, resolvent, stieltjes
from .rng import ColumnStreams

MOMENT_ORDERS = (2, 4, 6, 8)

FUNCTIONAL_KINDS = (
    "trace_AQ",
    "stieltjes",
    "quadratic_form",
    "entrywise_product",
    "matrix_product_trace",
    "convex_lipschitz",
)


def spectral_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(A), 2))


@dataclass(frozen=True)
class FunctionalSpec:
    """A scalar functional of one or more independent draws.

    ``params`` per kind:
      trace_AQ: A (spectral norm <= 1), z
      stieltjes: z
      quadratic_form: A           (measures y^T A x on column pairs)
      entrywise_product: a (norm <= 1), m, identical
      matrix_product_trace: A (spectral norm <= 1), m, identical
      convex_lipschitz: fn, name
    """

    kind: str
    params: dict = field(default_factory=dict)
    lipschitz: float | None = None
    convex: bool = False

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise ConfigError(f"unknown functional kind {self.kind!r}")
        p = self.params
        if self.kind == "trace_AQ":
            if spectral_norm(p["A"]) > 1.0 + 1e-12:
                raise ConfigError("trace_AQ requires spectral norm of A <= 1")
            complex(p["z"])
        elif self.kind == "stieltjes":
            complex(p["z"])
        elif self.kind == "quadratic_form":
            np.asarray(p["A"])
        elif self.kind == "entrywise_product":
            a = np.asarray(p["a"], dtype=np.float64)
            if np.linalg.norm(a) > 1.0 + 1e-12:
                raise ConfigError("entrywise_product requires ||a|| <= 1")
            int(p["m"])
        elif self.kind == "matrix_product_trace":
            if spectral_norm(p["A"]) > 1.0 + 1e-12:
                raise ConfigError("matrix_product_trace requires spectral norm of A <= 1")
            int(p["m"])
        elif self.kind == "convex_lipschitz":
            if not callable(p.get("fn")):
                raise ConfigError("convex_lipschitz requires a callable 'fn'")

    @property
    def name(self) -> str:
        if self.kind == "convex_lipschitz":
            return str(self.params.get("name", "convex_lipschitz"))
        return self.kind

    def draw_stride(self) -> int:
        """Independent draw indices consumed per evaluation."""
        if self.kind == "quadratic_form":
            return 2
        if self.kind in ("entrywise_product", "matrix_product_trace"):
            return 1 if self.params.get("identical", False) else int(self.params["m"])
        return 1


def _evaluate(spec: FunctionalSpec, ens: ColumnEnsemble, base_draw: int,
              streams: ColumnStreams):
    k = spec.kind
    if k == "trace_AQ":
        s = ResolventSample(sample_matrix(ens, base_draw, streams))
        Q = resolvent(s, spec.params["z"])
        return np.trace(np.asarray(spec.params["A"]) @ Q)
    if k == "stieltjes":
        s = ResolventSample(sample_matrix(ens, base_draw, streams))
        return stieltjes(s, spec.params["z"])
    if k == "quadratic_form":
        x = sample_column(ens, base_draw, 0, streams)
        y = sample_column(ens, base_draw + 1, 0, streams)
        return y @ (np.asarray(spec.params["A"]) @ x)
    if k == "entrywise_product":
        m = int(spec.params["m"])
        a = np.asarray(spec.params["a"], dtype=np.float64)
        if spec.params.get("identical", False):
            x = sample_column(ens, base_draw, 0, streams)
            prod = x ** m
        else:
            prod = sample_column(ens, base_draw, 0, streams).copy()
            for j in range(1, m):
                prod *= sample_column(ens, base_draw + j, 0, streams)
        return a @ prod
    if k == "matrix_product_trace":
        m = int(spec.params["m"])
        if spec.params.get("identical", False):
            X = sample_matrix(ens, base_draw, streams)
            P = np.linalg.matrix_power(X, m)
        else:
            P = sample_matrix(ens, base_draw, streams)
            for j in range(1, m):
                P = P @ sample_matrix(ens, base_draw + j, streams)
        return np.trace(np.asarray(spec.params["A"]) @ P)
    # convex_lipschitz
    return spec.params["fn"](sample_matrix(ens, base_draw, streams))


@dataclass(frozen=True)
class ConcentrationReport:
    """Per-functional deviation statistics of one Monte Carlo run."""

    functional: str
    n_draws: int
    mean: complex
    std: float
    moment_diameters: dict
    sigma_hat: float
    tail_table: tuple          # ((t, empirical P(|Z - mean| >= t)), ...)
    gaussian_slope: float | None
    exp_slope: float | None
    seed: int | None = None

    def to_dict(self) -> dict:
        mean = complex(self.mean)
        return {
            "functional": self.functional,
            "n_draws": self.n_draws,
            "mean": [mean.real, mean.imag],
            "std": self.std,
            "moments": {str(r): v for r, v in sorted(self.moment_diameters.items())},
            "sigma_hat": self.sigma_hat,
            "tails": [[float(t), float(p)] for t, p in self.tail_table],
            "slopes": {"gaussian": self.gaussian_slope, "exponential": self.exp_slope},
            "seed": self.seed,
        }


def _log_slope(ts, ps, transform) -> float | None:
    pts = [(transform(t), -math.log(p)) for t, p in zip(ts, ps) if 0.0 < p < 1.0]
    if len(pts) < 2:
        return None
    xs = np.array([a for a, _ in pts])
    ys = np.array([b for _, b in pts])
    if np.ptp(xs) == 0.0:
        return None
    return float(np.polyfit(xs, ys, 1)[0])


def report_from_values(values, functional: str = "stream",
                       tail_ts=None, seed: int | None = None) -> ConcentrationReport:
    """Deviation statistics of a raw sample of scalar values."""
    values = np.asarray(values)
    n = values.size
    mean = values.mean()
    dev = np.abs(values - mean)
    std = float(np.sqrt(np.mean(dev ** 2)))
    moments = {}
    for r in MOMENT_ORDERS:
        mr = float(np.mean(dev ** r))
        moments[r] = mr ** (1.0 / r) / math.sqrt(r)
    sigma_hat = max(moments.values())
    if tail_ts is None:
        if std > 0.0:
            tail_ts = std * np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0])
        else:
            tail_ts = np.array([0.5, 1.0, 1.5, 2.0])
    tail_ts = np.asarray(tail_ts, dtype=np.float64)
    tails = tuple(
        (float(t), float(np.mean(dev >= t))) for t in tail_ts
    )
    central = [(t, p) for t, p in tails if std > 0.0 and t <= 2.0 * std + 1e-15]
    far = [(t, p) for t, p in tails if std > 0.0 and t >= 4.0 * std - 1e-15]
    gaussian_slope = _log_slope([t for t, _ in central], [p for _, p in central],
                                lambda t: t * t)
    exp_slope = _log_slope([t for t, _ in far], [p for _, p in far], lambda t: t)
    return ConcentrationReport(
        functional=functional,
        n_draws=int(n),
        mean=complex(mean),
        std=std,
        moment_diameters=moments,
        sigma_hat=float(sigma_hat),
        tail_table=tails,
        gaussian_slope=gaussian_slope,
        exp_slope=exp_slope,
        seed=seed,
    )


def measure_functional(ens: ColumnEnsemble, spec: FunctionalSpec, n_draws: int,
                       tail_ts=None) -> ConcentrationReport:
    """Sample the functional over independent draws and report its statistics.

    Deterministic given the ensemble seed.  Tail estimates below 1000 draws
    are noisy; a warning is emitted, not an error.
    """
    if n_draws < 1:
        raise ConfigError("n_draws must be positive")
    if n_draws < 1000:
        warnings.warn("fewer than 1000 draws: tail estimates will be noisy",
                      stacklevel=2)
    streams = ens.streams()
    stride = spec.draw_stride()
    values = [_evaluate(spec, ens, k * stride, streams) for k in range(n_draws)]
    return report_from_values(np.array(values), functional=spec.name,
                              tail_ts=tail_ts, seed=ens.seed)


# ---------------------------------------------------------------------------
# rate scans


@dataclass(frozen=True)
class ScalingTable:
    """Log-log fit of a metric across geometrically spaced n."""

    metric: str
    rows: tuple                 # ((n, p, value), ...)
    slope: float | None
    slope_stderr: float | None
    degenerate: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "rows": [[int(n), int(p), float(v)] for n, p, v in self.rows],
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "degenerate": self.degenerate,
            "note": self.note,
        }


def _validate_n_list(n_list) -> list:
    ns = [int(n) for n in n_list]
    if len(ns) < 3 or len(set(ns)) < 3:
        raise ConfigError("rate scans need at least 3 distinct n values")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("n values must be strictly increasing")
    ratios = [b / a for a, b in zip(ns, ns[1:])]
    if max(ratios) / min(ratios) > 2.0 + 1e-9:
        raise ConfigError("n values must be roughly geometrically spaced")
    return ns


def fit_scaling(metric_name: str, rows) -> ScalingTable:
    rows = tuple((int(n), int(p), float(v)) for n, p, v in rows)
    if any(v <= 0.0 for _, _, v in rows):
        return ScalingTable(metric_name, rows, None, None, True,
                            "nonpositive metric value; log-log fit undefined")
    x = np.log([n for n, _, _ in rows])
    y = np.log([v for _, _, v in rows])
    coef, residuals, *_ = np.polyfit(x, y, 1, full=True)
    slope = float(coef[0])
    stderr = None
    if len(rows) > 2:
        rss = float(residuals[0]) if len(residuals) else 0.0
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = math.sqrt(max(rss, 0.0) / (len(rows) - 2) / sxx)
    return ScalingTable(metric_name, rows, slope, stderr)


@dataclass(frozen=True)
class FunctionalStatMetric:
    """Metric = a statistic (std or sigma_hat) of a measured functional."""

    spec: FunctionalSpec
    stat: str = "std"

    @property
    def name(self) -> str:
        return f"{self.stat}[{self.spec.name}]"

    def compute(self, ens: ColumnEnsemble, n_draws: int) -> float:
        if self.stat not in ("std", "sigma_hat"):
            raise ConfigError(f"unknown statistic {self.stat!r}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = measure_functional(ens, self.spec, n_draws)
        return getattr(report, self.stat)


@dataclass(frozen=True)
class MeanResolventDeviationMetric:
    """|| mean of Q over draws - Qt ||_F at a fixed z."""

    z: complex
    tol: float = 1e-10

    @property
    def name(self) -> str:
        return f"frobenius_meanQ_vs_equiv[z={self.z}]"

    def compute(self, ens: ColumnEnsemble, n_draws: int) -> float:
        streams = ens.streams()
        acc = None
        for k in range(n_draws):
            Q = resolvent(ResolventSample(sample_matrix(ens, k, streams)), self.z)
            acc = Q.copy() if acc is None else acc + Q
        mean_q = acc / n_draws
        sol = solve_fixed_point(CovarianceFamily.from_ensemble(ens), self.z,
                                tol=self.tol)
        return float(np.linalg.norm(mean_q - sol.q_tilde))


@dataclass(frozen=True)
class LeaveOneOutMeanMetric:
    """Spectral norm of the mean of Q - Q_{-col} over draws."""

    z: complex
    col: int = 0

    @property
    def name(self) -> str:
        return f"norm_mean_Q_minus_Q_loo[z={self.z}]"

    def compute(self, ens: ColumnEnsemble, n_draws: int) -> float:
        streams = ens.streams()
        acc = None
        for k in range(n_draws):
            s = ResolventSample(sample_matrix(ens, k, streams))
            D = resolvent(s, self.z) - resolvent(leave_one_out_sample(s, self.col), self.z)
            acc = D if acc is None else acc + D
        return spectral_norm(acc / n_draws)


def rate_scan(ens_family, metric, n_list, n_draws: int) -> ScalingTable:
    """Evaluate the metric at each n and fit the log-log slope.

    ``ens_family`` maps n to a ColumnEnsemble; the metric is any object
    with ``.name`` and ``.compute(ens, n_draws)``.
    """
    ns = _validate_n_list(n_list)
    rows = []
    for n in ns:
        ens = ens_family(n)
        rows.append((n, ens.p, metric.compute(ens, n_draws)))
    return fit_scaling(metric.name, rows)


def leave_one_out_rate_check(ens_family, n_list, z: complex,
                             n_draws: int) -> ScalingTable:
    """Scaling of ||E[Q - Q_{-1}]|| across n (expected slope near -1)."""
    return rate_scan(ens_family, LeaveOneOutMeanMetric(z), n_list, n_draws)


# ---------------------------------------------------------------------------
# bilinear / product concentration checks


@dataclass(frozen=True)
class HansonWrightReport:
    """y^T A x over independent column pairs, with both tail regimes fitted."""

    report: ConcentrationReport
    frobenius_norm: float
    spectral_norm: float
    central_slope: float | None
    far_slope: float | None

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "frobenius_norm": self.frobenius_norm,
            "spectral_norm": self.spectral_norm,
            "central_slope": self.central_slope,
            "far_slope": self.far_slope,
        }


def hanson_wright_check(ens: ColumnEnsemble, A: np.ndarray,
                        n_draws: int) -> HansonWrightReport:
    """Measure y^T A x on independent column pairs.

    The central window slope (vs t^2) tracks the Gaussian regime whose
    scale is set by ||A||_F; the far window slope (vs t) tracks the
    exponential regime scaled by ||A||.  Both are reported, neither is a
    hard pass/fail: the crossover constants are unspecified.
    """
    A = np.asarray(A, dtype=np.float64)
    spec = FunctionalSpec("quadratic_form", {"A": A})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        probe = measure_functional(ens, spec, min(n_draws, 2000))
    std = probe.std if probe.std > 0 else 1.0
    ts = std * np.array([0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0])
    report = measure_functional(ens, spec, n_draws, tail_ts=ts)
    return HansonWrightReport(
        report=report,
        frobenius_norm=float(np.linalg.norm(A)),
        spectral_norm=spectral_norm(A),
        central_slope=report.gaussian_slope,
        far_slope=report.exp_slope,
    )


@dataclass(frozen=True)
class ProductCheckReport:
    """tr(A X_1 ... X_m) under a spectral-norm rejection gate."""

    report: ConcentrationReport
    m: int
    kappa: float
    rejection_rate: float
    theorem_scale: float        # kappa^(m-1) sqrt(n_0 + ... + n_m), sigma = 1
    ratio: float

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "m": self.m,
            "kappa": self.kappa,
            "rejection_rate": self.rejection_rate,
            "theorem_scale": self.theorem_scale,
            "ratio": self.ratio,
        }


def product_concentration_check(ens: ColumnEnsemble, A: np.ndarray, m: int,
                                n_draws: int, kappa: float,
                                identical: bool = True,
                                max_rejection: float = 0.5) -> ProductCheckReport:
    """Diameter of tr(A X_1 ... X_m) with draws rejected when ||X|| > kappa.

    Square ensembles only (the product must chain).  Aborts when the
    rejection rate exceeds ``max_rejection`` (kappa set too tight).
    """
    if ens.p != ens.n:
        raise ConfigError("product check needs a square ensemble (p == n)")
    A = np.asarray(A, dtype=np.float64)
    if spectral_norm(A) > 1.0 + 1e-12:
        raise ConfigError("product check requires spectral norm of A <= 1")
    if m < 1:
        raise ConfigError("m must be >= 1")
    streams = ens.streams()
    cursor = 0
    accepted = 0
    rejected = 0
    per_eval = 1 if identical else m

    def next_accepted():
        nonlocal cursor, accepted, rejected
        while True:
            X = sample_matrix(ens, cursor, streams)
            cursor += 1
            if spectral_norm(X) <= kappa:
                accepted += 1
                return X
            rejected += 1
            total = accepted + rejected
            if total >= 50 and rejected / total > max_rejection:
                raise RejectionRateError(
                    f"rejection rate {rejected / total:.2f} exceeds {max_rejection}"
                )

    values = np.empty(n_draws, dtype=np.float64)
    for k in range(n_draws):
        mats = [next_accepted() for _ in range(per_eval)]
        if identical:
            P = np.linalg.matrix_power(mats[0], m)
        else:
            P = mats[0]
            for M in mats[1:]:
                P = P @ M
        values[k] = float(np.trace(A @ P))
    report = report_from_values(values, functional=f"trace_A_product_m{m}",
                                seed=ens.seed)
    scale = kappa ** (m - 1) * math.sqrt((m + 1) * ens.n)
    rate = rejected / max(accepted + rejected, 1)
    return ProductCheckReport(report, m, float(kappa), float(rate), float(scale),
                              float(report.sigma_hat / scale) if scale > 0 else 0.0)


@dataclass(frozen=True)
class EntrywiseCheckReport:
    """a^T (x_1 . ... . x_m) diameters vs the bounded-law scales."""

    report: ConcentrationReport
    baseline: ConcentrationReport       # m = 1 on the same ensemble
    m: int
    identical: bool
    kappa: float
    bound_identical: float              # kappa^(m-1) sigma_hat(m=1)
    bound_distinct: float               # (2 e kappa)^(m-1) sigma_hat(m=1)

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "baseline": self.baseline.to_dict(),
            "m": self.m,
            "identical": self.identical,
            "kappa": self.kappa,
            "bound_identical": self.bound_identical,
            "bound_distinct": self.bound_distinct,
        }


def entrywise_product_check(ens: ColumnEnsemble, a: np.ndarray, m: int,
                            n_draws: int,
                            identical: bool = False) -> EntrywiseCheckReport:
    """Diameter of a^T (x_1 . ... . x_m) over independent column draws.

    kappa is the exact sup-norm bound of a column; the reference scale is
    the measured m = 1 diameter of the same linear form.
    """
    if m < 1:
        raise ConfigError("m must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    kappa = max(model.sup_entry_bound() for model in ens.models)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        baseline = measure_functional(
            ens, FunctionalSpec("entrywise_product", {"a": a, "m": 1}), n_draws
        )
        report = measure_functional(
            ens,
            FunctionalSpec("entrywise_product",
                           {"a": a, "m": m, "identical": identical}),
            n_draws,
        )
    sigma1 = baseline.sigma_hat
    return EntrywiseCheckReport(
        report=report,
        baseline=baseline,
        m=m,
        identical=identical,
        kappa=float(kappa),
        bound_identical=float(kappa ** (m - 1) * sigma1),
        bound_distinct=float((2.0 * math.e * kappa) ** (m - 1) * sigma1),
    )


# ---------------------------------------------------------------------------
# exact identities


def rota_identity_check(a_list) -> float:
    """Relative deviation between the symmetrized product and its subset form.

    Left side: sum over all permutations s of a_{s(1)} ... a_{s(m)}.
    Right side: (-1)^m sum over subsets I of [m] of (-1)^|I| (sum_{i in I} a_i)^m.
    Exact algebra; factorial cost caps m at 8.
    """
    mats = [np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in a_list]
    m = len(mats)
    if m == 0:
        raise ConfigError("need at least one matrix")
    if m > 8:
        raise ConfigError("m > 8: permutation enumeration too expensive")
    shape = mats[0].shape
    if shape[0] != shape[1] or any(M.shape != shape for M in mats):
        raise ConfigError("matrices must be square and share one shape")
    lhs = np.zeros(shape)
    for perm in itertools.permutations(range(m)):
        P = mats[perm[0]].copy()
        for idx in perm[1:]:
            P = P @ mats[idx]
        lhs += P
    rhs = np.zeros(shape)
    for size in range(1, m + 1):
        for subset in itertools.combinations(range(m), size):
            S = sum(mats[i] for i in subset)
            rhs += (-1.0) ** size * np.linalg.matrix_power(S, m)
    rhs *= (-1.0) ** m
    denom = max(np.linalg.norm(lhs), np.linalg.norm(rhs))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(lhs - rhs) / denom)


# ---------------------------------------------------------------------------
# Talagrand-type tail bound


@dataclass(frozen=True)
class ConvexLipschitzFunctional:
    """Observable with a declared convexity certificate and Lipschitz bound."""

    name: str
    fn: object
    lipschitz: float = 1.0
    convex: bool = True


def distance_to(point: np.ndarray, name: str = "distance_to_point") -> ConvexLipschitzFunctional:
    point = np.asarray(point, dtype=np.float64)
    return ConvexLipschitzFunctional(name, lambda X: float(np.linalg.norm(X - point)))


def frobenius_norm_functional() -> ConvexLipschitzFunctional:
    return ConvexLipschitzFunctional("frobenius_norm",
                                     lambda X: float(np.linalg.norm(X)))


def largest_singular_value() -> ConvexLipschitzFunctional:
    return ConvexLipschitzFunctional(
        "largest_singular_value",
        lambda X: float(np.linalg.svd(X, compute_uv=False)[0]),
    )


@dataclass(frozen=True)
class TailRow:
    t: float
    empirical: float
    bound: float
    stderr: float
    ok: bool


@dataclass(frozen=True)
class TailComparison:
    """Empirical tails against 2 exp(-t^2/4) + 3 binomial standard errors."""

    functional: str
    n_draws: int
    rows: tuple
    all_ok: bool
    report: ConcentrationReport

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "n_draws": self.n_draws,
            "rows": [
                {"t": r.t, "empirical": r.empirical, "bound": r.bound,
                 "stderr": r.stderr, "ok": r.ok}
                for r in self.rows
            ],
            "all_ok": self.all_ok,
            "report": self.report.to_dict(),
        }


def talagrand_direct_check(ens: ColumnEnsemble, functional: ConvexLipschitzFunctional,
                           n_draws: int, ts=(0.5, 1.0, 1.5, 2.0)) -> TailComparison:
    """Tails of a convex 1-Lipschitz observable against 2 exp(-t^2/4).

    Valid because every base law is supported in an interval of length one
    and the affine column maps keep operator norm <= 1; both conditions are
    enforced here rather than assumed.
    """
    if not functional.convex or functional.lipschitz > 1.0 + 1e-12:
        raise ConfigError("functional must carry a convex, 1-Lipschitz certificate")
    for model in ens.models:
        if isinstance(model.factor, np.ndarray):
            lam = spectral_norm(model.factor)
        else:
            lam = 1.0 if model.factor is None else abs(model.factor)
        if lam > 1.0 + 1e-12:
            raise ConfigError(
                "column factors must have operator norm <= 1 for the direct bound"
            )
    streams = ens.streams()
    values = np.array([
        functional.fn(sample_matrix(ens, k, streams)) for k in range(n_draws)
    ])
    report = report_from_values(values, functional=functional.name,
                                tail_ts=np.asarray(ts), seed=ens.seed)
    rows = []
    all_ok = True
    for t, p_hat in report.tail_table:
        bound = 2.0 * math.exp(-t * t / 4.0)
        se = math.sqrt(p_hat * (1.0 - p_hat) / n_draws)
        ok = p_hat <= bound + 3.0 * se
        all_ok = all_ok and ok
        rows.append(TailRow(float(t), float(p_hat), float(bound), float(se), bool(ok)))
    return TailComparison(functional.name, n_draws, tuple(rows), all_ok, report)


# ---------------------------------------------------------------------------
# spectrum events and leave-one-out statistics


def event_a_eps_frequency(ens: ColumnEnsemble, eps: float, n_draws: int,
                          stats: SpectrumStats,
                          draw_offset: int | None = None) -> float:
    """Frequency of {every eigenvalue within eps/2 of the mean spectrum}.

    Fresh draws start right after the ones behind ``stats`` unless an
    explicit offset is given.
    """
    offset = stats.n_draws if draw_offset is None else int(draw_offset)
    centers = np.sort(stats.mean_eigenvalues)
    streams = ens.streams()
    hits = 0
    for k in range(n_draws):
        X = sample_matrix(ens, offset + k, streams)
        w = np.linalg.eigvalsh(X @ X.T / ens.n)
        pos = np.searchsorted(centers, w)
        pos = np.clip(pos, 1, len(centers) - 1) if len(centers) > 1 else np.zeros_like(pos)
        if len(centers) > 1:
            dist = np.minimum(np.abs(w - centers[pos - 1]), np.abs(w - centers[pos]))
        else:
            dist = np.abs(w - centers[0])
        if (dist <= eps / 2.0).all():
            hits += 1
    return hits / n_draws


@dataclass(frozen=True)
class QuadraticFormReport:
    """x^T A Q_{-i} x centering against tr(Sigma_i A mean(Q))."""

    report: ConcentrationReport
    center: complex
    stderr: float
    n_sigmas: float
    within_3se: bool

    def to_dict(self) -> dict:
        c = complex(self.center)
        return {
            "report": self.report.to_dict(),
            "center": [c.real, c.imag],
            "stderr": self.stderr,
            "n_sigmas": self.n_sigmas,
            "within_3se": self.within_3se,
        }


def quadratic_form_check(ens: ColumnEnsemble, A: np.ndarray, z: complex,
                         n_draws: int, col: int = 0) -> QuadraticFormReport:
    """Measure x_i^T A Q_{-i}^z x_i and compare its mean to tr(Sigma_i A mean(Q)).

    mean(Q) is the Monte Carlo average of the full resolvent over the same
    draws; the comparison tolerance is 3 standard errors of the measured
    mean.
    """
    A = np.asarray(A, dtype=np.float64)
    streams = ens.streams()
    values = []
    acc_q = None
    for k in range(n_draws):
        s = ResolventSample(sample_matrix(ens, k, streams))
        Q = resolvent(s, z)
        acc_q = Q.copy() if acc_q is None else acc_q + Q
        sub = leave_one_out_sample(s, col)
        x = s.X[:, col]
        values.append(x @ (A @ resolvent(sub, z) @ x))
    values = np.array(values)
    mean_q = acc_q / n_draws
    sigma_i = ens.models[ens.assignment[col]].covariance()
    center = np.sum((sigma_i @ A) * mean_q.T)
    report = report_from_values(values, functional="x_A_Qloo_x", seed=ens.seed)
    se = report.std / math.sqrt(n_draws) if report.std > 0 else 0.0
    gap = abs(complex(values.mean()) - complex(center))
    n_sig = gap / se if se > 0 else (0.0 if gap == 0.0 else math.inf)
    return QuadraticFormReport(report, complex(center), float(se), float(n_sig),
                               bool(n_sig <= 3.0))
