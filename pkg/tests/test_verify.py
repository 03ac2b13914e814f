import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmeq import verify as V
from rmeq.ensembles import (
    BaseLaw,
    ColumnEnsemble,
    ColumnModel,
    isotropic_ensemble,
    sample_matrix,
    spectrum_stats,
)
from rmeq.errors import ConfigError, RejectionRateError
from rmeq.resolvent import ResolventSample, leave_one_out_sample, resolvent
from rmeq.rng import philox_generator


def _zero_ensemble(p=4, n=6, seed=0):
    model = ColumnModel(np.zeros(p), 0.0, BaseLaw.UNIFORM_CENTERED)
    return ColumnEnsemble.single_class(model, n, seed=seed)


# ---------------------------------------------------------------------------
# estimator machinery


def test_gaussian_stream_sigma_hat():
    # moments of |N(0,1)|: the r=2 term 1/sqrt(2) dominates the max
    vals = philox_generator(7, 0, 0).standard_normal(100_000)
    rep = V.report_from_values(vals)
    assert abs(rep.sigma_hat - 1.0 / math.sqrt(2.0)) / (1 / math.sqrt(2)) < 0.05
    moments = rep.moment_diameters
    assert moments[2] > moments[4] > moments[6] > moments[8]


def test_scaled_gaussian_sigma_hat():
    s = 3.7
    vals = s * philox_generator(8, 0, 0).standard_normal(100_000)
    rep = V.report_from_values(vals)
    assert abs(rep.sigma_hat - s / math.sqrt(2.0)) / (s / math.sqrt(2)) < 0.05


def test_constant_functional_degenerates():
    rep = V.report_from_values(np.full(500, 2.5))
    assert rep.sigma_hat == 0.0
    assert rep.std == 0.0
    assert all(p == 0.0 for _, p in rep.tail_table)


def test_moment_inequality_direction():
    vals = philox_generator(9, 0, 0).exponential(1.0, 20_000)
    rep = V.report_from_values(vals)
    for r, diam in rep.moment_diameters.items():
        assert diam <= rep.sigma_hat * (1.0 + 1e-9)
    assert rep.sigma_hat >= rep.std / math.sqrt(2.0) * (1.0 - 1e-12)


def test_tails_monotone_and_slopes():
    vals = philox_generator(10, 0, 0).standard_normal(50_000)
    rep = V.report_from_values(vals)
    ps = [p for _, p in rep.tail_table]
    assert all(a >= b for a, b in zip(ps, ps[1:]))
    # oracle: fit -log erfc(t/sqrt(2)) against t^2 on the same window
    ts = np.array([0.5, 1.0, 1.5, 2.0])
    exact = np.array([math.erfc(t / math.sqrt(2.0)) for t in ts])
    slope_oracle = np.polyfit(ts ** 2, -np.log(exact), 1)[0]
    assert rep.gaussian_slope == pytest.approx(slope_oracle, rel=0.05)


def test_measure_functional_bitwise_deterministic():
    ens = isotropic_ensemble(4, 8, seed=77)
    spec = V.FunctionalSpec("stieltjes", {"z": -1.0})
    with pytest.warns(UserWarning):
        a = V.measure_functional(ens, spec, 64)
        b = V.measure_functional(ens, spec, 64)
    assert a == b
    assert a.to_dict() == b.to_dict()


def test_trace_aq_norm_enforced():
    with pytest.raises(ConfigError):
        V.FunctionalSpec("trace_AQ", {"A": 2.0 * np.eye(3), "z": -1.0})
    V.FunctionalSpec("trace_AQ", {"A": np.eye(3) / 3.0, "z": -1.0})


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        V.FunctionalSpec("nope", {})


def test_stieltjes_std_shrinks_with_p():
    # fluctuations of (1/p) tr Q at z = -1 scale like 1/p
    stds = []
    for n in (64, 256):
        ens = isotropic_ensemble(n // 2, n, seed=5)
        spec = V.FunctionalSpec("stieltjes", {"z": -1.0})
        with pytest.warns(UserWarning):
            stds.append(V.measure_functional(ens, spec, 400).std)
    ratio = stds[1] / stds[0]
    assert 0.15 < ratio < 0.45  # ideal 1/4 with Monte Carlo slack


# ---------------------------------------------------------------------------
# scaling tables


def test_rate_scan_validation():
    fam = lambda n: isotropic_ensemble(n // 2, n, seed=0)
    metric = V.FunctionalStatMetric(V.FunctionalSpec("stieltjes", {"z": -1.0}))
    with pytest.raises(ConfigError):
        V.rate_scan(fam, metric, [100, 200], 10)
    with pytest.raises(ConfigError):
        V.rate_scan(fam, metric, [100, 200, 150], 10)
    with pytest.raises(ConfigError):
        V.rate_scan(fam, metric, [100, 110, 400], 10)


def test_rate_scan_zero_ensemble_degenerate():
    fam = lambda n: _zero_ensemble(4, n, seed=1)
    table = V.rate_scan(fam, V.LeaveOneOutMeanMetric(-1.0), [8, 16, 32], 5)
    assert table.degenerate
    assert table.slope is None
    assert all(v == 0.0 for _, _, v in table.rows)


def test_fit_scaling_recovers_exact_power_law():
    rows = [(n, n // 2, 3.0 * n ** -0.5) for n in (100, 200, 400, 800)]
    table = V.fit_scaling("synthetic", rows)
    assert table.slope == pytest.approx(-0.5, abs=1e-12)
    assert table.slope_stderr == pytest.approx(0.0, abs=1e-10)


# ---------------------------------------------------------------------------
# bilinear and product checks


def test_hanson_wright_two_point_law():
    # A = e1 e1^T on rademacher(+-1/2) columns: y^T A x = x1 y1 in {+-1/4}
    model = ColumnModel(np.zeros(3), None, BaseLaw.RADEMACHER_HALF)
    ens = ColumnEnsemble.single_class(model, 2, seed=3)
    A = np.zeros((3, 3))
    A[0, 0] = 1.0
    hw = V.hanson_wright_check(ens, A, 4000)
    vals_scale = (1.0 / 4.0) / math.sqrt(2.0)
    assert abs(hw.report.sigma_hat - vals_scale) < 5e-3
    assert hw.frobenius_norm == 1.0
    assert hw.spectral_norm == 1.0


def test_hanson_wright_zero_matrix():
    ens = isotropic_ensemble(4, 2, seed=9)
    hw = V.hanson_wright_check(ens, np.zeros((4, 4)), 1200)
    assert hw.report.sigma_hat == 0.0


def test_entrywise_product_check_m1_matches_baseline():
    ens = isotropic_ensemble(16, 4, seed=11)
    a = np.ones(16) / 4.0
    rep = V.entrywise_product_check(ens, a, 1, 3000)
    assert rep.report.sigma_hat == rep.baseline.sigma_hat
    assert rep.kappa == 0.5


def test_entrywise_identical_within_theorem_scale():
    ens = isotropic_ensemble(16, 4, seed=12)
    a = np.ones(16) / 4.0
    rep = V.entrywise_product_check(ens, a, 2, 3000, identical=True)
    assert rep.report.sigma_hat <= 10.0 * rep.bound_identical
    rep3 = V.entrywise_product_check(ens, a, 3, 3000, identical=False)
    assert rep3.report.sigma_hat <= 10.0 * rep3.bound_distinct


def test_product_check_m1_is_entry_diameter():
    ens = isotropic_ensemble(6, 6, seed=13)
    A = np.zeros((6, 6))
    A[0, 0] = 1.0
    pc = V.product_concentration_check(ens, A, 1, 2000, kappa=10.0)
    # tr(A X) = X_00 ~ U[-1/2,1/2]: r=2 diameter 1/sqrt(24)
    assert pc.rejection_rate == 0.0
    assert abs(pc.report.sigma_hat - 1.0 / math.sqrt(24.0)) < 0.01


def test_product_check_m2_regression_bound_and_ratio():
    ens = isotropic_ensemble(8, 8, seed=14)
    A = np.eye(8) / 8.0
    norms = [np.linalg.norm(sample_matrix(ens, k), 2) for k in range(5)]
    kappa = 1.5 * max(norms)
    pc2 = V.product_concentration_check(ens, A, 2, 1500, kappa=kappa)
    pc3 = V.product_concentration_check(ens, A, 3, 1500, kappa=kappa)
    assert pc2.ratio <= 10.0
    assert pc3.report.sigma_hat <= 4.0 * kappa * max(pc2.report.sigma_hat, 1e-12)


def test_product_check_rejection_abort():
    ens = isotropic_ensemble(8, 8, seed=15)
    with pytest.raises(RejectionRateError):
        V.product_concentration_check(ens, np.eye(8) / 8.0, 2, 500, kappa=1e-6)


def test_product_check_requires_square():
    ens = isotropic_ensemble(4, 8, seed=16)
    with pytest.raises(ConfigError):
        V.product_concentration_check(ens, np.eye(4), 2, 100, kappa=1.0)


# ---------------------------------------------------------------------------
# exact identities


def test_rota_trivial_m1():
    assert V.rota_identity_check([np.array([[2.0]])]) == 0.0


def test_rota_scalar_hand_example():
    # m=2 scalars 1, 2: both sides equal 4
    assert V.rota_identity_check([1.0, 2.0]) < 1e-15


def test_rota_matrices_m3():
    gen = philox_generator(17, 0, 0)
    mats = [gen.standard_normal((3, 3)) for _ in range(3)]
    assert V.rota_identity_check(mats) < 1e-12


@settings(max_examples=15, deadline=None, derandomize=True)
@given(m=st.integers(1, 4), dim=st.integers(1, 3), seed=st.integers(0, 99))
def test_rota_identity_property(m, dim, seed):
    gen = philox_generator(seed, 0, 0)
    mats = [gen.standard_normal((dim, dim)) for _ in range(m)]
    assert V.rota_identity_check(mats) < 1e-12


def test_rota_brute_force_cross_check():
    # independent oracle: expand the right side symbolically per permutation
    gen = philox_generator(18, 0, 0)
    mats = [gen.standard_normal((2, 2)) for _ in range(3)]
    lhs = np.zeros((2, 2))
    import itertools
    for perm in itertools.permutations(range(3)):
        P = mats[perm[0]] @ mats[perm[1]] @ mats[perm[2]]
        lhs += P
    rhs = np.zeros((2, 2))
    for mask in range(1, 8):
        subset = [mats[i] for i in range(3) if mask >> i & 1]
        S = sum(subset)
        rhs += (-1.0) ** len(subset) * np.linalg.matrix_power(S, 3)
    rhs *= -1.0
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert V.rota_identity_check(mats) < 1e-13


def test_rota_m_cap():
    with pytest.raises(ConfigError):
        V.rota_identity_check([np.eye(2)] * 9)


# ---------------------------------------------------------------------------
# Talagrand-type bound


def test_talagrand_constant_functional():
    ens = isotropic_ensemble(4, 4, seed=19, base=BaseLaw.UNIFORM_UNIT)
    fn = V.ConvexLipschitzFunctional("const", lambda X: 1.0)
    cmp = V.talagrand_direct_check(ens, fn, 400)
    assert cmp.all_ok
    assert all(r.empirical == 0.0 for r in cmp.rows)


def test_talagrand_norm_functionals_hold():
    ens = isotropic_ensemble(10, 10, seed=20, base=BaseLaw.UNIFORM_UNIT)
    for fn in (V.distance_to(np.full((10, 10), 0.5)),
               V.largest_singular_value(),
               V.frobenius_norm_functional()):
        cmp = V.talagrand_direct_check(ens, fn, 1500)
        assert cmp.all_ok, fn.name


def test_talagrand_certificate_required():
    ens = isotropic_ensemble(4, 4, seed=21, base=BaseLaw.UNIFORM_UNIT)
    bad = V.ConvexLipschitzFunctional("bad", lambda X: 0.0, convex=False)
    with pytest.raises(ConfigError):
        V.talagrand_direct_check(ens, bad, 100)
    steep = V.ConvexLipschitzFunctional("steep", lambda X: 0.0, lipschitz=5.0)
    with pytest.raises(ConfigError):
        V.talagrand_direct_check(ens, steep, 100)


def test_talagrand_factor_norm_guard():
    ens = isotropic_ensemble(4, 4, seed=22, scale=3.0)
    with pytest.raises(ConfigError):
        V.talagrand_direct_check(ens, V.frobenius_norm_functional(), 100)


# ---------------------------------------------------------------------------
# events, leave-one-out, quadratic forms


def test_event_frequency_trivial_cases():
    ens = _zero_ensemble(3, 4, seed=23)
    stats = spectrum_stats(ens, 4, 0.05)
    assert V.event_a_eps_frequency(ens, 0.05, 10, stats) == 1.0

    ens = isotropic_ensemble(6, 12, seed=24)
    stats = spectrum_stats(ens, 10, 0.05)
    assert V.event_a_eps_frequency(ens, 100.0, 10, stats) == 1.0


def test_leave_one_out_single_draw_bound():
    ens = isotropic_ensemble(8, 16, seed=25)
    s = ResolventSample(sample_matrix(ens, 0))
    z = -1.0
    Q = resolvent(s, z)
    Qm = resolvent(leave_one_out_sample(s, 0), z)
    x = s.X[:, 0]
    assert np.linalg.norm(Q - Qm, 2) <= (
        np.linalg.norm(Q, 2) * np.linalg.norm(Qm, 2) * (x @ x) / s.n
    ) * (1 + 1e-12)


def test_quadratic_form_zero_matrix():
    ens = isotropic_ensemble(4, 8, seed=26)
    qf = V.quadratic_form_check(ens, np.zeros((4, 4)), -1.0, 50)
    assert qf.report.sigma_hat == 0.0
    assert qf.center == 0.0
    assert qf.within_3se


def test_quadratic_form_enumerable_toy():
    # p=1, n=2, rademacher(+-1/2): K_{-0} = x2^2/2 = 1/8 and x0^2 = 1/4
    # always, so the measured value is constant a/4 / (z - 1/8); the
    # centering uses E[Q] = 1/(z - 1/4).
    model = ColumnModel(np.zeros(1), None, BaseLaw.RADEMACHER_HALF)
    ens = ColumnEnsemble.single_class(model, 2, seed=27)
    a = 0.7
    z = -1.0
    qf = V.quadratic_form_check(ens, np.array([[a]]), z, 40)
    hand_value = a * 0.25 / (z - 0.125)
    hand_center = a * 0.25 / (z - 0.25)
    assert complex(qf.report.mean) == pytest.approx(hand_value, abs=1e-14)
    assert complex(qf.center) == pytest.approx(hand_center, abs=1e-14)


def test_quadratic_form_centering_isotropic():
    ens = isotropic_ensemble(24, 48, seed=28)
    A = np.eye(24) / math.sqrt(24.0)
    qf = V.quadratic_form_check(ens, A, -1.0, 600)
    assert qf.within_3se
    assert qf.stderr > 0
