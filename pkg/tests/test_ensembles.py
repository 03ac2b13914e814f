import numpy as np
import pytest

from rmeq.ensembles import (
    AssumptionWarning,
    BaseLaw,
    ColumnEnsemble,
    ColumnModel,
    class_covariances,
    isotropic_ensemble,
    population_covariances,
    sample_column,
    sample_matrix,
    spectrum_stats,
    spiked_ensemble,
)
from rmeq.errors import ConfigError


def test_zero_factor_gives_zero_matrix():
    model = ColumnModel(np.zeros(4), 0.0, BaseLaw.UNIFORM_CENTERED)
    ens = ColumnEnsemble.single_class(model, 6, seed=3)
    assert np.array_equal(sample_matrix(ens, 0), np.zeros((4, 6)))


def test_base_law_support():
    ens = isotropic_ensemble(1, 1, seed=11)
    draws = np.array([sample_matrix(ens, k)[0, 0] for k in range(500)])
    assert draws.min() >= -0.5 and draws.max() <= 0.5

    ens_u = isotropic_ensemble(1, 1, seed=11, base=BaseLaw.UNIFORM_UNIT)
    draws = np.array([sample_matrix(ens_u, k)[0, 0] for k in range(200)])
    assert draws.min() >= 0.0 and draws.max() <= 1.0

    ens_r = isotropic_ensemble(1, 1, seed=11, base=BaseLaw.RADEMACHER_HALF)
    draws = np.array([sample_matrix(ens_r, k)[0, 0] for k in range(200)])
    assert set(np.unique(draws)) <= {-0.5, 0.5}


def test_reproducibility_bitwise():
    ens = spiked_ensemble(5, 9, seed=101, spike_scale=0.7)
    assert np.array_equal(sample_matrix(ens, 4), sample_matrix(ens, 4))
    # a fresh but identical ensemble object gives the same draw
    ens2 = spiked_ensemble(5, 9, seed=101, spike_scale=0.7)
    assert np.array_equal(sample_matrix(ens, 4), sample_matrix(ens2, 4))


def test_sample_column_matches_matrix():
    ens = isotropic_ensemble(6, 8, seed=5)
    X = sample_matrix(ens, 2)
    for i in (0, 3, 7):
        assert np.array_equal(sample_column(ens, 2, i), X[:, i])


def test_empirical_column_covariance_matches_population():
    # law of large numbers oracle: E[x x^T] = (1/12) I for uniform_centered
    ens = isotropic_ensemble(6, 4, seed=7)
    n_draws = 20000
    streams = ens.streams()
    acc = np.zeros((6, 6))
    for k in range(n_draws):
        x = sample_column(ens, k, 0, streams)
        acc += np.outer(x, x)
    emp = acc / n_draws
    expected = population_covariances(ens)[0]
    # entrywise 3-standard-error band
    se_diag = np.sqrt(1.0 / 180.0 / n_draws)      # Var(w^2) = 1/180
    se_off = np.sqrt((1.0 / 144.0) / n_draws)     # Var(w_i w_j) = 1/144
    err = np.abs(emp - expected)
    assert np.all(np.diag(err) <= 3.0 * se_diag)
    off = err[~np.eye(6, dtype=bool)]
    assert np.all(off <= 3.0 * se_off)


def test_population_covariance_closed_forms():
    # identity factor, zero mean, uniform_centered
    ens = isotropic_ensemble(3, 3, seed=0)
    assert np.allclose(class_covariances(ens)[0], np.eye(3) / 12.0)
    # zero factor, mean e1
    m = ColumnModel(np.array([1.0, 0.0]), 0.0, BaseLaw.UNIFORM_CENTERED)
    assert np.allclose(m.covariance(), np.outer([1, 0], [1, 0]))
    # diagonal factor, rademacher: Sigma = diag(1/4, 1)
    m = ColumnModel(np.zeros(2), np.diag([1.0, 2.0]), BaseLaw.RADEMACHER_HALF)
    assert np.allclose(m.covariance(), np.diag([0.25, 1.0]))


def test_uniform_unit_covariance_includes_base_mean():
    m = ColumnModel(np.zeros(2), None, BaseLaw.UNIFORM_UNIT)
    # E[x] = 0.5 * ones, so E[x x^T] = (1/12) I + 0.25 * ones
    expected = np.eye(2) / 12.0 + 0.25 * np.ones((2, 2))
    assert np.allclose(m.covariance(), expected)
    assert np.allclose(m.effective_mean(), [0.5, 0.5])
    # Monte Carlo agreement
    ens = ColumnEnsemble.single_class(m, 2, seed=13)
    acc = np.zeros((2, 2))
    n_draws = 20000
    streams = ens.streams()
    for k in range(n_draws):
        x = sample_column(ens, k, 0, streams)
        acc += np.outer(x, x)
    assert np.all(np.abs(acc / n_draws - expected) < 0.01)


def test_population_list_shares_class_arrays():
    ens = isotropic_ensemble(4, 10, seed=1)
    sigmas = population_covariances(ens)
    assert len(sigmas) == 10
    assert all(s is sigmas[0] for s in sigmas)


def test_column_independence_proxy():
    ens = isotropic_ensemble(2, 3, seed=21)
    n_draws = 8000
    streams = ens.streams()
    prods = np.empty(n_draws)
    for k in range(n_draws):
        X = sample_matrix(ens, k, streams)
        prods[k] = X[0, 0] * X[0, 1]
    # E[x_i x_j] = 0 across columns; 1/sqrt(N) rate with variance (1/12)^2
    assert abs(prods.mean()) <= 4.0 * (1.0 / 12.0) / np.sqrt(n_draws)


def test_affine_metadata_scales_with_factor_norm():
    base = ColumnModel(np.zeros(3), None, BaseLaw.UNIFORM_CENTERED)
    scaled = ColumnModel(np.zeros(3), 3.0, BaseLaw.UNIFORM_CENTERED)
    assert scaled.sup_entry_bound() == pytest.approx(3.0 * base.sup_entry_bound())
    assert np.allclose(scaled.covariance(), 9.0 * base.covariance())


def test_mean_norm_warns_not_errors():
    with pytest.warns(AssumptionWarning):
        ColumnModel(np.full(400, 1.0), None, BaseLaw.UNIFORM_CENTERED)


def test_dimension_mismatch_is_config_error():
    with pytest.raises(ConfigError):
        ColumnModel(np.zeros(3), np.zeros((4, 2)), BaseLaw.UNIFORM_CENTERED)
    model = ColumnModel(np.zeros(3), None, BaseLaw.UNIFORM_CENTERED)
    with pytest.raises(ConfigError):
        ColumnEnsemble(4, 5, (model,), np.zeros(5, dtype=int), seed=0)
    with pytest.raises(ConfigError):
        ColumnEnsemble(3, 5, (model,), np.zeros(4, dtype=int), seed=0)


def test_gamma_constraint():
    model = ColumnModel(np.zeros(8), None, BaseLaw.UNIFORM_CENTERED)
    with pytest.raises(ConfigError):
        ColumnEnsemble.single_class(model, 4, seed=0, gamma=1.0)
    ens = ColumnEnsemble.single_class(model, 4, seed=0, gamma=2.0)
    assert ens.gamma == 2.0


def test_negative_draw_index_rejected():
    ens = isotropic_ensemble(2, 2, seed=0)
    with pytest.raises(ConfigError):
        sample_matrix(ens, -1)


def test_spectrum_stats_zero_ensemble():
    model = ColumnModel(np.zeros(3), 0.0, BaseLaw.UNIFORM_CENTERED)
    ens = ColumnEnsemble.single_class(model, 5, seed=2)
    stats = spectrum_stats(ens, 4, 0.05)
    assert stats.nu_hat == 0.0
    assert stats.a_eps_frequency == 1.0
    assert stats.support_intervals == ((-0.05, 0.05),)
    assert stats.distance_to_support(0.0) == 0.0
    assert stats.distance_to_support(1.0) == pytest.approx(0.95)


def test_spectrum_stats_mp_edge():
    # right edge of the isotropic limit: (1/12)(1 + sqrt(c))^2 at c = 1/2
    ens = isotropic_ensemble(100, 200, seed=33)
    stats = spectrum_stats(ens, 20, 0.05)
    edge = (1.0 / 12.0) * (1.0 + np.sqrt(0.5)) ** 2
    assert abs(stats.nu_hat - edge) < 0.02


def test_event_frequency_increases_with_n():
    # small n: eigenvalues fluctuate beyond eps/2; larger n tightens them
    freqs = []
    for n in (16, 128):
        ens = isotropic_ensemble(n // 2, n, seed=55)
        stats = spectrum_stats(ens, 60, 0.05)
        freqs.append(stats.a_eps_frequency)
    assert freqs[1] >= freqs[0]
    assert freqs[1] >= 0.9


def test_two_class_assignment_layout():
    m1 = ColumnModel(np.zeros(3), None, BaseLaw.UNIFORM_CENTERED)
    m2 = ColumnModel(np.zeros(3), 2.0, BaseLaw.UNIFORM_CENTERED)
    assignment = np.array([0, 1, 0, 1, 0, 1])
    ens = ColumnEnsemble(3, 6, (m1, m2), assignment, seed=8)
    assert list(ens.class_counts()) == [3, 3]
    X = sample_matrix(ens, 0)
    assert np.all(np.abs(X[:, [0, 2, 4]]) <= 0.5)
    # class-2 columns can exceed 1/2 in absolute value; check scale statistically
    assert np.abs(X[:, [1, 3, 5]]).max() > 0.5
