import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmeq.detequiv import CovarianceFamily, mp_oracle_stieltjes
from rmeq.ensembles import isotropic_ensemble, sample_matrix, spiked_ensemble
from rmeq.errors import ConfigError, NodeError, SignConventionError
from rmeq.resolvent import ResolventSample, stieltjes
from rmeq.spectral import (
    ContourSpec,
    contour_trace,
    density_from_stieltjes,
    direct_projector,
    empirical_projector_trace,
    projector_estimate,
)

UNIT_SQUARE = ContourSpec(-0.5, 0.5, 0.5, nodes_per_side=64)


def test_contour_spec_validation():
    with pytest.raises(ConfigError):
        ContourSpec(1.0, 0.0, 0.5)
    with pytest.raises(ConfigError):
        ContourSpec(0.0, 1.0, -0.1)
    with pytest.raises(ConfigError):
        ContourSpec(0.0, 1.0, 0.5, nodes_per_side=4)
    with pytest.raises(ConfigError):
        ContourSpec(0.0, 1.0, 0.5, rule="simpson")


def test_path_weights_sum_to_zero():
    nodes, weights = UNIT_SQUARE.path_nodes()
    # closed path: integral of dz vanishes; of z dz vanishes too
    assert abs(weights.sum()) < 1e-14
    assert abs((nodes * weights).sum()) < 1e-14


def test_residue_sign_and_value():
    assert abs(contour_trace(lambda z: 1.0 / z, UNIT_SQUARE) - (-1.0)) < 1e-10
    assert abs(contour_trace(lambda z: 1.0 / (z - 3), UNIT_SQUARE)) < 1e-10


@settings(max_examples=20, deadline=None, derandomize=True)
@given(re=st.floats(-0.38, 0.38), im=st.floats(-0.38, 0.38))
def test_residue_inside_poles(re, im):
    # poles at least 0.1 away from the unit-square path (|coord| <= 0.38)
    val = contour_trace(lambda z: 1.0 / (z - complex(re, im)), UNIT_SQUARE)
    assert abs(val + 1.0) < 1e-8


@settings(max_examples=20, deadline=None, derandomize=True)
@given(x=st.floats(0.62, 3.0), sign=st.sampled_from([1.0, -1.0]))
def test_residue_outside_poles(x, sign):
    val = contour_trace(lambda z: 1.0 / (z - sign * x), UNIT_SQUARE)
    assert abs(val) < 1e-8


def test_analytic_integrand_vanishes():
    val = contour_trace(lambda z: np.exp(z) + z ** 3, UNIT_SQUARE)
    assert abs(val) < 1e-10


def test_empirical_projector_counts_eigenvalues():
    s = ResolventSample(np.zeros((1, 1)))
    assert abs(empirical_projector_trace(s, UNIT_SQUARE) - 1.0) < 1e-10

    ens = isotropic_ensemble(8, 16, seed=2)
    s = ResolventSample(sample_matrix(ens, 0))
    lo, hi = s.eigenvalues[-1], s.eigenvalues[0]
    box = ContourSpec(lo - 0.3, hi + 0.3, 0.4, nodes_per_side=64)
    assert abs(empirical_projector_trace(s, box) - s.p) < 1e-8


def test_projector_matches_direct_eigenprojector_for_random_A():
    ens = isotropic_ensemble(8, 16, seed=0)
    s = ResolventSample(sample_matrix(ens, 0))
    # cut the spectrum at its widest interior gap and enclose the top part
    gaps = -np.diff(s.eigenvalues)
    split = int(np.argmax(gaps))
    cut = 0.5 * (s.eigenvalues[split] + s.eigenvalues[split + 1])
    assert min(s.eigenvalues[split] - cut, cut - s.eigenvalues[split + 1]) >= 0.05
    hi = s.eigenvalues[0] + 0.3
    box = ContourSpec(cut, hi, 0.3, nodes_per_side=96)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((8, 8))
    pi = direct_projector(s, cut, hi + 1.0)
    ref = np.trace(pi @ A)
    est = empirical_projector_trace(s, box, A)
    assert abs(est - ref) < 1e-7


def test_projector_estimate_trivial_and_full_bulk():
    fam = CovarianceFamily.isotropic(8, 16, 1.0)
    empty = ContourSpec(4.5, 5.5, 0.25, nodes_per_side=32)
    assert abs(projector_estimate(fam, empty)) < 1e-8
    bulk = ContourSpec(-0.5, 3.5, 0.5, nodes_per_side=96)
    assert abs(projector_estimate(fam, bulk) - 8.0) < 0.08  # within 1%


def test_projector_estimate_propagates_node_failures():
    fam = CovarianceFamily.isotropic(8, 16, 1.0)
    # rectangle sides cross the bulk: some nodes sit on the support
    bad = ContourSpec(1.0, 2.0, 0.05, nodes_per_side=16)
    with pytest.raises(NodeError):
        projector_estimate(fam, bad, max_iter=50)


def test_spiked_deterministic_vs_mc_projector():
    # rank-one mean shift: one isolated eigenvalue; deterministic equivalent
    # and Monte Carlo agree at O(1/sqrt(n)) scale
    p, n = 60, 120
    theta = np.sqrt(1.0 / 3.0)
    ens = spiked_ensemble(p, n, seed=5, spike_scale=theta)
    contour = ContourSpec(0.32, 0.64, 0.1, nodes_per_side=64)
    u = np.ones(p) / np.sqrt(p)
    A = np.outer(u, u)
    det = projector_estimate(CovarianceFamily.from_ensemble(ens), contour, A)
    streams = ens.streams()
    vals = []
    for k in range(40):
        s = ResolventSample(sample_matrix(ens, k, streams))
        vals.append(empirical_projector_trace(s, contour, A))
    mc = np.mean(vals)
    assert abs(det - mc) < 0.1
    assert 0.5 < det.real < 1.05


def test_density_cauchy_kernel_point_mass():
    # zero ensemble: g(z) = 1/z, so rho(x) = eta / (pi (x^2 + eta^2))
    s = ResolventSample(np.zeros((3, 6)))
    g = lambda z: stieltjes(s, z)
    xs = np.linspace(-1.0, 1.0, 41)
    eta = 1e-2
    grid = density_from_stieltjes(g, xs, eta)
    expected = eta / (np.pi * (xs ** 2 + eta ** 2))
    assert np.allclose(grid.rho, expected, rtol=1e-12)


def test_density_mp_point_and_mass():
    g = lambda z: mp_oracle_stieltjes(1.0, 1.0, z)
    d1 = density_from_stieltjes(g, np.array([1.0]), 2e-3).rho[0]
    d2 = density_from_stieltjes(g, np.array([1.0]), 1e-3).rho[0]
    extrapolated = 2.0 * d2 - d1
    assert abs(extrapolated - np.sqrt(3.0) / (2.0 * np.pi)) < 1e-4
    xs = np.arange(-0.5, 4.5 + 1e-12, 5e-4)
    grid = density_from_stieltjes(g, xs, 1e-3)
    assert abs(grid.mass() - 1.0) < 5e-3


def test_density_validation_and_node_errors():
    g = lambda z: 1.0 / z
    with pytest.raises(ConfigError):
        density_from_stieltjes(g, [0.0], 0.0)

    def bad(z):
        raise RuntimeError("boom")

    with pytest.raises(NodeError) as err:
        density_from_stieltjes(bad, [0.0, 1.0], 0.1)
    assert err.value.index == 0


def test_density_sign_consistency_enforced():
    flip = lambda z: 1j * np.sign(z.real)
    with pytest.raises(SignConventionError):
        density_from_stieltjes(flip, [-1.0, 1.0], 0.1)


def test_clearance_computation():
    spec = ContourSpec(1.0, 2.0, 0.2, nodes_per_side=16)
    assert spec.clearance_to([(0.0, 0.8)]) == pytest.approx(0.2)
    assert spec.clearance_to([(2.5, 3.0)]) == pytest.approx(0.5)
    assert spec.clearance_to([(1.4, 1.6)]) == pytest.approx(0.4)   # inside
    assert spec.clearance_to([(0.5, 1.2)]) < 0                     # crossing
