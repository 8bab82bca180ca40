import numpy as np
import pytest

from gspest.errors import DisconnectedGraphError, InvalidGraphError
from gspest.filters import FilterSpec
from gspest.graphs import build_laplacian
from gspest.models import (
    AcGridModel,
    NoiseModel,
    SmoothPrior,
    ac_measurement_model,
    ac_power,
    audit_model_structure,
    bundled_ieee118,
    linear_filter_model,
    load_grid,
    perturb_grid,
    sample_prior,
)
from gspest.rng import generator
from tests.test_graphs import random_connected_graph


def random_grid(rng, n, extra=0.5):
    """Random connected AC grid; susceptances are the graph weights."""
    graph = random_connected_graph(rng, n, extra=extra)
    b = graph.adjacency() * rng.uniform(5.0, 40.0)
    g = np.where(b > 0, rng.uniform(0.5, 5.0, b.shape), 0.0)
    g = np.triu(g, 1)
    g = g + g.T
    return AcGridModel(g, b, np.ones(n))


# --------------------------------------------------------------------- prior


def test_smooth_prior_variances():
    sg = build_laplacian(random_connected_graph(generator(41, "prior"), 10))
    prior = SmoothPrior(sg, beta=3.0)
    var = prior.frequency_variances
    assert var[0] == 0.0
    assert np.allclose(var[1:], 3.0 / sg.eigenvalues[1:], atol=1e-15)
    cov = prior.covariance()
    v = sg.eigenvectors
    assert np.max(np.abs(v.T @ cov @ v - np.diag(var))) < 1e-10


def test_prior_samples_orthogonal_to_constant():
    sg = build_laplacian(random_connected_graph(generator(42, "prior"), 8))
    x = sample_prior(SmoothPrior(sg, 3.0), 500, seed=1)
    v1 = sg.eigenvectors[:, 0]
    assert np.max(np.abs(x @ v1)) < 1e-10


def test_prior_dirichlet_energy():
    # E[x^T L x] = sum over positive frequencies of beta = beta * (n - 1)
    rng = generator(43, "prior")
    sg = build_laplacian(random_connected_graph(rng, 12))
    beta = 3.0
    x = sample_prior(SmoothPrior(sg, beta), 100_000, seed=7)
    energy = np.einsum("ij,jk,ik->i", x, sg.laplacian, x)
    want = beta * (sg.n_vertices - 1)
    assert abs(energy.mean() - want) < 0.05 * want


def test_prior_sample_covariance_converges():
    rng = generator(44, "prior")
    sg = build_laplacian(random_connected_graph(rng, 6))
    prior = SmoothPrior(sg, 2.0)
    x = sample_prior(prior, 100_000, seed=3)
    emp = x.T @ x / x.shape[0]
    want = prior.covariance()
    assert np.max(np.abs(emp - want)) < 0.05 * np.abs(want).max()


def test_from_variances_validation():
    sg = build_laplacian(random_connected_graph(generator(45, "prior"), 5))
    with pytest.raises(ValueError):
        SmoothPrior.from_variances(sg, np.ones(4))
    with pytest.raises(ValueError):
        SmoothPrior.from_variances(sg, -np.ones(5))
    with pytest.raises(ValueError):
        SmoothPrior(sg, beta=0.0)


# --------------------------------------------------------------------- noise


def test_white_noise_moments():
    noise = NoiseModel.white(0.25, 6)
    w = noise.sample(200_000, seed=2)
    assert np.abs(w.mean(axis=0)).max() < 0.01
    emp = w.T @ w / w.shape[0]
    assert np.max(np.abs(emp - 0.25 * np.eye(6))) < 0.01


def test_colored_noise_sampling():
    rng = generator(46, "noise")
    a = rng.standard_normal((5, 5))
    cov = a @ a.T + 0.1 * np.eye(5)
    noise = NoiseModel(cov)
    w = noise.sample(300_000, seed=4)
    emp = w.T @ w / w.shape[0]
    assert np.max(np.abs(emp - cov)) < 0.05 * np.abs(cov).max()


def test_noise_frequency_covariance_white_is_diagonal():
    sg = build_laplacian(random_connected_graph(generator(47, "noise"), 7))
    nfc = NoiseModel.white(0.05, 7).frequency_covariance(sg)
    assert np.max(np.abs(nfc - 0.05 * np.eye(7))) < 1e-12


# ------------------------------------------------------------------ AC model


def test_ac_power_translation_invariant():
    rng = generator(48, "ac")
    grid = random_grid(rng, 9)
    x = rng.standard_normal(9)
    for c in (1.0, -3.7, 100.0):
        assert np.max(np.abs(ac_power(grid, x + c) - ac_power(grid, x))) < 1e-12


def test_ac_power_zero_with_no_conductance():
    rng = generator(49, "ac")
    grid = random_grid(rng, 6)
    reactive = AcGridModel(np.zeros_like(grid.conductance), grid.susceptance, grid.voltage)
    assert np.max(np.abs(ac_power(reactive, np.zeros(6)))) == 0.0


def test_ac_jacobian_at_zero_is_laplacian():
    # with no conductance and unit voltages, d g / d x at 0 equals L
    rng = generator(50, "ac")
    grid = random_grid(rng, 8)
    reactive = AcGridModel(np.zeros_like(grid.conductance), grid.susceptance, grid.voltage)
    lap = reactive.laplacian()
    n = 8
    h = 1e-6
    jac = np.zeros((n, n))
    for m in range(n):
        e = np.zeros(n)
        e[m] = h
        jac[:, m] = (ac_power(reactive, e) - ac_power(reactive, -e)) / (2 * h)
    assert np.max(np.abs(jac - lap)) < 1e-6 * max(np.abs(lap).max(), 1.0)


def test_ac_linearization_residual_shrinks():
    rng = generator(51, "ac")
    grid = random_grid(rng, 8)
    reactive = AcGridModel(np.zeros_like(grid.conductance), grid.susceptance, grid.voltage)
    lap = reactive.laplacian()
    direction = rng.standard_normal(8)
    direction /= np.linalg.norm(direction)
    resid = []
    for scale in (1e-2, 1e-3):
        x = scale * direction
        lin = lap @ x
        resid.append(np.linalg.norm(ac_power(reactive, x) - lin) / np.linalg.norm(lin))
    # quadratic nonlinearity: one decade in amplitude is one decade in ratio
    assert resid[1] < 0.2 * resid[0]


def test_ac_power_batched():
    rng = generator(52, "ac")
    grid = random_grid(rng, 7)
    x = rng.standard_normal((4, 7))
    out = ac_power(grid, x)
    assert out.shape == (4, 7)
    for i in range(4):
        assert np.allclose(out[i], ac_power(grid, x[i]), atol=1e-14)


def test_grid_validation():
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(InvalidGraphError):
        AcGridModel(np.zeros((2, 2)), b, np.array([1.0, 0.0]))  # zero voltage
    bad = b.copy()
    bad[0, 0] = 1.0
    with pytest.raises(InvalidGraphError):
        AcGridModel(np.zeros((2, 2)), bad, np.ones(2))  # diagonal entry
    with pytest.raises(InvalidGraphError):
        AcGridModel(np.zeros((3, 3)), b, np.ones(2))  # shape mismatch


# -------------------------------------------------------------- bundled grid


def test_bundled_grid_facts():
    grid = bundled_ieee118()
    assert grid.n_buses == 118
    assert len(grid.branch_values()) == 179
    sg = build_laplacian(grid.graph())
    assert sg.is_connected()
    assert sg.eigenvalues[1] == pytest.approx(0.295313, abs=1e-4)
    assert sg.eigenvalues[-1] == pytest.approx(578.605, rel=1e-4)
    # total prior power at beta = 3
    power = 3.0 * np.sum(1.0 / sg.eigenvalues[1:])
    assert power == pytest.approx(39.773, rel=1e-3)


def test_load_grid_round_trip(tmp_path):
    rng = generator(53, "io")
    grid = random_grid(rng, 10)
    path = tmp_path / "branches.csv"
    lines = ["from,to,conductance,susceptance"]
    for i, j, g, b in grid.branch_values():
        lines.append(f"{i + 1},{j + 1},{g!r},{b!r}")
    path.write_text("\n".join(lines) + "\n")
    back = load_grid(path)
    assert np.allclose(back.conductance, grid.conductance, atol=1e-15)
    assert np.allclose(back.susceptance, grid.susceptance, atol=1e-15)


def test_load_grid_rejects_bad_input(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(InvalidGraphError):
        load_grid(p)
    p.write_text("from,to,conductance,susceptance\n1,2,0.1,1.0\n1,2,0.1,2.0\n")
    with pytest.raises(InvalidGraphError):
        load_grid(p)
    # two disconnected pairs
    p.write_text(
        "from,to,conductance,susceptance\n1,2,0.1,1.0\n3,4,0.1,2.0\n"
    )
    with pytest.raises(DisconnectedGraphError):
        load_grid(p)


# -------------------------------------------------------- measurement models


def test_ac_measurement_model_shapes():
    rng = generator(54, "model")
    model = ac_measurement_model(random_grid(rng, 9), beta=3.0, sigma2=0.05)
    x = model.sample_x(11, seed=5)
    assert x.shape == (11, 9)
    g = model.forward(x)
    assert np.asarray(g).shape == (11, 9)
    assert np.array_equal(model.mean_x, np.zeros(9))


def test_linear_filter_model_forward_is_filter():
    rng = generator(55, "model")
    sg = build_laplacian(random_connected_graph(rng, 8))
    spec = FilterSpec.linear([1.0, 0.2])
    model = linear_filter_model(sg, spec, sigma2=0.01)
    from gspest.filters import filter_matrix

    mat = filter_matrix(spec, sg)
    x = rng.standard_normal((3, 8))
    assert np.max(np.abs(model.forward(x) - x @ mat.T)) < 1e-12


def test_measurement_model_dimension_check():
    rng = generator(56, "model")
    sg = build_laplacian(random_connected_graph(rng, 6))
    sg2 = build_laplacian(random_connected_graph(rng, 7))
    from gspest.models import MeasurementModel

    with pytest.raises(ValueError):
        MeasurementModel(sg, SmoothPrior(sg2, 1.0), NoiseModel.white(0.1, 6), lambda x: x)


# --------------------------------------------------------- grid perturbation


def test_perturb_grid_add_edges_reactive():
    rng = generator(57, "perturb")
    grid = random_grid(rng, 12)
    new, vmap = perturb_grid(grid, 3, "add-edges", seed=4)
    assert vmap == {i: i for i in range(12)}
    assert len(new.branch_values()) == len(grid.branch_values()) + 3
    old = {(i, j) for i, j, _, _ in grid.branch_values()}
    for i, j, g, b in new.branch_values():
        if (i, j) not in old:
            assert g == 0.0, "added branches are purely reactive"
            assert b > 0


def test_perturb_grid_keeps_old_branch_values():
    rng = generator(58, "perturb")
    grid = random_grid(rng, 10)
    new, _ = perturb_grid(grid, 2, "add-edges", seed=1)
    old = {(i, j): (g, b) for i, j, g, b in grid.branch_values()}
    for i, j, g, b in new.branch_values():
        if (i, j) in old:
            assert (g, b) == old[(i, j)]


def test_perturb_grid_add_vertices():
    rng = generator(59, "perturb")
    grid = random_grid(rng, 10)
    new, vmap = perturb_grid(grid, 2, "add-vertices", seed=3)
    assert new.n_buses == 12
    assert vmap == {i: i for i in range(10)}
    assert np.array_equal(new.voltage[:10], grid.voltage)
    assert np.all(new.voltage[10:] == 1.0)
    sg = build_laplacian(new.graph())
    assert sg.is_connected()


def test_perturb_grid_remove_vertices():
    rng = generator(60, "perturb")
    grid = random_grid(rng, 12, extra=1.0)
    new, vmap = perturb_grid(grid, 2, "remove-vertices", seed=6)
    assert new.n_buses == 10
    assert len(vmap) == 10
    inv = {n: o for o, n in vmap.items()}
    for i, j, g, b in new.branch_values():
        oi, oj = inv[i], inv[j]
        assert grid.susceptance[oi, oj] == b
        assert grid.conductance[oi, oj] == g
    assert np.array_equal(new.voltage, grid.voltage[sorted(vmap)])


def test_perturb_grid_remove_edges():
    rng = generator(61, "perturb")
    grid = random_grid(rng, 12, extra=1.0)
    new, vmap = perturb_grid(grid, 2, "remove-edges", seed=2)
    assert len(new.branch_values()) == len(grid.branch_values()) - 2
    assert build_laplacian(new.graph()).is_connected()


def test_perturb_grid_bad_mode():
    rng = generator(62, "perturb")
    with pytest.raises(ValueError):
        perturb_grid(random_grid(rng, 6), 1, "shuffle", seed=0)


# ------------------------------------------------------------ structure audit


def test_audit_linear_filter_model_all_hold():
    rng = generator(63, "audit")
    sg = build_laplacian(random_connected_graph(rng, 8))
    model = linear_filter_model(sg, FilterSpec.linear([1.0, 0.4, 0.05]), sigma2=0.02)
    flags = audit_model_structure(model, count=20_000, seed=1)
    assert all(flags.values()), flags


def test_audit_ac_model_pattern():
    # the AC grid keeps the spectral prior and white noise structure but the
    # forward map is neither separable per frequency nor a linear filter
    rng = generator(64, "audit")
    model = ac_measurement_model(random_grid(rng, 10))
    flags = audit_model_structure(model, count=50_000, seed=2)
    assert flags["independent_input_spectrum"]
    assert flags["diagonal_noise_spectrum"]
    assert flags["diagonal_input_spectrum"]
    assert not flags["separable_frequency_map"]
    assert not flags["linear_graph_filter"]


def test_audit_coupled_input_detected():
    # correlate two frequency coefficients through a shared factor
    rng = generator(65, "audit")
    sg = build_laplacian(random_connected_graph(rng, 6))
    var = np.concatenate([[0.0], np.full(5, 1.0)])
    prior = SmoothPrior.from_variances(sg, var)
    model = linear_filter_model(sg, FilterSpec.linear([1.0]), prior=prior, sigma2=0.01)

    def coupled_sample(count, seed):
        rng2 = generator(seed, "prior")
        z = rng2.standard_normal((count, 6))
        z[:, 2] = z[:, 1]  # perfectly correlated pair
        return (z * np.sqrt(var)) @ sg.eigenvectors.T

    object.__setattr__(model, "sample_x", coupled_sample)
    flags = audit_model_structure(model, count=20_000, seed=3)
    assert not flags["diagonal_input_spectrum"]
