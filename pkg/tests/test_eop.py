import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eoplab import eop, qcore
from eoplab.eop import IsometryPoint, OptimizerOptions

FAST = OptimizerOptions(restarts=4, max_iters=1500, seed=11)


def fd_gradient(phi, v, h=1e-5):
    """Central differences of the objective along every real coordinate of V."""
    t = phi.tensor()
    m = v.matrix
    g = np.zeros_like(m)
    for idx in np.ndindex(m.shape):
        for unit, part in ((1.0, "re"), (1j, "im")):
            e = np.zeros_like(m)
            e[idx] = unit
            d = (eop._value(t, m + h * e, v.d_out_a, v.d_out_b)
                 - eop._value(t, m - h * e, v.d_out_a, v.d_out_b)) / (2 * h)
            g[idx] += d if part == "re" else 1j * d
    return g


def real_tangent_dimension(v):
    """Kernel dimension of X -> V^dag X + X^dag V over real coordinates of X."""
    n, p = v.shape
    cols = []
    for idx in np.ndindex(n, p):
        for unit in (1.0, 1j):
            x = np.zeros((n, p), dtype=complex)
            x[idx] = unit
            y = v.conj().T @ x + x.conj().T @ v
            cols.append(np.concatenate([y.real.ravel(), y.imag.ravel()]))
    a = np.array(cols).T
    return 2 * n * p - np.linalg.matrix_rank(a, tol=1e-9)


def werner_phi(f):
    return qcore.standard_purification(qcore.werner(f))


# --- isometries and geometry --------------------------------------------------

def test_isometry_invariant_enforced():
    with pytest.raises(ValueError):
        IsometryPoint(np.ones((4, 2)), 2, 2)
    with pytest.raises(ValueError):
        IsometryPoint(np.eye(4)[:, :2], 3, 2)


@pytest.mark.parametrize("side", ["A", "B"])
def test_trivial_embedding_is_isometry(side):
    v = eop.trivial_embedding(3, 4, 4, side)
    assert eop.isometry_defect(v.matrix) <= 1e-15


def test_trivial_embedding_dimension_check():
    with pytest.raises(ValueError):
        eop.trivial_embedding(4, 3, 5, "A")
    with pytest.raises(ValueError):
        eop.trivial_embedding(4, 5, 3, "B")


def test_retract_zero_step_is_identity():
    v = eop.random_isometry(4, 4, 4, seed=1)
    np.testing.assert_allclose(eop.retract(v, np.zeros_like(v.matrix)).matrix, v.matrix, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_retract_stays_on_manifold(seed):
    rng = np.random.default_rng(seed)
    v = eop.random_isometry(4, 4, 4, seed=rng)
    step = rng.standard_normal(v.matrix.shape) + 1j * rng.standard_normal(v.matrix.shape)
    w = eop.retract(v, 0.7 * eop.project_tangent(v, step))
    assert eop.isometry_defect(w.matrix) <= 1e-10


def test_retract_rank_deficient_raises():
    v = eop.trivial_embedding(2, 2, 2, "A")
    with pytest.raises(eop.RetractionError):
        eop.retract(v, -v.matrix)


def test_project_tangent_satisfies_constraint():
    rng = np.random.default_rng(3)
    v = eop.random_isometry(3, 3, 4, seed=rng)
    g = rng.standard_normal((12, 3)) + 1j * rng.standard_normal((12, 3))
    x = eop.project_tangent(v, g)
    assert np.max(np.abs(v.matrix.conj().T @ x + x.conj().T @ v.matrix)) <= 1e-13
    np.testing.assert_allclose(eop.project_tangent(v, x), x, atol=1e-13)


@pytest.mark.parametrize("n,p", [(16, 4), (9, 3), (4, 2), (3, 1)])
def test_tangent_dimension_counts_degrees_of_freedom(n, p):
    v = np.linalg.qr(np.random.default_rng(0).standard_normal((n, p)) + 0j)[0]
    assert eop.tangent_dimension(n, p) == real_tangent_dimension(v)
    if (n, p) == (16, 4):
        assert eop.tangent_dimension(n, p) == 112


# --- objective ----------------------------------------------------------------

@pytest.mark.parametrize("f", [0.0, 0.003, 0.01, 0.3, 1.0])
@pytest.mark.parametrize("side", ["A", "B"])
def test_trivial_embedding_objective_werner(f, side):
    phi = werner_phi(f)
    r = phi.dims[2]
    v = eop.trivial_embedding(r, r, r, side)
    assert eop.objective(phi, v) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_trivial_embedding_objective_marginals(seed):
    rho = qcore.random_density(6, rank=4, seed=seed, dims=(2, 3))
    phi = qcore.standard_purification(rho)
    sa = qcore.entropy(qcore.partial_trace(rho, [0]))
    sb = qcore.entropy(qcore.partial_trace(rho, [1]))
    assert eop.objective(phi, eop.trivial_embedding(4, 4, 4, "A")) == pytest.approx(sb, abs=1e-12)
    assert eop.objective(phi, eop.trivial_embedding(4, 4, 4, "B")) == pytest.approx(sa, abs=1e-12)


def test_trivial_embedding_pure_state():
    psi = qcore.random_pure((2, 2), seed=8)
    phi = qcore.standard_purification(psi.density())
    s = eop.eop_pure(psi)
    for side in "AB":
        assert eop.objective(phi, eop.trivial_embedding(1, 1, 1, side)) == pytest.approx(s, abs=1e-12)


def test_objective_singlet_and_product():
    phi = qcore.standard_purification(qcore.bell_state(0).density())
    assert eop.objective(phi, eop.trivial_embedding(1, 1, 1)) == pytest.approx(1.0, abs=1e-12)
    prod = qcore.PureState((2, 2), [1, 0, 0, 0])
    phi = qcore.standard_purification(prod.density())
    assert eop.objective(phi, eop.trivial_embedding(1, 1, 1)) == pytest.approx(0.0, abs=1e-12)


def test_objective_equals_entropy_of_applied_state():
    phi = werner_phi(0.2)
    v = eop.random_isometry(4, 4, 4, seed=5)
    psi = eop.apply_isometry(phi, v)
    direct = qcore.entropy(qcore.reduced_state(psi, [0, 2]))
    assert eop.objective(phi, v) == pytest.approx(direct, abs=1e-10)


def test_apply_isometry_trivial_embedding():
    phi = werner_phi(0.4)
    psi = eop.apply_isometry(phi, eop.trivial_embedding(4, 4, 3, "A"))
    expected = np.einsum("abk,q->abkq", phi.tensor(), np.eye(3)[0])
    np.testing.assert_allclose(psi.tensor(), expected, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_apply_isometry_keeps_purification(seed):
    rho = qcore.random_density(4, rank=3, seed=seed, dims=(2, 2))
    phi = qcore.standard_purification(rho)
    psi = eop.apply_isometry(phi, eop.random_isometry(3, 3, 2, seed=seed))
    assert abs(np.linalg.norm(psi.amplitudes) - 1) <= 1e-12
    red = qcore.reduced_state(psi, [0, 1]).matrix
    assert np.max(np.abs(red - qcore.reduced_state(phi, [0, 1]).matrix)) <= 1e-10


def test_apply_isometry_dim_mismatch():
    with pytest.raises(ValueError):
        eop.apply_isometry(werner_phi(0.5), eop.trivial_embedding(3, 3, 3))


# --- gradient -----------------------------------------------------------------

@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(1000 + seed)
    rho = qcore.random_density(4, rank=int(rng.integers(2, 5)), seed=rng, dims=(2, 2))
    phi = qcore.standard_purification(rho)
    r = phi.dims[2]
    v = eop.random_isometry(r, r, r, seed=rng)
    g = eop.euclidean_gradient(phi, v)
    g_fd = fd_gradient(phi, v)
    assert np.linalg.norm(g - g_fd) / np.linalg.norm(g_fd) <= 1e-5


def test_gradient_vanishes_for_pure_state():
    phi = qcore.standard_purification(qcore.random_pure((2, 2), seed=2).density())
    v = IsometryPoint(np.array([[np.exp(0.3j)]]), 1, 1)
    g = eop.project_tangent(v, eop.euclidean_gradient(phi, v))
    assert np.linalg.norm(g) <= 1e-12


# --- local descent ------------------------------------------------------------

def test_local_minimize_keeps_isometry_and_descends():
    phi = werner_phi(0.1)
    start = eop.random_isometry(4, 4, 4, seed=4)
    trace = []
    val, point, res = eop.local_minimize(
        phi, start, OptimizerOptions(max_iters=800), callback=lambda v, f: trace.append((v.copy(), f))
    )
    assert trace
    assert max(eop.isometry_defect(v) for v, _ in trace) <= 1e-10
    values = [eop.objective(phi, start)] + [f for _, f in trace]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert val == pytest.approx(eop.objective(phi, point), abs=1e-12)
    assert res.iterations == len(trace)


def test_local_minimize_trivial_start_small_f_stays_at_one():
    phi = werner_phi(0.002)
    val, _, res = eop.local_minimize(phi, eop.trivial_embedding(4, 4, 4), OptimizerOptions())
    assert val == pytest.approx(1.0, abs=1e-9)


def test_local_minimize_from_optimum_makes_no_progress():
    phi = werner_phi(0.3)
    val, point, _ = eop.local_minimize(phi, eop.random_isometry(4, 4, 4, seed=0), OptimizerOptions())
    val2, _, res = eop.local_minimize(phi, point, OptimizerOptions())
    assert val2 == pytest.approx(val, abs=1e-10)
    assert res.converged


@pytest.mark.parametrize("seed", range(3))
def test_local_minimize_pure_singlet(seed):
    phi = qcore.standard_purification(qcore.werner(1.0))
    start = eop.random_isometry(1, 2, 2, seed=seed)
    val, _, res = eop.local_minimize(phi, start, OptimizerOptions())
    assert val == pytest.approx(1.0, abs=1e-6)


def test_converged_restarts_are_stationary():
    cert = eop.eop_estimate(qcore.werner(0.3), OptimizerOptions(restarts=3, seed=2))
    for r in cert.restarts:
        if r.status == "converged":
            assert r.grad_norm <= 1e-8


# --- multi-start estimates ----------------------------------------------------

def test_eop_estimate_singlet():
    cert = eop.eop_estimate(qcore.werner(1.0), FAST)
    assert cert.best_value == pytest.approx(1.0, abs=1e-3)
    assert cert.ancilla_dims == (1, 1)


def test_eop_estimate_maximally_mixed():
    cert = eop.eop_estimate(qcore.werner(0.25), FAST)
    assert cert.best_value <= 1e-3


def test_certificate_invariants():
    cert = eop.eop_estimate(qcore.werner(0.1), FAST)
    assert cert.best_value == min(cert.per_restart_values)
    assert cert.best_value >= -1e-9
    assert eop.objective(cert.purification, cert.best_isometry) == pytest.approx(cert.best_value, abs=1e-9)
    assert [r.label for r in cert.restarts][:2] == ["trivial-A", "trivial-B"]
    assert len(cert.restarts) == 2 + FAST.restarts
    assert eop.isometry_defect(cert.best_isometry.matrix) <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_eop_estimate_random_pure(seed):
    psi = qcore.random_pure((2, 2), seed=seed)
    cert = eop.eop_estimate(psi.density(), FAST)
    assert cert.best_value == pytest.approx(eop.eop_pure(psi), abs=1e-4)


def test_upper_bound_without_random_starts():
    rho = qcore.random_density(6, seed=3, dims=(3, 2))
    cert = eop.eop_estimate(rho, OptimizerOptions(restarts=0, max_iters=0))
    sa = qcore.entropy(qcore.partial_trace(rho, [0]))
    sb = qcore.entropy(qcore.partial_trace(rho, [1]))
    assert cert.best_value == pytest.approx(min(sa, sb), abs=1e-12)


def test_seed_determinism_and_parallel_agreement():
    rho = qcore.werner(0.05)
    opts = OptimizerOptions(restarts=3, max_iters=300, seed=42)
    a = eop.eop_estimate(rho, opts)
    b = eop.eop_estimate(rho, opts)
    c = eop.eop_estimate(rho, OptimizerOptions(restarts=3, max_iters=300, seed=42, workers=2))
    assert a.per_restart_values == b.per_restart_values == c.per_restart_values
    d = eop.eop_estimate(rho, OptimizerOptions(restarts=3, max_iters=300, seed=43))
    assert d.per_restart_values[2:] != a.per_restart_values[2:]


def test_restart_streams_independent_of_count():
    rho = qcore.werner(0.05)
    a = eop.eop_estimate(rho, OptimizerOptions(restarts=2, max_iters=100, seed=5))
    b = eop.eop_estimate(rho, OptimizerOptions(restarts=4, max_iters=100, seed=5))
    assert a.per_restart_values == b.per_restart_values[:4]


def test_ancilla_dims_configurable():
    cert = eop.eop_estimate(qcore.werner(0.1), OptimizerOptions(restarts=1, max_iters=50, ancilla_a=2, ancilla_b=3))
    assert cert.ancilla_dims == (2, 3)
    assert cert.best_isometry.matrix.shape == (6, 4)
    assert [r.label for r in cert.restarts] == ["random-0"]
    with pytest.raises(ValueError):
        eop.eop_estimate(qcore.werner(0.1), OptimizerOptions(ancilla_a=1, ancilla_b=3))


def test_total_dimension_cap():
    rho = qcore.random_density(20, seed=0, dims=(4, 5))
    with pytest.raises(ValueError, match="cap"):
        eop.eop_estimate(rho, OptimizerOptions(restarts=1))


def test_options_validation():
    with pytest.raises(ValueError):
        OptimizerOptions(grad_tol=0)
    with pytest.raises(ValueError):
        OptimizerOptions(restarts=0, include_trivial_starts=False)


# --- pure states --------------------------------------------------------------

def test_eop_pure_values():
    assert eop.eop_pure(qcore.bell_state(0)) == pytest.approx(1.0, abs=1e-12)
    assert eop.eop_pure(qcore.PureState((2, 2), [0, 0, 1, 0])) == pytest.approx(0.0, abs=1e-12)


def test_eop_pure_density_rejects_mixed():
    with pytest.raises(qcore.StateError, match="pure"):
        eop.eop_pure_density(qcore.werner(0.5))
    assert eop.eop_pure_density(qcore.werner(1.0)) == pytest.approx(1.0, abs=1e-12)


# --- two copies ---------------------------------------------------------------

def test_product_isometry_value_is_additive():
    phi1, phi2 = werner_phi(0.1), werner_phi(0.3)
    v1 = eop.random_isometry(4, 2, 3, seed=1)
    v2 = eop.random_isometry(4, 3, 2, seed=2)
    phi = eop._product_purification(phi1, phi2)
    v = eop.product_isometry(v1, v2)
    assert (v.d_out_a, v.d_out_b) == (6, 6)
    expected = eop.objective(phi1, v1) + eop.objective(phi2, v2)
    assert eop.objective(phi, v) == pytest.approx(expected, abs=1e-10)


def test_product_purification_purifies_tensor_product():
    rho, sigma = qcore.werner(0.1), qcore.random_density(4, rank=2, seed=1, dims=(2, 2))
    phi = eop._product_purification(qcore.standard_purification(rho), qcore.standard_purification(sigma))
    # product purification lives on (A1A2, B1B2, A1'A2'); compare against rho (x) sigma reordered
    target = np.einsum("abcd,efgh->aebfcgdh", rho.matrix.reshape(2, 2, 2, 2), sigma.matrix.reshape(2, 2, 2, 2))
    red = qcore.reduced_state(phi, [0, 1]).matrix
    np.testing.assert_allclose(red, target.reshape(16, 16), atol=1e-12)


def test_product_estimate_singlet_pair():
    w1 = qcore.werner(1.0)
    cert = eop.eop_product_estimate(w1, w1, OptimizerOptions(restarts=2, max_iters=500))
    assert cert.best_value == pytest.approx(2.0, abs=1e-2)


def test_product_estimate_with_product_factor():
    rho = qcore.werner(0.1)
    prod = qcore.PureState((2, 2), [1, 0, 0, 0]).density()
    so = OptimizerOptions(restarts=4, max_iters=1500, seed=3)
    single = eop.eop_estimate(rho, so)
    cert = eop.eop_product_estimate(rho, prod, OptimizerOptions(restarts=2, max_iters=500), single_opts=so)
    assert cert.best_value == pytest.approx(single.best_value, abs=1e-2)
    assert cert.restarts[0].label == "product"


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_upper_bound_semantics_property(seed):
    rho = qcore.random_density(4, seed=seed, dims=(2, 2))
    cert = eop.eop_estimate(rho, OptimizerOptions(restarts=1, max_iters=100, seed=seed))
    sa = qcore.entropy(qcore.partial_trace(rho, [0]))
    sb = qcore.entropy(qcore.partial_trace(rho, [1]))
    assert cert.best_value <= min(sa, sb) + 1e-9
