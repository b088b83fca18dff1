import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from cptsim.cavity import CavityParams, cavity_model
from cptsim.errors import NonUniqueSteadyState
from cptsim.lambda_system import LambdaParams, lambda_model, two_level_model
from cptsim.qops import Model, devec, projector, vec
from cptsim.steady import DensityMatrix, observables, solve_model, solve_steady


def test_trap_example():
    p = LambdaParams(omega_p=0, theta=0.5, gamma_31=1.0, gamma_32=0.0)
    state, obs = solve_model(lambda_model(p))
    assert np.allclose(state.rho, projector(1, 1, 3), atol=1e-12)
    assert obs.p1 == pytest.approx(1.0) and obs.sigma13 == 0


def test_degenerate_raises():
    with pytest.raises(NonUniqueSteadyState):
        solve_model(lambda_model(LambdaParams(omega_p=0, theta=0)))


def test_degenerate_raises_on_sparse_path():
    # empty cavity with the control off: |2> is decoupled from everything
    p = CavityParams(g=0, theta=0, gamma_31=1, gamma_32=0)
    with pytest.raises(NonUniqueSteadyState):
        solve_steady(cavity_model(p).liouvillian(sparse=True))


def test_two_level_third():
    _, obs = solve_model(two_level_model(1.0, 0.0, 1.0))
    assert obs.p3 == pytest.approx(1 / 3, abs=1e-12)


def test_observables_examples():
    m = lambda_model(LambdaParams())
    obs = observables(projector(1, 1, 3), m)
    assert obs.p1 == 1 and obs.sigma13 == 0 and np.isnan(obs.n_mean)
    # <s13> = Tr(rho |1><3|) picks the (3, 1) element
    rho = 0.5 * np.eye(3, dtype=complex)
    rho[2, 0] = 0.1 + 0.2j
    assert observables(rho, m).sigma13 == 0.1 + 0.2j


def test_empty_cavity_photon_number():
    p = CavityParams.for_decay("qdm", g=0, theta=0.5, epsilon=np.sqrt(0.01))
    _, obs = solve_model(cavity_model(p))
    assert abs(obs.n_mean - 0.01) < 1e-6
    assert obs.p1 == pytest.approx(1.0)


def test_eit_transparency_at_resonance():
    p = LambdaParams.for_decay("atom", omega_p=0.1, theta=0.5)
    _, obs = solve_model(lambda_model(p))
    assert abs(obs.sigma13.imag) < 1e-8


@given(
    decay=st.sampled_from(["atom", "qdm"]),
    omega=st.floats(0.01, 2),
    theta=st.floats(0.01, 2),
)
def test_dark_state_invariance(decay, omega, theta):
    _, obs = solve_model(lambda_model(LambdaParams.for_decay(decay, omega_p=omega, theta=theta)))
    assert abs(obs.sigma13.imag) < 1e-8
    assert obs.p3 < 1e-8


@given(
    d=st.floats(-3, 3),
    omega=st.floats(0.01, 2),
    theta=st.floats(0.01, 2),
    g31=st.floats(0.05, 2),
    g32=st.floats(0, 2),
    g21=st.floats(0, 0.2),
    g22=st.floats(0, 0.2),
    g33=st.floats(0, 0.2),
)
def test_solution_invariants(d, omega, theta, g31, g32, g21, g22, g33):
    state, obs = solve_model(lambda_model(LambdaParams(d, omega, theta, g31, g32, g21, g22, g33)))
    assert state.residual < 1e-9
    assert state.trace_error < 1e-10
    assert state.hermiticity_error < 1e-10
    assert state.min_eigenvalue > -1e-8
    assert abs(obs.p1 + obs.p2 + obs.p3 - 1) < 1e-9
    assert all(-1e-9 <= p <= 1 + 1e-9 for p in (obs.p1, obs.p2, obs.p3))


def test_time_propagation_oracle(rng):
    worst = 0.0
    for _ in range(20):
        p = LambdaParams(
            delta_p=rng.uniform(-1, 1),
            omega_p=rng.uniform(0.3, 1),
            theta=rng.uniform(0.3, 1),
            gamma_31=rng.uniform(0.3, 1),
            gamma_32=rng.uniform(0, 1),
            gamma_21=rng.uniform(0, 0.05),
            gamma_22=rng.uniform(0, 0.05),
            gamma_33=rng.uniform(0, 0.05),
        )
        m = lambda_model(p)
        step = sla.expm(m.liouvillian(sparse=False) * 10.0)
        v = vec(projector(1, 1, 3).astype(complex))
        for _ in range(20):  # t = 200
            v = step @ v
        state, _ = solve_model(m)
        worst = max(worst, np.max(np.abs(devec(v) - state.rho)))
    assert worst < 1e-6


def test_dense_and_sparse_paths_agree(rng):
    p = LambdaParams(delta_p=0.3, omega_p=0.4, theta=0.2, gamma_21=0.01)
    m = lambda_model(p)
    a, _ = solve_model(m, sparse=False)
    b, _ = solve_model(m, sparse=True)
    assert np.allclose(a.rho, b.rho, atol=1e-13)


def test_rejects_non_square_liouvillian():
    with pytest.raises(ValueError):
        solve_steady(np.zeros((8, 8)))


def test_density_matrix_properties():
    s = DensityMatrix(np.diag([0.5, 0.5 + 1e-12, 0]).astype(complex), 0.0)
    assert s.dim == 3 and s.trace_error == pytest.approx(1e-12, abs=1e-15)
    assert s.hermiticity_error == 0 and s.min_eigenvalue == pytest.approx(0, abs=1e-15)


def test_model_without_coherence_has_zero_sigma13():
    m = Model(np.zeros((2, 2)), ((1.0, projector(1, 2, 2)),), levels=(1, 2))
    _, obs = solve_model(m)
    assert obs.sigma13 == 0 and obs.p1 == pytest.approx(1)
