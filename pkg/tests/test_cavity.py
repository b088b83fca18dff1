import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import cptsim.cavity as cav
from cptsim.cavity import (
    CavityParams,
    DetuningFamily,
    cavity_collapse_ops,
    cavity_hamiltonian,
    cavity_model,
    effective_decay_rate_cavity,
    excitation_number,
    initial_n_max,
    solve_cavity,
)
from cptsim.errors import TruncationError
from cptsim.qops import annihilation, identity, is_hermitian, projector, tensor
from cptsim.steady import solve_model


def idx(level, n, n_max):
    """Row of |level, n> in the emitter (x) field basis."""
    return (level - 1) * (n_max + 1) + n


def test_detuning_only_hamiltonian():
    h = cavity_hamiltonian(CavityParams(delta_p=1, g=0, epsilon=0, theta=0), n_max=1)
    expected = {(1, 0): 1, (1, 1): 0, (2, 0): 0, (2, 1): -1, (3, 0): 0, (3, 1): -1}
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
    for (lvl, n), v in expected.items():
        assert h[idx(lvl, n, 1), idx(lvl, n, 1)] == v


def test_coupling_elements():
    n_max = 3
    h = cavity_hamiltonian(CavityParams(g=5, epsilon=0, theta=0.3), n_max=n_max)
    # g a s31 takes |1, n+1> to |3, n> with amplitude g sqrt(n+1)
    for n in range(n_max):
        assert h[idx(3, n, n_max), idx(1, n + 1, n_max)] == pytest.approx(5 * np.sqrt(n + 1))
    assert h[idx(3, 0, n_max), idx(1, 1, n_max)] == 5
    for n in range(n_max + 1):
        assert h[idx(3, n, n_max), idx(2, n, n_max)] == pytest.approx(0.15)


def test_drive_element():
    h = cavity_hamiltonian(CavityParams(g=0, epsilon=0.4, theta=0), n_max=2)
    assert h[idx(1, 0, 2), idx(1, 1, 2)] == pytest.approx(0.2)


@given(
    d=st.floats(-5, 5), theta=st.floats(0, 3), g=st.floats(0, 6), eps=st.floats(0, 1), n=st.integers(1, 6)
)
def test_hamiltonian_hermitian(d, theta, g, eps, n):
    assert is_hermitian(cavity_hamiltonian(CavityParams(delta_p=d, theta=theta, g=g, epsilon=eps), n))


@given(d=st.floats(-5, 5), theta=st.floats(0, 3), g=st.floats(0, 6))
def test_excitation_number_conserved_without_drive(d, theta, g):
    n_max = 5
    h = cavity_hamiltonian(CavityParams(delta_p=d, theta=theta, g=g, epsilon=0), n_max)
    comm = h @ excitation_number(n_max) - excitation_number(n_max) @ h
    assert np.max(np.abs(comm)) < 1e-12


def test_collapse_examples():
    n = 2
    ops = cavity_collapse_ops(CavityParams(gamma_31=0, gamma_32=0), n)
    assert len(ops) == 1 and ops[0][0] == 1.0
    assert np.array_equal(ops[0][1], tensor(identity(3), annihilation(n)))
    assert len(cavity_collapse_ops(CavityParams.for_decay("qdm"), n)) == 2
    ops = cavity_collapse_ops(CavityParams.for_decay("qdm"), n, gamma_12_eff=5e-5)
    assert ops[-1][0] == 5e-5
    assert np.array_equal(ops[-1][1], tensor(projector(2, 1, 3), identity(n + 1)))
    with pytest.raises(ValueError):
        cavity_collapse_ops(CavityParams(), n, gamma_12_eff=-1)


def test_effective_rate_examples():
    assert effective_decay_rate_cavity(np.sqrt(0.01), 5, 0.5) == pytest.approx(5e-5, rel=1e-12)
    assert effective_decay_rate_cavity(0.1, 5, 0.0) == 0
    assert effective_decay_rate_cavity(0.0, 5, 0.5) == 0
    with pytest.raises(ValueError):
        effective_decay_rate_cavity(0.1, 0, 0.5)


@pytest.mark.parametrize("field", ["theta", "g", "kappa", "epsilon", "gamma_31", "gamma_22"])
def test_params_reject_negative(field):
    with pytest.raises(ValueError, match=field):
        CavityParams(**{field: -1})


@pytest.mark.parametrize("n_max", [0, 1.5])
def test_params_reject_bad_cutoff(n_max):
    with pytest.raises(ValueError):
        CavityParams(n_max=n_max)


def test_initial_cutoff():
    assert initial_n_max(0.1, 1.0) == 5
    assert initial_n_max(1.0, 1.0) == 8
    assert cavity_model(CavityParams(epsilon=0.1)).n_max == 5


def test_doubling_cutoff_is_stable():
    p = CavityParams.for_decay("atom", delta_p=0.3, theta=0.5, epsilon=0.3)
    a, obs_a, n = solve_cavity(p)
    assert obs_a.top_fock_pop < 1e-6
    _, obs_b, _ = solve_cavity(p, n_max=2 * n)
    for f in ("p1", "p2", "p3", "n_mean"):
        assert abs(getattr(obs_a, f) - getattr(obs_b, f)) < 1e-8
    assert abs(obs_a.sigma13 - obs_b.sigma13) < 1e-8


def test_auto_truncation_doubles(monkeypatch):
    # the default start is generous; force a short one so the doubling rule has to act
    monkeypatch.setattr(cav, "initial_n_max", lambda eps, kappa: 2)
    p = CavityParams.for_decay("qdm", g=0, theta=0.5, epsilon=1.0, kappa=1.0)
    _, obs, n = solve_cavity(p)
    assert n == 16
    assert obs.top_fock_pop < 1e-6
    assert obs.n_mean == pytest.approx(1.0, rel=1e-6)


def test_truncation_cap(monkeypatch):
    monkeypatch.setattr(cav, "initial_n_max", lambda eps, kappa: 2)
    monkeypatch.setattr(cav, "N_MAX_CAP", 4)
    p = CavityParams.for_decay("qdm", g=0, theta=0.5, epsilon=1.5)
    with pytest.raises(TruncationError):
        solve_cavity(p)


def test_explicit_cutoff_is_used_as_is():
    p = CavityParams.for_decay("qdm", g=0, theta=0.5, epsilon=1.5, n_max=3)
    _, obs, n = solve_cavity(p)
    assert n == 3 and obs.top_fock_pop > 1e-6


def test_bracket_sign_invariance():
    p = CavityParams.for_decay("atom", delta_p=0.4, theta=0.3, epsilon=0.2)
    n = 6
    m = cavity_model(p, n)
    diag = p.delta_p * (tensor(projector(1, 1, 3), identity(n + 1)) - tensor(identity(3), annihilation(n).T @ annihilation(n)))
    flipped = 2 * diag - m.hamiltonian
    _, a = solve_model(m)
    _, b = solve_model(type(m)(flipped, m.collapse_ops, m.levels, m.n_max))
    for f in ("p1", "p2", "p3", "n_mean"):
        assert getattr(a, f) == pytest.approx(getattr(b, f), abs=1e-12)


def test_family_matches_direct_build():
    p = CavityParams.for_decay("atom", theta=0.2, epsilon=0.1)
    fam = DetuningFamily(p, 1e-4)
    for d in (-0.7, 0.0, 0.05):
        _, obs, n = fam.solve(d)
        _, ref = solve_model(cavity_model(p.replace(delta_p=d), n, 1e-4))
        assert ref.n_mean == pytest.approx(obs.n_mean, rel=1e-10)
        assert ref.p2 == pytest.approx(obs.p2, rel=1e-10, abs=1e-14)
