"""Lambda emitter coupled to a driven, leaky cavity mode.

The probe now drives the cavity (strength ``epsilon``) and the cavity mode couples
the 1<->3 transition with strength ``g``. The joint space is emitter (x) Fock(0..n_max),
with the emitter factor first. Frequencies are in units of the cavity decay ``kappa``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import TruncationError
from .lambda_system import DecayConfig
from .qops import CollapseOp, Model, annihilation, dag, identity, liouvillian, projector, tensor
from .steady import DensityMatrix, Observables, observables, solve_steady

TOP_FOCK_TOL = 1e-6
N_MAX_CAP = 64


@dataclass(frozen=True)
class CavityParams:
    delta_p: float = 0.0
    theta: float = 1.0
    g: float = 5.0
    kappa: float = 1.0
    epsilon: float = 0.1
    n_max: int | None = None
    gamma_31: float = 0.5
    gamma_32: float = 0.5
    gamma_21: float = 0.0
    gamma_22: float = 0.0
    gamma_33: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.delta_p):
            raise ValueError(f"delta_p must be finite, got {self.delta_p}")
        for f in fields(self):
            if f.name in ("delta_p", "n_max"):
                continue
            value = getattr(self, f.name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{f.name} must be finite and >= 0, got {value}")
        if self.n_max is not None and (int(self.n_max) != self.n_max or self.n_max < 1):
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")

    @classmethod
    def for_decay(cls, decay: DecayConfig | str, gamma: float = 1.0, **kwargs) -> "CavityParams":
        g31, g32 = DecayConfig(decay).split(gamma)
        return cls(gamma_31=g31, gamma_32=g32, **kwargs)

    @property
    def gamma_3_total(self) -> float:
        return self.gamma_31 + self.gamma_32

    def replace(self, **changes) -> "CavityParams":
        return replace(self, **changes)


def initial_n_max(epsilon: float, kappa: float) -> int:
    """Starting photon cutoff ``ceil(4 |eps/kappa|^2 + 4)``."""
    return math.ceil(4 * (epsilon / kappa) ** 2 + 4) if kappa > 0 else 4


def _cutoff(p: CavityParams, n_max: int | None) -> int:
    n = n_max if n_max is not None else p.n_max
    return int(n) if n is not None else initial_n_max(p.epsilon, p.kappa)


def _emitter(k: int, l: int, n_max: int) -> np.ndarray:
    return tensor(projector(k, l, 3), identity(n_max + 1))


def cavity_hamiltonian(p: CavityParams, n_max: int | None = None) -> np.ndarray:
    """``D (s11 - a^+a) + [(eps/2) a + g a s31 + (Theta/2) s32 + h.c.]``.

    The bracket enters with an overall plus sign. Flipping that sign is a unitary
    change of basis (parity on the photon number and on |2>), so the spectra do not
    depend on it.
    """
    n = _cutoff(p, n_max)
    a = tensor(identity(3), annihilation(n))
    coupling = 0.5 * p.epsilon * a + p.g * a @ _emitter(3, 1, n) + 0.5 * p.theta * _emitter(3, 2, n)
    return p.delta_p * (_emitter(1, 1, n) - dag(a) @ a) + coupling + dag(coupling)


def cavity_collapse_ops(p: CavityParams, n_max: int | None = None, gamma_12_eff: float = 0.0) -> list[CollapseOp]:
    """Cavity leakage ``(kappa, a)`` followed by the emitter channels lifted to the joint space.

    A positive ``gamma_12_eff`` appends the effective 1 -> 2 channel ``s21 (x) I``.
    """
    if gamma_12_eff < 0:
        raise ValueError(f"gamma_12_eff must be >= 0, got {gamma_12_eff}")
    n = _cutoff(p, n_max)
    channels = [
        (p.kappa, tensor(identity(3), annihilation(n))),
        (p.gamma_31, _emitter(1, 3, n)),
        (p.gamma_32, _emitter(2, 3, n)),
        (p.gamma_21, _emitter(1, 2, n)),
        (p.gamma_22, _emitter(2, 2, n)),
        (p.gamma_33, _emitter(3, 3, n)),
        (gamma_12_eff, _emitter(2, 1, n)),
    ]
    return [(rate, op) for rate, op in channels if rate > 0]


def cavity_model(p: CavityParams, n_max: int | None = None, gamma_12_eff: float = 0.0) -> Model:
    n = _cutoff(p, n_max)
    return Model(
        cavity_hamiltonian(p, n),
        tuple(cavity_collapse_ops(p, n, gamma_12_eff)),
        levels=(1, 2, 3),
        n_max=n,
    )


def effective_decay_rate_cavity(epsilon: float, g: float, gamma_32: float) -> float:
    """Effective 1 -> 2 pumping rate ``|eps / 2g|^2 * gamma_32`` for weak drive."""
    if g <= 0:
        raise ValueError(f"g must be > 0, got {g}")
    return (epsilon / (2 * g)) ** 2 * gamma_32


def number_operator(n_max: int) -> np.ndarray:
    a = tensor(identity(3), annihilation(n_max))
    return dag(a) @ a


def excitation_number(n_max: int) -> np.ndarray:
    """``a^+a + s22 + s33``, conserved by the Hamiltonian when ``epsilon = 0``."""
    return number_operator(n_max) + _emitter(2, 2, n_max) + _emitter(3, 3, n_max)


class DetuningFamily:
    """One cavity model at varying probe detuning.

    The detuning enters the Hamiltonian linearly, so the Liouvillian is cached per
    photon cutoff as ``L(D) = L0 + D * L1`` and each solve only pays for the sum.
    """

    def __init__(self, p: CavityParams, gamma_12_eff: float = 0.0):
        self.params = p.replace(delta_p=0.0)
        self.gamma_12_eff = gamma_12_eff
        self._parts: dict[int, tuple] = {}

    def _split(self, n: int):
        if n not in self._parts:
            base = cavity_model(self.params, n, self.gamma_12_eff)
            h1 = _emitter(1, 1, n) - number_operator(n)
            self._parts[n] = (base, base.liouvillian(sparse=True), liouvillian(h1, (), sparse=True))
        return self._parts[n]

    def model(self, delta_p: float, n: int) -> Model:
        p = self.params.replace(delta_p=delta_p)
        return Model(cavity_hamiltonian(p, n), self._split(n)[0].collapse_ops, levels=(1, 2, 3), n_max=n)

    def liouvillian(self, delta_p: float, n: int):
        _, l0, l1 = self._split(n)
        return (l0 + delta_p * l1).tocsc() if delta_p != 0 else l0

    def solve(self, delta_p: float, n_max: int | None = None) -> tuple[DensityMatrix, Observables, int]:
        """Steady state with automatic photon-cutoff selection.

        An explicit ``n_max`` (argument or ``params.n_max``) is used as is. Otherwise
        the cutoff starts at :func:`initial_n_max` and doubles until the top Fock
        level holds less than ``1e-6`` population, up to ``N_MAX_CAP``.
        """
        fixed = n_max if n_max is not None else self.params.n_max
        n = _cutoff(self.params, fixed)
        while True:
            base = self._split(n)[0]
            state = solve_steady(self.liouvillian(delta_p, n))
            obs = observables(state, base)
            if fixed is not None or obs.top_fock_pop < TOP_FOCK_TOL:
                return state, obs, n
            if n >= N_MAX_CAP:
                raise TruncationError(
                    f"top Fock population {obs.top_fock_pop:.2e} still above {TOP_FOCK_TOL} at n_max={n}"
                )
            n = min(2 * n, N_MAX_CAP)


def solve_cavity(
    p: CavityParams, gamma_12_eff: float = 0.0, n_max: int | None = None
) -> tuple[DensityMatrix, Observables, int]:
    """Steady state of ``cavity_model(p)`` with automatic cutoff (see :class:`DetuningFamily`)."""
    return DetuningFamily(p, gamma_12_eff).solve(p.delta_p, n_max)
