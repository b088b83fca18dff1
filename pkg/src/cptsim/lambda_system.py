"""Free-space three-level Lambda emitter (atom or quantum-dot molecule).

Basis order is |1>, |2>, |3>: two ground states and the shared excited state.
The probe drives 1<->3, the control field (atom) or interdot tunneling (QDM)
couples 2<->3. Frequencies are in units of the total excited-state width.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace

import numpy as np

from .qops import CollapseOp, Model, projector


class DecayConfig(enum.Enum):
    ATOM = "atom"
    QDM = "qdm"
    CUSTOM = "custom"

    def split(self, gamma: float) -> tuple[float, float]:
        """Return ``(gamma_31, gamma_32)`` for a total excited-state width ``gamma``."""
        if self is DecayConfig.ATOM:
            return 0.5 * gamma, 0.5 * gamma
        if self is DecayConfig.QDM:
            return gamma, 0.0
        raise ValueError("CUSTOM decay has no canonical split; pass gamma_31/gamma_32 explicitly")


def level2_rates(gamma_2: float, gamma_21: float, meaning: str = "dephasing") -> tuple[float, float]:
    """Resolve a quoted ground-state width ``gamma_2`` into ``(gamma_21, gamma_22)``.

    ``meaning="dephasing"`` reads ``gamma_2`` as the pure dephasing rate of |2>.
    ``meaning="width"`` reads it as the total width of |2>, so only the excess over
    the 2->1 decay is added as dephasing.
    """
    if gamma_2 < 0 or gamma_21 < 0:
        raise ValueError("ground-state rates must be >= 0")
    if meaning == "dephasing":
        return gamma_21, gamma_2
    if meaning == "width":
        return gamma_21, max(gamma_2 - gamma_21, 0.0)
    raise ValueError(f"gamma_2 meaning must be 'dephasing' or 'width', got {meaning!r}")


def _check_nonnegative(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class LambdaParams:
    delta_p: float = 0.0
    omega_p: float = 0.1
    theta: float = 0.5
    gamma_31: float = 0.5
    gamma_32: float = 0.5
    gamma_21: float = 0.0
    gamma_22: float = 0.0
    gamma_33: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.delta_p):
            raise ValueError(f"delta_p must be finite, got {self.delta_p}")
        _check_nonnegative(self, [f.name for f in fields(self) if f.name != "delta_p"])

    @classmethod
    def for_decay(cls, decay: DecayConfig | str, gamma: float = 1.0, **kwargs) -> "LambdaParams":
        g31, g32 = DecayConfig(decay).split(gamma)
        return cls(gamma_31=g31, gamma_32=g32, **kwargs)

    @property
    def gamma_3_total(self) -> float:
        return self.gamma_31 + self.gamma_32

    def replace(self, **changes) -> "LambdaParams":
        return replace(self, **changes)


def lambda_hamiltonian(p: LambdaParams) -> np.ndarray:
    s = lambda k, l: projector(k, l, 3)  # noqa: E731
    return (
        p.delta_p * s(1, 1)
        - 0.5 * p.omega_p * (s(3, 1) + s(1, 3))
        - 0.5 * p.theta * (s(3, 2) + s(2, 3))
    )


def lambda_collapse_ops(p: LambdaParams) -> list[CollapseOp]:
    """Decay channels 3->1, 3->2, 2->1 and dephasing of |2>, |3>; zero rates dropped."""
    channels = [
        (p.gamma_31, projector(1, 3, 3)),
        (p.gamma_32, projector(2, 3, 3)),
        (p.gamma_21, projector(1, 2, 3)),
        (p.gamma_22, projector(2, 2, 3)),
        (p.gamma_33, projector(3, 3, 3)),
    ]
    return [(rate, op) for rate, op in channels if rate > 0]


def lambda_model(p: LambdaParams) -> Model:
    return Model(lambda_hamiltonian(p), tuple(lambda_collapse_ops(p)), levels=(1, 2, 3))


def with_effective_decay(p: LambdaParams, gamma_12_eff: float) -> Model:
    """Lambda model plus an incoherent 1 -> 2 channel of rate ``gamma_12_eff``.

    The added dissipator is ``(G/2)(2 s21 rho s12 - s11 rho - rho s11)``, which mimics
    the optical pumping into |2> that a nonzero 3->2 decay produces.
    """
    if not np.isfinite(gamma_12_eff) or gamma_12_eff < 0:
        raise ValueError(f"gamma_12_eff must be finite and >= 0, got {gamma_12_eff}")
    return lambda_model(p).with_channel(gamma_12_eff, projector(2, 1, 3))


def two_level_model(omega_p: float, delta_p: float, gamma: float) -> Model:
    """Probe-driven |1>,|3> emitter with excited-state decay ``gamma``.

    This is the Lambda Hamiltonian with the control coupling and level |2> removed.
    """
    if omega_p < 0 or gamma < 0:
        raise ValueError("omega_p and gamma must be >= 0")
    h = np.array([[delta_p, -0.5 * omega_p], [-0.5 * omega_p, 0.0]], dtype=complex)
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    ops = ((gamma, lower),) if gamma > 0 else ()
    return Model(h, ops, levels=(1, 3))
