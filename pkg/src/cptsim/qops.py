"""Dense operator algebra and Liouvillian assembly.

Operators are plain complex ``numpy`` arrays. Density matrices are vectorized
by column stacking (Fortran order), so that ``vec(A @ X @ B) = kron(B.T, A) @ vec(X)``.
With that convention the master-equation generator

    d rho/dt = -i[H, rho] + sum_j (G_j/2) (2 C rho C^+ - C^+C rho - rho C^+C)

becomes the matrix

    L = -i (I (x) H - H^T (x) I)
        + sum_j (G_j/2) [2 conj(C) (x) C - I (x) C^+C - (C^+C)^T (x) I].

Composite emitter/field spaces are always ordered emitter first, field second.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sps

CollapseOp = tuple[float, np.ndarray]

HERMITIAN_TOL = 1e-12


def projector(k: int, l: int, dim: int) -> np.ndarray:
    """Return the transition operator |k><l| on ``dim`` levels (1-based labels)."""
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    if not (1 <= k <= dim and 1 <= l <= dim):
        raise ValueError(f"level indices ({k}, {l}) out of range 1..{dim}")
    op = np.zeros((dim, dim), dtype=complex)
    op[k - 1, l - 1] = 1.0
    return op


def annihilation(n_max: int) -> np.ndarray:
    """Photon lowering operator on the Fock states 0..n_max."""
    if n_max < 1:
        raise ValueError(f"photon cutoff n_max must be >= 1, got {n_max}")
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), 1).astype(complex)


def number_op(n_max: int) -> np.ndarray:
    return np.diag(np.arange(n_max + 1)).astype(complex)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def dag(op: np.ndarray) -> np.ndarray:
    return op.conj().T


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product ``a (x) b``; ``a`` is the emitter factor."""
    return np.kron(a, b)


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    return op.ndim == 2 and op.shape[0] == op.shape[1] and bool(np.max(np.abs(op - dag(op)), initial=0.0) <= tol)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def devec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized {dim}x{dim} matrix")
    return v.reshape((dim, dim), order="F")


def trace_row(dim: int) -> np.ndarray:
    """Row vector ``t`` with ``t @ vec(rho) == trace(rho)``."""
    t = np.zeros(dim * dim, dtype=complex)
    t[np.arange(dim) * (dim + 1)] = 1.0
    return t


def _validate(hamiltonian: np.ndarray, collapse_ops: Sequence[CollapseOp]) -> int:
    h = np.asarray(hamiltonian)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {h.shape}")
    if not is_hermitian(h):
        raise ValueError("Hamiltonian is not Hermitian")
    dim = h.shape[0]
    for rate, op in collapse_ops:
        if not np.isfinite(rate) or rate < 0:
            raise ValueError(f"collapse rate must be finite and >= 0, got {rate}")
        if np.shape(op) != (dim, dim):
            raise ValueError(f"collapse operator shape {np.shape(op)} does not match Hamiltonian dim {dim}")
    return dim


def liouvillian(
    hamiltonian: np.ndarray,
    collapse_ops: Sequence[CollapseOp] = (),
    sparse: bool = False,
):
    """Assemble the column-stacked Lindblad generator.

    Parameters
    ----------
    hamiltonian : (d, d) Hermitian array
    collapse_ops : sequence of ``(rate, C)`` pairs
        Each contributes ``(rate/2)(2 C rho C^+ - C^+C rho - rho C^+C)``.
    sparse : bool
        Return a CSC matrix instead of a dense array.

    Returns
    -------
    (d**2, d**2) complex matrix acting on ``vec(rho)``.
    """
    dim = _validate(hamiltonian, collapse_ops)
    if sparse:
        eye = sps.identity(dim, dtype=complex, format="csr")
        h = sps.csr_matrix(hamiltonian)
        out = -1j * (sps.kron(eye, h) - sps.kron(h.T, eye))
        for rate, op in collapse_ops:
            if rate == 0:
                continue
            c = sps.csr_matrix(op)
            cdc = (c.conj().T @ c).tocsr()
            out = out + (rate / 2) * (2 * sps.kron(c.conj(), c) - sps.kron(eye, cdc) - sps.kron(cdc.T, eye))
        return out.tocsc()

    eye = identity(dim)
    h = np.asarray(hamiltonian, dtype=complex)
    out = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for rate, op in collapse_ops:
        if rate == 0:
            continue
        c = np.asarray(op, dtype=complex)
        cdc = dag(c) @ c
        out += (rate / 2) * (2 * np.kron(c.conj(), c) - np.kron(eye, cdc) - np.kron(cdc.T, eye))
    return out


def lindblad_rhs(hamiltonian: np.ndarray, collapse_ops: Sequence[CollapseOp], rho: np.ndarray) -> np.ndarray:
    """Evaluate the master-equation right-hand side directly on a matrix."""
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for rate, c in collapse_ops:
        cdc = dag(c) @ c
        out = out + (rate / 2) * (2 * c @ rho @ dag(c) - cdc @ rho - rho @ cdc)
    return out


@dataclass(frozen=True, eq=False)
class Model:
    """A Hamiltonian plus Lindblad channels, tagged with its emitter structure.

    ``levels`` lists which of the Lambda labels 1, 2, 3 are present in the emitter
    basis, in basis order. ``n_max`` is the photon cutoff for cavity models and
    ``None`` in free space.
    """

    hamiltonian: np.ndarray
    collapse_ops: tuple[CollapseOp, ...] = ()
    levels: tuple[int, ...] = (1, 2, 3)
    n_max: int | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        _validate(self.hamiltonian, self.collapse_ops)
        if self.dim != len(self.levels) * self.field_dim:
            raise ValueError(
                f"Hamiltonian dim {self.dim} inconsistent with {len(self.levels)} levels x {self.field_dim} Fock states"
            )

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def field_dim(self) -> int:
        return 1 if self.n_max is None else self.n_max + 1

    @property
    def is_cavity(self) -> bool:
        return self.n_max is not None

    def liouvillian(self, sparse: bool | None = None):
        if sparse is None:
            sparse = self.dim > 12
        return liouvillian(self.hamiltonian, self.collapse_ops, sparse=sparse)

    def with_channel(self, rate: float, op: np.ndarray) -> "Model":
        if rate < 0:
            raise ValueError(f"rate must be >= 0, got {rate}")
        if rate == 0:
            return self
        return Model(self.hamiltonian, self.collapse_ops + ((rate, op),), self.levels, self.n_max, self.label)
