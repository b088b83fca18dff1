"""Steady-state solution of ``L vec(rho) = 0`` and observable extraction.

The Liouvillian of a trace-preserving master equation always has the trace
functional as a left null vector, so one of its population rows is redundant.
That row is overwritten with the trace condition and the resulting bordered
system is LU-factorized (dense LAPACK or SuperLU for sparse input). The
replaced row is the population row that is least diagonally dominant, which
keeps the factorization well conditioned; ties resolve to the first such row.

Degeneracy (more than one null direction, e.g. uncoupled ground states) shows up
as a vanishing pivot or an unphysical solution. Those cases are confirmed with a
singular value decomposition: singular values below ``1e-10 * s_max`` count as
null directions.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import NonUniqueSteadyState, SingularSystem
from .qops import Model, devec

NULL_RTOL = 1e-10
PIVOT_RTOL = 1e-12
SVD_ALWAYS_BELOW = 400
SVD_MAX_SIZE = 2500


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    rho: np.ndarray
    residual: float

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def trace_error(self) -> float:
        return abs(np.trace(self.rho) - 1.0)

    @property
    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0])


@dataclass(frozen=True)
class Observables:
    sigma13: complex
    p1: float
    p2: float
    p3: float
    n_mean: float = float("nan")
    top_fock_pop: float = float("nan")


def _null_count(L) -> tuple[int, np.ndarray, np.ndarray]:
    dense = L.toarray() if sps.issparse(L) else np.asarray(L)
    _, s, vh = sla.svd(dense)
    nulls = int(np.sum(s <= NULL_RTOL * s[0]))
    return nulls, s, vh


def _trace_row_index(L, dim: int) -> int:
    pops = np.arange(dim) * (dim + 1)
    if sps.issparse(L):
        rows = L.tocsr()[pops]
        off = np.asarray(abs(rows).sum(axis=1)).ravel()
        diag = np.abs(L.diagonal()[pops])
    else:
        rows = np.asarray(L)[pops]
        off = np.abs(rows).sum(axis=1)
        diag = np.abs(rows[np.arange(dim), pops])
    deficit = (off - diag) - diag
    return int(pops[np.argmax(deficit)])


def _bordered(L, row: int, dim: int):
    n = dim * dim
    if sps.issparse(L):
        keep = np.ones(n)
        keep[row] = 0.0
        pops = np.arange(dim) * (dim + 1)
        trace = sps.csr_matrix((np.ones(dim, dtype=complex), (np.full(dim, row), pops)), shape=(n, n))
        return (sps.diags(keep) @ L + trace).tocsc()
    A = np.array(L, dtype=complex, copy=True)
    A[row, :] = 0
    A[row, np.arange(dim) * (dim + 1)] = 1.0
    assert A.shape == (n, n)
    return A


def _factor_solve(A, b) -> tuple[np.ndarray, float]:
    """Return the solution and the smallest-to-largest |pivot| ratio."""
    if sps.issparse(A):
        try:
            lu = spla.splu(A)
        except RuntimeError:  # SuperLU reports exact singularity this way
            return None, 0.0
        piv = np.abs(lu.U.diagonal())
        return lu.solve(b), float(piv.min() / piv.max())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, perm = sla.lu_factor(A, check_finite=False)
    piv = np.abs(np.diag(lu))
    if piv.max() == 0 or piv.min() == 0:
        return None, 0.0
    return sla.lu_solve((lu, perm), b, check_finite=False), float(piv.min() / piv.max())


def _finish(L, x: np.ndarray, dim: int) -> DensityMatrix:
    rho = devec(x, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    r = L @ rho.reshape(-1, order="F")
    return DensityMatrix(rho, float(np.max(np.abs(r))))


def solve_steady(L) -> DensityMatrix:
    """Unique trace-one steady state of a Liouvillian (dense array or sparse matrix).

    Raises
    ------
    NonUniqueSteadyState
        The generator has more than one null direction.
    SingularSystem
        The bordered system could not be solved and degeneracy could not be confirmed.
    """
    n = L.shape[0]
    dim = int(round(np.sqrt(n)))
    if dim * dim != n or L.shape != (n, n):
        raise ValueError(f"Liouvillian shape {L.shape} is not (d^2, d^2)")

    if not sps.issparse(L) and n <= SVD_ALWAYS_BELOW:
        nulls, _, _ = _null_count(L)
        if nulls > 1:
            raise NonUniqueSteadyState(f"Liouvillian has {nulls} null directions; steady state is not unique")

    row = _trace_row_index(L, dim)
    A = _bordered(L, row, dim)
    b = np.zeros(n, dtype=complex)
    b[row] = 1.0
    x, pivot_ratio = _factor_solve(A, b)

    suspicious = x is None or not np.all(np.isfinite(x)) or pivot_ratio < PIVOT_RTOL
    if not suspicious:
        state = _finish(L, x, dim)
        suspicious = state.min_eigenvalue < -1e-8
        if not suspicious:
            return state

    if n > SVD_MAX_SIZE:
        raise SingularSystem(f"bordered system is singular (pivot ratio {pivot_ratio:.2e}) and too large to classify")
    nulls, s, vh = _null_count(L)
    if nulls > 1:
        raise NonUniqueSteadyState(f"Liouvillian has {nulls} null directions; steady state is not unique")
    if nulls == 0 and s[-1] > 1e3 * NULL_RTOL * s[0]:
        raise SingularSystem("Liouvillian has no numerical null space")
    # unique but badly conditioned for LU: take the right singular vector directly
    state = _finish(L, vh[-1].conj(), dim)
    if state.min_eigenvalue < -1e-8:
        raise SingularSystem("null vector is not a valid density matrix")
    return state


def observables(state: DensityMatrix | np.ndarray, model: Model) -> Observables:
    """Coherence <s13>, level populations and photon statistics of a steady state."""
    rho = state.rho if isinstance(state, DensityMatrix) else np.asarray(state)
    ne, nf = len(model.levels), model.field_dim
    blocks = rho.reshape(ne, nf, ne, nf)
    pops = {lvl: 0.0 for lvl in (1, 2, 3)}
    for i, lvl in enumerate(model.levels):
        pops[lvl] = float(np.trace(blocks[i, :, i, :]).real)
    sigma13 = 0j
    if 1 in model.levels and 3 in model.levels:
        i1, i3 = model.levels.index(1), model.levels.index(3)
        # <s13> = Tr(rho |1><3|) = sum_n rho[(3,n),(1,n)]
        sigma13 = complex(np.trace(blocks[i3, :, i1, :]))
    if not model.is_cavity:
        return Observables(sigma13, pops[1], pops[2], pops[3])
    fock = np.real(np.einsum("inin->n", blocks))
    return Observables(
        sigma13,
        pops[1],
        pops[2],
        pops[3],
        n_mean=float(np.dot(np.arange(nf), fock)),
        top_fock_pop=float(fock[-1]),
    )


def solve_model(model: Model, sparse: bool | None = None) -> tuple[DensityMatrix, Observables]:
    state = solve_steady(model.liouvillian(sparse=sparse))
    return state, observables(state, model)
