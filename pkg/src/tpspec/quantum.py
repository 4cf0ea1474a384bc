"""Dense Liouville-space machinery for small open quantum systems.

Density operators are vectorized by stacking columns, so that
``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.  All rates and Hamiltonians are
angular frequencies in rad/ns; times are in ns.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, SteadyStateError

HERMITIAN_TOL = 1e-12
ZERO_EIGENVALUE_TOL = 1e-9
EIG_CONDITION_LIMIT = 1e8


def lowering(dim: int = 2) -> np.ndarray:
    """Lowering operator ``sum_n sqrt(n) |n-1><n|``; for ``dim=2`` this is |g><e|."""
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def number(dim: int = 2) -> np.ndarray:
    return np.diag(np.arange(dim)).astype(complex)


def identity(dim: int = 2) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def dag(op: np.ndarray) -> np.ndarray:
    return op.conj().T


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise DimensionError(f"vector of length {v.size} is not a vectorized {dim}x{dim} operator")
    return v.reshape(dim, dim, order="F")


def left(op: np.ndarray) -> np.ndarray:
    """Superoperator for ``rho -> op @ rho``."""
    return np.kron(np.eye(op.shape[0]), op)


def right(op: np.ndarray) -> np.ndarray:
    """Superoperator for ``rho -> rho @ op``."""
    return np.kron(op.T, np.eye(op.shape[0]))


def sandwich(pre_op: np.ndarray, post_op: np.ndarray) -> np.ndarray:
    """Superoperator for ``rho -> pre_op @ rho @ post_op``."""
    return np.kron(post_op.T, pre_op)


def trace_row(dim: int) -> np.ndarray:
    """Row vector ``t`` with ``t @ vec(rho) == trace(rho)``."""
    return vec(np.eye(dim))


def expectation_row(observable: np.ndarray) -> np.ndarray:
    """Row vector ``w`` with ``w @ vec(rho) == trace(observable @ rho)``."""
    return vec(np.asarray(observable).T)


def is_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    return op.ndim == 2 and op.shape[0] == op.shape[1] and np.max(np.abs(op - dag(op)), initial=0.0) < tol


def check_density(rho: np.ndarray, tol: float = 1e-10, positivity_tol: float = 1e-9) -> np.ndarray:
    """Validate a density operator and return it unchanged.

    Raises
    ------
    ValueError
        If the trace, Hermiticity or positivity checks fail.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density operator must be square, got shape {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValueError(f"density operator trace is {tr}, expected 1")
    if not is_hermitian(rho, tol):
        raise ValueError("density operator is not Hermitian")
    lowest = np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0]
    if lowest < -positivity_tol:
        raise ValueError(f"density operator has negative eigenvalue {lowest:.3e}")
    return rho


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Linear map on vectorized ``dim x dim`` operators (column stacking)."""

    matrix: np.ndarray
    dim: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.dim**2, self.dim**2):
            raise DimensionError(f"superoperator of shape {m.shape} does not act on dim {self.dim}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)


def build_lindblad(
    hamiltonian: np.ndarray,
    jumps: Iterable[tuple[np.ndarray, float]],
) -> Superoperator:
    r"""Lindblad generator

    .. math::
        \mathcal{L}\rho = -i[H,\rho] + \sum_k r_k\left(J_k\rho J_k^\dagger
            - \tfrac12\{J_k^\dagger J_k,\rho\}\right)

    Parameters
    ----------
    hamiltonian : ndarray
        Hermitian Hamiltonian in rad/ns.
    jumps : iterable of (ndarray, float)
        Jump operators with their (strictly positive) rates in rad/ns.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"Hamiltonian must be square, got shape {h.shape}")
    dim = h.shape[0]
    if not is_hermitian(h, HERMITIAN_TOL * max(1.0, np.max(np.abs(h)))):
        raise ValueError("Hamiltonian is not Hermitian")
    eye = np.eye(dim)
    gen = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op, rate in jumps:
        op = np.asarray(op, dtype=complex)
        if op.shape != (dim, dim):
            raise DimensionError(f"jump operator of shape {op.shape} does not match dim {dim}")
        if not rate > 0:
            raise ValueError(f"jump rates must be positive, got {rate}")
        n = dag(op) @ op
        gen += rate * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, n) - 0.5 * np.kron(n.T, eye))
    return Superoperator(gen, dim)


def _as_matrix(generator) -> tuple[np.ndarray, int]:
    if isinstance(generator, Superoperator):
        return generator.matrix, generator.dim
    m = np.asarray(generator)
    return m, int(round(np.sqrt(m.shape[0])))


def solve_steady(matrix: np.ndarray, trace_vector: np.ndarray) -> np.ndarray:
    """Null vector ``x`` of ``matrix`` normalized by ``trace_vector @ x == 1``.

    Works directly on (possibly similarity-transformed) Liouville matrices and
    skips every uniqueness check; :func:`steady_state` is the checked wrapper.
    The first row, which is a redundant population equation for any
    trace-preserving generator, is replaced by the normalization.
    """
    a = np.array(matrix, dtype=complex)
    a[0, :] = trace_vector
    b = np.zeros(a.shape[0], dtype=complex)
    b[0] = 1.0
    return np.linalg.solve(a, b)


def steady_state(generator: Superoperator) -> np.ndarray:
    """Unique stationary density operator of ``generator``.

    Raises
    ------
    SteadyStateError
        If the generator has no zero eigenvalue, several of them, or the
        linear solve leaves a residual above tolerance.
    """
    mat, dim = _as_matrix(generator)
    eigs = generator.eigenvalues if isinstance(generator, Superoperator) else np.linalg.eigvals(mat)
    n_zero = int(np.sum(np.abs(eigs) < ZERO_EIGENVALUE_TOL))
    if n_zero != 1:
        raise SteadyStateError(f"no unique steady state ({n_zero} eigenvalues with |lambda| < {ZERO_EIGENVALUE_TOL})")
    x = solve_steady(mat, trace_row(dim))
    scale = max(1.0, np.max(np.abs(mat)))
    residual = np.max(np.abs(mat @ x))
    if residual > 1e-10 * scale:
        raise SteadyStateError(f"steady-state solve is ill-conditioned: residual {residual:.3e}")
    rho = unvec(x, dim)
    return 0.5 * (rho + dag(rho))


class Propagator:
    """Evaluates ``exp(matrix * t) @ v`` for many ``t`` from one factorization.

    Uses the eigendecomposition when the eigenvector matrix is well
    conditioned, otherwise falls back to scaling-and-squaring for every time.
    """

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=complex)
        w, v = np.linalg.eig(self.matrix)
        cond = np.linalg.cond(v)
        self.use_eig = bool(np.isfinite(cond) and cond < EIG_CONDITION_LIMIT)
        if self.use_eig:
            self.eigvals = w
            self.eigvecs = v
            self.eigvecs_inv = np.linalg.inv(v)

    def evolve(self, v0: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """Rows are ``exp(matrix * t) @ v0`` for each ``t`` in ``times``."""
        times = np.asarray(times, dtype=float)
        if self.use_eig:
            coeffs = self.eigvecs_inv @ v0
            return (np.exp(np.outer(times, self.eigvals)) * coeffs) @ self.eigvecs.T
        return np.array([scipy.linalg.expm(self.matrix * t) @ v0 for t in times])

    def project(self, row: np.ndarray, v0: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """``row @ exp(matrix * t) @ v0`` for each ``t``."""
        times = np.asarray(times, dtype=float)
        if self.use_eig:
            a = row @ self.eigvecs
            b = self.eigvecs_inv @ v0
            return np.exp(np.outer(times, self.eigvals)) @ (a * b)
        return self.evolve(v0, times) @ row


def propagate(generator: Superoperator, rho0: np.ndarray, t: float) -> np.ndarray:
    """``exp(L t)`` applied to ``rho0``; ``t`` in ns and nonnegative."""
    if t < 0:
        raise ValueError(f"propagation time must be nonnegative, got {t}")
    mat, dim = _as_matrix(generator)
    if np.shape(rho0) != (dim, dim):
        raise DimensionError(f"state of shape {np.shape(rho0)} does not match dim {dim}")
    if t == 0:
        return np.array(rho0, dtype=complex)
    return unvec(Propagator(mat).evolve(vec(rho0), [t])[0], dim)


def regression_correlator(
    generator: Superoperator,
    rho_ss: np.ndarray,
    pre_op: np.ndarray,
    post_op: np.ndarray,
    observable: np.ndarray,
    taus: Sequence[float],
) -> np.ndarray:
    """Two-time average ``Tr[observable exp(L tau)(pre_op rho_ss post_op)]``.

    For example ``pre_op = a``, ``post_op = a^dag`` and ``observable = a^dag a``
    gives the unnormalized intensity correlation ``<a^dag(0) a^dag(tau) a(tau) a(0)>``.
    """
    mat, dim = _as_matrix(generator)
    for name, op in (("rho_ss", rho_ss), ("pre_op", pre_op), ("post_op", post_op), ("observable", observable)):
        if np.shape(op) != (dim, dim):
            raise DimensionError(f"{name} of shape {np.shape(op)} does not match dim {dim}")
    taus = np.asarray(taus, dtype=float)
    if taus.size and (np.any(taus < 0) or np.any(np.diff(taus) < 0)):
        raise ValueError("tau grid must be nonnegative and ascending")
    start = vec(pre_op @ rho_ss @ post_op)
    row = expectation_row(observable)
    out = np.empty(taus.size, dtype=complex)
    at_zero = taus == 0
    out[at_zero] = row @ start
    if not np.all(at_zero):
        out[~at_zero] = Propagator(mat).project(row, start, taus[~at_zero])
    return out
