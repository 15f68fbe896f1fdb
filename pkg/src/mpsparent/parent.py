"""Parent Hamiltonian terms, chain Hamiltonians and the determinant witness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from . import budget
from .errors import PreconditionError
from .mps import DEFAULT_RANK_TOL, MpsTensor, Subspace, mps_space
from .spinalg import LocalOperator

DENSE_CAP = 4096
KERNEL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ParentTerm:
    """``h = 1 - Pi_S`` on ``ell`` sites together with the subspace ``S`` it annihilates."""

    base: LocalOperator
    ell: int
    source_tol: float
    space: Subspace

    @property
    def trivial(self) -> bool:
        """True when the MPS space fills the whole window, so ``h`` vanishes."""
        return self.space.dim == self.space.ambient_dim

    @property
    def d(self) -> int:
        return self.base.phys_dim

    @property
    def rank(self) -> int:
        return self.space.ambient_dim - self.space.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.base.matrix


def term_from_space(space: Subspace, d: int, ell: int) -> ParentTerm:
    B = space.basis
    h = np.eye(space.ambient_dim) - B @ B.conj().T
    h = (h + h.conj().T) / 2
    return ParentTerm(LocalOperator.uniform(h, d, ell), ell, space.rank_tol, space)


def parent_term(A: MpsTensor, ell: int, rank_tol: float = DEFAULT_RANK_TOL) -> ParentTerm:
    """The ``ell``-site parent term ``h = 1 - Pi`` with ``Pi`` the projector onto ``S_ell``.

    Built from the orthonormal basis of ``S_ell``, which equals
    ``1 - P T^{-1} P^dagger`` without inverting the Gram matrix.  When ``S_ell``
    is the full space the returned term is zero and ``.trivial`` is set.
    """
    budget.require(budget.complex_bytes(A.d**ell, A.d**ell), f"parent term on {ell} sites")
    return term_from_space(mps_space(A, ell, rank_tol), A.d, ell)


def _apply_window(h: np.ndarray, v: np.ndarray, d: int, N: int, sites) -> np.ndarray:
    ell = len(sites)
    extra = v.shape[1:]
    t = v.reshape((d,) * N + extra)
    h_t = h.reshape((d,) * (2 * ell))
    out = np.tensordot(h_t, t, axes=(list(range(ell, 2 * ell)), list(sites)))
    # tensordot puts the window axes first; move them back to their sites
    return np.moveaxis(out, list(range(ell)), list(sites)).reshape(v.shape)


def apply_obc_hamiltonian(term: ParentTerm, N: int, v: np.ndarray) -> np.ndarray:
    """``sum_{i=0}^{N-ell} h_i v`` without building the ``d**N`` matrix."""
    ell, d = term.ell, term.d
    if N < ell:
        raise PreconditionError(f"chain of {N} sites shorter than the term ({ell})")
    budget.require(3 * budget.complex_bytes(d**N), f"vector on {N} sites")
    v = np.asarray(v, dtype=complex)
    out = np.zeros_like(v)
    for i in range(N - ell + 1):
        out += _apply_window(term.matrix, v, d, N, range(i, i + ell))
    return out


def apply_pbc_hamiltonian(term: ParentTerm, N: int, v: np.ndarray) -> np.ndarray:
    """Cyclic sum including the windows that wrap around the end of the chain."""
    ell, d = term.ell, term.d
    if N < ell:
        raise PreconditionError(f"ring of {N} sites shorter than the term ({ell})")
    budget.require(3 * budget.complex_bytes(d**N), f"vector on {N} sites")
    v = np.asarray(v, dtype=complex)
    out = np.zeros_like(v)
    for i in range(N):
        out += _apply_window(term.matrix, v, d, N, [(i + k) % N for k in range(ell)])
    return out


def dense_hamiltonian(term: ParentTerm, N: int, periodic: bool = False) -> np.ndarray:
    ell, d = term.ell, term.d
    n = d**N
    budget.require(3 * budget.complex_bytes(n, n), f"dense Hamiltonian on {N} sites")
    H = np.zeros((n, n), dtype=complex)
    for i in range(N - ell + 1):
        H += np.kron(np.kron(np.eye(d**i), term.matrix), np.eye(d ** (N - ell - i)))
    if periodic:
        # wrap-around windows, applied to the identity through the matrix-free path
        eye = np.eye(n, dtype=complex)
        for i in range(N - ell + 1, N):
            H += _apply_window(term.matrix, eye, d, N, [(i + k) % N for k in range(ell)])
    return (H + H.conj().T) / 2


def pbc_kernel(term: ParentTerm, A: MpsTensor, N: int, kernel_tol: float = KERNEL_TOL,
               dense_cap: int = 1024) -> Subspace:
    """Ground space (zero modes) of the periodic chain Hamiltonian on ``N`` sites.

    Dense diagonalisation up to ``d**N <= dense_cap``; beyond that, Lanczos on the
    matrix-free operator, widening the number of requested eigenpairs until one
    of them lies above ``kernel_tol``.
    """
    d = term.d
    n = d**N
    if n <= dense_cap:
        H = dense_hamiltonian(term, N, periodic=True)
        w, v = np.linalg.eigh(H)
        keep = w < kernel_tol
        k = int(keep.sum())
        gap = (float(w[k - 1]) if k else None, float(w[k]) if k < n else None)
        return Subspace(n, v[:, :k], kernel_tol, gap)
    op = scipy.sparse.linalg.LinearOperator(
        (n, n), matvec=lambda x: apply_pbc_hamiltonian(term, N, x), dtype=complex
    )
    # fixed start vector keeps the result reproducible
    rng = np.random.Generator(np.random.Philox(n))
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    k = 4
    while True:
        w, v = scipy.sparse.linalg.eigsh(op, k=k, which="SA", tol=1e-12, v0=v0)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        if w[-1] >= kernel_tol or k >= n - 2:
            break
        k *= 2
    keep = w < kernel_tol
    m = int(keep.sum())
    basis = np.linalg.qr(v[:, :m])[0] if m else np.zeros((n, 0), complex)
    return Subspace(n, basis, kernel_tol, (float(w[m - 1]) if m else None, float(w[m])))


@dataclass(frozen=True)
class FDet:
    """``det[H_L + (1 - h^L)]`` reported through its spectrum."""

    zero: bool
    log_abs: float
    min_eig: float
    max_eig: float

    @property
    def value(self) -> float:
        return 0.0 if self.zero else math.exp(self.log_abs)

    def __float__(self) -> float:
        return self.value


def f_det(
    A: MpsTensor,
    ell: int,
    L: int,
    rank_tol: float = DEFAULT_RANK_TOL,
    zero_tol: float = 1e-9,
) -> FDet:
    """Determinant witness: zero exactly when the ``ell``-site Hamiltonian on ``L`` sites
    has ground states outside ``S_L``.

    The matrix ``H_L + Pi_{S_L}`` is PSD; its determinant is taken as the product of
    eigenvalues and declared zero when the smallest eigenvalue is below
    ``zero_tol`` times the largest.
    """
    space = mps_space(A, ell, rank_tol)
    if space.dim != A.D**2:
        raise PreconditionError(
            f"tensor is not injective on {ell} sites (dim S={space.dim} < D^2={A.D**2})"
        )
    if A.d**L > DENSE_CAP:
        raise budget.ResourceLimitError(f"f_det dense assembly d^{L}", 16 * A.d ** (2 * L), 16 * DENSE_CAP**2)
    term = term_from_space(space, A.d, ell)
    H = dense_hamiltonian(term, L)
    SL = mps_space(A, L, rank_tol)
    H += SL.basis @ SL.basis.conj().T
    w = np.linalg.eigvalsh((H + H.conj().T) / 2)
    top = float(w[-1])
    zero = bool(w[0] < zero_tol * top)
    log_abs = float(np.sum(np.log(np.abs(w)))) if not zero else -math.inf
    return FDet(zero, log_abs, float(w[0]), top)
