"""Translation-invariant MPS tensors, the blocking map and MPS spaces.

Index conventions (fixed for the whole package):

* ``A.entries[i, a, b]`` is the matrix element ``(A^i)_{ab}``.
* Configurations ``i_1 ... i_l`` of ``l`` sites are flattened big-endian:
  ``row = i_1 * d**(l-1) + ... + i_l``, i.e. site 1 is most significant.
* A boundary matrix ``X`` is vectorised row-major, ``vec(X)[b*D + a] = X[b, a]``.
  The blocking map column ``b*D + a`` then holds ``(A^{i_1}...A^{i_l})_{ab}``,
  so that ``blocking_map(A, l) @ X.ravel()`` is the vector with entries
  ``tr[A^{i_1}...A^{i_l} X]``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import budget
from .errors import DomainError

log = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MpsTensor:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise DomainError(f"MPS tensor must have shape (d, D, D), got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise DomainError("empty MPS tensor")
        if not np.all(np.isfinite(a)):
            raise DomainError("MPS tensor has non-finite entries")
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def D(self) -> int:
        return self.entries.shape[1]

    def __getitem__(self, i):
        return self.entries[i]

    def to_dict(self) -> dict:
        e = self.entries
        return {
            "d": self.d,
            "D": self.D,
            "entries": [
                [[[float(z.real), float(z.imag)] for z in row] for row in mat] for mat in e
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MpsTensor":
        arr = np.asarray(data["entries"], dtype=float)
        d, D = int(data["d"]), int(data["D"])
        if arr.shape != (d, D, D, 2):
            raise DomainError(f"entries have shape {arr.shape}, expected {(d, D, D, 2)}")
        return cls(arr[..., 0] + 1j * arr[..., 1])

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "MpsTensor":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "MpsTensor":
        return cls.loads(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class Subspace:
    """Orthonormal basis of a subspace of ``C^ambient_dim``.

    ``gap`` records ``(smallest kept, largest dropped)`` of the decision values that
    produced the basis (singular values, or eigenvalues, depending on the producer),
    so that borderline rank decisions can be audited.
    """

    ambient_dim: int
    basis: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL
    gap: tuple = field(default=(None, None))

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=complex)
        if b.ndim != 2 or b.shape[0] != self.ambient_dim:
            raise DomainError(f"basis shape {b.shape} incompatible with ambient {self.ambient_dim}")
        b.flags.writeable = False
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        budget.require(budget.complex_bytes(self.ambient_dim, self.ambient_dim), "projector")
        return self.basis @ self.basis.conj().T

    def residual(self, v: np.ndarray) -> float:
        """Relative norm of the component of ``v`` outside the subspace."""
        v = np.asarray(v)
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        r = v - self.basis @ (self.basis.conj().T @ v)
        return float(np.linalg.norm(r) / nv)

    def orthonormality_error(self) -> float:
        g = self.basis.conj().T @ self.basis
        return float(np.max(np.abs(g - np.eye(self.dim)))) if self.dim else 0.0

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(n, np.eye(n, dtype=complex))

    @classmethod
    def from_vectors(cls, vectors: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> "Subspace":
        """Column space of ``vectors`` with relative singular value threshold."""
        vectors = np.asarray(vectors, dtype=complex)
        n = vectors.shape[0]
        if vectors.shape[1] == 0:
            return cls(n, np.zeros((n, 0), complex), rank_tol)
        u, s = _left_svd(vectors)
        if s.size == 0 or s[0] == 0:
            return cls(n, np.zeros((n, 0), complex), rank_tol)
        keep = s > rank_tol * s[0]
        k = int(keep.sum())
        gap = (float(s[k - 1] / s[0]), float(s[k] / s[0]) if k < s.size else None)
        return cls(n, u[:, :k], rank_tol, gap)


def _left_svd(m: np.ndarray):
    try:
        u, s, _ = scipy.linalg.svd(m, full_matrices=False, check_finite=False)
    except np.linalg.LinAlgError:
        u, s, _ = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    return u, s


def random_mps(d: int, D: int, seed: int) -> MpsTensor:
    """Tensor with i.i.d. standard complex Gaussian entries (real and imaginary parts N(0,1)).

    Uses the counter-based Philox bit generator, so the output depends only on
    ``(d, D, seed)``.
    """
    if d < 2 or D < 1:
        raise DomainError(f"need d >= 2 and D >= 1, got d={d}, D={D}")
    rng = np.random.Generator(np.random.Philox(int(seed) % 2**64))
    re_im = rng.standard_normal((2, d, D, D))
    return MpsTensor(re_im[0] + 1j * re_im[1])


def _words(A: MpsTensor, ell: int) -> np.ndarray:
    """All products ``A^{i_1}...A^{i_l}``, shape ``(d**l, D, D)`` in big-endian order."""
    if ell < 1:
        raise DomainError("block length must be >= 1")
    d, D = A.d, A.D
    budget.require(budget.complex_bytes(d**ell, D, D), f"blocking map d^{ell} x D^2")
    m = A.entries
    for _ in range(ell - 1):
        m = np.einsum("wab,ibc->wiac", m, A.entries).reshape(-1, D, D)
    return m


def blocking_map(A: MpsTensor, ell: int) -> np.ndarray:
    """Matrix of ``X -> |Psi_l[X]>``, shape ``(d**l, D**2)``; column ``b*D + a`` <-> ``X[b, a]``."""
    m = _words(A, ell)
    return np.ascontiguousarray(m.transpose(0, 2, 1).reshape(m.shape[0], -1))


def mps_space(A: MpsTensor, ell: int, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """Orthonormal basis of the MPS space spanned by all ``|Psi_l[X]>``."""
    P = blocking_map(A, ell)
    sub = Subspace.from_vectors(P, rank_tol)
    log.debug("mps_space l=%d: dim %d, gap %s", ell, sub.dim, sub.gap)
    return sub


def transfer_gram(A: MpsTensor, ell: int) -> np.ndarray:
    """Gram matrix ``T = P^dagger P`` of the blocking map without forming ``P``.

    ``T[(b,a),(b',a')] = sum_w conj(M_w[a,b]) M_w[a',b']`` is a reshuffle of the
    ``l``-th power of the transfer matrix ``E = sum_i conj(A^i) (x) A^i``.
    """
    D = A.D
    E = np.einsum("iab,icd->acbd", A.entries.conj(), A.entries).reshape(D * D, D * D)
    El = np.linalg.matrix_power(E, ell)
    # El[(a,a'),(b,b')] -> T[(b,a),(b',a')]
    return El.reshape(D, D, D, D).transpose(2, 0, 3, 1).reshape(D * D, D * D)


def gram_rank(A: MpsTensor, ell: int, rank_tol: float = DEFAULT_RANK_TOL) -> tuple[int, tuple]:
    """Rank of ``T_A`` on ``l`` sites by eigenvalues relative to the largest, plus the gap."""
    ev = np.linalg.eigvalsh(transfer_gram(A, ell))[::-1]
    if ev[0] <= 0:
        return 0, (None, None)
    k = int(np.sum(ev > rank_tol * ev[0]))
    gap = (float(ev[k - 1] / ev[0]), float(ev[k] / ev[0]) if k < ev.size else None)
    return k, gap


def injectivity_length(A: MpsTensor, ell_max: int = 8, rank_tol: float = DEFAULT_RANK_TOL):
    """Smallest ``l <= ell_max`` with ``dim S_l = D**2``, or ``None``.

    Ranks come from the Gram matrix ``T_A`` (eigenvalue threshold ``rank_tol``
    relative to the largest eigenvalue), which costs ``O(D**6)`` independent of ``d**l``.
    """
    if ell_max < 1:
        raise DomainError("ell_max must be >= 1")
    D2 = A.D**2
    for ell in range(1, ell_max + 1):
        k, gap = gram_rank(A, ell, rank_tol)
        log.debug("injectivity scan l=%d rank=%d gap=%s", ell, k, gap)
        if k == D2:
            return ell
    return None


def state_vector(A: MpsTensor, N: int, X="periodic") -> np.ndarray:
    """Coefficients ``tr[A^{i_1}...A^{i_N} X]`` (unnormalised); ``"periodic"`` means ``X = 1``."""
    D = A.D
    if isinstance(X, str):
        if X != "periodic":
            raise DomainError(f"unknown boundary {X!r}")
        X = np.eye(D)
    X = np.asarray(X, dtype=complex)
    if X.shape != (D, D):
        raise DomainError(f"boundary matrix must be {D}x{D}")
    d = A.d
    budget.require(budget.complex_bytes(d**N, D, D), f"state vector on {N} sites")
    # absorb X from the right, then grow to the left
    m = np.einsum("iab,bc->iac", A.entries, X)
    for _ in range(N - 1):
        m = np.einsum("iab,wbc->iwac", A.entries, m).reshape(-1, D, D)
    return np.einsum("waa->w", m)
