"""Concrete model families: AKLT, generalised AKLT, exceptional models, the
spin-2 Hamiltonian family, degenerate families from ``X A^i = A^i Y`` and bond
spin sequence counting."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConsistencyError, DomainError
from .mps import DEFAULT_RANK_TOL, MpsTensor, injectivity_length
from .spinalg import HalfInt, LocalOperator, bond_state, coupled_basis, heisenberg_poly

H_A = (-1.0, 0.0, 91 / 900, 11 / 900)
H_B = (0.0, 1.0, 11 / 30, 1 / 30)
ZERO_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class AkltSpec:
    """Virtual spin ``j``, physical spin ``J`` and bond spin ``Q`` (``Q = 0`` is the singlet)."""

    j: HalfInt
    J: HalfInt
    Q: HalfInt = HalfInt(0)

    def __post_init__(self):
        for name in ("j", "J", "Q"):
            object.__setattr__(self, name, HalfInt.of(getattr(self, name)))
        j, J, Q = self.j.twice, self.J.twice, self.Q.twice
        if j <= 0:
            raise DomainError("virtual spin must be positive")
        if not 0 <= J <= 2 * j or J % 2:
            raise DomainError(f"physical spin J={self.J} must be an integer in [0, 2j]")
        if not 0 <= Q <= 2 * j or Q % 2:
            raise DomainError(f"bond spin Q={self.Q} must be an integer in [0, 2j]")

    @property
    def d(self) -> int:
        return self.J.dim()

    @property
    def D(self) -> int:
        return self.j.dim()

    @classmethod
    def parse(cls, text: str) -> "AkltSpec":
        """Parse ``"j=3/2 J=2 Q=0"`` (``Q`` optional)."""
        found = dict(re.findall(r"([jJQ])\s*=\s*([0-9/.]+)", text))
        if "j" not in found or "J" not in found:
            raise DomainError(f"cannot parse AKLT spec {text!r}")
        return cls(HalfInt.of(found["j"]), HalfInt.of(found["J"]), HalfInt.of(found.get("Q", "0")))

    def __str__(self) -> str:
        return f"j={self.j} J={self.J} Q={self.Q}"

    def charges(self) -> tuple[list[int], list[int]]:
        """Physical and bond U(1) charges (twice ``S_z``) in the package's basis order."""
        return [m.twice for m in self.J.ms()], [m.twice for m in self.j.ms()]


def _isometry(j: HalfInt, J: HalfInt) -> np.ndarray:
    """``V[M, a, b] = <j a; j b | J M>``, indices in descending-m order."""
    C = coupled_basis(j, j, J)  # (D*D, 2J+1)
    D = j.dim()
    return C.T.reshape(J.dim(), D, D)


def aklt_tensor() -> MpsTensor:
    """Spin-1 AKLT tensor, ``d = 3``, ``D = 2``.

    The matrices are the spherical components of the Pauli vector,
    ``A^{+1} = -(sx + i sy)/sqrt2``, ``A^0 = sz``, ``A^{-1} = (sx - i sy)/sqrt2``,
    i.e. the Pauli matrices written in the spin-1 basis ``m = +1, 0, -1``.  This
    gauge makes the two-site MPS space the spin-0 plus spin-1 sector in the
    package's standard basis.
    """
    sx = np.array([[0, 1], [1, 0]], complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1.0 + 0j, -1.0])
    return MpsTensor(np.stack([-(sx + 1j * sy) / np.sqrt(2), sz, (sx - 1j * sy) / np.sqrt(2)]))


def bond_matrix(j, Q) -> np.ndarray:
    j = HalfInt.of(j)
    return bond_state(j, Q).reshape(j.dim(), j.dim())


def generalized_aklt(spec: AkltSpec) -> MpsTensor:
    """``A^M = V^M B``: project two virtual spin-``j`` onto spin ``J`` and attach the bond state.

    ``V^M[a, b'] = <j a; j b' | J M>`` and ``B[b', b] = <j b'; j b | Q 0>``.  The
    tensor is normalised to unit Frobenius norm.
    """
    V = _isometry(spec.j, spec.J)
    A = V @ bond_matrix(spec.j, spec.Q)
    return MpsTensor(A / np.linalg.norm(A))


@dataclass(frozen=True)
class WeightVector:
    """Weights ``w_S`` of the two-site map in the basis of spin-``S`` isometries."""

    weights: tuple
    zero_flags: tuple
    residual: float
    margin: tuple = field(default=())

    def as_dict(self) -> dict:
        return {str(S): w for S, w in self.weights}

    def weight(self, S) -> float:
        S = HalfInt.of(S)
        return dict(self.weights)[S]


def two_site_map(spec: AkltSpec) -> np.ndarray:
    """Map from the two boundary virtual spins ``(a, b')`` to two physical spins.

    ``W[(M1, M2), (a, b')] = sum_c A^{M1}[a, c] V^{M2}[c, b']``, i.e. the blocking
    map on two sites before the last bond state is attached.
    """
    A = generalized_aklt(spec).entries
    V = _isometry(spec.j, spec.J)
    d, D = spec.d, spec.D
    return np.einsum("iac,kcb->ikab", A, V).reshape(d * d, D * D)


def weight_vector(spec: AkltSpec, zero_tol: float = ZERO_WEIGHT_TOL) -> WeightVector:
    """Decompose the two-site map as ``sum_S w_S P_S``.

    ``P_S`` maps the spin-``S`` states of ``j (x) j`` onto those of ``J (x) J``
    (``S`` up to ``min(2j, 2J)``); ``w_S = tr[P_S^dagger W] / (2S+1)``.
    """
    if spec.Q.twice != 0:
        raise DomainError("weights are defined for the singlet bond (Q=0)")
    W = two_site_map(spec)
    recon = np.zeros_like(W)
    weights = []
    for tS in range(0, min(2 * spec.j.twice, 2 * spec.J.twice) + 1, 2):
        S = HalfInt(tS)
        P = coupled_basis(spec.J, spec.J, S) @ coupled_basis(spec.j, spec.j, S).T
        w = float(np.real(np.trace(P.T @ W)) / S.dim())
        weights.append((S, w))
        recon += w * P
    residual = float(np.linalg.norm(W - recon))
    if residual > 1e-10:
        raise ConsistencyError(f"two-site map is not a combination of spin isometries (residual {residual:.3g})")
    top = max(abs(w) for _, w in weights)
    zeros = tuple(S for S, w in weights if abs(w) < zero_tol * top)
    margin = tuple(sorted(abs(w) / top for _, w in weights)[:2])
    return WeightVector(tuple(weights), zeros, residual, margin)


def find_exceptional(j_max, zero_tol: float = ZERO_WEIGHT_TOL) -> list[tuple[HalfInt, HalfInt, tuple]]:
    """All ``(j, J)`` with ``j <= J < 2j`` (``J`` integer, ``j <= j_max``) having a vanishing weight."""
    j_max = HalfInt.of(j_max)
    out = []
    for tj in range(1, j_max.twice + 1):
        j = HalfInt(tj)
        for tJ in range(tj + (tj % 2), 2 * tj, 2):
            wv = weight_vector(AkltSpec(j, HalfInt(tJ)), zero_tol)
            if wv.zero_flags:
                out.append((j, HalfInt(tJ), wv.zero_flags))
    return out


@dataclass(frozen=True)
class Spin2Report:
    lam: float
    min_eig: float
    kernel_dim: int
    kernel_is_013: bool


def spin2_family(lam: float, kernel_tol: float = 1e-9) -> tuple[LocalOperator, Spin2Report]:
    """Two-site spin-2 term ``lam * h_a + (1 - lam) * h_b``, with a spectral report."""
    ha = heisenberg_poly(2, H_A).matrix
    hb = heisenberg_poly(2, H_B).matrix
    op = LocalOperator(lam * ha + (1 - lam) * hb, (5, 5))
    w, v = np.linalg.eigh(op.matrix)
    scale = max(1.0, float(np.max(np.abs(w))))
    k = int(np.sum(np.abs(w) < kernel_tol * scale))
    target = np.hstack([coupled_basis(2, 2, S) for S in (0, 1, 3)])
    kernel = v[:, np.abs(w) < kernel_tol * scale]
    is_013 = False
    if kernel.shape[1] == target.shape[1]:
        is_013 = bool(np.max(np.abs(kernel @ kernel.conj().T - target @ target.T)) < 1e-9)
    return op, Spin2Report(lam, float(w[0]), k, is_013)


def psd_threshold(lo: float = 1.0, hi: float = 2.0, tol: float = 1e-10, floor: float = 1e-10) -> float:
    """Bisection for the largest ``lam`` keeping the spin-2 family positive semidefinite."""
    def psd(lam):
        return spin2_family(lam)[1].min_eig >= -floor

    if not psd(lo) or psd(hi):
        raise DomainError("bisection bracket does not straddle the PSD boundary")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if psd(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class DegenerateFamily:
    tensor: MpsTensor
    X: np.ndarray
    Y: np.ndarray
    witnesses: dict

    def witness_count(self, N: int, rank_tol: float = 1e-10) -> int:
        W = self.witnesses[N]
        s = scipy.linalg.svdvals(W)
        return int(np.sum(s > rank_tol * s[0])) if s.size else 0


def _random_idempotent(rng, D: int, rank: int, cond_cap: float = 1e4, tries: int = 100):
    for _ in range(tries):
        S = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
        if np.linalg.cond(S) <= cond_cap:
            P = np.diag([1.0] * rank + [0.0] * (D - rank))
            return S @ P @ np.linalg.inv(S)
    raise ConsistencyError("could not sample a well-conditioned similarity transform")


def commutant_solutions(X: np.ndarray, Y: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """Basis (as ``(k, D, D)``) of all ``M`` with ``X M = M Y``."""
    D = X.shape[0]
    # row-major vec: vec(X M) = (X kron 1) vec(M), vec(M Y) = (1 kron Y^T) vec(M)
    L = np.kron(X, np.eye(D)) - np.kron(np.eye(D), Y.T)
    ns = scipy.linalg.null_space(L, rcond=rank_tol)
    return ns.T.reshape(-1, D, D)


def x_insertion_state(A: MpsTensor, X: np.ndarray, N: int, links) -> np.ndarray:
    """``tr[A^{i_1} Z_1 A^{i_2} Z_2 ... A^{i_N}]`` with ``Z_k = X`` on the given links (1-based)."""
    mats = [A.entries @ X if (k + 1) in links else A.entries for k in range(N)]
    D = A.D
    m = mats[-1]
    for t in reversed(mats[:-1]):
        m = np.einsum("iab,wbc->iwac", t, m).reshape(-1, D, D)
    return np.einsum("waa->w", m)


def degenerate_family(d: int, D: int, rank_X: int, rank_Y: int, seed: int,
                      N_max: int = 6, retries: int = 20, rank_tol: float = DEFAULT_RANK_TOL) -> DegenerateFamily:
    """A random tensor with ``X A^i = A^i Y`` for idempotents ``X != Y``, plus ground-state witnesses.

    Witnesses on ``N`` sites are the periodic-trace states with ``X`` placed or not
    placed on each odd link ``1, 3, 5, ...``.  Every one of them is annihilated
    by the two-site parent Hamiltonian since ``X`` can be moved through a site,
    turning into ``Y``.
    """
    if not (1 <= rank_X < D and 1 <= rank_Y < D):
        raise DomainError("ranks of X and Y must lie in [1, D)")
    rng = np.random.Generator(np.random.Philox(int(seed) % 2**64))
    for _ in range(retries):
        X = _random_idempotent(rng, D, rank_X)
        Y = _random_idempotent(rng, D, rank_Y)
        sol = commutant_solutions(X, Y)
        if sol.shape[0] == 0:
            continue
        coeff = rng.standard_normal((d, sol.shape[0])) + 1j * rng.standard_normal((d, sol.shape[0]))
        A = MpsTensor(np.einsum("ik,kab->iab", coeff, sol))
        if injectivity_length(A, 2, rank_tol) != 2:
            continue
        witnesses = {}
        for N in range(2, N_max + 1):
            odd = [k for k in range(1, N, 2)]
            cols = []
            for r in range(len(odd) + 1):
                for links in itertools.combinations(odd, r):
                    cols.append(x_insertion_state(A, X, N, set(links)))
            witnesses[N] = np.stack(cols, axis=1)
        return DegenerateFamily(A, X, Y, witnesses)
    raise ConsistencyError(f"no injective solution of XA=AY found in {retries} attempts")


def bond_sequence_count(J, j_cap, N: int, boundary: str = "open") -> int:
    """Number of bond spin sequences compatible with physical spin ``J`` on ``N`` sites.

    Bond spins range over ``0, 1/2, ..., j_cap``; neighbouring bonds ``j_b, j_{b+1}``
    must couple to ``J``.  Open chains have ``N+1`` bonds (including the two
    boundary legs), periodic ones ``N``; the counts are ``1^T T^N 1`` and ``tr T^N``
    in exact integer arithmetic.
    """
    if N < 2:
        raise DomainError("need N >= 2")
    J, j_cap = HalfInt.of(J), HalfInt.of(j_cap)
    spins = list(range(0, j_cap.twice + 1))
    n = len(spins)

    def ok(a, b):
        return abs(a - b) <= J.twice <= a + b and (a + b - J.twice) % 2 == 0

    T = [[1 if ok(a, b) else 0 for b in spins] for a in spins]

    def matmul(P, Q):
        return [[sum(P[i][k] * Q[k][j] for k in range(n)) for j in range(n)] for i in range(n)]

    power = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(N):
        power = matmul(power, T)
    if boundary == "open":
        return sum(sum(row) for row in power)
    if boundary == "periodic":
        return sum(power[i][i] for i in range(n))
    raise DomainError(f"unknown boundary {boundary!r}")


def model_from_descriptor(text: str) -> MpsTensor:
    """``"aklt"`` or an AKLT spec string like ``"j=3/2 J=2 Q=0"``."""
    if text.strip().lower() == "aklt":
        return aklt_tensor()
    return generalized_aklt(AkltSpec.parse(text))

