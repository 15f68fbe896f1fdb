"""Angular momentum algebra: Clebsch-Gordan coefficients, spin matrices, projectors.

Conventions used everywhere in the package:

* Condon-Shortley phases.
* Basis states of a spin ``s`` are ordered by descending magnetic quantum
  number, ``m = s, s-1, ..., -s``.
* Two-spin product states ``|m1, m2>`` are ordered with ``m1`` as the slow index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, order=True)
class HalfInt:
    """An exact half-integer stored as twice its value."""

    twice: int

    @classmethod
    def of(cls, value) -> "HalfInt":
        """Build from an int, a float that is a multiple of 1/2, a Fraction or a string like ``"3/2"``."""
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, str):
            value = Fraction(value.strip())
        frac = Fraction(value)
        if (2 * frac).denominator != 1:
            raise DomainError(f"{value!r} is not a multiple of 1/2")
        return cls(int(2 * frac))

    @property
    def value(self) -> float:
        return self.twice / 2

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def fraction(self) -> Fraction:
        return Fraction(self.twice, 2)

    def __str__(self) -> str:
        return str(self.twice // 2) if self.twice % 2 == 0 else f"{self.twice}/2"

    def __add__(self, other):
        return HalfInt(self.twice + HalfInt.of(other).twice)

    def __sub__(self, other):
        return HalfInt(self.twice - HalfInt.of(other).twice)

    def __neg__(self):
        return HalfInt(-self.twice)

    def dim(self) -> int:
        """Multiplet dimension ``2s+1``."""
        if self.twice < 0:
            raise DomainError(f"negative spin {self}")
        return self.twice + 1

    def ms(self) -> list["HalfInt"]:
        """Magnetic quantum numbers in descending order."""
        return [HalfInt(self.twice - 2 * k) for k in range(self.dim())]


def _h(x) -> HalfInt:
    return HalfInt.of(x)


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """A Hermitian operator on a product of local spaces of dimensions ``dims``."""

    matrix: np.ndarray
    dims: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = int(np.prod(self.dims))
        if m.shape != (n, n):
            raise DomainError(f"matrix shape {m.shape} does not match dims {self.dims}")
        if m.size and np.max(np.abs(m - m.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise DomainError("LocalOperator must be Hermitian")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))

    @classmethod
    def uniform(cls, matrix, phys_dim: int, sites: int) -> "LocalOperator":
        return cls(matrix, (phys_dim,) * sites)

    @property
    def sites(self) -> int:
        return len(self.dims)

    @property
    def phys_dim(self) -> int:
        if len(set(self.dims)) != 1:
            raise DomainError(f"non-uniform local dimensions {self.dims}")
        return self.dims[0]

    def __matmul__(self, other):
        return self.matrix @ (other.matrix if isinstance(other, LocalOperator) else other)


@lru_cache(maxsize=None)
def _lfact(n: int) -> float:
    return math.lgamma(n + 1)


def _valid_m(j: HalfInt, m: HalfInt) -> bool:
    return abs(m.twice) <= j.twice and (j.twice - m.twice) % 2 == 0


@lru_cache(maxsize=200_000)
def _cg_twice(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    if M != m1 + m2:
        return 0.0
    if J < abs(j1 - j2) or J > j1 + j2 or (j1 + j2 + J) % 2:
        return 0.0
    # all arguments below are integers: (2a +- 2b)/2 with matching parity
    a = (j1 + j2 - J) // 2
    b = (j1 - j2 + J) // 2
    c = (-j1 + j2 + J) // 2
    e = (j1 + j2 + J) // 2 + 1
    log_pref = 0.5 * (
        math.log(J + 1)
        + _lfact(a) + _lfact(b) + _lfact(c) - _lfact(e)
        + _lfact((j1 + m1) // 2) + _lfact((j1 - m1) // 2)
        + _lfact((j2 + m2) // 2) + _lfact((j2 - m2) // 2)
        + _lfact((J + M) // 2) + _lfact((J - M) // 2)
    )
    k_min = max(0, (j2 - J - m1) // 2, (j1 - J + m2) // 2)
    k_max = min(a, (j1 - m1) // 2, (j2 + m2) // 2)
    total = 0.0
    for k in range(k_min, k_max + 1):
        log_den = (
            _lfact(k) + _lfact(a - k) + _lfact((j1 - m1) // 2 - k) + _lfact((j2 + m2) // 2 - k)
            + _lfact((J - j2 + m1) // 2 + k) + _lfact((J - j1 - m2) // 2 + k)
        )
        term = math.exp(log_pref - log_den)
        total += -term if k % 2 else term
    return total


def cg(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> (Racah's single-sum formula).

    Arguments may be :class:`HalfInt` or anything :meth:`HalfInt.of` accepts.
    Returns exactly 0.0 when ``M != m1 + m2`` or ``J`` violates the triangle rule.
    """
    j1, m1, j2, m2, J, M = (_h(x) for x in (j1, m1, j2, m2, J, M))
    for j, m in ((j1, m1), (j2, m2), (J, M)):
        if j.twice < 0 or not _valid_m(j, m):
            raise DomainError(f"invalid spin/projection pair j={j}, m={m}")
    return _cg_twice(j1.twice, m1.twice, j2.twice, m2.twice, J.twice, M.twice)


def spin_operators(s) -> tuple[LocalOperator, LocalOperator, LocalOperator]:
    """Spin matrices ``(Jx, Jy, Jz)`` of the spin-``s`` irrep."""
    s = _h(s)
    n = s.dim()
    sv = s.value
    m = np.array([sv - k for k in range(n)])
    jp = np.zeros((n, n))
    # J+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>, and |m+1> sits one row above |m>
    for k in range(1, n):
        jp[k - 1, k] = math.sqrt(sv * (sv + 1) - m[k] * (m[k] + 1))
    jx = (jp + jp.T) / 2
    jy = (jp - jp.T) / 2j
    jz = np.diag(m)
    return tuple(LocalOperator(x, (n,)) for x in (jx, jy, jz))


def coupled_basis(s1, s2, S) -> np.ndarray:
    """Columns are the coupled states ``|S, M>`` in ``s1 (x) s2``, ``M`` descending."""
    s1, s2, S = _h(s1), _h(s2), _h(S)
    if S.twice < abs(s1.twice - s2.twice) or S.twice > s1.twice + s2.twice or (
        s1.twice + s2.twice - S.twice
    ) % 2:
        raise DomainError(f"spin {S} does not occur in {s1} x {s2}")
    return _coupled_basis(s1.twice, s2.twice, S.twice).copy()


@lru_cache(maxsize=256)
def _coupled_basis(t1: int, t2: int, tS: int) -> np.ndarray:
    n1, n2, nS = t1 + 1, t2 + 1, tS + 1
    out = np.zeros((n1 * n2, nS))
    for c in range(nS):
        M = tS - 2 * c
        for a in range(n1):
            m1 = t1 - 2 * a
            m2 = M - m1
            if abs(m2) > t2:
                continue
            b = (t2 - m2) // 2
            out[a * n2 + b, c] = _cg_twice(t1, m1, t2, m2, tS, M)
    out.flags.writeable = False
    return out


def total_spin_projector(s1, s2, S) -> LocalOperator:
    """Orthogonal projector onto total spin ``S`` inside ``s1 (x) s2``."""
    s1, s2 = _h(s1), _h(s2)
    C = coupled_basis(s1, s2, S)
    return LocalOperator(C @ C.T, (s1.dim(), s2.dim()))


def bond_state(j, Q) -> np.ndarray:
    """Coupled state ``|Q, 0>`` of two spin-``j`` particles, as a vector of length ``(2j+1)**2``."""
    j, Q = _h(j), _h(Q)
    if Q.twice < 0 or Q.twice > 2 * j.twice or Q.twice % 2:
        raise DomainError(f"bond spin Q={Q} must be an integer in [0, 2j] for j={j}")
    n = j.dim()
    v = np.zeros(n * n)
    for a, m in enumerate(j.ms()):
        b = (j.twice + m.twice) // 2  # index of -m
        v[a * n + b] = cg(j, m, j, -m, Q, 0)
    return v


def heisenberg_poly(J, coeffs: Sequence[float], constant: float = 0.0) -> LocalOperator:
    """Two-site operator ``constant + sum_k coeffs[k-1] * (J1 . J2)**k``."""
    J = _h(J)
    n = J.dim()
    ops = spin_operators(J)
    x = sum(np.kron(o.matrix, o.matrix) for o in ops).real
    out = constant * np.eye(n * n)
    power = np.eye(n * n)
    for c in coeffs:
        power = power @ x
        out = out + c * power
    return LocalOperator(out, (n, n))
