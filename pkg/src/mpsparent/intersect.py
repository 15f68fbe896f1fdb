"""Joint kernels of translated parent terms and the intersection property.

The ground space of the open chain ``H_L = sum_i h_i`` is grown one site at a
time::

    I_ell = S_ell,   I_{k+1} = (I_k (x) C^d)  intersected with  (C^d)^{k+1-ell} (x) S_ell

The candidate space ``I_k (x) C^d`` has the orthonormal basis ``u_a (x) e_i``.
Only the window on the last ``ell`` sites is new, so the intersection is the
null space of the Gram matrix ``G = <u_a e_i | h_last | u_b e_j>``, which has
size ``(m d)^2`` with ``m = dim I_k``.  The huge basis of the second intersectand
is never formed.  ``G`` is assembled in one of two ways, whichever needs less
memory:

``gram``
    contract the overlap ``R[(a,s),(b,t)] = sum_x conj(u_a[x,s]) u_b[x,t]`` over
    the untouched prefix ``x`` with the dense window term ``h``;
``projector``
    project every candidate onto the basis of ``S_ell`` window by window,
    ``K[x, c, (a,i)]``, and use ``G = 1 - K^dagger K``.

Both accumulate over blocks of prefix rows in a fixed order, so results do not
depend on the block size beyond rounding.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np
import scipy.linalg

from . import budget
from .errors import DomainError
from .mps import DEFAULT_RANK_TOL, MpsTensor, Subspace, gram_rank, mps_space

log = logging.getLogger(__name__)

DEFAULT_ANGLE_TOL = 1e-8
BORDERLINE_FACTOR = 10.0


def one_minus_cos(eigs: np.ndarray) -> np.ndarray:
    """For ``eig = ||h v||^2 = sin^2 theta`` return ``1 - cos theta`` without cancellation."""
    lam = np.clip(eigs, 0.0, 1.0)
    return lam / (1.0 + np.sqrt(1.0 - lam))


def _is_borderline(values: np.ndarray, tol: float) -> bool:
    v = np.asarray(values)
    return bool(np.any((v > tol / BORDERLINE_FACTOR) & (v < tol * BORDERLINE_FACTOR)))


def principal_angles(U: Subspace, V: Subspace) -> np.ndarray:
    """Principal angles (ascending) between two subspaces.

    Small angles come from sines, large ones from cosines, which keeps both ends
    accurate to machine precision.
    """
    if U.ambient_dim != V.ambient_dim:
        raise DomainError("ambient dimensions differ")
    if U.dim < V.dim:
        U, V = V, U
    if V.dim == 0:
        return np.zeros(0)
    cos = np.clip(scipy.linalg.svdvals(U.basis.conj().T @ V.basis), 0, 1)
    res = V.basis - U.basis @ (U.basis.conj().T @ V.basis)
    sin = np.sort(np.clip(scipy.linalg.svdvals(res), 0, 1))
    cos = np.sort(cos)[::-1]
    return np.where(sin < np.sqrt(0.5), np.arcsin(sin), np.arccos(cos))


def same_span(U: Subspace, V: Subspace, tol: float = 1e-8) -> bool:
    return U.dim == V.dim and (U.dim == 0 or float(np.max(principal_angles(U, V))) < tol)


def intersect_subspaces(U: Subspace, V: Subspace, angle_tol: float = DEFAULT_ANGLE_TOL) -> Subspace:
    """``U`` intersected with ``V`` from the singular values of ``U^dagger V`` close to 1."""
    if U.ambient_dim != V.ambient_dim:
        raise DomainError(f"ambient dimensions differ: {U.ambient_dim} vs {V.ambient_dim}")
    n = U.ambient_dim
    if U.dim == 0 or V.dim == 0:
        return Subspace(n, np.zeros((n, 0), complex), angle_tol)
    _, s, zh = scipy.linalg.svd(U.basis.conj().T @ V.basis)
    k = int(np.sum(s > 1 - angle_tol))
    if k == 0:
        return Subspace(n, np.zeros((n, 0), complex), angle_tol, (None, float(1 - s[0])))
    vecs = V.basis @ zh[:k].conj().T
    q, _ = np.linalg.qr(vecs)
    gap = (float(1 - s[k - 1]), float(1 - s[k]) if k < s.size else None)
    return Subspace(n, q, angle_tol, gap)


def dim_lower_bound(d: int, D: int, L: int, ell: int = 2) -> int:
    """Parameter-counting bound ``d^L - (L-ell+1) (d^ell - D^2) d^(L-ell)`` (may be negative)."""
    if L < ell:
        raise DomainError("L must be >= ell")
    return d**L - (L - ell + 1) * (d**ell - D**2) * d ** (L - ell)


@dataclass
class LevelInfo:
    L: int
    dim: int
    gap: tuple = (None, None)
    borderline: bool = False
    route: str = "start"
    peak_bytes: int = 0


@dataclass
class IntersectionReport:
    d: int
    D: int
    ell: int
    dims: list = field(default_factory=list)
    mps_dims: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    model: object = None
    seed: object = None
    rank_tol: float = DEFAULT_RANK_TOL
    angle_tol: float = DEFAULT_ANGLE_TOL
    borderline: bool = False
    gaps: list = field(default_factory=list)
    routes: list = field(default_factory=list)
    sanity_ok: bool = True
    status: str = "ok"
    error: str | None = None
    peak_memory: int = 0
    wall_time: float | None = None

    def dim_at(self, L: int) -> int:
        return dict(self.dims)[L]

    def holds_at(self, L: int) -> bool:
        return dict(self.verdicts)[L]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dims"] = [list(x) for x in self.dims]
        out["mps_dims"] = [list(x) for x in self.mps_dims]
        out["verdicts"] = [list(x) for x in self.verdicts]
        out["gaps"] = [list(x) for x in self.gaps]
        return out


def _kernel_from_gram(G: np.ndarray, angle_tol: float):
    w, v = scipy.linalg.eigh(G, check_finite=False)
    crit = one_minus_cos(w)
    keep = crit < angle_tol
    k = int(keep.sum())
    gap = (float(crit[k - 1]) if k else None, float(crit[k]) if k < crit.size else None)
    return v[:, :k], gap, _is_borderline(crit, angle_tol)


def _block_rows(n_rows: int, row_bytes: int, share: float = 0.125) -> int:
    cap = max(1, int(budget.get_memory_budget() * share) // max(row_bytes, 1))
    return max(1, min(n_rows, cap))


def _gram_route(U: np.ndarray, m: int, d: int, ell: int, h: np.ndarray, block_rows=None):
    S = d ** (ell - 1)
    X = U.shape[0] // S
    mS, md = m * S, m * d
    budget.require(3 * budget.complex_bytes(mS, mS) + 2 * budget.complex_bytes(md, md), "gram route")
    U3 = U.reshape(X, S, m)
    nb = block_rows or _block_rows(X, 16 * mS)
    R = np.zeros((mS, mS), complex)
    for x0 in range(0, X, nb):
        W = np.ascontiguousarray(U3[x0:x0 + nb].transpose(0, 2, 1)).reshape(-1, mS)
        R += W.conj().T @ W
    R4 = R.reshape(m, S, m, S).transpose(0, 2, 1, 3).reshape(m * m, S * S)
    del R
    H2 = h.reshape(S, d, S, d).transpose(0, 2, 1, 3).reshape(S * S, d * d)
    G = (R4 @ H2).reshape(m, m, d, d)
    del R4
    G = G.transpose(0, 2, 1, 3).reshape(md, md)
    return (G + G.conj().T) / 2


def _projector_route(U: np.ndarray, m: int, d: int, ell: int, B: np.ndarray, block_rows=None):
    S = d ** (ell - 1)
    X = U.shape[0] // S
    r = B.shape[1]
    md = m * d
    budget.require(2 * budget.complex_bytes(md, md), "projector route")
    Bt = B.conj().reshape(S, d, r)
    U3 = U.reshape(X, S, m)
    nb = block_rows or _block_rows(X, 16 * r * md * 2)
    budget.require(2 * budget.complex_bytes(nb, r, md), "projector route block")
    Gp = np.zeros((md, md), complex)
    for x0 in range(0, X, nb):
        # K[x, c, a, i] = sum_s conj(B[(s,i), c]) U[x, s, a]
        K = np.einsum("xsa,sic->xcai", U3[x0:x0 + nb], Bt, optimize=True).reshape(-1, md)
        Gp += K.conj().T @ K
    G = np.eye(md) - Gp
    return (G + G.conj().T) / 2


def _route_costs(m: int, d: int, ell: int, X: int, r: int) -> dict:
    """``(flops, bytes)`` estimates for both ways of assembling ``G``."""
    S = d ** (ell - 1)
    mS, md = m * S, m * d
    return {
        "gram": (X * mS * mS + m * m * S * S * d * d,
                 16 * (3 * mS * mS + 2 * md * md + d ** (2 * ell))),
        "projector": (X * S * md * r + X * r * md * md,
                      16 * (2 * md * md + 2 * min(X, 64) * r * md)),
    }


def _choose_route(costs: dict) -> str:
    fits = {k: v for k, v in costs.items() if v[1] <= budget.get_memory_budget()}
    pool = fits or costs
    return min(pool, key=lambda k: pool[k][0] if fits else pool[k][1])


def iter_intersections(
    A: MpsTensor,
    ell: int,
    L_max: int,
    rank_tol: float = DEFAULT_RANK_TOL,
    angle_tol: float = DEFAULT_ANGLE_TOL,
    route: str = "auto",
    block_rows: int | None = None,
    start: Subspace | None = None,
) -> Iterator[tuple[Subspace, LevelInfo]]:
    """Yield ``(I_L, info)`` for ``L = ell, ..., L_max``."""
    if L_max < ell:
        raise DomainError("L_max must be >= ell")
    d = A.d
    S_ell = start if start is not None else mps_space(A, ell, rank_tol)
    B = S_ell.basis
    h = None
    yield S_ell, LevelInfo(ell, S_ell.dim, S_ell.gap, False, "start", 0)
    cur = S_ell
    for k in range(ell, L_max):
        m = cur.dim
        if m == 0:
            nxt = Subspace(d ** (k + 1), np.zeros((d ** (k + 1), 0), complex), angle_tol)
            yield nxt, LevelInfo(k + 1, 0)
            cur = nxt
            continue
        X = d ** (k - ell + 1)
        with budget.track_peak() as peak:
            costs = _route_costs(m, d, ell, X, B.shape[1])
            chosen = route if route != "auto" else _choose_route(costs)
            t0 = time.perf_counter()
            if chosen == "gram":
                if h is None:
                    budget.require(budget.complex_bytes(d**ell, d**ell), "window term")
                    h = np.eye(d**ell) - B @ B.conj().T
                G = _gram_route(cur.basis, m, d, ell, h, block_rows)
            elif chosen == "projector":
                G = _projector_route(cur.basis, m, d, ell, B, block_rows)
            else:
                raise DomainError(f"unknown route {route!r}")
            C, gap, border = _kernel_from_gram(G, angle_tol)
            del G
            m_new = C.shape[1]
            budget.require(budget.complex_bytes(d ** (k + 1), m_new) + budget.complex_bytes(d**k, d * m_new),
                           f"basis of I_{k + 1}")
            V = (cur.basis @ C.reshape(m, d * m_new)).reshape(d ** (k + 1), m_new)
            nxt = Subspace(d ** (k + 1), V, angle_tol, gap)
        log.info("I_%d: dim %d (route %s, %.2fs, gap %s)", k + 1, m_new, chosen,
                 time.perf_counter() - t0, gap)
        yield nxt, LevelInfo(k + 1, m_new, gap, border, chosen, peak[0])
        cur = nxt


def intersection_space(
    A: MpsTensor,
    ell: int,
    L: int,
    rank_tol: float = DEFAULT_RANK_TOL,
    angle_tol: float = DEFAULT_ANGLE_TOL,
    route: str = "auto",
    block_rows: int | None = None,
    model=None,
    seed=None,
    timings: bool = True,
) -> tuple[Subspace, IntersectionReport]:
    """Ground space of the open chain of ``ell``-site parent terms on ``L`` sites, with a report."""
    report = IntersectionReport(A.d, A.D, ell, model=model, seed=seed, rank_tol=rank_tol,
                                angle_tol=angle_tol)
    t0 = time.perf_counter()
    injective_ell = None
    last = None
    try:
        for sub, info in iter_intersections(A, ell, L, rank_tol, angle_tol, route, block_rows):
            _record_level(report, A, sub, info, rank_tol)
            if info.L == ell:
                injective_ell = sub.dim == A.D**2
            elif injective_ell and sub.dim < A.D**2:
                report.sanity_ok = False
                log.warning("dim I_%d = %d < D^2 for a tensor injective on %d sites", info.L, sub.dim, ell)
            last = sub
    except budget.ResourceLimitError as exc:
        report.status = "resource-limit"
        report.error = str(exc)
        report.peak_memory = max(report.peak_memory, exc.requested)
    if timings:
        report.wall_time = round(time.perf_counter() - t0, 3)
    return last, report


def _record_level(report: IntersectionReport, A: MpsTensor, sub: Subspace, info: LevelInfo, rank_tol):
    s_dim, _ = gram_rank(A, info.L, rank_tol)
    report.dims.append((info.L, sub.dim))
    report.mps_dims.append((info.L, s_dim))
    report.verdicts.append((info.L, sub.dim == s_dim))
    report.gaps.append((info.L, info.gap[0], info.gap[1]))
    report.routes.append((info.L, info.route))
    report.borderline = report.borderline or info.borderline
    report.peak_memory = max(report.peak_memory, info.peak_bytes)


def int_holds(A: MpsTensor, ell: int, L: int, rank_tol: float = DEFAULT_RANK_TOL,
              angle_tol: float = DEFAULT_ANGLE_TOL, **kw) -> bool:
    """Whether the joint kernel on ``L`` sites equals ``S_L``.

    For tensors injective on ``L`` sites this is ``dim = D^2``.
    """
    _, rep = intersection_space(A, ell, L, rank_tol, angle_tol, **kw)
    if rep.status != "ok":
        raise budget.ResourceLimitError(rep.error or "intersection", rep.peak_memory, budget.get_memory_budget())
    return rep.holds_at(L)


def transitivity_check(A: MpsTensor, ell: int, L: int, N: int, rank_tol: float = DEFAULT_RANK_TOL,
                       angle_tol: float = DEFAULT_ANGLE_TOL) -> tuple[bool, dict]:
    """Check ``Int(ell,L) and Int(L,N) => Int(ell,N)`` on computed verdicts."""
    if not ell <= L <= N:
        raise DomainError("need ell <= L <= N")
    v = {
        (ell, L): int_holds(A, ell, L, rank_tol, angle_tol),
        (L, N): int_holds(A, L, N, rank_tol, angle_tol),
        (ell, N): int_holds(A, ell, N, rank_tol, angle_tol),
    }
    consistent = not (v[(ell, L)] and v[(L, N)]) or v[(ell, N)]
    return consistent, v


def brute_force_intersection(A: MpsTensor, ell: int, L: int, rank_tol: float = DEFAULT_RANK_TOL,
                             size_cap: int = 4096) -> Subspace:
    """Null space of all stacked window constraints, from a single dense decomposition.

    Each window contributes the rows ``1 (x) C^dagger (x) 1`` with ``C`` an
    orthonormal basis of the complement of ``S_ell``.
    """
    d = A.d
    n = d**L
    if n > size_cap:
        raise budget.ResourceLimitError(f"brute force on d^{L}={n}", 16 * n * n, 16 * size_cap**2)
    S = mps_space(A, ell, rank_tol)
    if S.dim == S.ambient_dim:
        return Subspace.full(n)
    C = scipy.linalg.null_space(S.basis.conj().T)
    rows = []
    for i in range(L - ell + 1):
        rows.append(np.kron(np.kron(np.eye(d**i), C.conj().T), np.eye(d ** (L - ell - i))))
    M = np.vstack(rows)
    budget.require(budget.complex_bytes(*M.shape) + budget.complex_bytes(n, n), "brute force SVD")
    _, s, vh = scipy.linalg.svd(M, full_matrices=True)
    k = int(np.sum(s > rank_tol * s[0]))
    null = vh[k:].conj().T
    gap = (float(s[k - 1] / s[0]), float(s[k] / s[0]) if k < s.size else 0.0)
    return Subspace(n, null, rank_tol, gap)
