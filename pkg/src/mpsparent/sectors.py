"""U(1)-sector blocked version of the iterative intersection.

With integer charges ``c_i`` on the physical states and ``q_a`` on the bond
states such that ``(A^i)_{ab} != 0`` only if ``q_a - q_b = c_i``, every MPS
vector has a definite total charge and the window terms conserve it.  Each
intersection space is then a direct sum over total-charge sectors, and every
vector is stored only on the configurations of its sector.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import budget
from .errors import ChargeError, DomainError
from .intersect import (
    DEFAULT_ANGLE_TOL,
    IntersectionReport,
    LevelInfo,
    _kernel_from_gram,
    _record_level,
)
from .mps import DEFAULT_RANK_TOL, MpsTensor, Subspace, _left_svd, blocking_map

log = logging.getLogger(__name__)


def check_charges(A: MpsTensor, charges, bond_charges, tol: float = 1e-12) -> None:
    """Raise :class:`ChargeError` listing every ``(i, a, b)`` that breaks charge conservation."""
    charges = np.asarray(charges, dtype=int)
    bond = np.asarray(bond_charges, dtype=int)
    if charges.shape != (A.d,) or bond.shape != (A.D,):
        raise DomainError(f"need {A.d} physical and {A.D} bond charges")
    big = np.abs(A.entries) > tol * np.max(np.abs(A.entries))
    allowed = (bond[None, :, None] - bond[None, None, :]) == charges[:, None, None]
    bad = np.argwhere(big & ~allowed)
    if bad.size:
        listed = [tuple(int(x) for x in row) for row in bad[:20]]
        raise ChargeError(f"{len(bad)} entries violate the charge rule, e.g. (i, a, b) = {listed}",
                          [tuple(int(x) for x in row) for row in bad])


def _config_charges(charges: np.ndarray, n_sites: int) -> np.ndarray:
    """Total charge of every big-endian configuration of ``n_sites`` sites."""
    tot = np.zeros(1, dtype=np.int64)
    for _ in range(n_sites):
        tot = (tot[:, None] + charges[None, :]).reshape(-1)
    return tot


def _sectors(charges: np.ndarray, n_sites: int) -> dict[int, np.ndarray]:
    tot = _config_charges(charges, n_sites)
    order = np.argsort(tot, kind="stable")
    keys, starts = np.unique(tot[order], return_index=True)
    bounds = list(starts[1:]) + [tot.size]
    return {int(k): np.sort(order[s:e]) for k, s, e in zip(keys, starts, bounds)}


@dataclass(frozen=True, eq=False)
class BlockedSubspace:
    """Direct sum of per-sector subspaces; ``blocks[q] = (configs, basis)``."""

    ambient_dim: int
    blocks: dict

    @property
    def dim(self) -> int:
        return sum(b.shape[1] for _, b in self.blocks.values())

    def sector_dims(self) -> dict:
        return {q: b.shape[1] for q, (_, b) in sorted(self.blocks.items()) if b.shape[1]}

    def to_subspace(self, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
        budget.require(budget.complex_bytes(self.ambient_dim, self.dim), "dense embedding")
        out = np.zeros((self.ambient_dim, self.dim), complex)
        col = 0
        for q in sorted(self.blocks):
            cfg, b = self.blocks[q]
            out[cfg, col:col + b.shape[1]] = b
            col += b.shape[1]
        return Subspace(self.ambient_dim, out, rank_tol)


def _initial_blocks(A, ell, charges, bond, rank_tol):
    P = blocking_map(A, ell)
    col_charge = (bond[None, :] - bond[:, None]).reshape(-1)  # column b*D + a carries q_a - q_b
    sectors = _sectors(charges, ell)
    parts = {}
    for q, cfg in sectors.items():
        cols = np.flatnonzero(col_charge == q)
        parts[q] = (cfg, P[np.ix_(cfg, cols)])
    smax = max((np.linalg.norm(m, 2) for _, m in parts.values() if m.size), default=0.0)
    blocks, kept, dropped = {}, [], []
    for q, (cfg, m) in parts.items():
        if m.size == 0 or smax == 0:
            blocks[q] = (cfg, np.zeros((cfg.size, 0), complex))
            continue
        u, s = _left_svd(m)
        k = int(np.sum(s > rank_tol * smax))
        kept += [float(x) for x in s[:k] / smax]
        dropped += [float(x) for x in s[k:] / smax]
        blocks[q] = (cfg, u[:, :k])
    gap = (min(kept) if kept else None, max(dropped) if dropped else None)
    return BlockedSubspace(A.d**ell, blocks), gap


def sector_blocked_intersection(
    A: MpsTensor,
    charges,
    bond_charges,
    ell: int,
    L: int,
    rank_tol: float = DEFAULT_RANK_TOL,
    angle_tol: float = DEFAULT_ANGLE_TOL,
    model=None,
    timings: bool = True,
) -> tuple[BlockedSubspace, IntersectionReport]:
    """Charge-blocked joint kernel on ``L`` sites; same dimensions as the dense path."""
    charges = np.asarray(charges, dtype=np.int64)
    bond = np.asarray(bond_charges, dtype=np.int64)
    check_charges(A, charges, bond)
    if L < ell:
        raise DomainError("L must be >= ell")
    d = A.d
    t0 = time.perf_counter()
    report = IntersectionReport(d, A.D, ell, model=model, rank_tol=rank_tol, angle_tol=angle_tol)

    cur, gap0 = _initial_blocks(A, ell, charges, bond, rank_tol)
    # dense window term from the direct sum of the sector bases of S_ell
    S_dense = cur.to_subspace(rank_tol)
    h = np.eye(d**ell) - S_dense.basis @ S_dense.basis.conj().T
    win_charge = _config_charges(charges, ell)
    win_by_charge = {}
    for c in np.unique(win_charge):
        w = np.flatnonzero(win_charge == c)
        win_by_charge[int(c)] = (w, h[np.ix_(w, w)])
    _record_level(report, A, cur, LevelInfo(ell, cur.dim, gap0), rank_tol)

    try:
        for k in range(ell, L):
            with budget.track_peak() as peak:
                nxt, info = _grow(cur, k, d, ell, charges, win_by_charge, angle_tol)
            info.peak_bytes = peak[0]
            _record_level(report, A, nxt, info, rank_tol)
            log.info("sector I_%d: dim %d, sectors %s", k + 1, nxt.dim, nxt.sector_dims())
            cur = nxt
    except budget.ResourceLimitError as exc:
        report.status = "resource-limit"
        report.error = str(exc)
        report.peak_memory = max(report.peak_memory, exc.requested)
    if timings:
        report.wall_time = round(time.perf_counter() - t0, 3)
    return cur, report


def _grow(cur: BlockedSubspace, k: int, d: int, ell: int, charges, win_by_charge, angle_tol):
    new_sectors = _sectors(charges, k + 1)
    pre_sectors = _sectors(charges, k + 1 - ell)
    dl = d**ell
    blocks = {}
    worst_keep, best_drop, border = None, None, False
    for Q, cfg_Q in new_sectors.items():
        # candidates u_a (x) e_i with charge(u_a) + c_i = Q
        groups = []
        for i in range(d):
            q = Q - int(charges[i])
            if q in cur.blocks and cur.blocks[q][1].shape[1]:
                groups.append((i, q))
        if not groups:
            blocks[Q] = (cfg_Q, np.zeros((cfg_Q.size, 0), complex))
            continue
        ncand = sum(cur.blocks[q][1].shape[1] for _, q in groups)
        budget.require(2 * budget.complex_bytes(cfg_Q.size, ncand) + budget.complex_bytes(ncand, ncand),
                       f"sector {Q} candidates")
        V = np.zeros((cfg_Q.size, ncand), complex)
        col = 0
        for i, q in groups:
            cfg_q, U = cur.blocks[q]
            rows = np.searchsorted(cfg_Q, cfg_q * d + i)
            V[rows, col:col + U.shape[1]] = U
            col += U.shape[1]
        G = np.zeros((ncand, ncand), complex)
        for p, cfg_p in pre_sectors.items():
            wc = Q - p
            if wc not in win_by_charge:
                continue
            w, hw = win_by_charge[wc]
            pos = np.searchsorted(cfg_Q, (cfg_p[:, None] * dl + w[None, :]).reshape(-1))
            Z = V[pos].reshape(cfg_p.size, w.size, ncand)
            hZ = np.einsum("vw,xwc->xvc", hw, Z)
            G += Z.reshape(-1, ncand).conj().T @ hZ.reshape(-1, ncand)
        G = (G + G.conj().T) / 2
        C, gap, b = _kernel_from_gram(G, angle_tol)
        border = border or b
        if gap[0] is not None:
            worst_keep = gap[0] if worst_keep is None else max(worst_keep, gap[0])
        if gap[1] is not None:
            best_drop = gap[1] if best_drop is None else min(best_drop, gap[1])
        blocks[Q] = (cfg_Q, V @ C)
    nxt = BlockedSubspace(d ** (k + 1), blocks)
    return nxt, LevelInfo(k + 1, nxt.dim, (worst_keep, best_drop), border, "sector")
