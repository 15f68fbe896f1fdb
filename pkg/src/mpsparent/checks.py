"""Named check suites.

Each check is a function ``fn(config) -> dict`` returning at least ``passed``
and the measured values with their tolerances.  Checks are independent tasks so
that a suite can be resumed or spread over workers.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, PreconditionError
from .intersect import (
    brute_force_intersection,
    dim_lower_bound,
    intersection_space,
    principal_angles,
    transitivity_check,
)
from .models import (
    AkltSpec,
    aklt_tensor,
    degenerate_family,
    find_exceptional,
    generalized_aklt,
    psd_threshold,
    spin2_family,
    weight_vector,
)
from .mps import Subspace, injectivity_length, mps_space, random_mps, state_vector
from .parent import apply_pbc_hamiltonian, f_det, parent_term, pbc_kernel
from .sectors import sector_blocked_intersection
from .spinalg import total_spin_projector

AKLT_CHARGES = ([2, 0, -2], [1, -1])
EXCEPTIONAL = AkltSpec("3/2", 2)


def _seed(config, *key):
    from .scan import derive_seed

    return derive_seed(config.seed, *key)


def _kernel_check(A, ell, L, config, expect_holds=True, model=None):
    _, rep = intersection_space(A, ell, L, config.rank_tol, config.angle_tol, model=model,
                                timings=False)
    dims = dict(rep.dims)
    return {
        "passed": rep.status == "ok" and rep.holds_at(L) == expect_holds,
        "dims": [list(x) for x in rep.dims],
        "mps_dims": [list(x) for x in rep.mps_dims],
        "dim": dims.get(L),
        "borderline": rep.borderline,
        "gaps": [list(g) for g in rep.gaps],
    }


def _pbc(A, N, ell=2, rank_tol=1e-10):
    term = parent_term(A, ell, rank_tol)
    K = pbc_kernel(term, A, N)
    psi = state_vector(A, N)
    psi = psi / np.linalg.norm(psi)
    residual = float(np.linalg.norm(psi - K.basis @ (K.basis.conj().T @ psi))) if K.dim else 1.0
    return K.dim, residual


# --- aklt --------------------------------------------------------------------


def aklt_projector(config):
    h = parent_term(aklt_tensor(), 2, config.rank_tol).matrix
    dev = float(np.max(np.abs(h - total_spin_projector(1, 1, 2).matrix)))
    return {"passed": dev <= 1e-10, "max_deviation": dev, "tolerance": 1e-10}


def aklt_injectivity(config):
    L0 = injectivity_length(aklt_tensor(), 8, config.rank_tol)
    return {"passed": L0 == 2, "L0": L0, "expected": 2}


def aklt_int23(config):
    return _kernel_check(aklt_tensor(), 2, 3, config)


def aklt_pbc6(config):
    dim, res = _pbc(aklt_tensor(), 6)
    return {"passed": dim == 1 and res < 1e-9, "kernel_dim": dim, "overlap_residual": res,
            "tolerance": 1e-9}


def aklt_gauge(config):
    S1 = mps_space(aklt_tensor(), 2, config.rank_tol)
    S2 = mps_space(generalized_aklt(AkltSpec("1/2", 1)), 2, config.rank_tol)
    ang = float(np.max(principal_angles(S1, S2))) if S1.dim == S2.dim else math.inf
    return {"passed": ang < 1e-10, "max_angle": ang, "tolerance": 1e-10}


def aklt_transitivity(config):
    ok, v = transitivity_check(aklt_tensor(), 2, 3, 4, config.rank_tol, config.angle_tol)
    return {"passed": ok and all(v.values()),
            "verdicts": {f"Int({a},{b})": x for (a, b), x in v.items()}}


# --- exceptional (3/2, 2) ------------------------------------------------------


def exc_weights(config):
    wv = weight_vector(EXCEPTIONAL)
    top = max(abs(w) for _, w in wv.weights)
    w2 = wv.weight(2)
    return {"passed": abs(w2) < 1e-12 * top and [str(s) for s in wv.zero_flags] == ["2"],
            "weights": wv.as_dict(), "w2_relative": abs(w2) / top, "tolerance": 1e-12}


def exc_spaces(config):
    A = generalized_aklt(EXCEPTIONAL)
    L0 = injectivity_length(A, 8, config.rank_tol)
    s2 = mps_space(A, 2, config.rank_tol).dim
    s3 = mps_space(A, 3, config.rank_tol).dim
    return {"passed": (L0, s2, s3) == (4, 11, 15), "L0": L0, "dim_S2": s2, "dim_S3": s3,
            "expected": [4, 11, 15]}


def exc_intersection(config):
    out = _kernel_check(generalized_aklt(EXCEPTIONAL), 2, 6, config, model=str(EXCEPTIONAL))
    ok = all(a == b for (L, a), (_, b) in zip(out["dims"], out["mps_dims"]) if L >= 4)
    out["passed"] = out["passed"] and ok
    return out


def exc_pbc5(config):
    dim, res = _pbc(generalized_aklt(EXCEPTIONAL), 5)
    return {"passed": dim == 1 and res < 1e-9, "kernel_dim": dim, "overlap_residual": res}


def exc_spin2_kernels(config):
    S2 = mps_space(generalized_aklt(EXCEPTIONAL), 2, config.rank_tol)
    angles = {}
    for lam in (0.0, 0.5, 1.0):
        op, rep = spin2_family(lam)
        w, v = np.linalg.eigh(op.matrix)
        K = Subspace(25, v[:, np.abs(w) < 1e-9])
        angles[str(lam)] = float(np.max(principal_angles(S2, K))) if K.dim == S2.dim else math.inf
    return {"passed": all(a < 1e-9 for a in angles.values()), "max_angles": angles,
            "tolerance": 1e-9}


def exc_psd_threshold(config):
    lam = psd_threshold()
    err = abs(lam - 60 / 53)
    return {"passed": err < 1e-6, "lambda_star": lam, "error": err, "tolerance": 1e-6}


# --- exceptional scan ------------------------------------------------------------


def scan_exceptional(config):
    found = find_exceptional(5)
    pairs = [[str(j), str(J), [str(S) for S in zs]] for j, J, zs in found]
    need = {("3/2", "2"), ("3", "5"), ("5", "9")}
    return {"passed": need <= {(p[0], p[1]) for p in pairs}, "found": pairs}


def scan_exceptional_small(config):
    found = find_exceptional(1)
    return {"passed": not found, "found": [[str(j), str(J)] for j, J, _ in found]}


def _exc_int24(spec):
    def check(config):
        return _kernel_check(generalized_aklt(AkltSpec.parse(spec)), 2, 4, config, model=spec)
    return check


# --- u1 ------------------------------------------------------------------------


def _u1(spec_text, L):
    def check(config):
        spec = AkltSpec.parse(spec_text)
        A = generalized_aklt(spec)
        B, rep = sector_blocked_intersection(A, *spec.charges(), 2, L, config.rank_tol,
                                             config.angle_tol, model=spec_text, timings=False)
        return {"passed": rep.status == "ok" and rep.holds_at(L) and B.dim == A.D**2,
                "dims": [list(x) for x in rep.dims], "mps_dims": [list(x) for x in rep.mps_dims],
                "sector_dims": {str(k): v for k, v in B.sector_dims().items()},
                "borderline": rep.borderline}
    return check


# --- f_det --------------------------------------------------------------------

FDET_CASES = [
    (3, 2, 3), (3, 2, 4), (4, 3, 3), (4, 3, 4), (5, 4, 3), (5, 4, 4), (5, 4, 5),
    (6, 5, 3), (6, 5, 4), (7, 5, 3), (8, 5, 3), (7, 6, 3), (8, 6, 3),
]


def _fdet_pair(A, L, config):
    f = f_det(A, 2, L, config.rank_tol)
    _, rep = intersection_space(A, 2, L, config.rank_tol, config.angle_tol, timings=False)
    holds = rep.holds_at(L)
    return {"f_zero": f.zero, "min_eig": f.min_eig, "int_holds": holds,
            "agree": (not f.zero) == holds, "borderline": rep.borderline}


def fdet_random(config):
    rows = []
    for d, D, L in FDET_CASES:
        for k in range(2):
            seed = _seed(config, D, d, L, k)
            r = _fdet_pair(random_mps(d, D, seed), L, config)
            rows.append({"d": d, "D": D, "L": L, "seed": seed, **r})
    return {"passed": len(rows) >= 20 and all(r["agree"] for r in rows), "instances": rows,
            "borderline": any(r["borderline"] for r in rows)}


def fdet_degenerate(config):
    rows = []
    for k in range(5):
        seed = _seed(config, 3, 3, 99, k)
        fam = degenerate_family(3, 3, 1, 1, seed, N_max=4)
        for L in (3, 4):
            r = _fdet_pair(fam.tensor, L, config)
            rows.append({"L": L, "seed": seed, **r})
    return {"passed": all(r["agree"] and r["f_zero"] for r in rows), "instances": rows}


# --- degenerate ---------------------------------------------------------------


def degenerate_suite(config):
    rows = []
    ok = True
    for k in range(3):
        seed = _seed(config, 3, 3, 7, k)
        fam = degenerate_family(3, 3, 1, 1, seed, N_max=6)
        A = fam.tensor
        L0 = injectivity_length(A, 8, config.rank_tol)
        counts = {N: fam.witness_count(N) for N in range(3, 7)}
        term = parent_term(A, 2, config.rank_tol)
        worst = 0.0
        for N in range(3, 7):
            W = fam.witnesses[N]
            # the witnesses are trace states, so all cyclic windows apply
            HW = apply_pbc_hamiltonian(term, N, W)
            worst = max(worst, float(np.linalg.norm(HW) / np.linalg.norm(W)))
        grow = counts[5] > counts[3] and counts[6] > counts[4]
        ok = ok and L0 == 2 and grow and worst < 1e-9
        rows.append({"seed": seed, "L0": L0, "witness_counts": {str(n): c for n, c in counts.items()},
                     "max_relative_residual": worst})
    return {"passed": ok, "instances": rows, "tolerance": 1e-9}


# --- oracle -------------------------------------------------------------------


def oracle_bruteforce(config):
    rows = []
    for d, D in ((3, 2), (4, 3)):
        for k in range(10):
            seed = _seed(config, D, d, 0, k)
            A = random_mps(d, D, seed)
            for L in (3, 4):
                I, rep = intersection_space(A, 2, L, config.rank_tol, config.angle_tol, timings=False)
                B = brute_force_intersection(A, 2, L, config.rank_tol)
                ang = float(np.max(principal_angles(I, B), initial=0.0)) if I.dim == B.dim else math.inf
                rows.append({"d": d, "D": D, "L": L, "seed": seed, "dim": I.dim,
                             "brute_dim": B.dim, "max_angle": ang})
    return {"passed": all(r["max_angle"] < 1e-8 for r in rows), "instances": rows,
            "tolerance": 1e-8}


def oracle_sector(config):
    A = aklt_tensor()
    rows = []
    for L in (3, 4):
        I, _ = intersection_space(A, 2, L, config.rank_tol, config.angle_tol, timings=False)
        B, _ = sector_blocked_intersection(A, *AKLT_CHARGES, 2, L, config.rank_tol,
                                           config.angle_tol, timings=False)
        Bs = B.to_subspace()
        ang = float(np.max(principal_angles(I, Bs), initial=0.0)) if I.dim == Bs.dim else math.inf
        rows.append({"L": L, "dense_dim": I.dim, "sector_dim": Bs.dim, "max_angle": ang})
    return {"passed": all(r["max_angle"] < 1e-8 for r in rows), "instances": rows}


# --- lower bound --------------------------------------------------------------


def bound_table(config):
    vals = {"5,4,3": dim_lower_bound(5, 4, 3), "6,5,3": dim_lower_bound(6, 5, 3)}
    return {"passed": vals == {"5,4,3": 35, "6,5,3": 84}, "values": vals}


def bound_generic(config):
    rows = []
    for D in range(3, 9):
        for d in range(D + 1, 2 * D - 1):
            for k in range(3):
                seed = _seed(config, D, d, 3, k)
                _, rep = intersection_space(random_mps(d, D, seed), 2, 3, config.rank_tol,
                                            config.angle_tol, timings=False)
                dims = dict(rep.dims)
                expect = max(dim_lower_bound(d, D, 3), D * D)
                ok_bound = all(v >= dim_lower_bound(d, D, L) for L, v in dims.items())
                rows.append({"d": d, "D": D, "seed": seed, "dim": dims[3], "expected": expect,
                             "equal": dims[3] == expect, "bound_ok": ok_bound})
    return {"passed": all(r["equal"] and r["bound_ok"] for r in rows), "instances": rows}


SUITES = {
    "aklt": {
        "projector": aklt_projector,
        "injectivity": aklt_injectivity,
        "int23": aklt_int23,
        "pbc6": aklt_pbc6,
        "gauge": aklt_gauge,
        "transitivity": aklt_transitivity,
    },
    "exceptional-spin2": {
        "weights": exc_weights,
        "spaces": exc_spaces,
        "intersection": exc_intersection,
        "pbc5": exc_pbc5,
        "spin2-kernels": exc_spin2_kernels,
        "psd-threshold": exc_psd_threshold,
    },
    "exceptional-scan": {
        "scan": scan_exceptional,
        "scan-small": scan_exceptional_small,
        "int24-3-5": _exc_int24("j=3 J=5 Q=0"),
        "int24-5-9": _exc_int24("j=5 J=9 Q=0"),
    },
    "u1": {
        "int25-7/2-5-4": _u1("j=7/2 J=5 Q=4", 5),
        "int24-4-6-4": _u1("j=4 J=6 Q=4", 4),
    },
    "fdet": {"random": fdet_random, "degenerate": fdet_degenerate},
    "degenerate": {"witnesses": degenerate_suite},
    "oracle": {"brute-force": oracle_bruteforce, "sector": oracle_sector},
    "lower-bound": {"table": bound_table, "generic": bound_generic},
}


def get_suite(name: str) -> dict:
    if name not in SUITES:
        raise DomainError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name]


def run_check(suite: str, check: str, config) -> dict:
    fn = get_suite(suite)[check]
    try:
        return fn(config)
    except PreconditionError as exc:
        return {"passed": False, "error": str(exc)}
