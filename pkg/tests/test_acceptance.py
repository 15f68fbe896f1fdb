"""Acceptance criteria, each run at its stated tolerance.

Every test prints (and records for the session summary) one ``PASS``/``FAIL``
line.  The L >= 5 values of the (D, d) = (6, 7) row need several GiB and minutes
per seed; set ``MPSPARENT_STRETCH=1`` to include them.
"""

import os
import time

import pytest

from mpsparent.intersect import dim_lower_bound
from mpsparent.scan import ScanConfig, read_jsonl, run_named_checks, run_table, table_csv

TABLE = {
    (3, 4): [9, 9],
    (4, 5): [16, 35, 31, 16],
    (4, 6): [16, 16],
    (5, 6): [25, 84, 229, 450, 181, 25],
    (5, 7): [25, 25],
    (5, 8): [25, 25],
    (6, 7): [36, 161, 659, 2520, 9073, 30751],
    (6, 8): [36, 64, 36],
    (6, 9): [36, 36],
}
STRETCH = os.environ.get("MPSPARENT_STRETCH") == "1"


def report(criteria, n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    criteria.append(line)
    return ok


def suite(name, tmp_path, **kw):
    cfg = ScanConfig(task="suite", suite=name, out=str(tmp_path / f"{name}.jsonl"),
                     timings=False, **kw)
    return run_named_checks(cfg)


def failed(records):
    return [f"{r['suite']}/{r['check']}" for r in records if r["status"] != "ok"]


@pytest.fixture(scope="module")
def table_records(tmp_path_factory):
    rows = []
    for (D, d), vals in TABLE.items():
        L_max = 1 + len(vals)
        if (D, d) == (6, 7) and not STRETCH:
            L_max = 4
        rows.append([D, d, L_max])
    out = tmp_path_factory.mktemp("table") / "table.jsonl"
    cfg = ScanConfig(task="table", rows=rows, seeds=3, seed=0, timings=False, out=str(out),
                     memory_budget=(16 if STRETCH else 4) * 2**30)
    t0 = time.perf_counter()
    recs = run_table(cfg)
    return recs, out, time.perf_counter() - t0


def test_c1_table(criteria, table_records):
    recs, _, wall = table_records
    got = {}
    for r in recs:
        if r["status"] == "ok":
            got.setdefault((r["D"], r["d"]), {}).setdefault(r["L"], set()).add(r["dim"])
    bad = []
    for (D, d), vals in TABLE.items():
        for L, v in enumerate(vals, start=2):
            if (D, d) == (6, 7) and L >= 5 and not STRETCH:
                continue
            seen = got.get((D, d), {}).get(L, set())
            n_seeds = sum(1 for r in recs if r["status"] == "ok" and (r["D"], r["d"], r["L"]) == (D, d, L))
            if seen != {v} or n_seeds < 3:
                bad.append(f"(D={D},d={d},L={L}): got {sorted(seen)} from {n_seeds} seeds, want {v}")
    print(table_csv(recs))
    extra = "" if STRETCH else "; (6,7) L>=5 not run (stretch)"
    ok = report(criteria, 1, not bad,
                f"Table 1 integers, 3 seeds each, rank_tol 1e-10, angle_tol 1e-8 ({wall:.0f} s){extra}"
                + (f"; mismatches: {bad}" if bad else ""))
    assert ok


def test_c2_aklt(criteria, tmp_path):
    recs = suite("aklt", tmp_path)
    by = {r["check"]: r for r in recs}
    ok = report(criteria, 2, not failed(recs),
                f"AKLT: |h2 - P_2|max = {by['projector']['max_deviation']:.1e}, Int(2,3) "
                f"{by['int23']['passed']}, PBC N=6 kernel {by['pbc6']['kernel_dim']} "
                f"(residual {by['pbc6']['overlap_residual']:.1e}); failed: {failed(recs)}")
    assert ok


def test_c3_exceptional(criteria, tmp_path):
    recs = suite("exceptional-spin2", tmp_path) + suite("exceptional-scan", tmp_path)
    by = {r["check"]: r for r in recs}
    detail = (f"w2/max|w| = {by['weights']['w2_relative']:.1e}, L0 = {by['spaces']['L0']}, "
              f"dim S2,S3 = {by['spaces']['dim_S2']},{by['spaces']['dim_S3']}, "
              f"I_N dims {by['intersection']['dims']}, PBC N=5 kernel {by['pbc5']['kernel_dim']}, "
              f"lambda* - 60/53 = {by['psd-threshold']['error']:.1e}, "
              f"exceptional j<=5: {[tuple(x[:2]) for x in by['scan']['found']]}; failed: {failed(recs)}")
    ok = report(criteria, 3, not failed(recs), detail)
    assert ok


def test_c4_lower_bound(criteria, tmp_path, table_records):
    recs = suite("lower-bound", tmp_path)
    table, _, _ = table_records
    violations = [r["key"] for r in table if r["status"] == "ok"
                  and r["dim"] < dim_lower_bound(r["d"], r["D"], r["L"])]
    inst = next(r for r in recs if r["check"] == "generic")["instances"]
    ok = report(criteria, 4, not failed(recs) and not violations,
                f"bound (5,4,3)=35, (6,5,3)=84; L=3 equality on {len(inst)} instances "
                f"with D<=8; bound violations in table: {len(violations)}; failed: {failed(recs)}")
    assert ok


def test_c5_fdet(criteria, tmp_path):
    recs = suite("fdet", tmp_path)
    by = {r["check"]: r for r in recs}
    n_rand = len(by["random"]["instances"])
    n_deg = len({x["seed"] for x in by["degenerate"]["instances"]})
    agree = sum(x["agree"] for r in recs for x in r["instances"])
    total = sum(len(r["instances"]) for r in recs)
    ok = report(criteria, 5, not failed(recs) and n_rand >= 20 and n_deg >= 5,
                f"f_det zero <=> Int fails: {agree}/{total} agree "
                f"({n_rand} random, {n_deg} degenerate tensors)")
    assert ok


def test_c6_oracle(criteria, tmp_path):
    recs = suite("oracle", tmp_path)
    by = {r["check"]: r for r in recs}
    worst = max(x["max_angle"] for x in by["brute-force"]["instances"])
    ok = report(criteria, 6, not failed(recs),
                f"iterative vs brute force on {len(by['brute-force']['instances'])} cases, "
                f"max angle {worst:.1e}; sector vs dense AKLT L=3,4: {by['sector']['passed']}")
    assert ok


def test_c7_u1(criteria, tmp_path):
    t0 = time.perf_counter()
    recs = suite("u1", tmp_path)
    wall = time.perf_counter() - t0
    dims = {r["check"]: r["dims"] for r in recs}
    ok = report(criteria, 7, not failed(recs) and wall < 1800,
                f"sector-blocked Int(2,5) for (7/2,5,4) and Int(2,4) for (4,6,4): {dims} in {wall:.1f} s")
    assert ok


def test_c8_degenerate(criteria, tmp_path):
    recs = suite("degenerate", tmp_path)
    inst = recs[0]["instances"]
    ok = report(criteria, 8, not failed(recs),
                f"L0 {[x['L0'] for x in inst]}, witness counts "
                f"{[x['witness_counts'] for x in inst]}, "
                f"max |H W|/|W| {max(x['max_relative_residual'] for x in inst):.1e}")
    assert ok


def test_c9_reproducible(criteria, tmp_path, table_records):
    _, first, _ = table_records
    same = []
    for name in ("aklt", "exceptional-spin2", "lower-bound", "degenerate"):
        a = ScanConfig(task="suite", suite=name, out=str(tmp_path / "a.jsonl"), timings=False)
        b = ScanConfig(task="suite", suite=name, out=str(tmp_path / "b.jsonl"), timings=False,
                       workers=2)
        run_named_checks(a)
        run_named_checks(b)
        same.append((tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes())
    rows = [[4, 5, 5], [5, 6, 5]]
    t1 = ScanConfig(task="table", rows=rows, seeds=3, timings=False, out=str(tmp_path / "t1.jsonl"))
    t2 = ScanConfig(task="table", rows=rows, seeds=3, timings=False, out=str(tmp_path / "t2.jsonl"),
                    workers=2)
    run_table(t1)
    run_table(t2)
    same.append((tmp_path / "t1.jsonl").read_bytes() == (tmp_path / "t2.jsonl").read_bytes())
    # the full table run above and a fresh rerun of a part of it agree record for record
    head = {r["key"]: r for r in read_jsonl(first) if r["D"] in (4, 5) and r["d"] in (5, 6)}
    rerun = {r["key"]: r for r in read_jsonl(tmp_path / "t1.jsonl")}
    same.append(all(head[k]["dim"] == r["dim"] for k, r in rerun.items() if k in head))
    ok = report(criteria, 9, all(same),
                f"byte-identical JSONL on rerun (4 suites + table, 1 vs 2 workers): {same}")
    assert ok
