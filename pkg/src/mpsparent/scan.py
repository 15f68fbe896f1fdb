"""Seeded scans, JSONL persistence with resume, and Table-style CSV export.

Every output record is a pure function of the :class:`ScanConfig` (plus wall
times when ``timings`` is on).  Records are written one JSON object per line in
canonical task order, keyed so that ``--resume`` skips finished tasks.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import __version__, budget
from .intersect import DEFAULT_ANGLE_TOL, dim_lower_bound, intersection_space
from .mps import DEFAULT_RANK_TOL, random_mps

log = logging.getLogger(__name__)

TABLE_ROWS = [
    (3, 4, 3), (4, 5, 5), (4, 6, 3), (5, 6, 7), (5, 7, 3), (5, 8, 3),
    (6, 7, 4), (6, 8, 4), (6, 9, 3),
]

EXIT_PASS, EXIT_FAIL, EXIT_BORDERLINE, EXIT_RESOURCE = 0, 1, 2, 3

# fields that do not influence record content
_UNHASHED = {"out", "resume", "format", "workers"}


@dataclass
class ScanConfig:
    task: str = "table"
    rows: list = field(default_factory=lambda: [list(r) for r in TABLE_ROWS])
    d: int | None = None
    D: int | None = None
    ell: int = 2
    L_max: int | None = None
    N: int | None = None
    spec: str | None = None
    suite: str | None = None
    j_max: str = "5"
    seed: int = 0
    seeds: int = 3
    rank_tol: float = DEFAULT_RANK_TOL
    angle_tol: float = DEFAULT_ANGLE_TOL
    memory_budget: int = budget.DEFAULT_BUDGET
    timings: bool = True
    out: str | None = None
    resume: bool = False
    format: str = "json"
    workers: int = 1

    def hashed_fields(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if k not in _UNHASHED}

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, path) -> "ScanConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def derive_seed(master: int, *key: int) -> int:
    """Task-local 64-bit seed from the master seed and an integer task key."""
    ss = np.random.SeedSequence([int(master) % 2**63, *(int(k) for k in key)])
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    return obj


def make_record(config: ScanConfig, key: str, payload: dict, wall_time=None, peak_memory=0,
                status: str = "ok") -> dict:
    rec = {
        "key": key,
        "task": config.task,
        "config_hash": config.config_hash(),
        "version": __version__,
        "rank_tol": config.rank_tol,
        "angle_tol": config.angle_tol,
        "status": status,
        "peak_memory": int(peak_memory),
        "wall_time": wall_time if config.timings else None,
    }
    rec.update(payload)
    return clean(rec)


def dumps(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


# --- table -----------------------------------------------------------------


def table_tasks(config: ScanConfig) -> list[tuple]:
    tasks = []
    for D, d, L_max in config.rows:
        for k in range(config.seeds):
            tasks.append((int(D), int(d), int(L_max), k))
    return tasks


def table_keys(config: ScanConfig, task) -> list[str]:
    D, d, L_max, k = task
    return [f"table/D={D}/d={d}/k={k}/L={L}" for L in range(config.ell, L_max + 1)]


def run_table_task(config: ScanConfig, task) -> list[dict]:
    D, d, L_max, k = task
    seed = derive_seed(config.seed, D, d, k)
    A = random_mps(d, D, seed)
    _, rep = intersection_space(A, config.ell, L_max, config.rank_tol, config.angle_tol,
                                seed=seed, timings=config.timings)
    keys = table_keys(config, task)
    mps_dims = dict(rep.mps_dims)
    gaps = {g[0]: g[1:] for g in rep.gaps}
    records = []
    for L, dim in rep.dims:
        payload = {
            "D": D, "d": d, "ell": config.ell, "L": L, "seed": seed, "seed_index": k,
            "distribution": "complex-gaussian/philox",
            "dim": dim, "mps_dim": mps_dims[L], "int_holds": dim == mps_dims[L] == D * D,
            "lower_bound": dim_lower_bound(d, D, L, config.ell),
            "gap": list(gaps[L]),
        }
        records.append(make_record(config, keys[L - config.ell], payload,
                                   rep.wall_time if L == rep.dims[-1][0] else None, rep.peak_memory))
    if rep.status != "ok":
        L = rep.dims[-1][0] + 1 if rep.dims else config.ell
        payload = {"D": D, "d": d, "ell": config.ell, "L": L, "seed": seed, "seed_index": k,
                   "error": rep.error}
        records.append(make_record(config, keys[L - config.ell], payload, rep.wall_time,
                                   rep.peak_memory, status="resource-limit"))
    return records


# --- persistence -----------------------------------------------------------


def read_jsonl(path) -> list[dict]:
    p = Path(path)
    if not p.exists():
        return []
    out = []
    for line in p.read_text().splitlines():
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError:
            break
    return out


def _truncate_torn_tail(path: Path) -> None:
    """Drop a partially written last line left by an interrupted run."""
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        cut = data.rfind(b"\n") + 1
        path.write_bytes(data[:cut])


def _init_worker(nbytes: int) -> None:
    budget.set_memory_budget(nbytes)


def run_tasks(config: ScanConfig, tasks: list, keys_of: Callable, run_one: Callable,
              sink: io.TextIOBase | None = None) -> list[dict]:
    """Run tasks in canonical order, skipping finished ones when resuming.

    Returns all records for the configuration (previously stored ones included),
    in file order.
    """
    path = Path(config.out) if config.out else None
    existing: list[dict] = []
    if path is not None:
        if config.resume and path.exists():
            _truncate_torn_tail(path)
            existing = read_jsonl(path)
        else:
            path.write_text("")
    done = {r["key"] for r in existing}
    # a task stopped by the memory budget is finished; it would stop again
    limited = {r["key"] for r in existing if r.get("status") == "resource-limit"}
    pending = [t for t in tasks
               if not (set(keys_of(config, t)) <= done or set(keys_of(config, t)) & limited)]
    log.info("%d tasks, %d pending", len(tasks), len(pending))

    produced: list[dict] = []

    def emit(records):
        fresh = [r for r in records if r["key"] not in done]
        lines = "".join(dumps(r) + "\n" for r in fresh)
        if path is not None:
            with path.open("a") as fh:
                fh.write(lines)
                fh.flush()
        if sink is not None:
            sink.write(lines)
        done.update(r["key"] for r in fresh)
        produced.extend(fresh)

    with budget.memory_budget(config.memory_budget):
        if config.workers > 1 and len(pending) > 1:
            with concurrent.futures.ProcessPoolExecutor(
                config.workers, initializer=_init_worker, initargs=(config.memory_budget,)
            ) as pool:
                for recs in pool.map(run_one, [config] * len(pending), pending):
                    emit(recs)
        else:
            for t in pending:
                emit(run_one(config, t))
    return existing + produced


def run_table(config: ScanConfig, sink=None) -> list[dict]:
    """One record per ``(D, d, seed, L)``."""
    return run_tasks(config, table_tasks(config), table_keys, run_table_task, sink)


# --- export ----------------------------------------------------------------


def table_csv(records: Iterable[dict]) -> str:
    """Pivot table records to rows ``(D, d)`` and columns ``L``.

    A cell holds the dimension when all seeds agree, otherwise the distinct values
    joined by ``|``; resource-limited cells read ``mem``.
    """
    cells: dict = {}
    Ls = set()
    for r in records:
        if not r.get("key", "").startswith("table/"):
            continue
        D, d, L = r["D"], r["d"], r["L"]
        Ls.add(L)
        val = "mem" if r["status"] != "ok" else str(r["dim"])
        cells.setdefault((D, d), {}).setdefault(L, set()).add(val)
    cols = sorted(Ls)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["D", "d"] + [f"L={L}" for L in cols])
    for D, d in sorted(cells):
        row = [D, d]
        for L in cols:
            vals = cells[(D, d)].get(L)
            row.append("" if not vals else "|".join(sorted(vals, key=lambda s: (len(s), s))))
        w.writerow(row)
    return buf.getvalue()


def exit_code(records: Iterable[dict]) -> int:
    statuses = [r.get("status", "ok") for r in records]
    if any(s == "fail" for s in statuses):
        return EXIT_FAIL
    if any(s == "resource-limit" for s in statuses):
        return EXIT_RESOURCE
    if any(s == "borderline" or r.get("borderline") for s, r in zip(statuses, records)):
        return EXIT_BORDERLINE
    return EXIT_PASS


# --- named checks ----------------------------------------------------------


def check_tasks(config: ScanConfig) -> list[tuple]:
    from .checks import get_suite

    return [(config.suite, name) for name in get_suite(config.suite)]


def check_keys(config: ScanConfig, task) -> list[str]:
    return [f"suite/{task[0]}/{task[1]}"]


def run_check_task(config: ScanConfig, task) -> list[dict]:
    import time

    from .checks import run_check

    suite, name = task
    t0 = time.perf_counter()
    with budget.track_peak() as peak:
        try:
            result = run_check(suite, name, config)
            status = "ok" if result["passed"] else "fail"
        except budget.ResourceLimitError as exc:
            result, status = {"passed": False, "error": str(exc)}, "resource-limit"
    if status == "ok" and result.get("borderline"):
        status = "borderline"
    wall = round(time.perf_counter() - t0, 3)
    payload = {"suite": suite, "check": name, "seed": config.seed, **result}
    return [make_record(config, check_keys(config, task)[0], payload, wall, peak[0], status)]


def run_named_checks(config: ScanConfig, sink=None) -> list[dict]:
    """Run every check of ``config.suite``; one record per check."""
    return run_tasks(config, check_tasks(config), check_keys, run_check_task, sink)


def summary_lines(records: Iterable[dict]) -> list[str]:
    lines = []
    for r in records:
        if "check" in r:
            lines.append(f"{r['status'].upper():14s} {r['suite']}/{r['check']}")
    return lines


# --- single computations ---------------------------------------------------


def _model(config: ScanConfig):
    """Tensor named by ``config.spec`` or a seeded random tensor of size ``(d, D)``."""
    from .models import model_from_descriptor

    if config.spec:
        return model_from_descriptor(config.spec), None
    if config.d is None or config.D is None:
        raise ValueError("give --spec or both --d and --D")
    seed = derive_seed(config.seed, config.D, config.d, 0)
    return random_mps(config.d, config.D, seed), seed


def _int_check(config):
    A, seed = _model(config)
    L = config.L_max or 3
    _, rep = intersection_space(A, config.ell, L, config.rank_tol, config.angle_tol,
                                model=config.spec, seed=seed, timings=False)
    status = "resource-limit" if rep.status != "ok" else ("borderline" if rep.borderline else "ok")
    out = rep.to_dict()
    out.pop("wall_time")
    out["int_holds"] = rep.holds_at(L) if rep.status == "ok" else None
    return out, status, rep.peak_memory


def _fdet(config):
    from .parent import f_det

    A, seed = _model(config)
    L = config.L_max or 3
    f = f_det(A, config.ell, L, config.rank_tol)
    return {"seed": seed, "L": L, "zero": f.zero, "log_abs": f.log_abs, "min_eig": f.min_eig,
            "max_eig": f.max_eig}, "ok", 0


def _weights(config):
    from .models import AkltSpec, weight_vector

    wv = weight_vector(AkltSpec.parse(config.spec or "j=3/2 J=2 Q=0"))
    return {"spec": config.spec, "weights": wv.as_dict(), "zero_flags": [str(s) for s in wv.zero_flags],
            "residual": wv.residual, "margin": list(wv.margin)}, "ok", 0


def _exceptional_scan(config):
    from .models import find_exceptional

    found = find_exceptional(config.j_max)
    return {"j_max": config.j_max,
            "found": [[str(j), str(J), [str(S) for S in zs]] for j, J, zs in found]}, "ok", 0


def _degenerate(config):
    from .models import degenerate_family
    from .mps import injectivity_length

    d, D = config.d or 3, config.D or 3
    seed = derive_seed(config.seed, D, d, 7, 0)
    fam = degenerate_family(d, D, 1, 1, seed, N_max=config.N or 6)
    counts = {N: fam.witness_count(N) for N in sorted(fam.witnesses)}
    return {"d": d, "D": D, "seed": seed, "L0": injectivity_length(fam.tensor, 8, config.rank_tol),
            "witness_counts": counts, "tensor": fam.tensor.to_dict()}, "ok", 0


def _pbc_check(config):
    from .mps import state_vector
    from .parent import parent_term, pbc_kernel

    A, seed = _model(config)
    N = config.N or 6
    K = pbc_kernel(parent_term(A, config.ell, config.rank_tol), A, N)
    psi = state_vector(A, N)
    psi = psi / np.linalg.norm(psi)
    res = float(np.linalg.norm(psi - K.basis @ (K.basis.conj().T @ psi))) if K.dim else None
    return {"seed": seed, "N": N, "kernel_dim": K.dim, "gap": list(K.gap), "mps_residual": res}, "ok", 0


def _u1_check(config):
    from .models import AkltSpec, generalized_aklt
    from .sectors import sector_blocked_intersection

    spec = AkltSpec.parse(config.spec or "j=7/2 J=5 Q=4")
    L = config.L_max or 5
    B, rep = sector_blocked_intersection(generalized_aklt(spec), *spec.charges(), config.ell, L,
                                         config.rank_tol, config.angle_tol, model=str(spec),
                                         timings=False)
    status = "resource-limit" if rep.status != "ok" else ("borderline" if rep.borderline else "ok")
    out = rep.to_dict()
    out.pop("wall_time")
    out["int_holds"] = rep.holds_at(L) if rep.status == "ok" else None
    out["sector_dims"] = B.sector_dims()
    return out, status, rep.peak_memory


SINGLE = {
    "int-check": _int_check,
    "fdet": _fdet,
    "weights": _weights,
    "exceptional-scan": _exceptional_scan,
    "degenerate": _degenerate,
    "pbc-check": _pbc_check,
    "u1-check": _u1_check,
}


def single_keys(config: ScanConfig, task) -> list[str]:
    return [f"{task[0]}/{config.config_hash()}"]


def run_single_task(config: ScanConfig, task) -> list[dict]:
    import time

    t0 = time.perf_counter()
    with budget.track_peak() as planned:
        try:
            payload, status, peak = SINGLE[task[0]](config)
        except budget.ResourceLimitError as exc:
            payload, status, peak = {"error": str(exc)}, "resource-limit", exc.requested
    peak = max(peak, planned[0])
    return [make_record(config, single_keys(config, task)[0], payload,
                        round(time.perf_counter() - t0, 3), peak, status)]


def run(config: ScanConfig, sink=None) -> list[dict]:
    """Dispatch on ``config.task``."""
    if config.task == "table":
        return run_table(config, sink)
    if config.task in ("suite", "aklt"):
        if config.task == "aklt":
            config.suite = "aklt"
        return run_named_checks(config, sink)
    if config.task in SINGLE:
        return run_tasks(config, [(config.task,)], single_keys, run_single_task, sink)
    raise ValueError(f"unknown task {config.task!r}")
