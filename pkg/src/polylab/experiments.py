"""Experiment configuration, seeded replicate runs, persistence and summaries.

A store is a directory holding

* ``meta.json``: the full configuration and the record schema version,
* ``records.jsonl``: one JSON object per replicate, stable key order, sorted
  by ``(point_index, replicate)`` once a run completes,
* ``timings.jsonl``: wall-clock seconds per replicate, kept apart from the
  records so that the records stay byte-reproducible,
* ``failures.jsonl``: replicates that raised, with the error message,
* CSV summaries and plot tables written by :func:`summarize`.
"""

import csv
import io
import json
import logging
import math
import os
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import cumulants as cm
from . import functionals as fn
from .exceptions import EmptyStore, EmptyTail, InsufficientSamples, InvalidConfig, PolylabError
from .hull import convex_hull, euler_holds
from .rescale import vertex_heights
from .sampling import BallProcessConfig, RngStream, sample_tilted_polytope, sample_uniform_ball
from .zerocell import PVCellConfig, duality_check, pv_cell

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "POLYLAB_OUTPUT_ROOT"

BALL_EXPERIMENTS = (
    "polytope-sim",
    "scaling-study",
    "clt-study",
    "tails-study",
    "mdp-study",
    "attribution-check",
)
CELL_EXPERIMENTS = ("zerocell-sim", "duality-check")
EXPERIMENTS = BALL_EXPERIMENTS + CELL_EXPERIMENTS + ("verify-lemmas",)

DEFAULT_TAIL_YS = (0.5, 1.0, 1.5, 2.0, 2.5)
HEIGHT_BINS = tuple(round(0.25 * i, 2) for i in range(25))

# dotted configuration key -> dataclass field
KEY_MAP = {
    "experiment": "experiment",
    "d": "d",
    "functional": "functional",
    "measure": "measure",
    "inner_radius": "inner_radius",
    "grid.lam": "lam",
    "grid.r": "r",
    "replicates": "replicates",
    "mc.samples": "mc_samples",
    "seed": "seed",
    "output.dir": "output_dir",
    "workers": "workers",
    "test_functions": "test_functions",
    "mdp.q": "q",
    "tails.y": "tail_ys",
    "zerocell.j": "j",
}


@dataclass
class ExperimentConfig:
    """Run parameters; every field is echoed into ``meta.json``.

    ``constants`` holds the named reals for the bound evaluators (``c`` is
    the prefactor of the growth parameter ``delta``); ``q`` sets the
    deviation scale ``a_lam = lam**q`` for the moderate-deviation study.
    """

    experiment: str = "polytope-sim"
    d: int = 2
    functional: str = "f_0"
    measure: str = "stationary"
    inner_radius: float = 0.5
    lam: list = field(default_factory=lambda: [500.0, 1000.0, 2000.0, 4000.0, 8000.0])
    r: list = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    replicates: int = 100
    mc_samples: int = 100000
    seed: int = 0
    output_dir: str = "polylab-out"
    workers: int = 1
    test_functions: list = field(default_factory=lambda: ["1"])
    q: float = None
    tail_ys: list = field(default_factory=lambda: list(DEFAULT_TAIL_YS))
    j: int = 0
    constants: dict = field(default_factory=lambda: {"c": 1.0})

    # ------------------------------------------------------------ access

    @property
    def grid(self):
        return self.r if self.experiment in CELL_EXPERIMENTS else self.lam

    @property
    def grid_name(self):
        return "r" if self.experiment in CELL_EXPERIMENTS else "lam"

    def kind(self):
        return fn.FunctionalKind.parse(self.functional, self.d)

    def to_flat(self):
        """Flat dotted-key mapping (the file format)."""
        out = {}
        for key, attr in KEY_MAP.items():
            value = getattr(self, attr)
            out[key] = list(value) if isinstance(value, (list, tuple)) else value
        for name, value in sorted(self.constants.items()):
            out[f"constants.{name}"] = value
        return out

    def resolved_output_dir(self):
        path = Path(self.output_dir)
        if not path.is_absolute():
            root = os.environ.get(OUTPUT_ROOT_ENV)
            if root:
                path = Path(root) / path
        return path

    # ------------------------------------------------------------ validation

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidConfig("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        if not isinstance(self.d, int) or not 2 <= self.d <= 6:
            raise InvalidConfig("d", "must be an integer in [2, 6]")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise InvalidConfig("replicates", "must be an integer >= 1")
        if not isinstance(self.mc_samples, int) or self.mc_samples < 1:
            raise InvalidConfig("mc.samples", "must be an integer >= 1")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise InvalidConfig("workers", "must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidConfig("seed", "must be a non-negative integer")
        for key, grid in (("grid.lam", self.lam), ("grid.r", self.r)):
            if not grid or any(not isinstance(v, (int, float)) or v <= 0 for v in grid):
                raise InvalidConfig(key, "must be a non-empty list of positive numbers")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise InvalidConfig(key, "must be strictly increasing")
        if any(v < 1 for v in self.r):
            raise InvalidConfig("grid.r", "inradius thresholds must be >= 1")
        if self.measure not in ("stationary", "tilted"):
            raise InvalidConfig("measure", "must be 'stationary' or 'tilted'")
        if not 0 < self.inner_radius < 1:
            raise InvalidConfig("inner_radius", "must lie in (0, 1)")
        try:
            kind = self.kind()
        except ValueError as exc:
            raise InvalidConfig("functional", str(exc)) from None
        if kind.name == "V_j" and self.d > 3 and self.experiment in BALL_EXPERIMENTS:
            log.info("intrinsic deficits in d > 3 use the Monte Carlo estimator")
        try:
            [fn.TestFunction.parse(str(t)) for t in self.test_functions]
        except ValueError as exc:
            raise InvalidConfig("test_functions", str(exc)) from None
        if any(int(m.group(1)) >= self.d for m in _coordinate_tags(self.test_functions)):
            raise InvalidConfig("test_functions", f"coordinate index must be < d = {self.d}")
        if not 0 <= self.j <= self.d - 1:
            raise InvalidConfig("zerocell.j", f"must lie in [0, {self.d - 1}]")
        if self.q is not None:
            if not isinstance(self.q, (int, float)) or self.q <= 0:
                raise InvalidConfig("mdp.q", "must be a positive number")
            q_max = cm.mdp_admissible_q(self.d, kind.w)
            if self.q >= q_max:
                warnings.warn(
                    f"a_lam = lam**{self.q} is outside the admissible window q < {q_max:.4g}",
                    stacklevel=2,
                )
        for name, value in self.constants.items():
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidConfig(f"constants.{name}", "must be a finite real")
        if self.constants.get("c", 1.0) <= 0:
            raise InvalidConfig("constants.c", "must be > 0")
        return self


def _coordinate_tags(tags):
    for t in tags:
        m = re.fullmatch(r"x(\d+)(\^2)?", str(t).strip())
        if m:
            yield m


def _flatten(mapping, prefix=""):
    out = {}
    for key, value in mapping.items():
        full = f"{prefix}{key}"
        if isinstance(value, dict) and full != "constants" and not full.startswith("constants."):
            out.update(_flatten(value, full + "."))
        elif isinstance(value, dict):
            for name, v in value.items():
                out[f"{full}.{name}"] = v
        else:
            out[full] = value
    return out


def config_from_mapping(mapping, overrides=None):
    """Build and validate a config from a (possibly nested) mapping plus ``key=value`` overrides."""
    flat = _flatten(mapping or {})
    flat.update(_flatten(overrides or {}))
    kwargs = {}
    constants = {"c": 1.0}
    for key, value in flat.items():
        if key.startswith("constants."):
            constants[key.split(".", 1)[1]] = value
            continue
        if key not in KEY_MAP:
            raise InvalidConfig(key, "unknown configuration key")
        kwargs[KEY_MAP[key]] = value
    kwargs["constants"] = constants
    for name in ("lam", "r", "tail_ys"):
        if name in kwargs:
            value = kwargs[name]
            value = value if isinstance(value, (list, tuple)) else [value]
            try:
                kwargs[name] = [float(v) for v in value]
            except (TypeError, ValueError):
                raise InvalidConfig(_key_of(name), "must be a list of numbers") from None
    if "test_functions" in kwargs and not isinstance(kwargs["test_functions"], (list, tuple)):
        kwargs["test_functions"] = [kwargs["test_functions"]]
    if "test_functions" in kwargs:
        kwargs["test_functions"] = [str(t) for t in kwargs["test_functions"]]
    if "q" in kwargs and kwargs["q"] is not None:
        kwargs["q"] = float(kwargs["q"])
    return ExperimentConfig(**kwargs).validate()


def _key_of(attr):
    return next(k for k, v in KEY_MAP.items() if v == attr)


def load_config(path=None, overrides=None):
    """Read a YAML config file (flat dotted keys or nested sections) and apply overrides."""
    mapping = {}
    if path is not None:
        with open(path) as fh:
            mapping = yaml.safe_load(fh) or {}
        if not isinstance(mapping, dict):
            raise InvalidConfig("config", "file must hold a key-value mapping")
    return config_from_mapping(mapping, overrides)


def dump_config(cfg):
    """YAML text with every key, in a fixed order."""
    return yaml.safe_dump(cfg.to_flat(), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------- replicates


def _stream(cfg, point_index, replicate):
    return RngStream(cfg.seed, point_index), replicate


def _heights_summary(p, lam):
    hp = vertex_heights(p, lam)
    counts, _ = np.histogram(hp.height, bins=HEIGHT_BINS)
    return {
        "n": int(len(hp.height)),
        "mean": float(np.mean(hp.height)) if len(hp.height) else 0.0,
        "max": float(np.max(hp.height)) if len(hp.height) else 0.0,
        "radius_mean": float(np.mean(hp.adjacency_radius)) if len(hp.height) else 0.0,
        "radius_max": float(np.max(hp.adjacency_radius)) if len(hp.height) else 0.0,
        "histogram": [int(c) for c in counts],
    }


def _ball_polytope(cfg, lam, gen):
    if cfg.measure == "stationary":
        pts = sample_uniform_ball(BallProcessConfig(cfg.d, lam), gen)
        return pts, convex_hull(pts)
    pts, p, _ = sample_tilted_polytope(BallProcessConfig(cfg.d, lam, "tilted", cfg.inner_radius), gen)
    return pts, p


def _ball_record(cfg, point_index, replicate):
    lam = float(cfg.lam[point_index])
    base, sub = _stream(cfg, point_index, replicate)
    gen = base.child(sub)
    mc_gen = base.child(1_000_000 + sub)
    pts, p = _ball_polytope(cfg, lam, gen)
    kind = cfg.kind()
    measure = fn.empirical_measure(p, kind, cfg.mc_samples, mc_gen)
    scale = lam ** kind.e
    per_atom = {}
    for tag in cfg.test_functions:
        per_atom[str(tag)] = scale * fn.pair(fn.TestFunction.parse(str(tag)), measure)
    record = {
        "n_points": int(len(pts)),
        "f_vector": [int(v) for v in p.f_vector],
        "euler": bool(euler_holds(p)),
        "missed_volume": float(fn.missed_volume(p)),
    }
    if cfg.d <= 3:
        record["intrinsic_deficit"] = {f"V_{j}": float(fn.intrinsic_deficit_exact(p, j)) for j in range(1, cfg.d)}
    record["functional"] = kind.label
    record["total"] = float(scale * measure.total)
    record["total_se"] = None if measure.total_se is None else float(scale * measure.total_se)
    record["measure"] = per_atom
    record["heights"] = _heights_summary(p, lam)
    if cfg.experiment == "attribution-check":
        record["checks"] = _attribution_checks(cfg, p, measure, kind, mc_gen)
    return record


def _attribution_checks(cfg, p, measure, kind, gen):
    checks = {}
    for j in range(cfg.d):
        m = fn.attribute_faces(p, j)
        checks[f"faces_{j}"] = bool(m.total == p.f_vector[j])
    mv = fn.attribute_missed_volume(p, "V_d", cfg.mc_samples, gen)
    exact = fn.missed_volume(p)
    checks["missed_volume_z"] = float((mv.total - exact) / mv.total_se) if mv.total_se else 0.0
    if cfg.d <= 3:
        for j in range(1, cfg.d):
            est, se = fn.intrinsic_deficit_mc(p, j, cfg.mc_samples, gen)
            checks[f"deficit_V_{j}_z"] = float((est - fn.intrinsic_deficit_exact(p, j)) / se) if se else 0.0
    return checks


def _cell_record(cfg, point_index, replicate):
    r = float(cfg.r[point_index])
    base, sub = _stream(cfg, point_index, replicate)
    s = pv_cell(PVCellConfig(cfg.d, r), base.child(sub))
    rep = duality_check(s)
    record = {
        "n_generators": int(len(s.generators)),
        "f_vector": [int(v) for v in s.cell.f_vector],
        "dual_f_vector": [int(v) for v in s.dual_hull.f_vector],
        "euler": bool(euler_holds(s.cell)),
        "inradius": float(s.inradius),
        "rejected": int(s.rejected),
        "accepted": bool(rep.accepted),
    }
    if cfg.experiment == "duality-check":
        record["duality"] = {str(j): bool(v) for j, v in rep.by_j.items()}
    return record


def run_replicate(cfg, point_index, replicate):
    """One replicate record (without timing); deterministic in ``(cfg, point_index, replicate)``."""
    grid = cfg.grid
    head = {
        "schema": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "point_index": int(point_index),
        cfg.grid_name: float(grid[point_index]),
        "replicate": int(replicate),
        "seed": int(cfg.seed),
        "stream": [int(point_index), int(replicate)],
    }
    body = _cell_record(cfg, point_index, replicate) if cfg.experiment in CELL_EXPERIMENTS else _ball_record(cfg, point_index, replicate)
    head.update(body)
    return head


def _worker(cfg_dict, point_index, replicate):
    cfg = ExperimentConfig(**cfg_dict)
    t0 = time.perf_counter()
    try:
        record = run_replicate(cfg, point_index, replicate)
    except (PolylabError, ValueError, ArithmeticError) as exc:
        return point_index, replicate, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0
    return point_index, replicate, record, None, time.perf_counter() - t0


# ---------------------------------------------------------------- store io


def _dumps(obj):
    return json.dumps(obj, sort_keys=False, separators=(",", ":"), allow_nan=True)


def read_jsonl(path):
    """Parse a JSON-Lines file, ignoring a truncated trailing line."""
    out = []
    path = Path(path)
    if not path.exists():
        return out
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError:
                log.warning("skipping unreadable line in %s", path)
    return out


def _sort_key(rec):
    return rec["point_index"], rec["replicate"]


def _rewrite_sorted(path, records):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        for rec in sorted(records, key=_sort_key):
            fh.write(_dumps(rec) + "\n")
    os.replace(tmp, path)


@dataclass
class RunResult:
    store: Path
    completed: int
    skipped: int
    failures: list

    @property
    def ok(self):
        return not self.failures


def _write_meta(cfg, store):
    meta = {"schema": SCHEMA_VERSION, "config": cfg.to_flat()}
    with open(store / "meta.json", "w", newline="\n") as fh:
        fh.write(json.dumps(meta, indent=2) + "\n")


def run(cfg):
    """Execute ``cfg.experiment`` and write the store; returns a :class:`RunResult`.

    Replicates already present in ``records.jsonl`` are skipped, so a killed
    run resumes where it stopped. Records are appended as they finish and
    the file is rewritten in canonical order at the end; summaries are then
    regenerated from the full store.
    """
    cfg.validate()
    store = cfg.resolved_output_dir()
    store.mkdir(parents=True, exist_ok=True)
    _write_meta(cfg, store)
    if cfg.experiment == "verify-lemmas":
        table = verify_lemmas()
        _write_csv(store / "lemmas.csv", LEMMA_COLUMNS, table)
        failures = [row for row in table if not row["ok"]]
        return RunResult(store, len(table), 0, failures)

    rec_path = store / "records.jsonl"
    existing = [r for r in read_jsonl(rec_path) if r.get("schema") == SCHEMA_VERSION]
    done = {_sort_key(r) for r in existing}
    tasks = [
        (k, i)
        for k in range(len(cfg.grid))
        for i in range(cfg.replicates)
        if (k, i) not in done
    ]
    failures = []
    cfg_dict = asdict(cfg)
    new_records = []
    with open(rec_path, "a", newline="\n") as rec_fh, open(store / "timings.jsonl", "a", newline="\n") as time_fh:

        def handle(result):
            k, i, rec, err, secs = result
            time_fh.write(_dumps({"point_index": k, "replicate": i, "seconds": round(secs, 6)}) + "\n")
            if rec is None:
                failures.append({"point_index": k, "replicate": i, "error": err})
                return
            rec_fh.write(_dumps(rec) + "\n")
            rec_fh.flush()
            new_records.append(rec)

        if cfg.workers == 1 or len(tasks) <= 1:
            for k, i in tasks:
                handle(_worker(cfg_dict, k, i))
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(_worker, cfg_dict, k, i) for k, i in tasks]
                for fut in as_completed(futures):
                    handle(fut.result())
    records = existing + new_records
    _rewrite_sorted(rec_path, records)
    with open(store / "failures.jsonl", "w", newline="\n") as fh:
        for f in sorted(failures, key=_sort_key):
            fh.write(_dumps(f) + "\n")
    if records:
        summarize(store, cfg)
    return RunResult(store, len(new_records), len(existing), failures)


# ---------------------------------------------------------------- summaries


SUMMARY_COLUMNS = (
    ["quantity", "grid", "point", "n", "mean", "mean_se", "var", "var_se"]
    + [f"k{k}" for k in range(1, 5)]
    + [f"k{k}_se" for k in range(1, 5)]
    + ["ks"]
)
EXPONENT_COLUMNS = ["quantity", "statistic", "slope", "ci_low", "ci_high", "stderr", "prefactor", "n_points"]
TAIL_COLUMNS = ["quantity", "point", "y", "upper_log_ratio", "upper_lo", "upper_hi", "upper_hits", "lower_log_ratio", "lower_lo", "lower_hi", "lower_hits", "empirical_two_sided", "bound"]
SCALING_COLUMNS = ["quantity", "point", "mean", "mean_se", "var", "var_se"]
MDP_COLUMNS = ["quantity", "point", "a", "y", "value", "censored", "rate"]
LEMMA_COLUMNS = ["check", "case", "value", "reference", "error", "ok"]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if not math.isfinite(value):
            return ""
        return repr(value)
    if isinstance(value, (np.floating,)):
        return _fmt(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def _write_csv(path, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _quantities(record):
    out = {}
    for j, v in enumerate(record.get("f_vector", [])):
        out[f"f_{j}"] = float(v)
    for key in ("missed_volume", "total", "inradius", "n_points", "n_generators"):
        if key in record and record[key] is not None:
            out[key] = float(record[key])
    for name, v in record.get("intrinsic_deficit", {}).items():
        out[f"deficit_{name}"] = float(v)
    for tag, v in record.get("measure", {}).items():
        out[f"measure[{tag}]"] = float(v)
    return out


def _collect(records, grid_name):
    """``{quantity: {point: array}}`` with points in grid order."""
    table = {}
    for rec in sorted(records, key=_sort_key):
        point = rec[grid_name]
        for q, v in _quantities(rec).items():
            table.setdefault(q, {}).setdefault(point, []).append(v)
    return {q: {pt: np.asarray(v) for pt, v in per.items()} for q, per in table.items()}


def _summary_row(quantity, grid_name, point, x):
    row = {"quantity": quantity, "grid": grid_name, "point": float(point), "n": len(x)}
    row["mean"] = float(np.mean(x))
    if len(x) < 2:
        return row  # variance and higher statistics unavailable
    row["mean_se"] = float(np.std(x, ddof=1) / np.sqrt(len(x)))
    try:
        est = cm.k_statistics(x, min(4, len(x) - 1))
        for k, (v, se) in enumerate(zip(est.values, est.se), start=1):
            row[f"k{k}"] = v
            row[f"k{k}_se"] = se
        row["var"], row["var_se"] = est.values[1], est.se[1]
    except InsufficientSamples:
        row["var"] = float(np.var(x, ddof=1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        row["ks"] = cm.ks_distance(x)
    return row


def _tail_rows(quantity, point, x, ys, bp):
    rows = []
    if len(x) < 2 or np.std(x) == 0:
        return rows
    z = (x - x.mean()) / x.std(ddof=1)
    for y in ys:
        row = {"quantity": quantity, "point": float(point), "y": float(y)}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                up, lo = cm.relative_error_tail(z, y, standardize=False)
                row.update(
                    upper_log_ratio=up.value, upper_lo=up.lo, upper_hi=up.hi, upper_hits=up.hits,
                    lower_log_ratio=lo.value, lower_lo=lo.lo, lower_hi=lo.hi, lower_hits=lo.hits,
                )
            except EmptyTail:
                pass
        row["empirical_two_sided"] = float(np.mean(np.abs(z) >= y))
        if bp is not None:
            row["bound"] = cm.thm_tail_bound(bp(point), y)
        rows.append(row)
    return rows


def _fit_rows(quantity, rows):
    out = []
    for stat in ("mean", "var"):
        pairs = [(r["point"], r[stat]) for r in rows if r.get(stat) is not None]
        if len(pairs) < 3 or any(v <= 0 for _, v in pairs):
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = cm.fit_scaling_exponent(pairs)
        out.append(
            {
                "quantity": quantity, "statistic": stat, "slope": fit.slope,
                "ci_low": fit.ci[0], "ci_high": fit.ci[1], "stderr": fit.stderr,
                "prefactor": fit.prefactor, "n_points": fit.n_points,
            }
        )
    return out


def _mdp_rows(quantity, point, x, q, ys, w):
    rows = []
    if q is None or len(x) < 2 or np.std(x) == 0:
        return rows
    a = max(float(point) ** q, 1.0)
    for y in ys:
        row = {"quantity": quantity, "point": float(point), "a": a, "y": float(y), "rate": -0.5 * y * y}
        try:
            row["value"] = cm.mdp_functional(x, a, y)
            row["censored"] = False
        except EmptyTail as exc:
            row["value"] = exc.upper_bound
            row["censored"] = True
        rows.append(row)
    return rows


@dataclass
class Summary:
    rows: list
    exponents: list
    tails: list
    mdp: list


def summarize(store, cfg=None):
    """Recompute every summary table from ``records.jsonl`` in ``store``.

    Writes ``summary.csv``, ``exponents.csv``, ``plot_scaling.csv``,
    ``plot_tails.csv`` and (when ``mdp.q`` is set) ``plot_mdp.csv``.

    Raises
    ------
    EmptyStore
        If the store holds no records.
    """
    store = Path(store)
    if cfg is None:
        meta_path = store / "meta.json"
        if not meta_path.exists():
            raise EmptyStore(f"{store} has no meta.json")
        cfg = config_from_mapping(json.loads(meta_path.read_text())["config"])
    records = read_jsonl(store / "records.jsonl")
    if not records:
        raise EmptyStore(f"{store} holds no replicate records")
    grid_name = cfg.grid_name
    data = _collect(records, grid_name)
    if grid_name == "r":
        def bp(point):
            return cm.BoundParams.for_zero_cell(cfg.d, cfg.j, point, cfg.constants.get("c", 1.0))
        w = cfg.j
    else:
        kind = cfg.kind()
        def bp(point):
            return cm.BoundParams.for_polytope(cfg.d, kind.w, point, cfg.constants.get("c", 1.0))
        w = kind.w
    rows, exps, tails, mdp = [], [], [], []
    for quantity in sorted(data):
        per = data[quantity]
        qrows = [_summary_row(quantity, grid_name, pt, x) for pt, x in sorted(per.items())]
        rows.extend(qrows)
        exps.extend(_fit_rows(quantity, qrows))
        for pt, x in sorted(per.items()):
            tails.extend(_tail_rows(quantity, pt, x, cfg.tail_ys, bp))
            mdp.extend(_mdp_rows(quantity, pt, x, cfg.q, cfg.tail_ys, w))
    _write_csv(store / "summary.csv", SUMMARY_COLUMNS, rows)
    _write_csv(store / "exponents.csv", EXPONENT_COLUMNS, exps)
    _write_csv(store / "plot_scaling.csv", SCALING_COLUMNS, rows)
    _write_csv(store / "plot_tails.csv", TAIL_COLUMNS, tails)
    if cfg.q is not None:
        _write_csv(store / "plot_mdp.csv", MDP_COLUMNS, mdp)
    return Summary(rows, exps, tails, mdp)


# ---------------------------------------------------------------- lemmas


def verify_lemmas():
    """Rows for every checkable lemma identity: closed form vs oracle with pass flags."""
    from fractions import Fraction

    rows = []
    for a in (0.5, 1.0, 2.0):
        for b in (0.5, 1.0, 2.0):
            for d in (2, 3):
                for p in (1, 2, 3):
                    val = cm.lemma51_eval(a, b, d, p)
                    ref = cm.lemma51_quadrature(a, b, d, p)
                    err = abs(val - ref) / abs(ref)
                    rows.append({"check": "lemma51", "case": f"a={a:g} b={b:g} d={d} p={p}", "value": val, "reference": ref, "error": err, "ok": err < 1e-9})
    for k in range(1, cm.MAX_LEMMA56_ORDER + 1):
        best, witness = cm.lemma56_max_product(k)
        rows.append({"check": "lemma56", "case": f"k={k} witness={'+'.join(map(str, witness))}", "value": float(best), "reference": float(4 * 3 ** k), "error": 0.0, "ok": best <= 4 * 3 ** k})
    cum = [Fraction(i * (-1) ** i, i + 3) for i in range(1, 9)]
    back = cm.moments_to_cumulants(cm.cumulants_to_moments(cum))
    rows.append({"check": "moment_cumulant_roundtrip", "case": "order=8", "value": 0.0, "reference": 0.0, "error": 0.0 if back == cum else 1.0, "ok": back == cum})
    for mu in (0.5, 3.0, 7.25):
        c = cm.moments_to_cumulants(cm.poisson_moments(mu, 6))
        err = max(abs(v - mu) for v in c) / mu
        rows.append({"check": "poisson_cumulants", "case": f"mu={mu:g}", "value": float(c[-1]), "reference": mu, "error": float(err), "ok": err < 1e-9})
    return rows
