"""Seeded Monte-Carlo sweeps over SINR thresholds, schemes and receiver types.

Every trial draws one channel realization that is reused by all
(threshold, scheme, receiver) cells, so comparisons are paired. Records are
sorted before they are written, which makes the CSV independent of the
number of worker processes.
"""
import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import stats

from ._validation import ValidationError, check_count, check_receiver_type
from .beamforming import (AoConfig, DegenerateBeam, InfeasibleError, SolverError, alternating_optimize,
                          benchmark_separate, benchmark_transmit_only)
from .channels import Geometry, PropagationParams, gen_channels
from .linalg import NumericalFailure
from .system import SystemParams

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "transmit_only", "separate")
RECEIVER_TYPES = ("I", "II")
CSV_COLUMNS = ("seed", "trial", "gamma_db", "receiver_type", "scheme", "status",
               "crb", "crb_db", "outer_iters", "wall_ms")
_AO_KEYS = {f.name for f in fields(AoConfig)} - {"receiver_type"}


class ConfigError(ValidationError):
    """Bad experiment configuration; the message names the field."""


def _reject_unknown(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(doc).__name__}")
    extra = sorted(set(doc) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


@dataclass
class ExperimentConfig:
    M: int = 8
    N: int = 8
    K: int = 3
    T: int = 256
    power_dbm: float = 30.0
    sigma_r_dbm: float = -110.0
    sigma_k_dbm: float = -80.0
    geometry: Geometry = field(default_factory=Geometry)
    propagation: PropagationParams = field(default_factory=PropagationParams)
    gamma_grid_db: list = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    receiver_types: list = field(default_factory=lambda: list(RECEIVER_TYPES))
    n_trials: int = 20
    base_seed: int = 0
    ao: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("M", "N", "K", "T", "n_trials"):
            try:
                setattr(self, name, check_count(getattr(self, name), name))
            except ValidationError as exc:
                raise ConfigError(str(exc)) from None
        if self.N > self.M:
            raise ConfigError(f"N={self.N} > M={self.M}: the CRB needs rank(G) = N, which requires N <= M")
        if self.K > len(self.geometry.cu_pos):
            raise ConfigError(f"K={self.K} but geometry.cu_pos lists {len(self.geometry.cu_pos)} users")
        for name in ("power_dbm", "sigma_r_dbm", "sigma_k_dbm"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}")
            setattr(self, name, float(v))
        if not isinstance(self.gamma_grid_db, (list, tuple)) or not self.gamma_grid_db:
            raise ConfigError("gamma_grid_db must be a non-empty list")
        try:
            self.gamma_grid_db = [float(g) for g in self.gamma_grid_db]
        except (TypeError, ValueError):
            raise ConfigError(f"gamma_grid_db must hold numbers, got {self.gamma_grid_db!r}") from None
        if not all(math.isfinite(g) for g in self.gamma_grid_db):
            raise ConfigError("gamma_grid_db entries must be finite")
        if not self.schemes or any(s not in SCHEMES for s in self.schemes):
            raise ConfigError(f"schemes must be a non-empty subset of {list(SCHEMES)}, got {self.schemes!r}")
        try:
            self.receiver_types = [check_receiver_type(r) for r in self.receiver_types]
        except ValidationError as exc:
            raise ConfigError(f"receiver_types: {exc}") from None
        if not self.receiver_types:
            raise ConfigError("receiver_types must not be empty")
        if isinstance(self.base_seed, bool) or not isinstance(self.base_seed, int) or not 0 <= self.base_seed < 2 ** 64:
            raise ConfigError(f"base_seed must be an unsigned 64-bit integer, got {self.base_seed!r}")
        _reject_unknown(self.ao, _AO_KEYS, "ao")
        try:
            self.ao_config("I")
        except ValidationError as exc:
            raise ConfigError(f"ao: {exc}") from None

    def ao_config(self, receiver_type):
        return AoConfig(receiver_type=receiver_type, **self.ao)

    def params(self, gamma_db):
        return SystemParams.from_db(self.power_dbm, gamma_db, self.K, self.T)

    def channels(self, trial):
        return gen_channels(self.geometry, self.propagation, self.M, self.N, self.K,
                            seed=self.base_seed, trial=trial,
                            sigma_k_dbm=self.sigma_k_dbm, sigma_r_dbm=self.sigma_r_dbm)

    def to_dict(self):
        """Canonical JSON form with every default spelled out."""
        g = self.geometry
        return {
            "dims": {"M": self.M, "N": self.N, "K": self.K, "T": self.T},
            "power_dbm": self.power_dbm,
            "noise": {"sigma_r_dbm": self.sigma_r_dbm, "sigma_k_dbm": self.sigma_k_dbm},
            "geometry": {"bs_pos": list(g.bs_pos), "irs_pos": list(g.irs_pos),
                         "cu_pos": [list(p) for p in g.cu_pos]},
            "propagation": asdict(self.propagation),
            "gamma_grid_db": list(self.gamma_grid_db),
            "schemes": list(self.schemes),
            "receiver_types": list(self.receiver_types),
            "n_trials": self.n_trials,
            "base_seed": self.base_seed,
            "ao": {k: getattr(self.ao_config("I"), k) for k in sorted(_AO_KEYS)},
        }

    @classmethod
    def from_dict(cls, doc):
        top = ("dims", "power_dbm", "noise", "geometry", "propagation", "gamma_grid_db",
               "schemes", "receiver_types", "n_trials", "base_seed", "ao")
        _reject_unknown(doc, top, "config")
        kw = {}
        dims = doc.get("dims", {})
        _reject_unknown(dims, ("M", "N", "K", "T"), "dims")
        kw.update(dims)
        noise = doc.get("noise", {})
        _reject_unknown(noise, ("sigma_r_dbm", "sigma_k_dbm"), "noise")
        kw.update(noise)
        geo = doc.get("geometry", {})
        _reject_unknown(geo, ("bs_pos", "irs_pos", "cu_pos"), "geometry")
        prop = doc.get("propagation", {})
        _reject_unknown(prop, [f.name for f in fields(PropagationParams)], "propagation")
        try:
            kw["geometry"] = Geometry(**geo)
            kw["propagation"] = PropagationParams(**prop)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"geometry/propagation: {exc}") from None
        for key in ("power_dbm", "gamma_grid_db", "schemes", "receiver_types", "n_trials", "base_seed", "ao"):
            if key in doc:
                kw[key] = doc[key]
        return cls(**kw)


def load_config(path):
    """Read and validate a JSON experiment config; missing keys take defaults."""
    with open(path) as fh:
        text = fh.read()
    return parse_config(text)


def parse_config(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(doc)


@dataclass
class SweepRecord:
    seed: int
    trial: int
    gamma_db: float
    receiver_type: str
    scheme: str
    status: str
    crb: float
    crb_db: float
    outer_iters: int
    wall_ms: float = float("nan")
    # per-iteration CRBs; kept in memory only, not written to CSV
    crb_trace: tuple = field(default=(), compare=False, repr=False)

    def sort_key(self):
        return (self.trial, self.gamma_db, SCHEMES.index(self.scheme), self.receiver_type)


def run_seed(base_seed, trial):
    """Optimizer seed for one trial, shared by every cell of that trial."""
    return int(np.random.SeedSequence([base_seed, trial]).generate_state(1, np.uint64)[0])


def _run_scheme(ch, params, scheme, rx, cfg, seed):
    ao = cfg.ao_config(rx)
    if scheme == "proposed":
        return alternating_optimize(ch, params, ao, seed=seed)
    if scheme == "transmit_only":
        return benchmark_transmit_only(ch, params, rx, seed=seed)
    return benchmark_separate(ch, params, rx, seed=seed, ao=ao)


def _run_trial(cfg, trial, timing=False):
    ch = cfg.channels(trial)
    seed = run_seed(cfg.base_seed, trial)
    out = []
    for gamma_db in cfg.gamma_grid_db:
        params = cfg.params(gamma_db)
        for scheme in cfg.schemes:
            for rx in cfg.receiver_types:
                t0 = time.perf_counter()
                try:
                    sol = _run_scheme(ch, params, scheme, rx, cfg, seed)
                    status, value, iters = sol.status, sol.crb, sol.outer_iters
                    trace = tuple(sol.crb_trace)
                    if status == "Infeasible":
                        value = float("nan")
                except (SolverError, DegenerateBeam, NumericalFailure, np.linalg.LinAlgError, InfeasibleError) as exc:
                    log.warning("trial %d, %s dB, %s/%s failed: %s", trial, gamma_db, scheme, rx, exc)
                    status, value, iters = "NumericalFailure", float("nan"), 0
                    trace = ()
                wall = (time.perf_counter() - t0) * 1e3 if timing else float("nan")
                crb_db = 10.0 * math.log10(value) if value > 0 else float("nan")
                out.append(SweepRecord(cfg.base_seed, trial, gamma_db, rx, scheme, status, value, crb_db, iters, wall, trace))
                log.debug("trial %d gamma %.1f %s/%s: %s %.4g", trial, gamma_db, scheme, rx, status, value)
    return out


def _run_trial_star(args):
    return _run_trial(*args)


def run_sweep(cfg, out_path=None, jobs=1, timing=False):
    """Run every (trial, threshold, scheme, receiver) cell and return sorted records.

    With ``out_path`` the records are also written as CSV, atomically. Wall
    times are recorded only with ``timing=True`` because they would make the
    CSV non-reproducible.
    """
    jobs = check_count(jobs, "jobs")
    tasks = [(cfg, t, timing) for t in range(cfg.n_trials)]
    if jobs == 1:
        chunks = [_run_trial_star(a) for a in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_trial_star, tasks))
    records = sorted((r for c in chunks for r in c), key=SweepRecord.sort_key)
    if out_path is not None:
        write_csv(records, out_path)
    return records


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else f"{x:.10g}"


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _atomic_write(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(records, path):
    _atomic_write(path, records_to_csv(records))


def read_csv(path):
    def num(s, cast=float):
        return float("nan") if s == "" else cast(s)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValidationError(f"{path}: expected columns {','.join(CSV_COLUMNS)}")
        return [SweepRecord(int(row["seed"]), int(row["trial"]), float(row["gamma_db"]), row["receiver_type"],
                            row["scheme"], row["status"], num(row["crb"]), num(row["crb_db"]),
                            int(row["outer_iters"]), num(row["wall_ms"]))
                for row in reader]


def summarize(records, confidence=0.95):
    """Aggregate per (gamma_db, scheme, receiver_type).

    Statistics of ``crb_db`` use runs that produced a CRB; the feasibility
    rate counts every run that did not end Infeasible. The CI half-width is
    Student-t based and zero for a single value.
    """
    records = list(records)
    if not records:
        raise ValidationError("cannot summarize an empty record list")
    groups = {}
    for r in records:
        groups.setdefault((r.gamma_db, r.scheme, r.receiver_type), []).append(r)
    out = []
    for (gamma_db, scheme, rx), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], SCHEMES.index(kv[0][1]), kv[0][2])):
        vals = np.array([r.crb_db for r in rs if math.isfinite(r.crb_db)])
        n = vals.size
        if n > 1:
            half = float(stats.t.ppf(0.5 + confidence / 2, n - 1) * vals.std(ddof=1) / math.sqrt(n))
        else:
            half = 0.0 if n == 1 else float("nan")
        out.append({
            "gamma_db": gamma_db,
            "scheme": scheme,
            "receiver_type": rx,
            "n_runs": len(rs),
            "n_with_crb": int(n),
            "mean_crb_db": float(vals.mean()) if n else float("nan"),
            "median_crb_db": float(np.median(vals)) if n else float("nan"),
            "feasibility_rate": sum(r.status != "Infeasible" for r in rs) / len(rs),
            "ci_half_width_db": half,
        })
    return out


def write_summary(summary, path):
    # NaN is not valid JSON
    clean = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()} for row in summary]
    _atomic_write(path, json.dumps(clean, indent=2) + "\n")
