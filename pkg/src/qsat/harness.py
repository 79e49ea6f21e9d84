"""Ensemble sweeps, summary statistics and CSV persistence."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import schedules as sch
from .baselines import GsatConfig, grover_expected_cost, gsat_expected_cost
from .errors import DegenerateWeightError
from .instances import EnsembleRule, Instance, generate_soluble_ensemble, load_ensemble
from .kernel import make_weights

log = logging.getLogger(__name__)

CSV_COLUMNS = ("instance_id", "n", "m", "k", "n_solutions", "method", "j", "delta",
               "p_soln", "cost", "flips", "runtime_ms", "norm_drift", "flags")
THREADS_ENV = "QSAT_THREADS"

QUANTUM_FAMILIES = ("linear_adiabatic", "constant_delta", "cubic", "heuristic", "gap_adapted")
FAMILIES = QUANTUM_FAMILIES + ("gsat", "grover")


class ConfigError(ValueError):
    pass


# --- statistics -------------------------------------------------------------


class MedianCI(NamedTuple):
    median: float
    lo: float
    hi: float
    open: bool = False


def median(values: Sequence[float]) -> float:
    x = sorted(values)
    if not x:
        raise ValueError("median of empty sequence")
    mid = len(x) // 2
    return float(x[mid]) if len(x) % 2 else (x[mid - 1] + x[mid]) / 2


def median_ci(values: Sequence[float], level: float = 0.95) -> MedianCI:
    """Median with a distribution-free confidence interval from order statistics.

    The interval is ``[x_(l), x_(N+1-l)]`` (1-based ranks) for the largest
    ``l`` with ``P(l <= B <= N - l) >= level``, ``B ~ Binomial(N, 1/2)``. With
    too few values for any such ``l`` the interval is open (infinite ends).
    """
    x = sorted(float(v) for v in values)
    N = len(x)
    if N == 0:
        raise ValueError("median_ci needs at least one value")
    med = median(x)
    total = 2**N
    cdf = np.cumsum([math.comb(N, i) for i in range(N + 1)])  # exact integers as objects
    best = None
    for l in range(1, N // 2 + 1):
        u = N - l + 1
        # P(l <= B <= u - 1) = cdf[u-1] - cdf[l-1]
        if (int(cdf[u - 1]) - int(cdf[l - 1])) / total >= level:
            best = l
        else:
            break
    if best is None:
        return MedianCI(med, -math.inf, math.inf, True)
    return MedianCI(med, x[best - 1], x[N - best], False)


class Fit(NamedTuple):
    a: float
    b: float
    residual: float


def _linfit(x, y) -> Fit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.vstack([np.ones_like(x), x]).T
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (a + b * x)
    return Fit(float(a), float(b), float(resid @ resid))


def _check_fit_input(ns, medians):
    if len(ns) != len(medians):
        raise ValueError("ns and medians differ in length")
    if len(ns) < 3:
        raise ValueError("a fit needs at least 3 points")
    if any(not v > 0 for v in medians):
        raise ValueError("medians must be positive")


def fit_exponential(ns: Sequence[float], medians: Sequence[float]) -> Fit:
    """Least squares ``ln(median) = a + b n``; residual is the log-scale SSR."""
    _check_fit_input(ns, medians)
    return _linfit(ns, np.log(medians))


def fit_powerlaw(ns: Sequence[float], medians: Sequence[float]) -> Fit:
    """Least squares ``ln(median) = a + b ln(n)``."""
    _check_fit_input(ns, medians)
    if any(not v > 0 for v in ns):
        raise ValueError("ns must be positive for a power-law fit")
    return _linfit(np.log(ns), np.log(medians))


# --- config -----------------------------------------------------------------

_J_RE = re.compile(r"^\s*(?:(\d+(?:\.\d+)?)\s*\*?\s*)?n(?:\s*(?:\^|\*\*)\s*(\d+(?:\.\d+)?))?\s*$")


def resolve_j(spec, n: int) -> int:
    """Step count from an int or an expression like ``"n"``, ``"n^1.5"``, ``"2n"``.

    Non-integer results go to the nearest integer.
    """
    if isinstance(spec, bool):
        raise ConfigError(f"bad j spec {spec!r}")
    if isinstance(spec, int):
        return spec
    m = _J_RE.match(str(spec))
    if not m:
        raise ConfigError(f"bad j spec {spec!r}")
    coef = float(m.group(1)) if m.group(1) else 1.0
    power = float(m.group(2)) if m.group(2) else 1.0
    return int(math.floor(coef * n**power + 0.5))


@dataclass
class MethodSpec:
    label: str
    family: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "MethodSpec":
        d = dict(d)
        try:
            label, family = d.pop("label"), d.pop("family")
        except KeyError as e:
            raise ConfigError(f"method needs {e.args[0]!r}") from None
        if family not in FAMILIES:
            raise ConfigError(f"unknown method family {family!r}")
        if family in QUANTUM_FAMILIES and "j" not in d and family != "grover":
            raise ConfigError(f"method {label!r} needs 'j'")
        return cls(label, family, d)


@dataclass
class ExperimentConfig:
    ns: list[int]
    methods: list[MethodSpec]
    count: int | dict = 100
    seed: int = 0
    k: int = 3
    mu: float = 4.25
    allow_duplicates: bool = True
    output: str | None = None
    threads: int | None = None
    timing: bool = False
    ensemble_dir: str | None = None

    def __post_init__(self):
        if not self.ns:
            raise ConfigError("ns must be nonempty")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"method labels must be unique: {labels}")
        for n in self.ns:
            if self.count_for(n) < 1:
                raise ConfigError(f"ensemble size for n={n} must be >= 1")

    def count_for(self, n: int) -> int:
        if isinstance(self.count, dict):
            c = self.count.get(str(n), self.count.get(n, self.count.get("default")))
            if c is None:
                raise ConfigError(f"no ensemble size for n={n}")
            return int(c)
        return int(self.count)

    @property
    def rule(self) -> EnsembleRule:
        return EnsembleRule(mu=self.mu, allow_duplicates=self.allow_duplicates)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        try:
            methods = [MethodSpec.from_dict(m) for m in d.pop("methods")]
            ns = [int(n) for n in d.pop("ns")]
        except KeyError as e:
            raise ConfigError(f"config needs {e.args[0]!r}") from None
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(ns=ns, methods=methods, **d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None


# --- rows -------------------------------------------------------------------


@dataclass
class ResultRow:
    instance_id: str
    n: int
    m: int
    k: int
    n_solutions: int
    method: str
    j: int | None = None
    delta: float | None = None
    p_soln: float | None = None
    cost: float | None = None
    flips: float | None = None
    runtime_ms: float | None = None
    norm_drift: float | None = None
    flags: str = ""
    index: int = field(default=0, repr=False, compare=False)

    def to_record(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v) if math.isfinite(v) else ("inf" if v > 0 else "nan"))
            else:
                out.append(str(v))
        return out

    @classmethod
    def from_record(cls, rec: dict) -> "ResultRow":
        def num(key, typ):
            v = rec.get(key, "")
            return None if v == "" else typ(v)

        row = cls(
            instance_id=rec["instance_id"], n=int(rec["n"]), m=int(rec["m"]), k=int(rec["k"]),
            n_solutions=int(rec["n_solutions"]), method=rec["method"],
            j=num("j", int), delta=num("delta", float), p_soln=num("p_soln", float),
            cost=num("cost", float), flips=num("flips", float),
            runtime_ms=num("runtime_ms", float), norm_drift=num("norm_drift", float),
            flags=rec.get("flags", ""),
        )
        m = re.search(r"-i(\d+)$", row.instance_id)
        row.index = int(m.group(1)) if m else 0
        return row


def sort_rows(rows: Iterable[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.n, r.index, r.instance_id, r.method))


def write_csv(rows: Iterable[ResultRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for r in sort_rows(rows):
            wr.writerow(r.to_record())


def read_csv(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {rd.fieldnames}")
        return [ResultRow.from_record(rec) for rec in rd]


# --- execution ----------------------------------------------------------------


def _weights(inst: Instance, mode: str):
    try:
        return make_weights(inst, mode), ""
    except DegenerateWeightError:
        return make_weights(inst, "unweighted"), "weights-fallback"


def build_schedule(method: MethodSpec, n: int, gap_curve=None) -> sch.Schedule:
    p = method.params
    j = resolve_j(p["j"], n)
    fam = method.family
    if fam == "linear_adiabatic":
        return sch.linear_adiabatic(j, p.get("alpha", 0.5))
    if fam == "constant_delta":
        return sch.constant_delta(j, p["delta"])
    if fam == "cubic":
        return sch.cubic_schedule(j)
    if fam == "heuristic":
        tau = p.get("tau_scale", sch.HEURISTIC_PRESET["tau_scale"]) * sch.LINEAR_TAU
        rho = p.get("rho_scale", sch.HEURISTIC_PRESET["rho_scale"]) * sch.LINEAR_RHO
        return sch.heuristic_schedule(j, tau, rho)
    if fam == "gap_adapted":
        if gap_curve is None:
            raise ConfigError("gap_adapted needs an ensemble gap curve")
        return sch.gap_adapted(j, gap_curve, p.get("alpha", 0.5))
    raise ConfigError(f"{fam!r} is not a schedule family")


def run_method(inst: Instance, method: MethodSpec, gap_curve=None) -> ResultRow:
    """One result row; failures come back as flagged rows."""
    row = ResultRow(instance_id=inst.id, n=inst.n, m=inst.m, k=inst.k,
                    n_solutions=len(inst.solutions or ()), method=method.label,
                    index=int(inst.meta.get("index", 0)))
    t0 = time.perf_counter()
    flags = []
    try:
        p = method.params
        if method.family == "grover":
            row.cost = grover_expected_cost(inst.n, len(inst.solutions))
        elif method.family == "gsat":
            cfg = GsatConfig(p.get("max_flips"), p.get("max_tries"),
                             seed=int(p.get("seed", 0)) + int(inst.meta.get("index", 0)))
            est = gsat_expected_cost(inst, cfg, int(p.get("trials", 100)))
            row.cost = row.flips = est.mean
            if est.censored:
                flags.append(f"censored={est.censored}")
        else:
            schedule = build_schedule(method, inst.n, gap_curve)
            weights, wflag = _weights(inst, p.get("weights", "unweighted"))
            if wflag:
                flags.append(wflag)
            res = sch.run_schedule(inst, weights, schedule)
            row.j, row.delta, row.p_soln = res.j, res.delta, res.p_soln
            row.cost, row.norm_drift = res.cost, res.norm_drift
    except Exception as e:  # noqa: BLE001 - a sweep must not abort on one item
        log.warning("%s / %s failed: %s", inst.id, method.label, e)
        flags.append(f"error:{type(e).__name__}")
    row.runtime_ms = (time.perf_counter() - t0) * 1e3
    row.flags = ";".join(flags)
    return row


def ensemble_gap_curve(instances: Sequence[Instance], samples: int, grid: int = 41,
                       classify: str = "count"):
    """Mean g(f) over the first ``samples`` instances on a uniform grid."""
    from .spectrum import gap_profile

    fs = np.linspace(0.0, 1.0, grid)
    gs = []
    for inst in instances[:samples]:
        prof = gap_profile(inst, make_weights(inst), f_grid=fs, classify=classify, refine=0)
        gs.append(prof.gap)
    return fs, np.mean(gs, axis=0)


def _run_item(args):
    inst, method, curve, timing = args
    row = run_method(inst, method, curve)
    if not timing:
        row.runtime_ms = None
    return row


def load_or_generate(config: ExperimentConfig, n: int) -> list[Instance]:
    if config.ensemble_dir:
        manifest = Path(config.ensemble_dir) / f"n{n}" / "manifest.jsonl"
        if manifest.exists():
            return load_ensemble(manifest)[: config.count_for(n)]
    return generate_soluble_ensemble(n, config.count_for(n), config.rule, config.seed, config.k)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(config: ExperimentConfig, out: str | Path | None = None,
                   threads: int | None = None) -> list[ResultRow]:
    """Run every method on the same soluble ensemble for each n.

    Rows already present in the output CSV (matched on instance id and
    method) are kept and not recomputed. The written table is sorted, so it
    does not depend on the number of worker processes.
    """
    out = out or config.output
    threads = threads or config.threads or default_threads()
    existing: dict[tuple[str, str], ResultRow] = {}
    if out and Path(out).exists():
        existing = {(r.instance_id, r.method): r for r in read_csv(out)}

    items = []
    for n in config.ns:
        ensemble = load_or_generate(config, n)
        curves = {}
        for method in config.methods:
            todo = [inst for inst in ensemble if (inst.id, method.label) not in existing]
            if not todo:
                continue
            curve = None
            if method.family == "gap_adapted":
                key = (method.params.get("gap_samples", 10), method.params.get("gap_grid", 41))
                if key not in curves:
                    curves[key] = ensemble_gap_curve(ensemble, *key)
                curve = curves[key]
            items += [(inst, method, curve, config.timing) for inst in todo]

    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_item, items, chunksize=max(1, len(items) // (4 * threads))))
    else:
        rows = [_run_item(it) for it in items]
    rows = sort_rows(list(existing.values()) + rows)
    if out:
        write_csv(rows, out)
    return rows


# --- summaries ---------------------------------------------------------------


@dataclass
class MethodSummary:
    method: str
    n: int
    count: int
    p_soln: MedianCI | None
    cost: MedianCI
    flagged: int


def summarize(rows: Iterable[ResultRow], level: float = 0.95) -> list[MethodSummary]:
    groups: dict[tuple[str, int], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.method, r.n), []).append(r)
    out = []
    for (method, n), rs in sorted(groups.items()):
        costs = [r.cost for r in rs if r.cost is not None]
        ps = [r.p_soln for r in rs if r.p_soln is not None]
        if not costs:
            continue
        out.append(MethodSummary(
            method, n, len(rs), median_ci(ps, level) if ps else None, median_ci(costs, level),
            sum(1 for r in rs if "error" in r.flags),
        ))
    return out


def fit_report(rows: Iterable[ResultRow]) -> dict:
    """Exponential and power-law fits of median cost against n, per method."""
    report = {}
    by_method: dict[str, list[MethodSummary]] = {}
    for s in summarize(rows):
        by_method.setdefault(s.method, []).append(s)
    for method, ss in by_method.items():
        ns = [s.n for s in ss]
        meds = [s.cost.median for s in ss]
        entry = {"n": ns, "median_cost": meds}
        if len(ns) >= 3 and all(m > 0 and math.isfinite(m) for m in meds):
            entry["exponential"] = fit_exponential(ns, meds)._asdict()
            entry["powerlaw"] = fit_powerlaw(ns, meds)._asdict()
        report[method] = entry
    return report


def config_to_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["methods"] = [{"label": m.label, "family": m.family, **m.params} for m in config.methods]
    return d
