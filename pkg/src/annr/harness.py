"""Config-driven experiments: repeated seeded runs, MAE summaries and plot data.

A config is an INI file::

    [experiment]
    method = annr          ; annr | defer | nannr
    budget = 400           ; total function evaluations, initial points included
    repetitions = 10
    seed = 0               ; run r uses seed + r
    checkpoints = 100, 200, 400

    [target]
    name = spiral          ; remaining keys are target parameters

    [annr]
    lambda = auto
    epsilon = 1e-6

    [test_set]
    mode = grid
    size = 10000
    seed = 12345

Outputs (written atomically): ``trace_<r>.csv`` per run, ``summary.csv``
(deterministic for a fixed config), ``runs.csv``, ``checkpoints.csv`` and
``timing.csv`` (wall-clock numbers, kept apart so the others stay
byte-identical across reruns).
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import Partition, defer_step, nannr_run
from .engine import ANNR, EngineConfig, RunTrace
from .exceptions import ANNRError, ConfigurationError
from .spatial_index import Dataset
from .testbed import TargetFunction, TestSet, builtin, mae, make_test_set, norm_histogram

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "load_config",
    "run_experiment",
    "compare",
    "sweep",
    "export_plot_data",
]

METHODS = ("annr", "defer", "nannr")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def _number(text):
    t = str(text).strip()
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        raise ConfigurationError(f"not a number: {text!r}") from None


@dataclass
class ExperimentConfig:
    method: str = "annr"
    target: str = "gaussian"
    target_params: dict = field(default_factory=dict)
    budget: int = 100
    repetitions: int = 1
    seed: int = 0
    checkpoints: tuple = ()
    output: str | None = None
    # engine
    lam: float | str = "auto"
    epsilon: float = 1e-6
    walk_steps: int = 25
    cell_steps: int = 32
    top_k: int = 4
    alpha0: float | None = None
    n_init: int = 10
    include_corners: bool = True
    check_invariants: bool = False
    # test set
    test_mode: str = "uniform"
    test_size: int = 10000
    test_seed: int = 12345

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if self.budget < 1:
            raise ConfigurationError("budget must be >= 1")
        if any(c < 1 for c in self.checkpoints):
            raise ConfigurationError("checkpoints must be positive")
        self.checkpoints = tuple(sorted(set(int(c) for c in self.checkpoints)))

    def make_target(self) -> TargetFunction:
        return builtin(self.target, **self.target_params)

    def engine_config(self, f: TargetFunction, seed: int) -> EngineConfig:
        n0 = self.n_init + (2**f.dim if self.include_corners else 0)
        if self.budget <= n0:
            raise ConfigurationError(f"budget {self.budget} leaves no queries after {n0} initial points")
        return EngineConfig(
            dim=f.dim, box=f.box, lam=self.lam, epsilon=self.epsilon, budget=self.budget - n0,
            walk_steps=self.walk_steps, cell_steps=self.cell_steps, alpha0=self.alpha0,
            n_init=self.n_init, include_corners=self.include_corners, seed=seed, top_k=self.top_k,
            check_invariants=self.check_invariants,
        )

    def with_overrides(self, overrides) -> "ExperimentConfig":
        cp = _to_parser(self)
        _apply_overrides(cp, overrides)
        return _from_parser(cp)

    def to_ini(self) -> str:
        buf = io.StringIO()
        _to_parser(self).write(buf)
        return buf.getvalue()


# INI (section, key) -> (field, converter)
_KEYS = {
    ("experiment", "method"): ("method", str),
    ("experiment", "budget"): ("budget", int),
    ("experiment", "repetitions"): ("repetitions", int),
    ("experiment", "seed"): ("seed", int),
    ("experiment", "output"): ("output", str),
    ("experiment", "checkpoints"): ("checkpoints", lambda s: tuple(int(x) for x in s.split(",") if x.strip())),
    ("annr", "lambda"): ("lam", lambda s: "auto" if s.strip() == "auto" else float(s)),
    ("annr", "epsilon"): ("epsilon", float),
    ("annr", "walk_steps"): ("walk_steps", int),
    ("annr", "cell_steps"): ("cell_steps", int),
    ("annr", "top_k"): ("top_k", int),
    ("annr", "alpha0"): ("alpha0", lambda s: None if s.strip() in ("off", "none", "") else float(s)),
    ("annr", "n_init"): ("n_init", int),
    ("annr", "include_corners"): ("include_corners", _bool),
    ("annr", "check_invariants"): ("check_invariants", _bool),
    ("test_set", "mode"): ("test_mode", str),
    ("test_set", "size"): ("test_size", int),
    ("test_set", "seed"): ("test_seed", int),
}
_SECTIONS = ("experiment", "target", "annr", "defer", "nannr", "test_set")


def _to_parser(cfg: ExperimentConfig) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    for s in _SECTIONS:
        cp.add_section(s)
    for (sec, key), (name, _) in _KEYS.items():
        v = getattr(cfg, name)
        if v is None:
            v = "off" if name == "alpha0" else ""
        elif isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        cp.set(sec, key, str(v))
    cp.set("target", "name", cfg.target)
    for k, v in cfg.target_params.items():
        cp.set("target", k, repr(v))
    return cp


def _from_parser(cp: configparser.ConfigParser) -> ExperimentConfig:
    unknown = [s for s in cp.sections() if s not in _SECTIONS]
    if unknown:
        raise ConfigurationError(f"unknown config sections: {unknown}")
    kwargs = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            if sec == "target":
                continue
            if (sec, key) not in _KEYS:
                raise ConfigurationError(f"unknown config key {sec}.{key}")
            name, conv = _KEYS[(sec, key)]
            if name == "output" and not raw.strip():
                continue
            try:
                kwargs[name] = conv(raw)
            except (ValueError, ConfigurationError) as exc:
                raise ConfigurationError(f"bad value for {sec}.{key}: {raw!r} ({exc})") from None
    if cp.has_section("target"):
        items = dict(cp.items("target"))
        kwargs["target"] = items.pop("name", "gaussian")
        kwargs["target_params"] = {k: _number(v) for k, v in items.items()}
    return ExperimentConfig(**kwargs)


def _apply_overrides(cp: configparser.ConfigParser, overrides):
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        if sec not in _SECTIONS:
            raise ConfigurationError(f"unknown config section {sec!r}")
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, key.strip(), value.strip())


def load_config(path, overrides=()) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from None
    _apply_overrides(cp, overrides)
    return _from_parser(cp)


@dataclass
class RunRecord:
    rep: int
    seed: int
    status: str
    mae: float = float("nan")
    queries: int = 0
    runtime: float = 0.0
    error: str = ""
    checkpoints: dict = field(default_factory=dict)
    trace: RunTrace | None = None
    points: np.ndarray | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    test_hash: str
    runs: list

    @property
    def ok(self) -> list:
        return [r for r in self.runs if r.status == "ok"]

    @property
    def maes(self) -> np.ndarray:
        return np.array([r.mae for r in self.ok])

    @property
    def mae_mean(self) -> float:
        return float(self.maes.mean()) if len(self.ok) else float("nan")

    @property
    def mae_std(self) -> float:
        return float(self.maes.std()) if len(self.ok) else float("nan")

    @property
    def runtime_mean(self) -> float:
        return float(np.mean([r.runtime for r in self.ok])) if self.ok else float("nan")

    @property
    def queries_mean(self) -> float:
        return float(np.mean([r.queries for r in self.ok])) if self.ok else float("nan")

    def checkpoint_curve(self) -> list:
        rows = []
        for n in self.config.checkpoints:
            vals = [r.checkpoints[n] for r in self.ok if n in r.checkpoints]
            if vals:
                rows.append((n, float(np.mean(vals)), float(np.std(vals)), len(vals)))
        return rows


def _run_annr(cfg: ExperimentConfig, f, seed: int, test: TestSet, rec: RunRecord):
    ecfg = cfg.engine_config(f, seed)
    eng = ANNR(ecfg, f)
    rec.trace = eng.trace

    def check(engine):
        n = len(engine.dataset)
        if n in cfg.checkpoints:
            rec.checkpoints[n] = mae(engine.dataset.predict, test)

    eng.initialize()
    check(eng)
    eng.run(callback=check)
    rec.points = eng.dataset.points.copy()
    return eng.dataset.predict, len(eng.dataset)


def _run_defer(cfg: ExperimentConfig, f, seed: int, test: TestSet, rec: RunRecord):
    part = Partition(f.box, f)
    rec.trace = part.trace
    from .baselines import defer_predict

    def predict(x):
        return defer_predict(part, x)

    def check():
        for n in cfg.checkpoints:
            if n not in rec.checkpoints and part.evaluations >= n:
                rec.checkpoints[n] = mae(predict, test)

    check()
    for _ in range((cfg.budget - 1) // 2):
        defer_step(part, f)
        check()
    rec.points = part.centers.copy()
    return predict, part.evaluations


def _run_nannr(cfg: ExperimentConfig, f, seed: int, test: TestSet, rec: RunRecord):
    ds = nannr_run(f.box, f, cfg.budget, seed)
    rec.trace = ds.trace
    for n in cfg.checkpoints:
        if n <= len(ds):
            prefix = Dataset(ds.points[:n], ds.values[:n])
            rec.checkpoints[n] = mae(prefix.predict, test)
    rec.points = ds.points.copy()
    return ds.predict, len(ds)


_RUNNERS = {"annr": _run_annr, "defer": _run_defer, "nannr": _run_nannr}


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else repr(float(v))


def run_experiment(cfg: ExperimentConfig, output=None, test: TestSet | None = None) -> ExperimentResult:
    """All repetitions of one config; failed runs are recorded and skipped."""
    f = cfg.make_target()
    test = make_test_set(f, cfg.test_size, cfg.test_mode, cfg.test_seed) if test is None else test
    runs = []
    for rep in range(cfg.repetitions):
        seed = cfg.seed + rep
        rec = RunRecord(rep, seed, "ok")
        t0 = time.perf_counter()
        try:
            predict, n = _RUNNERS[cfg.method](cfg, f, seed, test, rec)
            rec.runtime = time.perf_counter() - t0
            rec.queries = n
            rec.mae = mae(predict, test)
        except ANNRError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            rec.runtime = time.perf_counter() - t0
            rec.status = "failed"
            rec.error = f"{type(exc).__name__}: {exc}"
            trace = getattr(exc, "trace", None)
            if isinstance(trace, RunTrace):
                rec.trace = trace
            log.warning("run %d failed: %s", rep, rec.error)
        runs.append(rec)
    result = ExperimentResult(cfg, test.digest(), runs)
    out = output if output is not None else cfg.output
    if out:
        write_outputs(result, Path(out))
    return result


def summary_rows(result: ExperimentResult) -> list:
    cfg = result.config
    params = ";".join(f"{k}={v}" for k, v in sorted(cfg.target_params.items()))
    return [[cfg.method, cfg.target, params, cfg.budget, cfg.repetitions,
             sum(r.status != "ok" for r in result.runs), _fmt(result.mae_mean), _fmt(result.mae_std),
             _fmt(result.queries_mean), result.test_hash]]


SUMMARY_HEADER = ["method", "target", "params", "budget", "repetitions", "failed",
                  "mae_mean", "mae_std", "queries_mean", "test_set_hash"]


def write_outputs(result: ExperimentResult, out: Path):
    for r in result.runs:
        if r.trace is not None:
            buf = io.StringIO()
            r.trace.write_csv(buf)
            _atomic_write(out / f"trace_{r.rep}.csv", buf.getvalue())
    _atomic_write(out / "summary.csv", _csv_text(SUMMARY_HEADER, summary_rows(result)))
    _atomic_write(out / "runs.csv", _csv_text(
        ["rep", "seed", "status", "mae", "queries", "error"],
        [[r.rep, r.seed, r.status, _fmt(r.mae), r.queries, r.error] for r in result.runs]))
    _atomic_write(out / "checkpoints.csv", _csv_text(
        ["n", "mae_mean", "mae_std", "runs"],
        [[n, _fmt(m), _fmt(s), k] for n, m, s, k in result.checkpoint_curve()]))
    _atomic_write(out / "timing.csv", _csv_text(
        ["rep", "runtime_s", "ms_per_query"],
        [[r.rep, f"{r.runtime:.4f}", f"{1e3 * r.runtime / max(1, r.queries):.4f}"] for r in result.runs]))


def compare(configs, output=None) -> tuple[list, str]:
    """Run several configs on the same target and test set.

    Returns ``(rows, text)`` where rows are ``[method, mae_mean, mae_std,
    runtime_s, test_set_hash]``.
    """
    if not configs:
        raise ConfigurationError("nothing to compare")
    key = {(c.target, tuple(sorted(c.target_params.items())), c.test_mode, c.test_size, c.test_seed)
           for c in configs}
    if len(key) != 1:
        raise ConfigurationError("configs must share target and test set")
    results = [run_experiment(c) for c in configs]
    hashes = {r.test_hash for r in results}
    if len(hashes) != 1:
        raise ConfigurationError(f"test-set hashes differ: {sorted(hashes)}")
    rows = [[r.config.method, _fmt(r.mae_mean), _fmt(r.mae_std), f"{r.runtime_mean:.3f}", r.test_hash]
            for r in results]
    header = ["method", "mae_mean", "mae_std", "runtime_s", "test_set_hash"]
    text = _aligned(header, rows)
    if output:
        _atomic_write(Path(output) / "comparison.csv", _csv_text(header, rows))
        _atomic_write(Path(output) / "comparison.txt", text)
    return rows, text


def sweep(configs, param: str, values, output=None) -> tuple[list, str]:
    """MAE grid of method x parameter value (e.g. ``target.angle``)."""
    header = ["method"] + [f"{param}={v}" for v in values] + ["std_across"]
    rows = []
    for c in configs:
        means = []
        for v in values:
            r = run_experiment(c.with_overrides([f"{param}={v}"]))
            means.append(r.mae_mean)
        rows.append([c.method] + [_fmt(m) for m in means] + [_fmt(float(np.std(means)))])
    text = _aligned(header, rows)
    if output:
        _atomic_write(Path(output) / "sweep.csv", _csv_text(header, rows))
        _atomic_write(Path(output) / "sweep.txt", text)
    return rows, text


def _aligned(header, rows) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in cells)


def _read_csv(path) -> tuple[list, list]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path} is empty")
    return rows[0], rows[1:]


def export_plot_data(input_path, kind: str, output_path, bins: int = 20) -> Path:
    """Turn a trace or checkpoint CSV into plotting data.

    ``scatter``: trace -> ``x_0, x_1, t``; ``hist``: trace -> norm histogram
    rows; ``curve``: checkpoints.csv -> ``n, mae_mean, mae_std``.
    """
    header, rows = _read_csv(input_path)
    if not rows:
        raise ConfigurationError(f"{input_path} has no data rows")
    if kind == "scatter":
        if "x_1" not in header:
            raise ConfigurationError("scatter export needs a trace with at least two coordinates")
        i0, i1, it = header.index("x_0"), header.index("x_1"), header.index("t")
        text = _csv_text(["x_0", "x_1", "t"], [[r[i0], r[i1], r[it]] for r in rows])
    elif kind == "hist":
        cols = [i for i, h in enumerate(header) if h.startswith("x_")]
        pts = np.array([[float(r[i]) for i in cols] for r in rows])
        counts, freqs, edges = norm_histogram(pts, bins)
        text = _csv_text(["bin_lo", "bin_hi", "count", "frequency"],
                         [[_fmt(edges[i]), _fmt(edges[i + 1]), int(counts[i]), _fmt(freqs[i])]
                          for i in range(bins)])
    elif kind == "curve":
        need = ["n", "mae_mean", "mae_std"]
        if any(h not in header for h in need):
            raise ConfigurationError("curve export needs a checkpoints CSV")
        idx = [header.index(h) for h in need]
        text = _csv_text(need, [[r[i] for i in idx] for r in rows])
    else:
        raise ConfigurationError(f"unknown export kind {kind!r}")
    out = Path(output_path)
    _atomic_write(out, text)
    return out
