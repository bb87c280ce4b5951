"""Benchmark pipeline: generate CEs for every negative instance and score them."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import evaluators as ev
from .data import Dataset, default_preprocess, load_csv, synth_gaussian_blobs
from .generators import DISPLAY_NAMES, CounterfactualResult, GeneratorConfig, generate, resolve_method
from .model import TrainConfig, init_model, load_model, train
from .task import ClassificationTask, model_ensemble


class ConfigError(ValueError):
    pass


# evaluation name -> (report column, kind); "pct" columns average 0/1 flags over
# all instances, "mean" columns average over instances with a value
EVALUATIONS = {
    "validity": ("validity_pct", "pct"),
    "proximity": ("proximity_l2", "mean"),
    "delta-robustness": ("robust_pct", "pct"),
    "approx-delta": ("approx_robust_pct", "pct"),
    "retraining": ("retrain_valid_pct", "pct"),
    "set-distance": ("set_distance", "mean"),
    "multiplicity": ("multiplicity_pct", "pct"),
}

TABLE_HEADERS = {
    "time_s": ("Time (s)", 1),
    "validity_pct": ("Validity (%)", 1),
    "proximity_l2": ("Proximity", 2),
    "robust_pct": ("Rob. (%)", 1),
    "approx_robust_pct": ("Approx. rob. (%)", 1),
    "retrain_valid_pct": ("Retrain val. (%)", 1),
    "set_distance": ("Set dist.", 2),
    "multiplicity_pct": ("Multiplicity (%)", 1),
}


@dataclass(frozen=True)
class EvalSettings:
    retrain_variants: int = 10
    retrain_epochs: int = 5
    ensemble_size: int = 5
    set_sigma: float = 0.05
    set_perturb: int = 5
    approx_R: float = 0.99
    approx_alpha: float = 0.05


@dataclass(frozen=True)
class BenchConfig:
    methods: tuple[str, ...]
    evaluations: tuple[str, ...] = ("validity", "proximity", "delta-robustness")
    data_path: str | None = None
    synthetic: tuple[int, int, float] | None = None
    label: str = "target"
    preprocess: str = "minmax"
    layers: tuple[int, ...] | None = None
    train: TrainConfig = TrainConfig()
    model_path: str | None = None
    neg_value: int = 0
    delta: float = 0.005
    seed: int = 0
    out: str = "table"
    workers: int = 1
    generator: GeneratorConfig | None = None
    eval_settings: EvalSettings = EvalSettings()

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("at least one method is required")
        if not self.evaluations:
            raise ConfigError("at least one evaluation is required")
        try:
            methods = tuple(resolve_method(m) for m in self.methods)
        except KeyError as e:
            raise ConfigError(e.args[0]) from None
        evals = tuple(e.strip().lower() for e in self.evaluations)
        for e in evals:
            if e not in EVALUATIONS:
                raise ConfigError(f"unknown evaluation {e!r}; choose from {', '.join(EVALUATIONS)}")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if (self.data_path is None) == (self.synthetic is None):
            raise ConfigError("give exactly one of a CSV path or a synthetic spec")
        if self.out not in ("table", "csv"):
            raise ConfigError("out must be 'table' or 'csv'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.neg_value not in (0, 1):
            raise ConfigError("neg_value must be 0 or 1")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "evaluations", evals)

    def generator_config(self) -> GeneratorConfig:
        base = self.generator or GeneratorConfig()
        return replace(base, seed=self.seed, delta=self.delta)


@dataclass
class BenchmarkReport:
    columns: list[str]
    rows: list[dict]
    metadata: dict
    details: list[dict] = field(default_factory=list)
    results: dict[str, list[CounterfactualResult]] = field(default_factory=dict)
    task: ClassificationTask | None = None

    def row(self, method: str) -> dict:
        key = resolve_method(method)
        return next(r for r in self.rows if r["method"] == key)


# ---------------------------------------------------------------- setup

def load_data(cfg: BenchConfig) -> Dataset:
    if cfg.data_path is not None:
        ds = load_csv(cfg.data_path, cfg.label)
    else:
        n, dim, sep = cfg.synthetic
        ds = synth_gaussian_blobs(int(n), int(dim), float(sep), cfg.seed)
    if cfg.preprocess != "none":
        ds = default_preprocess(ds, cfg.preprocess)
    return ds


def build_task(cfg: BenchConfig, ds: Dataset | None = None) -> ClassificationTask:
    ds = ds if ds is not None else load_data(cfg)
    if cfg.model_path:
        model = load_model(cfg.model_path)
    else:
        dims = list(cfg.layers) if cfg.layers else [ds.n_features, 8, 1]
        if dims[0] != ds.n_features:
            raise ConfigError(f"layers start with {dims[0]} inputs but the data has {ds.n_features} features")
        tcfg = replace(cfg.train, seed=cfg.seed)
        model = train(init_model(dims, cfg.seed), ds, tcfg)
    return ClassificationTask(model, ds, cfg.neg_value)


# ---------------------------------------------------------------- per-instance work

_W: dict = {}


def _init_worker(state):
    _W.clear()
    _W.update(state)


def _evaluate_instance(task, res: CounterfactualResult, x, state) -> dict:
    evals, gcfg, es = state["evaluations"], state["gen_cfg"], state["eval_settings"]
    idx, ce = res.instance_index, res.ce
    row = {"found": int(ce is not None)}
    for e in evals:
        col, _ = EVALUATIONS[e]
        if e == "validity":
            v = float(ce is not None and task.is_valid_ce(ce))
        elif e == "proximity":
            v = float(np.linalg.norm(ce - x)) if ce is not None else math.nan
        elif e == "delta-robustness":
            v = float(ce is not None and ev.eval_delta_robustness(
                task, ce, gcfg.delta, seed=gcfg.seed + idx, perturb_biases=gcfg.perturb_biases).certified)
        elif e == "approx-delta":
            v = float(ce is not None and ev.eval_approx_delta_robustness(
                task, ce, gcfg.delta, es.approx_R, es.approx_alpha, gcfg.seed + idx, gcfg.perturb_biases))
        elif e == "retraining":
            v = float(ev.eval_validity_after_retraining(task, [(idx, ce)], 0, None,
                                                        variants=state["variants"]).aggregate / 100.0)
        elif e == "multiplicity":
            v = 0.0 if ce is None else ev.eval_multiplicity_validity(state["ensemble"], ce, task.target_class)
        elif e == "set-distance":
            v = ev.eval_set_distance_robustness(task, res.method, x, es.set_sigma, es.set_perturb,
                                                seed=gcfg.seed, cfg=gcfg, index=idx)
        row[col] = v
    return row


def _run_instance(args):
    method, idx = args
    task, gcfg = _W["task"], _W["gen_cfg"]
    x = task.data.X[idx]
    try:
        res = generate(method, task, x, gcfg, index=idx)
        error = ""
    except Exception as e:  # recorded, never aborts the run
        res = CounterfactualResult(idx, None, False, math.nan, 0.0, method, {"error": repr(e)})
        error = f"{type(e).__name__}: {e}"
    detail = {"method": method, "instance": idx, "time_s": res.wall_time,
              "robust_flag": int(bool(res.diagnostics.get("robust", False))), "error": error}
    detail.update(_evaluate_instance(task, res, x, _W))
    return res, detail


def aggregate(details: list[dict], method: str, evaluations) -> dict:
    """Method row from its per-instance detail rows."""
    mine = [d for d in details if d["method"] == method]
    row = {"method": method, "time_s": float(sum(d["time_s"] for d in mine))}
    for e in evaluations:
        col, kind = EVALUATIONS[e]
        vals = np.array([d[col] for d in mine], dtype=float)
        if kind == "pct":
            row[col] = 100.0 * float(vals.mean()) if len(vals) else math.nan
        else:
            vals = vals[~np.isnan(vals)]
            row[col] = float(vals.mean()) if len(vals) else math.nan
    return row


def default_benchmark(task: ClassificationTask, methods, evaluations=("validity", "proximity", "delta-robustness"),
                      neg_value: int | None = None, delta: float = 0.005, seed: int = 0, workers: int = 1,
                      generator: GeneratorConfig | None = None, eval_settings: EvalSettings = EvalSettings(),
                      train_cfg: TrainConfig = TrainConfig(), metadata: dict | None = None) -> BenchmarkReport:
    """Run ``methods`` over every instance ``task`` predicts as ``neg_value`` and score them."""
    if neg_value is not None and neg_value != task.neg_value:
        task = ClassificationTask(task.model, task.data, neg_value)
    methods = [resolve_method(m) for m in methods]
    evaluations = [e.strip().lower() for e in evaluations]
    for e in evaluations:
        if e not in EVALUATIONS:
            raise ConfigError(f"unknown evaluation {e!r}; choose from {', '.join(EVALUATIONS)}")
    gcfg = replace(generator or GeneratorConfig(), seed=seed, delta=delta)
    state = {"task": task, "gen_cfg": gcfg, "evaluations": evaluations, "eval_settings": eval_settings}
    if "retraining" in evaluations:
        ft = replace(train_cfg, epochs=eval_settings.retrain_epochs)
        state["variants"] = ev.retrained_variants(task, eval_settings.retrain_variants, ft, seed + 1000)
    if "multiplicity" in evaluations:
        state["ensemble"] = model_ensemble(task, eval_settings.ensemble_size, train_cfg, seed + 2000)
    negatives = [i for i, _ in task.negative_instances()]
    jobs = [(m, i) for m in methods for i in negatives]
    if workers > 1 and jobs:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(state,)) as pool:
            out = list(pool.map(_run_instance, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        _init_worker(state)
        out = [_run_instance(j) for j in jobs]
    results = {m: [] for m in methods}
    details = []
    for res, det in out:
        results[det["method"]].append(res)
        details.append(det)
    columns = ["time_s"] + [EVALUATIONS[e][0] for e in evaluations]
    rows = [aggregate(details, m, evaluations) for m in methods]
    meta = {"seed": seed, "delta": delta, "neg_value": task.neg_value, "instance_count": len(negatives),
            "dataset_fingerprint": task.data.fingerprint(), "methods": ",".join(methods),
            "evaluations": ",".join(evaluations)}
    if not negatives:
        meta["empty"] = 1
    meta.update(metadata or {})
    return BenchmarkReport(columns, rows, meta, details, results, task)


def run_benchmark(cfg: BenchConfig) -> BenchmarkReport:
    ds = load_data(cfg)
    task = build_task(cfg, ds)
    extra = {"preprocess": cfg.preprocess, "layers": ",".join(map(str, task.model.layer_dims)),
             "epochs": cfg.train.epochs, "learning_rate": cfg.train.learning_rate,
             "batch_size": cfg.train.batch_size}
    return default_benchmark(task, cfg.methods, cfg.evaluations, cfg.neg_value, cfg.delta, cfg.seed,
                             cfg.workers, cfg.generator, cfg.eval_settings, cfg.train, extra)


# ---------------------------------------------------------------- output

def _cell(v, digits):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "n/a"
    return f"{v:.{digits}f}"


def render_table(r: BenchmarkReport) -> str:
    heads = ["Method"] + [TABLE_HEADERS[c][0] for c in r.columns]
    body = [[DISPLAY_NAMES.get(row["method"], row["method"])]
            + [_cell(row[c], TABLE_HEADERS[c][1]) for c in r.columns] for row in r.rows]
    widths = [max(len(h), *(len(b[k]) for b in body)) if body else len(h) for k, h in enumerate(heads)]
    fmt = lambda cells: " | ".join(
        c.ljust(w) if k == 0 else c.rjust(w) for k, (c, w) in enumerate(zip(cells, widths)))
    lines = [fmt(heads), "-+-".join("-" * w for w in widths)] + [fmt(b) for b in body]
    return "\n".join(lines) + "\n"


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def report_csv(r: BenchmarkReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method"] + r.columns)
    for row in r.rows:
        w.writerow([row["method"]] + [_num(row[c]) for c in r.columns])
    for k, v in r.metadata.items():
        buf.write(f"# {k}={v}\n")
    return buf.getvalue()


DETAIL_FIXED = ["method", "instance", "time_s", "found", "robust_flag", "error"]


def detail_csv(r: BenchmarkReport) -> str:
    cols = DETAIL_FIXED + [c for c in r.columns if c != "time_s"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for d in r.details:
        w.writerow([d[c] if c in ("method", "error") else _num(d[c]) for c in cols])
    return buf.getvalue()


def write_csv(r: BenchmarkReport, path, detail_path=None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(report_csv(r))
    if detail_path:
        with open(detail_path, "w", newline="") as fh:
            fh.write(detail_csv(r))


def read_report_csv(path) -> tuple[list[dict], dict]:
    """Parse a report written by :func:`write_csv` back into rows and metadata."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    meta = {}
    body = []
    for line in lines:
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        elif line:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    rows = [{h: (v if h == "method" else float(v)) for h, v in zip(header, rec)} for rec in reader]
    return rows, meta


def read_detail_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for rec in reader:
            d = {k: (v if k in ("method", "error") else float(v)) for k, v in rec.items()}
            d["instance"] = int(d["instance"])
            out.append(d)
    return out
