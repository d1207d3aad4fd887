"""Drive optimizers over epochs and persist per-epoch metrics as CSV."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .. import data as data_mod
from ..model import Batch, NetworkSpec, Objective, accuracy, loss, loss_and_gradient, rmse
from ..numerics import Rng, uniform_init
from ..optim import (
    NAQ, ONAQ, SGD, SVRG, SVRG2, SVRNAQ, Adam, BatchSampler, DivergenceError, StepSchedule,
)
from .config import LIMITED_MEMORY, ConfigError, RunConfig

log = logging.getLogger(__name__)

COLUMNS = (
    "epoch", "train_loss", "train_rmse", "test_rmse_or_error", "test_accuracy",
    "full_grad_evals", "minibatch_grad_evals", "curvature_skips", "status", "wall_time_s",
)
TIMING_COLUMNS = ("wall_time_s",)


@dataclass
class RunRecord:
    epoch: int
    train_loss: float
    train_rmse: float | None
    test_rmse_or_error: float
    test_accuracy: float | None
    full_grad_evals: int
    minibatch_grad_evals: int
    curvature_skips: int
    status: str = "ok"
    wall_time_s: float = 0.0

    def row(self) -> list[str]:
        out = []
        for key in COLUMNS:
            v = getattr(self, key)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


@dataclass
class Problem:
    spec: NetworkSpec
    train: Batch
    test: Batch


def _one_hot(labels) -> np.ndarray:
    labels = np.asarray(labels).ravel().astype(int)
    classes = np.unique(labels)
    return (labels[:, None] == classes[None, :]).astype(np.float64)


def load_problem(cfg: RunConfig) -> Problem:
    """Load or synthesize the dataset, split it and build the network spec."""
    if cfg.dataset == "synthetic-quadratic":
        ds = data_mod.synth_quadratic(cfg.synth_d, cfg.synth_cond, seed=cfg.synth_seed, n_samples=cfg.synth_n).dataset
    elif cfg.dataset == "synthetic-regression":
        ds = data_mod.synth_regression(cfg.synth_n, cfg.synth_features, seed=cfg.synth_seed)
    else:
        ds = data_mod.load_csv(cfg.dataset, target_columns=cfg.target_column)

    classify = cfg.output_activation == "softmax"
    if classify:
        ds = data_mod.Dataset(ds.features, _one_hot(ds.targets), name=ds.name, feature_names=ds.feature_names)
    split = data_mod.SplitSpec(cfg.train_fraction, cfg.split_seed)
    tr_idx, te_idx = data_mod.split_indices(len(ds), split)
    if cfg.normalize and ds.n_features:
        ds = data_mod.znormalize(ds, stats_from=tr_idx, targets=not classify)
    train, test = ds.take(tr_idx), ds.take(te_idx)

    if cfg.network:
        sizes = tuple(int(p) for p in cfg.network.split("-"))
    else:
        sizes = (ds.n_features, ds.n_outputs)
    if sizes[0] != ds.n_features or sizes[-1] != ds.n_outputs:
        raise ConfigError(
            f"network {cfg.network} does not match data with {ds.n_features} inputs and {ds.n_outputs} outputs"
        )
    spec = NetworkSpec(sizes, output_activation=cfg.output_activation,
                       loss="cross_entropy" if classify else "mse")
    return Problem(spec, Batch(train.features, train.targets), Batch(test.features, test.targets))


def make_optimizer(cfg: RunConfig, w0):
    name = cfg.optimizer
    memory = cfg.memory if name in LIMITED_MEMORY else None
    schedule = StepSchedule(cfg.resolved("alpha0"))
    mu = cfg.resolved("mu")
    norm = cfg.resolved("normalize_direction")
    if name == "sgd":
        return SGD(w0, alpha=cfg.lr if cfg.lr is not None else 0.025)
    if name == "adam":
        return Adam(w0, alpha=cfg.lr if cfg.lr is not None else 1e-3)
    if name == "svrg":
        return SVRG(w0, alpha=cfg.svrg_alpha)
    if name == "svrg2":
        return SVRG2(w0, schedule, memory=cfg.memory, svrg_alpha=cfg.svrg_alpha, normalize=norm)
    if name in ("svrnaq", "svrlnaq"):
        return SVRNAQ(w0, mu, schedule, memory=memory, svrg_alpha=cfg.svrg_alpha, normalize=norm)
    if name in ("onaq", "olnaq"):
        return ONAQ(w0, mu, schedule, memory=memory, normalize=norm)
    if name in ("naq", "lnaq"):
        return NAQ(w0, mu, schedule, memory=memory, normalize=norm)
    raise ConfigError(f"unknown optimizer {name!r}")


def _metrics(problem: Problem, w):
    spec = problem.spec
    train_loss = loss(spec, w, problem.train)
    if spec.is_classifier:
        acc = accuracy(spec, w, problem.test)
        return train_loss, None, 1.0 - acc, acc
    return train_loss, rmse(spec, w, problem.train), rmse(spec, w, problem.test), None


def _record(problem, w, epoch, obj, skips, wall):
    tl, tr_rmse, test_err, acc = _metrics(problem, w)
    return RunRecord(epoch, tl, tr_rmse, test_err, acc, obj.full_grad_evals, obj.minibatch_grad_evals, skips,
                     "ok", wall)


def params_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".params.npy")


def run(cfg: RunConfig, problem: Problem | None = None) -> list[RunRecord]:
    """Execute one configuration and write its metrics CSV.

    Records are cumulative in their counters and flushed after each epoch.
    The epoch-0 row holds the metrics at initialization. Divergence appends a
    ``status=diverged`` row and re-raises.
    """
    problem = problem or load_problem(cfg)
    cfg.validate(n_train=problem.train.size)
    spec = problem.spec
    rng = Rng(cfg.seed)
    w0 = uniform_init(rng.stream("init"), spec.n_params, -0.5, 0.5)
    obj = Objective(spec, problem.train.inputs, problem.train.targets)
    sampler = BatchSampler(rng.stream("batches"), obj.n_samples, cfg.batch_size)
    opt = make_optimizer(cfg, w0)

    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    records: list[RunRecord] = []
    with out.open("w", newline="") as fh:
        fh.write(f"# config: {cfg.to_text()}\n")
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        fh.flush()
        if cfg.epochs == 0:
            return records

        def emit(rec):
            records.append(rec)
            writer.writerow(rec.row())
            fh.flush()

        emit(_record(problem, opt.w, 0, obj, 0, 0.0))
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.monotonic()
            try:
                opt.run_epoch(obj, sampler)
            except DivergenceError:
                nan = float("nan")
                emit(RunRecord(epoch, nan, nan, nan, None, obj.full_grad_evals, obj.minibatch_grad_evals,
                               opt.curvature_skips, "diverged", time.monotonic() - t0))
                log.warning("%s diverged in epoch %d", cfg.optimizer, epoch)
                raise
            emit(_record(problem, opt.w, epoch, obj, opt.curvature_skips, time.monotonic() - t0))
            log.info("%s epoch %d train_loss=%.6g", cfg.optimizer, epoch, records[-1].train_loss)
    np.save(params_path(out), opt.w)
    return records


def compare_prefix(out: str) -> str:
    p = Path(out)
    return str(p.with_suffix("")) if p.suffix == ".csv" else str(p)


def _run_safely(cfg: RunConfig, problem: Problem):
    try:
        return run(cfg, problem), None
    except DivergenceError as exc:
        return None, str(exc)


def compare(cfg: RunConfig, optimizers, workers: int = 1):
    """Run ``cfg`` once per optimizer on the same split and seed.

    Writes ``<prefix>_<optimizer>.csv`` per optimizer plus a merged wide
    table ``<prefix>_compare.csv`` keyed by epoch. Returns a mapping from
    optimizer name to its records (None for a diverged run) and the merged
    table path.
    """
    optimizers = list(dict.fromkeys(optimizers))
    if not optimizers:
        raise ConfigError("compare needs at least one optimizer")
    prefix = compare_prefix(cfg.out)
    configs = [cfg.with_optimizer(o, out=f"{prefix}_{o}.csv") for o in optimizers]
    problem = load_problem(cfg)
    for c in configs:
        c.validate(n_train=problem.train.size)

    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_safely, configs, [problem] * len(configs)))
    else:
        results = [_run_safely(c, problem) for c in configs]

    by_opt = {}
    for o, (records, err) in zip(optimizers, results):
        if err:
            log.warning("%s: %s", o, err)
        by_opt[o] = records
    merged = Path(f"{prefix}_compare.csv")
    write_merged(merged, by_opt, cfg)
    return by_opt, merged


MERGED_METRICS = ("train_loss", "train_rmse", "test_rmse_or_error", "full_grad_evals", "minibatch_grad_evals")


def write_merged(path: Path, by_opt: dict, cfg: RunConfig) -> None:
    epochs = range(0, cfg.epochs + 1) if cfg.epochs else range(0)
    header = ["epoch"] + [f"{o}_{m}" for o in by_opt for m in MERGED_METRICS]
    with path.open("w", newline="") as fh:
        fh.write(f"# config: {cfg.to_text()}; optimizers={','.join(by_opt)}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for e in epochs:
            row = [str(e)]
            for records in by_opt.values():
                rec = records[e] if records and e < len(records) else None
                for m in MERGED_METRICS:
                    v = getattr(rec, m) if rec else None
                    row.append("" if v is None else repr(v) if isinstance(v, float) else str(v))
            w.writerow(row)


def read_metrics(path) -> list[dict]:
    """Parse a metrics CSV (skipping the config comment line) into dict rows."""
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


@dataclass
class GradcheckReport:
    max_rel_err: float
    worst_index: int
    worst_coordinate: str
    tolerance: float
    n_params: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def as_dict(self):
        return asdict(self) | {"passed": self.passed}


def describe_coordinate(spec: NetworkSpec, index: int) -> str:
    """Human-readable name of flat parameter ``index``, e.g. ``layer 2 weight[3,0]``."""
    pos = 0
    for li, (fan_in, fan_out) in enumerate(zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]), 1):
        if index < pos + fan_in * fan_out:
            r, c = divmod(index - pos, fan_out)
            return f"layer {li} weight[{r},{c}]"
        pos += fan_in * fan_out
        if index < pos + fan_out:
            return f"layer {li} bias[{index - pos}]"
        pos += fan_out
    raise IndexError(index)


def gradcheck(cfg: RunConfig, tolerance: float = 1e-6, h: float = 1e-5, problem: Problem | None = None):
    """Compare backprop against central differences on one random batch.

    The relative error per coordinate is ``|g - fd| / max(|g|, |fd|, 1e-8)``;
    the difference quotients are evaluated in ``np.longdouble``.
    """
    problem = problem or load_problem(cfg)
    spec = problem.spec
    rng = Rng(cfg.seed)
    w = uniform_init(rng.stream("init"), spec.n_params, -0.5, 0.5)
    b = min(cfg.batch_size, problem.train.size)
    idx = rng.stream("gradcheck").choice(problem.train.size, size=b, replace=False)
    batch = Batch(problem.train.inputs[idx], problem.train.targets[idx])
    _, g = loss_and_gradient(spec, w, batch)
    # extended precision keeps roundoff in the differences well below the tolerance
    wl = w.astype(np.longdouble)
    fd = np.empty_like(w)
    for i in range(w.size):
        wp, wm = wl.copy(), wl.copy()
        wp[i] += h
        wm[i] -= h
        diff = loss(spec, wp, batch, np.longdouble) - loss(spec, wm, batch, np.longdouble)
        fd[i] = float(diff / (wp[i] - wm[i]))
    rel = np.abs(g - fd) / np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-8)
    worst = int(np.argmax(rel))
    return GradcheckReport(float(rel[worst]), worst, describe_coordinate(spec, worst), tolerance, spec.n_params)
