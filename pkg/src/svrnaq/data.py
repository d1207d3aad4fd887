"""Dataset ingestion, z-normalization, train/test splitting and synthetic problems."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .numerics import Rng


class SchemaError(ValueError):
    """The file or array does not have the expected table shape."""


class ParseError(ValueError):
    def __init__(self, row: int, col: int, cell: str):
        super().__init__(f"non-numeric cell {cell!r} at row {row}, column {col}")
        self.row, self.col, self.cell = row, col, cell


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    name: str = ""
    feature_names: tuple[str, ...] | None = None
    target_names: tuple[str, ...] | None = None
    feature_means: np.ndarray | None = None
    feature_stds: np.ndarray | None = None
    target_means: np.ndarray | None = None
    target_stds: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise SchemaError(f"features {x.shape} and targets {y.shape} are not aligned tables")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[1]

    @property
    def normalized(self) -> bool:
        return self.feature_means is not None

    def take(self, idx) -> "Dataset":
        return replace(self, features=self.features[idx], targets=self.targets[idx])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    shuffle_seed: int = 0


def _sniff_delimiter(line: str) -> str:
    return ";" if line.count(";") > line.count(",") else ","


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, n_features: int | None = None, target_columns=-1, name: str | None = None) -> Dataset:
    """Read a numeric CSV into a :class:`Dataset`.

    The delimiter (``,`` or ``;``) and a header row are detected from the
    first line. ``target_columns`` is a column index or a list of indices
    (negative indices count from the end); every other column is a feature.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path} is empty")
    delim = _sniff_delimiter(lines[0])
    rows = list(csv.reader(lines, delimiter=delim))
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    else:
        first_line = 1
    if not rows:
        raise SchemaError(f"{path} has a header but no data rows")

    ncols = len(header) if header else len(rows[0])
    values = np.empty((len(rows), ncols))
    for i, row in enumerate(rows):
        if len(row) != ncols:
            raise SchemaError(f"row {i + first_line} has {len(row)} columns, expected {ncols}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(i + first_line, j + 1, cell) from None

    tcols = [target_columns] if np.isscalar(target_columns) else list(target_columns)
    tcols = sorted({c % ncols for c in tcols})
    fcols = [c for c in range(ncols) if c not in tcols]
    if not fcols:
        raise SchemaError("no feature columns left after removing targets")
    if n_features is not None and len(fcols) != n_features:
        raise SchemaError(f"expected {n_features} feature columns, found {len(fcols)}")
    names = header or [f"c{j}" for j in range(ncols)]
    return Dataset(
        features=values[:, fcols],
        targets=values[:, tcols],
        name=name or path.stem,
        feature_names=tuple(names[j] for j in fcols),
        target_names=tuple(names[j] for j in tcols),
    )


def write_csv(ds: Dataset, path) -> None:
    """Write features then targets with a header; floats use round-trip repr."""
    fnames = ds.feature_names or tuple(f"x{j}" for j in range(ds.n_features))
    tnames = ds.target_names or tuple(f"y{j}" for j in range(ds.n_outputs))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fnames + tnames)
        for x, y in zip(ds.features, ds.targets):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])


def _column_stats(a, names, what):
    mean = a.mean(axis=0)
    std = a.std(axis=0)
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        label = names[bad[0]] if names else f"#{bad[0]}"
        raise NormalizationError(f"{what} column {label} has zero variance on the train rows")
    return mean, std


def znormalize(ds: Dataset, stats_from=None, targets: bool = True) -> Dataset:
    """Scale every feature (and by default target) column to zero mean, unit variance.

    Statistics come from the rows in ``stats_from`` (all rows when None) and
    are applied to every row, so test rows never influence them.
    """
    idx = np.arange(len(ds)) if stats_from is None else np.asarray(stats_from)
    if idx.size == 0:
        raise NormalizationError("cannot compute statistics from zero rows")
    fm, fs = _column_stats(ds.features[idx], ds.feature_names, "feature")
    out = replace(ds, features=(ds.features - fm) / fs, feature_means=fm, feature_stds=fs)
    if targets:
        tm, ts = _column_stats(ds.targets[idx], ds.target_names, "target")
        out = replace(out, targets=(ds.targets - tm) / ts, target_means=tm, target_stds=ts)
    return out


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < spec.train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {spec.train_fraction}")
    n_train = int(np.floor(spec.train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} rows at {spec.train_fraction} leaves one side empty")
    perm = Rng(spec.shuffle_seed).stream("data").permutation(n)
    return perm[:n_train], perm[n_train:]


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    tr, te = split_indices(len(ds), spec)
    return ds.take(tr), ds.take(te)


def prepare(ds: Dataset, spec: SplitSpec, normalize: bool = True) -> tuple[Dataset, Dataset]:
    """Split, then z-normalize both halves with train-only statistics."""
    tr, te = split_indices(len(ds), spec)
    if normalize:
        ds = znormalize(ds, stats_from=tr, targets=True)
    return ds.take(tr), ds.take(te)


@dataclass(frozen=True)
class QuadraticProblem:
    dataset: Dataset
    optimum: np.ndarray
    hessian: np.ndarray


def synth_quadratic(d: int, cond: float = 10.0, seed: int = 0, n_samples: int = 200,
                    noise: float = 0.1) -> QuadraticProblem:
    """Least-squares data whose loss is a quadratic with a known minimizer.

    The data fits a ``(d-1)-1`` linear network (``d`` parameters including
    the bias). Feature columns are centred and shaped so the loss Hessian
    ``X1^T X1 / n`` has eigenvalues spread geometrically over ``[1, cond]``
    (the bias direction has eigenvalue 1). Residual noise is projected out of
    the column space, so ``optimum`` is an exact stationary point while
    per-sample gradients there remain nonzero.
    """
    if d < 1 or cond < 1:
        raise ValueError("need d >= 1 and cond >= 1")
    if n_samples < d + 1:
        raise ValueError("n_samples must exceed d")
    gen = Rng(seed).stream("synthetic")
    k = d - 1
    if k:
        Z = gen.standard_normal((n_samples, k))
        Z -= Z.mean(axis=0)
        Q, _ = np.linalg.qr(Z)
        eig = np.geomspace(1.0, cond, k) if k > 1 else np.array([cond])
        V, _ = np.linalg.qr(gen.standard_normal((k, k)))
        X = np.sqrt(n_samples) * (Q * np.sqrt(eig)) @ V.T
    else:
        X = np.empty((n_samples, 0))
    X1 = np.hstack([X, np.ones((n_samples, 1))])
    w_star = gen.uniform(-1.0, 1.0, size=d)
    r = gen.standard_normal(n_samples)
    Qa, _ = np.linalg.qr(X1)
    r -= Qa @ (Qa.T @ r)
    r *= noise * np.sqrt(n_samples) / max(np.linalg.norm(r), 1e-300)
    y = X1 @ w_star + r
    H = X1.T @ X1 / n_samples
    ds = Dataset(X, y[:, None], name=f"quadratic-d{d}-cond{cond:g}")
    return QuadraticProblem(ds, w_star, H)


def synth_regression(n_samples: int, n_features: int, hidden: int = 8, noise: float = 0.3,
                     seed: int = 0, name: str = "synthetic-regression") -> Dataset:
    """Nonlinear regression data from a random sigmoid teacher network.

    Used as a stand-in with the shape of the UCI regression sets when those
    files are not available.
    """
    gen = Rng(seed).stream("synthetic")
    X = gen.standard_normal((n_samples, n_features))
    W1 = gen.normal(0, 1.5 / np.sqrt(n_features), size=(n_features, hidden))
    b1 = gen.normal(0, 0.5, size=hidden)
    w2 = gen.normal(0, 1.0, size=hidden)
    h = 1.0 / (1.0 + np.exp(-(X @ W1 + b1)))
    y = h @ w2 + 0.3 * np.sin(X[:, 0] * X[:, 1 % n_features]) + noise * gen.standard_normal(n_samples)
    return Dataset(X, y[:, None], name=name)
