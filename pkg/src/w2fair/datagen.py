"""CSV ingestion, preprocessing, and controlled label-bias injection.

Two bias protocols corrupt labels of the ``S = 0, Y = 1`` rows only:

* SR flips a random fraction of the rows matching a feature predicate.
* ST coarsely trains a model and flips the lowest-scored fraction.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import operator
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .datamodel import Dataset


class DatagenError(ValueError):
    pass


class EmptyFileError(DatagenError):
    pass


class MissingColumnError(DatagenError):
    pass


class NonNumericError(DatagenError):
    pass


class Role(str, enum.Enum):
    FEATURE = "feature"
    TARGET = "target"
    SENSITIVE = "sensitive"
    IGNORE = "ignore"


class Encoding(str, enum.Enum):
    NUMERIC = "numeric"
    ONEHOT = "onehot"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: Role = Role.FEATURE
    encoding: Encoding = Encoding.NUMERIC
    positive: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "encoding", Encoding(self.encoding))


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]
    header: tuple[str, ...] | None = None
    na_values: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        roles = [c.role for c in self.columns]
        if roles.count(Role.TARGET) != 1 or roles.count(Role.SENSITIVE) != 1:
            raise DatagenError("schema needs exactly one target and one sensitive column")

    def column(self, role: Role) -> ColumnSpec:
        return next(c for c in self.columns if c.role is role)

    @property
    def features(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.role is Role.FEATURE]

    @classmethod
    def from_dict(cls, d) -> "Schema":
        if isinstance(d, list):
            d = {"columns": d}
        return cls(
            tuple(ColumnSpec(**c) for c in d["columns"]),
            tuple(d["header"]) if d.get("header") else None,
            tuple(d.get("na_values", ())),
        )

    def to_dict(self) -> dict:
        out = {
            "columns": [
                {"name": c.name, "role": c.role.value, "encoding": c.encoding.value}
                | ({"positive": c.positive} if c.positive is not None else {})
                for c in self.columns
            ]
        }
        if self.header:
            out["header"] = list(self.header)
        if self.na_values:
            out["na_values"] = list(self.na_values)
        return out


def native_schema(header) -> Schema:
    """Schema of files written by :func:`write_csv`: numeric features, then ``y`` and ``s``."""
    cols = [ColumnSpec(h) for h in header if h not in ("y", "s")]
    return Schema(tuple(cols) + (ColumnSpec("y", Role.TARGET), ColumnSpec("s", Role.SENSITIVE)))


def load_schema(name_or_path) -> Schema | None:
    """Bundled preset (``adult``), ``native`` (returns None: infer from header), or a JSON file."""
    if name_or_path in (None, "native"):
        return None
    if name_or_path == "adult":
        text = resources.files("w2fair").joinpath("presets/adult.json").read_text()
        return Schema.from_dict(json.loads(text))
    try:
        return Schema.from_dict(json.loads(Path(name_or_path).read_text()))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatagenError(f"cannot read schema {name_or_path}: {exc}") from exc


def read_rows(path, schema: Schema | None = None) -> tuple[list[str], list[list[str]]]:
    """Header and data rows; ``schema.header`` is used when the file has none."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh, skipinitialspace=True) if r and not r[0].startswith("|")]
    except OSError as exc:
        raise DatagenError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise EmptyFileError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if schema is not None and schema.header and header != list(schema.header):
        header, body = list(schema.header), rows
    if not body:
        raise EmptyFileError(f"{path}: no data rows")
    return header, [[v.strip() for v in r] for r in body]


def _binary(value: str, spec: ColumnSpec, row: int) -> int:
    if spec.positive is not None:
        return int(value.rstrip(".") == spec.positive.rstrip("."))
    try:
        x = float(value)
    except ValueError:
        raise NonNumericError(f"row {row}: column {spec.name!r} value {value!r} is not 0/1") from None
    if x not in (0.0, 1.0):
        raise NonNumericError(f"row {row}: column {spec.name!r} value {value!r} is not 0/1")
    return int(x)


@dataclass
class Preprocessor:
    """One-hot levels and standardization moments fit on a training split."""

    schema: Schema
    levels: dict[str, list[str]] = field(default_factory=dict)
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def _indices(self, header):
        pos = {h: i for i, h in enumerate(header)}
        missing = [c.name for c in self.schema.columns if c.role is not Role.IGNORE and c.name not in pos]
        if missing:
            raise MissingColumnError(f"missing column(s): {', '.join(missing)}")
        return pos

    def _clean(self, header, rows):
        if not self.schema.na_values:
            return rows
        na = set(self.schema.na_values)
        return [r for r in rows if not na.intersection(r)]

    def fit_levels(self, header, rows) -> "Preprocessor":
        pos = self._indices(header)
        for c in self.schema.features:
            if c.encoding is Encoding.ONEHOT:
                self.levels[c.name] = sorted({r[pos[c.name]] for r in self._clean(header, rows)})
        return self

    @property
    def feature_names(self) -> list[str]:
        names = []
        for c in self.schema.features:
            if c.encoding is Encoding.ONEHOT:
                names.extend(f"{c.name}={lv}" for lv in self.levels[c.name])
            else:
                names.append(c.name)
        return names

    def encode(self, header, rows) -> Dataset:
        """Encode rows without standardization."""
        pos = self._indices(header)
        rows = self._clean(header, rows)
        if not rows:
            raise EmptyFileError("no usable data rows")
        cols = []
        for c in self.schema.features:
            raw = [r[pos[c.name]] for r in rows]
            if c.encoding is Encoding.ONEHOT:
                lv = self.levels[c.name]
                block = np.zeros((len(rows), len(lv)))
                where = {v: k for k, v in enumerate(lv)}
                for i, v in enumerate(raw):
                    k = where.get(v)
                    if k is not None:
                        block[i, k] = 1.0
                cols.append(block)
            else:
                try:
                    cols.append(np.array(raw, dtype=np.float64).reshape(-1, 1))
                except ValueError:
                    bad = next(i for i, v in enumerate(raw) if not _is_float(v))
                    raise NonNumericError(
                        f"row {bad}: column {c.name!r} value {raw[bad]!r} is not numeric"
                    ) from None
        X = np.hstack(cols) if cols else np.zeros((len(rows), 0))
        t, s = self.schema.column(Role.TARGET), self.schema.column(Role.SENSITIVE)
        y = [_binary(r[pos[t.name]], t, i) for i, r in enumerate(rows)]
        g = [_binary(r[pos[s.name]], s, i) for i, r in enumerate(rows)]
        return Dataset(X, y, g, tuple(self.feature_names))

    def fit_scaling(self, data: Dataset) -> "Preprocessor":
        self.mean = data.X.mean(axis=0)
        std = data.X.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)
        return self

    def scale(self, data: Dataset) -> Dataset:
        if self.mean is None:
            return data
        return data.replace(X=(data.X - self.mean) / self.std)

    def transform(self, header, rows) -> Dataset:
        return self.scale(self.encode(header, rows))

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": self.schema.to_dict(),
                "levels": self.levels,
                "mean": None if self.mean is None else [float(x) for x in self.mean],
                "std": None if self.std is None else [float(x) for x in self.std],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "Preprocessor":
        d = json.loads(text)
        prep = cls(Schema.from_dict(d["schema"]), d["levels"])
        if d["mean"] is not None:
            prep.mean, prep.std = np.array(d["mean"]), np.array(d["std"])
        return prep


def _is_float(v):
    try:
        float(v)
        return True
    except ValueError:
        return False


def split_indices(n: int, train_fraction: float, seed: int):
    if not 0 < train_fraction <= 1:
        raise ValueError("train fraction must be in (0, 1]")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(math.floor(train_fraction * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def load_csv_full(path, schema: Schema | None = None, split: float = 0.75, seed: int = 0, standardize: bool = True):
    """Like :func:`load_csv` but also returns the fitted :class:`Preprocessor`."""
    header, rows = read_rows(path, schema)
    if schema is None:
        schema = native_schema(header)
    prep = Preprocessor(schema)
    prep._indices(header)
    rows = prep._clean(header, rows)
    if not rows:
        raise EmptyFileError(f"{path}: no usable data rows")
    tr_idx, te_idx = split_indices(len(rows), split, seed)
    train_rows = [rows[i] for i in tr_idx]
    test_rows = [rows[i] for i in te_idx]
    prep.fit_levels(header, train_rows)
    train = prep.encode(header, train_rows)
    test = prep.encode(header, test_rows) if test_rows else None
    if standardize:
        prep.fit_scaling(train)
        train = prep.scale(train)
        test = prep.scale(test) if test is not None else None
    return train, test, prep


def load_csv(path, schema: Schema | None = None, split: float = 0.75, seed: int = 0, standardize: bool = True):
    """Read, one-hot encode, split and standardize a CSV file.

    Returns ``(train, test)``; ``test`` is None when ``split == 1``.
    Standardization moments come from the training split only.
    """
    train, test, _ = load_csv_full(path, schema, split, seed, standardize)
    return train, test


def read_dataset(path, schema: Schema | None = None, prep: Preprocessor | None = None) -> Dataset:
    """Whole file as one Dataset, with no split and no refitting."""
    header, rows = read_rows(path, schema)
    if prep is None:
        prep = Preprocessor(schema or native_schema(header)).fit_levels(header, rows)
    return prep.transform(header, rows)


def write_csv(data: Dataset, path) -> None:
    """Native format: feature columns, then ``y`` and ``s``; floats written with ``repr``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + ["y", "s"])
        for row, y, s in zip(data.X, data.y, data.s):
            w.writerow([repr(float(v)) for v in row] + [int(y), int(s)])


def write_index_list(indices, path, name: str = "row") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(name + "\n")
        for i in indices:
            fh.write(f"{int(i)}\n")


# -- synthetic data and bias injection -----------------------------------------


def make_two_gaussians(n: int, p: int, seed: int, separation: float = 1.0, group_p: float = 0.5, group_feature: bool = True) -> Dataset:
    """Balanced labels with ``X | Y ~ N(+-separation/2 * 1, I)`` and Bernoulli groups.

    With ``group_feature`` the last of the ``p`` columns is the group indicator,
    so a model can learn group-specific rules from biased labels.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    s = (rng.random(n) < group_p).astype(np.int64)
    n_gauss = p - 1 if group_feature else p
    centers = np.where(y[:, None] == 1, 0.5, -0.5) * separation
    X = centers + rng.standard_normal((n, n_gauss))
    names = [f"x{i}" for i in range(n_gauss)]
    if group_feature:
        X = np.hstack([X, s[:, None].astype(np.float64)])
        names.append("group")
    return Dataset(X, y, s, tuple(names))


def assign_random_group(data: Dataset, p: float, seed: int) -> Dataset:
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    s = (np.random.default_rng(seed).random(data.n) < p).astype(np.int64)
    return data.replace(s=s)


_OPS = {
    "==": operator.eq, "!=": operator.ne, "<=": operator.le,
    ">=": operator.ge, "<": operator.lt, ">": operator.gt,
}
_PRED_RE = re.compile(r"^\s*(.+?)\s*(==|!=|<=|>=|<|>)\s*([-+0-9.eE]+)\s*$")

Predicate = Callable[[Dataset], np.ndarray]


def parse_predicate(text: str | None) -> Predicate:
    """``"all"`` or ``"<feature> <op> <number>"``, e.g. ``"x0 > 0"``."""
    if text is None or text.strip() in ("", "all"):
        return lambda d: np.ones(d.n, dtype=bool)
    m = _PRED_RE.match(text)
    if not m:
        raise DatagenError(f"cannot parse predicate {text!r}")
    name, op, value = m.group(1), _OPS[m.group(2)], float(m.group(3))

    def pred(d: Dataset) -> np.ndarray:
        if name not in d.feature_names:
            raise MissingColumnError(f"predicate column {name!r} not among features")
        return op(d.X[:, d.feature_names.index(name)], value)

    pred.__doc__ = text
    return pred


class Protocol(str, enum.Enum):
    SR = "sr"
    ST = "st"


@dataclass(frozen=True)
class BiasSpec:
    protocol: Protocol = Protocol.SR
    flip_fraction: float = 0.65
    predicate: Predicate | None = None
    coarse_epochs: int = 2

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if not 0 <= self.flip_fraction <= 1:
            raise ValueError("flip fraction must lie in [0, 1]")


def _eligible(data: Dataset):
    return (data.s == 0) & (data.y == 1)


def _flip(data: Dataset, rows) -> Dataset:
    y = data.y.copy()
    y[rows] = 0
    return data.replace(y=y)


def inject_bias_sr(data: Dataset, spec: BiasSpec, seed: int):
    """Flip ``floor(fraction * eligible)`` random eligible labels to 0.

    Eligible rows have ``S = 0``, ``Y = 1`` and satisfy the predicate.
    Returns ``(biased, flipped_rows)``.
    """
    pred = spec.predicate or parse_predicate(None)
    eligible = np.flatnonzero(_eligible(data) & pred(data))
    if eligible.size == 0:
        raise DatagenError("no eligible rows")
    k = int(math.floor(spec.flip_fraction * eligible.size))
    rows = np.sort(np.random.default_rng(seed).choice(eligible, size=k, replace=False))
    return _flip(data, rows), rows


def default_coarse_factory(data: Dataset, epochs: int, seed: int):
    """Unregularized MLP trained for a few epochs."""
    from .datamodel import TrainConfig
    from .model import Mlp
    from .trainer import train

    cfg = TrainConfig(epochs=epochs, batch_size=min(50, data.n), seed=seed)
    model, _ = train(data, cfg, Mlp.init(data.p, rng=seed))
    return model


def inject_bias_st(data: Dataset, spec: BiasSpec, model_factory=default_coarse_factory, seed: int = 0):
    """Flip the lowest-scored ``floor(fraction * eligible)`` eligible labels; ties by row index."""
    eligible = np.flatnonzero(_eligible(data))
    if eligible.size == 0:
        raise DatagenError("no eligible rows")
    k = int(math.floor(spec.flip_fraction * eligible.size))
    if k == 0:
        return data, np.array([], dtype=np.int64)
    model = model_factory(data, spec.coarse_epochs, seed)
    scores = np.asarray(model.forward(data.X[eligible]), dtype=np.float64)
    order = np.lexsort((eligible, scores))
    rows = np.sort(eligible[order[:k]])
    return _flip(data, rows), rows
