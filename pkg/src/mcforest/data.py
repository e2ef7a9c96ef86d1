"""Tabular study data: container, validation diagnostics, CSV io, splitting.

A study dataset bundles a dense covariate matrix ``X`` (n rows, p columns),
a binary treatment vector ``Z``, an outcome vector ``Y``, a study label
vector ``S`` (0 = primary, 1 = auxiliary) and, for synthetic data, the
ground-truth conditional treatment effect ``tau_true`` of every row.

Values are immutable after construction; every transformation returns a
new dataset. Construction never raises on bad content -- ``validate``
reports problems as diagnostics and fitting code decides severity.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_X_COLUMN = re.compile(r"^x(\d+)$")


def _as_float_vector(v) -> np.ndarray:
    arr = np.array(v, dtype=np.float64, copy=True)
    return np.atleast_1d(arr)


@dataclass(frozen=True)
class StudyDataset:
    """One study (or a concatenation of studies) in row-aligned arrays."""

    X: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    S: np.ndarray
    tau_true: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", _as_float_vector(self.Z))
        object.__setattr__(self, "Y", _as_float_vector(self.Y))
        object.__setattr__(self, "S", _as_float_vector(self.S))
        if self.tau_true is not None:
            object.__setattr__(self, "tau_true", _as_float_vector(self.tau_true))
        for arr in (self.X, self.Z, self.Y, self.S, self.tau_true):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "StudyDataset":
        """New dataset holding the given rows (in the given order)."""
        idx = np.asarray(indices)
        return StudyDataset(
            X=self.X[idx],
            Z=self.Z[idx],
            Y=self.Y[idx],
            S=self.S[idx],
            tau_true=None if self.tau_true is None else self.tau_true[idx],
        )


def concat(first: StudyDataset, second: StudyDataset) -> StudyDataset:
    """Row-wise concatenation; tau_true survives only if both sides carry it."""
    if first.p != second.p:
        raise ValueError(f"covariate dimension mismatch: {first.p} vs {second.p}")
    tau = None
    if first.tau_true is not None and second.tau_true is not None:
        tau = np.concatenate([first.tau_true, second.tau_true])
    return StudyDataset(
        X=np.vstack([first.X, second.X]),
        Z=np.concatenate([first.Z, second.Z]),
        Y=np.concatenate([first.Y, second.Y]),
        S=np.concatenate([first.S, second.S]),
        tau_true=tau,
    )


def validate(data: StudyDataset) -> list[str]:
    """Check all dataset invariants; return one diagnostic string per violation.

    An empty list means the dataset is fit for forest fitting: consistent
    lengths, strictly binary Z and S, finite values, and both treatment
    arms present within every study label (treatment positivity cannot be
    tested pointwise, but a single-arm study violates it outright).
    """
    diags: list[str] = []
    n = data.X.shape[0]
    if n == 0:
        diags.append("dataset is empty (n = 0)")
    if data.X.ndim == 2 and data.X.shape[1] == 0:
        diags.append("no covariate columns (p = 0)")

    for name, arr in (("Z", data.Z), ("Y", data.Y), ("S", data.S), ("tau_true", data.tau_true)):
        if arr is not None and arr.shape[0] != n:
            diags.append(f"length mismatch: X has {n} rows but {name} has {arr.shape[0]}")

    def aligned(arr):
        return arr is not None and arr.shape[0] == n

    if aligned(data.Z):
        for k in np.flatnonzero(~np.isin(data.Z, (0.0, 1.0))):
            diags.append(f"non-binary treatment at row {k} (value {data.Z[k]!r})")
    if aligned(data.S):
        for k in np.flatnonzero(~np.isin(data.S, (0.0, 1.0))):
            diags.append(f"invalid study label at row {k} (value {data.S[k]!r})")

    bad = ~np.isfinite(data.X)
    for k, j in zip(*np.nonzero(bad)):
        diags.append(f"non-finite covariate at row {k}, column x{j + 1}")
    if aligned(data.Y):
        for k in np.flatnonzero(~np.isfinite(data.Y)):
            diags.append(f"non-finite outcome at row {k}")
    if aligned(data.tau_true):
        for k in np.flatnonzero(~np.isfinite(data.tau_true)):
            diags.append(f"non-finite tau_true at row {k}")

    # Per-study positivity diagnostic: both arms must be present.
    if n > 0 and aligned(data.Z) and aligned(data.S):
        z_ok = np.isin(data.Z, (0.0, 1.0)).all()
        s_ok = np.isin(data.S, (0.0, 1.0)).all()
        if z_ok and s_ok:
            for s in np.unique(data.S):
                z_s = data.Z[data.S == s]
                label = f"study s={int(s)}"
                if not (z_s == 1.0).any():
                    diags.append(f"{label}: no treated observations")
                if not (z_s == 0.0).any():
                    diags.append(f"{label}: no control observations")
    return diags


def require_valid(data: StudyDataset, what: str = "dataset") -> None:
    """Raise ValueError listing every diagnostic if the dataset is invalid."""
    diags = validate(data)
    if diags:
        raise ValueError(f"invalid {what}: " + "; ".join(diags))


@dataclass(frozen=True)
class SplitSpec:
    """Parameters of a reproducible train/test partition."""

    train_fraction: float = 0.5
    seed: int = 0


def split_train_test(data: StudyDataset, spec: SplitSpec) -> tuple[StudyDataset, StudyDataset]:
    """Uniform random partition into train (floor(fraction*n) rows) and test.

    Deterministic given ``spec.seed``; rows of the two parts are a
    permutation of the input rows. Unstratified by design.
    """
    if not (0.0 < spec.train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0, 1), got {spec.train_fraction}")
    n = data.n
    k = int(np.floor(spec.train_fraction * n))
    if k < 1 or n - k < 1:
        raise ValueError(f"degenerate split: n={n}, train_fraction={spec.train_fraction} leaves an empty side")
    rng = np.random.default_rng(np.random.SeedSequence(int(spec.seed)))
    perm = rng.permutation(n)
    train_idx = np.sort(perm[:k])
    test_idx = np.sort(perm[k:])
    return data.subset(train_idx), data.subset(test_idx)


def _format(value: float) -> str:
    return repr(float(value))


def write_csv(data: StudyDataset, path) -> None:
    """Write the dataset as UTF-8 comma-separated text with LF line endings.

    Columns: x1..xp, z, y, s and, when present, tau_true. Float cells use
    shortest round-trip formatting, so read_csv(write_csv(d)) is lossless.
    """
    path = Path(path)
    header = [f"x{j + 1}" for j in range(data.p)] + ["z", "y", "s"]
    if data.tau_true is not None:
        header.append("tau_true")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(data.n):
            row = [_format(v) for v in data.X[i]]
            row.append(_format(data.Z[i]))
            row.append(_format(data.Y[i]))
            row.append(_format(data.S[i]))
            if data.tau_true is not None:
                row.append(_format(data.tau_true[i]))
            writer.writerow(row)


def read_csv(path) -> StudyDataset:
    """Read a dataset written by write_csv (or any file with that header).

    Raises ValueError naming the missing column, or the line/column of the
    first unparseable numeric cell. Content problems (non-binary z, ...)
    are left to ``validate``.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        col_of = {name: i for i, name in enumerate(header)}

        x_indices: dict[int, int] = {}
        for name, i in col_of.items():
            m = _X_COLUMN.match(name)
            if m:
                x_indices[int(m.group(1))] = i
        if not x_indices:
            raise ValueError(f"{path}: missing mandatory column: x1")
        p = max(x_indices)
        for j in range(1, p + 1):
            if j not in x_indices:
                raise ValueError(f"{path}: missing mandatory column: x{j}")
        for name in ("z", "y", "s"):
            if name not in col_of:
                raise ValueError(f"{path}: missing mandatory column: {name}")
        has_tau = "tau_true" in col_of

        def parse(cell: str, line: int, name: str) -> float:
            try:
                return float(cell)
            except ValueError:
                raise ValueError(f"{path}: line {line}, column {name}: could not parse {cell!r}") from None

        X_rows, z_rows, y_rows, s_rows, tau_rows = [], [], [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: line {line_no}: expected {len(header)} cells, found {len(row)}")
            X_rows.append([parse(row[x_indices[j + 1]], line_no, f"x{j + 1}") for j in range(p)])
            z_rows.append(parse(row[col_of["z"]], line_no, "z"))
            y_rows.append(parse(row[col_of["y"]], line_no, "y"))
            s_rows.append(parse(row[col_of["s"]], line_no, "s"))
            if has_tau:
                tau_rows.append(parse(row[col_of["tau_true"]], line_no, "tau_true"))

    return StudyDataset(
        X=np.array(X_rows, dtype=np.float64).reshape(len(X_rows), p),
        Z=np.array(z_rows, dtype=np.float64),
        Y=np.array(y_rows, dtype=np.float64),
        S=np.array(s_rows, dtype=np.float64),
        tau_true=np.array(tau_rows, dtype=np.float64) if has_tau else None,
    )
