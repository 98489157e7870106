"""Synthetic instances, the all-(-1) standard form, and CSV / libsvm I/O.

Randomness comes from numpy's PCG64.  A seed is expanded with
``SeedSequence(seed).spawn(2)``: the first child stream draws features, the
second draws labels, so changing n for labels never perturbs features drawn
earlier and every output is a pure function of the seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .glm import DataSet, sigma

__all__ = [
    "GenerativeConfig",
    "DataFormatError",
    "streams",
    "generate_generative",
    "random_instance",
    "to_standard_form",
    "load_csv",
    "load_libsvm",
    "load_dataset",
    "save_csv",
    "save_libsvm",
    "subspace_compatibility",
]


class DataFormatError(ValueError):
    """Unparseable or out-of-domain input; the message names the line."""


def streams(seed: int, count: int = 2) -> list[np.random.Generator]:
    """Independent PCG64 generators split from one seed."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(int(seed)).spawn(count)]


@dataclass(frozen=True)
class GenerativeConfig:
    """Gaussian design ``x_i = sigma_x * L g_i`` with ``L L^T = Sigma``.

    ``covariance`` is ``"identity"``, a 1-D array of diagonal variances, or a
    full symmetric PSD d x d matrix.  ``beta_true`` defaults to the unit
    vector ``e_1``.
    """

    n: int
    d: int
    covariance: Union[str, np.ndarray] = "identity"
    sigma_x: float = 1.0
    beta_true: Optional[np.ndarray] = None
    seed: int = 0
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be >= 1")
        if not self.sigma_x > 0:
            raise ValueError("sigma_x must be positive")
        object.__setattr__(self, "_chol", _cholesky(self.covariance, self.d))
        if self.beta_true is None:
            b = np.zeros(self.d)
            b[0] = 1.0
        else:
            b = np.asarray(self.beta_true, dtype=float).ravel()
            if b.shape[0] != self.d:
                raise ValueError(f"beta_true has length {b.shape[0]}, expected d={self.d}")
        object.__setattr__(self, "beta_true", b)

    @property
    def cholesky(self) -> np.ndarray:
        return self._chol


def _cholesky(cov, d: int) -> np.ndarray:
    if isinstance(cov, str):
        if cov != "identity":
            raise ValueError(f"unknown covariance tag {cov!r}")
        return np.eye(d)
    S = np.asarray(cov, dtype=float)
    if S.ndim == 1:
        if S.shape[0] != d or np.any(S < 0):
            raise ValueError("diagonal covariance needs d nonnegative entries")
        return np.diag(np.sqrt(S))
    if S.shape != (d, d) or not np.allclose(S, S.T, atol=1e-12):
        raise ValueError("covariance must be a symmetric d x d matrix")
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        # PSD but singular: eigen square root keeps L L^T = Sigma
        w, V = np.linalg.eigh(S)
        if w.min() < -1e-10 * max(1.0, w.max()):
            raise ValueError("covariance is not positive semidefinite") from None
        return V * np.sqrt(np.clip(w, 0.0, None))


def generate_generative(cfg: GenerativeConfig) -> DataSet:
    """Draw X from the Gaussian design and ``y_i = +1`` w.p. ``sigma(x_i^T beta*)``."""
    feat, lab = streams(cfg.seed)
    G = feat.standard_normal((cfg.n, cfg.d))
    X = cfg.sigma_x * G @ cfg.cholesky.T
    p = sigma(X @ cfg.beta_true)
    y = np.where(lab.random(cfg.n) < p, 1.0, -1.0)
    return DataSet(X, y)


def random_instance(n: int, d: int, seed: int, scale: float = 1.0, signal: float = 1.0) -> DataSet:
    """Isotropic Gaussian features with labels from a random unit direction."""
    feat, lab = streams(seed)
    X = scale * feat.standard_normal((n, d))
    b = feat.standard_normal(d)
    b *= signal / np.linalg.norm(b)
    y = np.where(lab.random(n) < sigma(X @ b), 1.0, -1.0)
    return DataSet(X, y)


def to_standard_form(data: DataSet) -> DataSet:
    """``(X, y) -> (-D_y X, -1)``; the logistic loss is unchanged at every beta."""
    X = -data.y[:, None] * data.X
    return DataSet(X, -np.ones(data.n), data.feature_names)


def _label(tok: str, recode01: bool, where: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise DataFormatError(f"{where}: label {tok!r} is not a number") from None
    if v in (1.0, -1.0):
        return v
    if v == 0.0:
        if recode01:
            return -1.0
        raise DataFormatError(f"{where}: label 0 found; pass recode01=True (--labels01) for 0/1 labels")
    raise DataFormatError(f"{where}: label {tok!r} is not in {{-1, +1}}")


def _number(tok: str, where: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise DataFormatError(f"{where}: cannot parse {tok!r} as a number") from None
    if not math.isfinite(v):
        raise DataFormatError(f"{where}: non-finite value {tok!r}")
    return v


def load_csv(path, has_header: bool = False, label_column: int = 0, recode01: bool = False) -> DataSet:
    """Comma-separated decimals, one row per point; blank lines are skipped.

    ``label_column`` is 0-based and may be negative (``-1`` = last column).
    """
    path = Path(path)
    rows, labels = [], []
    names = None
    width = None
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not t.strip() for t in rec):
                continue
            where = f"{path}:{lineno}"
            if width is None:
                width = len(rec)
                if width < 2:
                    raise DataFormatError(f"{where}: need a label and at least one feature")
                if not -width <= label_column < width:
                    raise DataFormatError(f"{where}: label column {label_column} out of range for {width} columns")
                lc = label_column % width
                if has_header:
                    names = [t.strip() for i, t in enumerate(rec) if i != lc]
                    continue
            elif len(rec) != width:
                raise DataFormatError(f"{where}: expected {width} fields, found {len(rec)}")
            labels.append(_label(rec[lc].strip(), recode01, where))
            rows.append([_number(t.strip(), f"{where} column {i + 1}") for i, t in enumerate(rec) if i != lc])
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return DataSet(np.array(rows), np.array(labels), names)


def load_libsvm(path, d_hint: Optional[int] = None, recode01: bool = False) -> DataSet:
    """Lines ``label idx:val ...`` with 1-based, strictly increasing indices.

    Missing entries are zero; ``d`` is the largest index seen unless
    ``d_hint`` is given (it must cover every index).  ``#`` starts a comment.
    """
    path = Path(path)
    entries, labels = [], []
    dmax = 0
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            where = f"{path}:{lineno}"
            labels.append(_label(toks[0], recode01, where))
            row = {}
            last = 0
            for pos, tok in enumerate(toks[1:], start=2):
                at = f"{where} token {pos}"
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DataFormatError(f"{at}: expected index:value, found {tok!r}")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise DataFormatError(f"{at}: bad index {idx_s!r}") from None
                if idx < 1:
                    raise DataFormatError(f"{at}: indices are 1-based, found {idx}")
                if idx <= last:
                    raise DataFormatError(f"{at}: indices must increase, {idx} follows {last}")
                last = idx
                row[idx - 1] = _number(val_s, at)
            dmax = max(dmax, last)
            entries.append(row)
    if not entries:
        raise DataFormatError(f"{path}: no data rows")
    d = dmax if d_hint is None else int(d_hint)
    if d < dmax:
        raise DataFormatError(f"{path}: d_hint={d} is smaller than the largest index {dmax}")
    if d < 1:
        raise DataFormatError(f"{path}: no features; pass d_hint")
    X = np.zeros((len(entries), d))
    for i, row in enumerate(entries):
        for j, v in row.items():
            X[i, j] = v
    return DataSet(X, np.array(labels))


def load_dataset(path, fmt: str = "csv", **kwargs) -> DataSet:
    if fmt == "csv":
        return load_csv(path, **kwargs)
    if fmt == "libsvm":
        return load_libsvm(path, **kwargs)
    raise ValueError(f"unknown format {fmt!r}")


def _fmt(v: float) -> str:
    # repr gives the shortest string that parses back to the same double
    return repr(float(v))


def _fmt_label(v: float) -> str:
    return "1" if v > 0 else "-1"


def save_csv(data: DataSet, path, header: bool = False) -> None:
    """Label in column 0, features after it; floats written losslessly."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            names = data.feature_names or [f"x{j + 1}" for j in range(data.d)]
            w.writerow(["label", *names])
        for yi, xi in zip(data.y, data.X):
            w.writerow([_fmt_label(yi), *(_fmt(v) for v in xi)])


def save_libsvm(data: DataSet, path) -> None:
    """Sparse rows; zeros are omitted."""
    with Path(path).open("w") as fh:
        for yi, xi in zip(data.y, data.X):
            toks = [_fmt_label(yi)] + [f"{j + 1}:{_fmt(v)}" for j, v in enumerate(xi) if v != 0.0]
            fh.write(" ".join(toks) + "\n")


def subspace_compatibility(sketch) -> Optional[float]:
    """``sup ||u||_1 / ||u||_2`` over range(P_k): ``sqrt(k)`` for coordinate
    sketches, ``None`` (unknown) otherwise."""
    if getattr(sketch, "kind", None) in ("coordinate", "top_coeff"):
        return math.sqrt(sketch.k)
    return None
