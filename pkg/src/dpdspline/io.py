"""Datasets, fit artifacts and their file formats (CSV in, JSON/TSV out)."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .families import get_family

__all__ = [
    "InputError",
    "Dataset",
    "FitConfig",
    "FitArtifact",
    "read_dataset",
    "write_plot_data",
    "write_diagnostics_csv",
]

ARTIFACT_VERSION = 1


class InputError(ValueError):
    """Malformed user input (bad file, missing column, invalid value)."""


@dataclass
class Dataset:
    """Covariate rescaled to [0, 1] plus the response, sorted by covariate."""

    t_original: np.ndarray
    y: np.ndarray
    family: str
    t_min: float
    t_max: float
    checksum: str = ""

    @property
    def t(self) -> np.ndarray:
        return self.to_unit(self.t_original)

    @property
    def n(self) -> int:
        return self.y.size

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.t_min) / (self.t_max - self.t_min)

    def from_unit(self, u):
        return self.t_min + np.asarray(u, dtype=float) * (self.t_max - self.t_min)


def read_dataset(path, family: str) -> Dataset:
    """Read a headed CSV with numeric columns ``t`` and ``y``.

    Rows are sorted by ``t``. Raises :class:`InputError` naming the offending
    column or row.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    checksum = hashlib.sha256(raw).hexdigest()
    reader = csv.DictReader(raw.decode("utf-8-sig").splitlines())
    fields = [f.strip() for f in (reader.fieldnames or [])]
    reader.fieldnames = fields
    for col in ("t", "y"):
        if col not in fields:
            raise InputError(f"missing column: {col}")
    ts, ys = [], []
    for row_no, row in enumerate(reader, start=2):
        try:
            tv = float(row["t"])
            yv = float(row["y"])
        except (TypeError, ValueError):
            raise InputError(f"row {row_no}: non-numeric value") from None
        if not (math.isfinite(tv) and math.isfinite(yv)):
            raise InputError(f"row {row_no}: NaN or infinite value")
        ts.append(tv)
        ys.append(yv)
    t = np.array(ts)
    y = np.array(ys)
    fam = get_family(family)
    bad = np.flatnonzero(~fam.in_support(y))
    if bad.size:
        raise InputError(f"row {bad[0] + 2}: response {y[bad[0]]:g} is invalid for the {family} family")
    if t.size < 2 or t.max() == t.min():
        raise InputError("covariate t needs at least two distinct values")
    order = np.argsort(t, kind="stable")
    return Dataset(t[order], y[order], fam.name, float(t.min()), float(t.max()), checksum)


def _pairs(d):
    return [[float(k), v] for k, v in d.items()]


def _unpairs(lst):
    return {float(k): v for k, v in lst}


@dataclass
class FitConfig:
    family: str
    alpha: str | float = "auto"
    lam: str | float = "auto"
    m: int = 2
    p: int = 4
    knots: str | int = "auto"
    seed: int = 0


@dataclass
class FitArtifact:
    """Everything a fit run produces, serialisable to JSON without loss."""

    config: FitConfig
    dispersion: float
    t_min: float
    t_max: float
    t_original: list
    y: list
    interior_knots: list
    fit: dict
    selection: dict | None
    residuals: dict
    curve: dict
    checksum: str = ""
    version: int = ARTIFACT_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.selection is not None:
            sel = dict(self.selection)
            for key in ("lambda_hat_per_alpha", "amise_curve"):
                sel[key] = _pairs(sel[key])
            sel["aic_curves"] = [[float(a), _pairs(c)] for a, c in sel["aic_curves"].items()]
            d["selection"] = sel
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d) -> "FitArtifact":
        d = dict(d)
        d["config"] = FitConfig(**d["config"])
        sel = d.get("selection")
        if sel is not None:
            sel = dict(sel)
            for key in ("lambda_hat_per_alpha", "amise_curve"):
                sel[key] = _unpairs(sel[key])
            sel["aic_curves"] = {float(a): _unpairs(c) for a, c in sel["aic_curves"]}
            d["selection"] = sel
        return cls(**d)

    @classmethod
    def from_json(cls, text) -> "FitArtifact":
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "FitArtifact":
        with open(path) as fh:
            return cls.from_json(fh.read())


def write_plot_data(path, curve: dict):
    """TSV with columns ``t_original, t_unit, theta_hat, mu_hat``."""
    cols = ("t_original", "t_unit", "theta_hat", "mu_hat")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(cols)
        for row in zip(*(curve[c] for c in cols)):
            w.writerow([repr(float(v)) for v in row])


def write_diagnostics_csv(path, t, y, mu_hat, residuals, flags):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "t", "y", "mu_hat", "residual", "flagged"])
        for i, row in enumerate(zip(t, y, mu_hat, residuals, flags)):
            tv, yv, mv, rv, fv = row
            w.writerow([i, repr(float(tv)), repr(float(yv)), repr(float(mv)), repr(float(rv)),
                        int(bool(fv))])
