"""Dataset CSV/JSON exchange and model documents."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset, Truth
from .errors import ConfigError
from .estimator import SparModel


def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".truth.json") if p.suffix != ".csv" else p.with_suffix(".truth.json")


def write_dataset(data: Dataset, path, truth_path: Optional[Path] = None) -> None:
    """Write ``x1..xp,y`` CSV; truth metadata (if any) goes to a JSON sidecar."""
    path = Path(path)
    header = [f"x{j + 1}" for j in range(data.p)] + ["y"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row, yi in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])
    if data.truth is not None:
        t = data.truth
        doc = {"beta": t.beta.tolist(), "mu": t.mu, "sigma2": t.sigma2,
               "active_set": t.active_set.tolist()}
        (truth_path or sidecar_path(path)).write_text(json.dumps(doc, indent=1))


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    try:
        values = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric cell ({exc})") from exc
    if values.size == 0:
        values = values.reshape(0, len(header))
    return header, values


def read_dataset(path, response: str = "y", with_truth: bool = True) -> Dataset:
    header, values = read_matrix_csv(path)
    if response not in header:
        raise ConfigError(f"{path} has no column named {response!r}")
    j = header.index(response)
    y = values[:, j]
    X = np.delete(values, j, axis=1)
    truth = None
    side = sidecar_path(path)
    if with_truth and side.exists():
        doc = json.loads(side.read_text())
        truth = Truth(np.asarray(doc["beta"], float), doc.get("mu", 0.0), doc.get("sigma2", 0.0))
    return Dataset(X, y, truth)


def read_predictors(path, n_features: int, response: str = "y") -> np.ndarray:
    """Predictor matrix from a CSV; a response column, if present, is dropped."""
    header, values = read_matrix_csv(path)
    if response in header and len(header) == n_features + 1:
        values = np.delete(values, header.index(response), axis=1)
    return values


def save_model(model: SparModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))


def load_model(path) -> SparModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return SparModel.from_dict(doc)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
