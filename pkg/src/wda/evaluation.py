"""KNN classification in the projected space and grid experiment protocols.

The protocols mirror the standard benchmark loop: per seed, build train/test
data, fit each subspace method at each (p, lambda) cell, project both sides,
and record the KNN test error for each k. Failed cells are recorded (NaN in
the error tensor) instead of aborting the sweep.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, stiefel
from .datasets import LabeledDataset, append_noise, gen_toy, load_csv, split_dataset
from .errors import InvalidInputError, WdaError
from .ioutil import FLOAT_FMT, atomic_write_text
from .objective import WdaConfig

KNOWN_METHODS = ("wda", "pca", "fda", "identity")


def knn_predict(
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    k: int,
) -> np.ndarray:
    """Majority vote over the k Euclidean-nearest training rows.

    Deterministic tie handling: neighbor sets are ordered by (distance,
    training index); label ties are broken by the smaller summed neighbor
    distance, then by the smaller label.
    """
    train_X = np.asarray(train_X, dtype=float)
    test_X = np.asarray(test_X, dtype=float)
    train_y = np.asarray(train_y)
    n_train = train_X.shape[0]
    if n_train == 0:
        raise InvalidInputError("empty training set")
    if train_X.ndim != 2 or test_X.ndim != 2 or train_X.shape[1] != test_X.shape[1]:
        raise InvalidInputError(
            f"feature dimensions differ: train {train_X.shape} vs test {test_X.shape}"
        )
    if not 1 <= k <= n_train:
        raise InvalidInputError(f"k must lie in [1, {n_train}], got {k}")

    sq_train = np.einsum("ij,ij->i", train_X, train_X)
    predictions = np.empty(test_X.shape[0], dtype=train_y.dtype)
    order_idx = np.arange(n_train)
    for t, x in enumerate(test_X):
        dist = sq_train - 2.0 * (train_X @ x) + x @ x
        np.maximum(dist, 0.0, out=dist)
        order = np.lexsort((order_idx, dist))[:k]
        neigh_labels = train_y[order]
        neigh_dist = dist[order]
        candidates = np.unique(neigh_labels)
        counts = np.array([(neigh_labels == c).sum() for c in candidates])
        best = candidates[counts == counts.max()]
        if best.size > 1:
            sums = np.array(
                [neigh_dist[neigh_labels == c].sum() for c in best]
            )
            best = best[sums == sums.min()]
        predictions[t] = best.min()
    return predictions


def error_rate(predicted, truth) -> float:
    """Fraction of mismatches between two equally long label sequences."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidInputError(
            f"length mismatch: {predicted.shape} vs {truth.shape}"
        )
    return float(np.mean(predicted != truth))


@dataclass(frozen=True)
class ToyDataSpec:
    """Regenerate toy train/test sets per seed (independent draws)."""

    n_train_per_class: int = 34
    n_test_per_class: int = 334
    extra_noise_dims: int = 0


@dataclass(frozen=True)
class CsvDataSpec:
    """Load a CSV once and re-split it per seed."""

    path: str
    train_fraction: float = 0.5
    extra_noise_dims: int = 0


def _make_data(spec, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    child = np.random.default_rng(seed).integers(2**63, size=4)
    if isinstance(spec, ToyDataSpec):
        train = gen_toy(spec.n_train_per_class, int(child[0]))
        test = gen_toy(spec.n_test_per_class, int(child[1]))
    elif isinstance(spec, CsvDataSpec):
        data = load_csv(spec.path)
        train, test = split_dataset(data, spec.train_fraction, int(child[0]))
    else:
        raise InvalidInputError(f"unknown data spec {type(spec).__name__}")
    if spec.extra_noise_dims:
        train = append_noise(train, spec.extra_noise_dims, int(child[2]))
        test = append_noise(test, spec.extra_noise_dims, int(child[3]))
    return train, test


def _fit_projection(
    method: str,
    train: LabeledDataset,
    p: int,
    lam: float,
    wda_config: WdaConfig,
) -> np.ndarray | None:
    """Return the (p, d) projection for a method, or None for identity."""
    if method == "identity":
        return None
    if method == "pca":
        return stiefel.pca_init(train.samples.T, p)
    if method == "fda":
        return baselines.fda_fit(train, p).projection
    if method == "wda":
        cfg = replace(wda_config, dim=p, lam=lam)
        projection, _ = stiefel.wda_fit(train, cfg)
        return projection
    raise InvalidInputError(f"unknown method {method!r}; known: {KNOWN_METHODS}")


@dataclass
class ExperimentResult:
    """Error tensor over (method, seed, p, lambda, k) plus failed-cell records."""

    methods: list[str]
    seeds: list[int]
    ps: list[int]
    lams: list[float]
    ks: list[int]
    errors: np.ndarray  # (n_methods, n_seeds, n_ps, n_lams, n_ks); NaN = failed cell
    failures: list[dict] = field(default_factory=list)

    def mean_errors(self) -> np.ndarray:
        """Mean over seeds, shape (n_methods, n_ps, n_lams, n_ks); NaN-aware."""
        return np.nanmean(self.errors, axis=1)

    def std_errors(self) -> np.ndarray:
        return np.nanstd(self.errors, axis=1)

    def long_rows(self):
        """Yield one dict per cell in fixed order: seed, k, p, lambda, method, error."""
        for mi, method in enumerate(self.methods):
            for si, seed in enumerate(self.seeds):
                for pi, p in enumerate(self.ps):
                    for li, lam in enumerate(self.lams):
                        for ki, k in enumerate(self.ks):
                            yield {
                                "seed": seed,
                                "k": k,
                                "p": p,
                                "lambda": lam,
                                "method": method,
                                "error": self.errors[mi, si, pi, li, ki],
                            }

    def summary_json(self) -> dict:
        mean = self.mean_errors()
        std = self.std_errors()
        cells = []
        for mi, method in enumerate(self.methods):
            for pi, p in enumerate(self.ps):
                for li, lam in enumerate(self.lams):
                    for ki, k in enumerate(self.ks):
                        cells.append(
                            {
                                "method": method,
                                "p": p,
                                "lambda": lam,
                                "k": k,
                                "mean_error": float(mean[mi, pi, li, ki]),
                                "std_error": float(std[mi, pi, li, ki]),
                            }
                        )
        return {
            "methods": self.methods,
            "seeds": self.seeds,
            "ps": self.ps,
            "lambdas": self.lams,
            "ks": self.ks,
            "cells": cells,
            "failures": self.failures,
        }


def run_protocol(
    data_spec,
    methods,
    ks,
    ps,
    lams,
    n_seeds: int,
    base_seed: int = 0,
    wda_config: WdaConfig | None = None,
) -> ExperimentResult:
    """Sweep (method, seed, p, lambda, k) and collect KNN test errors.

    Per seed the data is regenerated (or re-split), each method is fit per
    (p, lambda) cell, and every k reuses that fit. Cells whose fit or
    prediction raises a package error are recorded in ``failures`` and left
    NaN; unexpected exceptions propagate.
    """
    methods = list(methods)
    ks = [int(k) for k in ks]
    ps = [int(p) for p in ps]
    lams = [float(l) for l in lams]
    if not methods or not ks or not ps or not lams or n_seeds < 1:
        raise InvalidInputError("empty experiment grid")
    for method in methods:
        if method not in KNOWN_METHODS:
            raise InvalidInputError(f"unknown method {method!r}; known: {KNOWN_METHODS}")
    wda_config = wda_config if wda_config is not None else WdaConfig()
    seeds = [base_seed + s for s in range(n_seeds)]
    errors = np.full((len(methods), len(seeds), len(ps), len(lams), len(ks)), np.nan)
    failures: list[dict] = []

    def record_failure(method, seed, p, lam, k, exc):
        failures.append(
            {
                "method": method,
                "seed": seed,
                "p": p,
                "lambda": lam,
                "k": k,
                "error": str(exc),
            }
        )

    for si, seed in enumerate(seeds):
        train, test = _make_data(data_spec, seed)
        for mi, method in enumerate(methods):
            for pi, p in enumerate(ps):
                for li, lam in enumerate(lams):
                    try:
                        projection = _fit_projection(method, train, p, lam, wda_config)
                    except WdaError as exc:
                        record_failure(method, seed, p, lam, None, exc)
                        continue
                    if projection is None:
                        train_Z, test_Z = train.samples, test.samples
                    else:
                        train_Z = train.samples @ projection.T
                        test_Z = test.samples @ projection.T
                    for ki, k in enumerate(ks):
                        try:
                            pred = knn_predict(train_Z, train.labels, test_Z, k)
                            errors[mi, si, pi, li, ki] = error_rate(pred, test.labels)
                        except WdaError as exc:
                            record_failure(method, seed, p, lam, k, exc)
    return ExperimentResult(methods, seeds, ps, lams, ks, errors, failures)


def experiment_to_csv(result: ExperimentResult, path: str) -> None:
    """Long-format dump: seed,k,p,lambda,method,error (one row per cell)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["seed", "k", "p", "lambda", "method", "error"])
    for row in result.long_rows():
        writer.writerow(
            [
                row["seed"],
                row["k"],
                row["p"],
                FLOAT_FMT % row["lambda"],
                row["method"],
                "" if np.isnan(row["error"]) else FLOAT_FMT % row["error"],
            ]
        )
    atomic_write_text(path, buffer.getvalue())
