"""Closed-form comparators: Fisher discriminant analysis and PCA.

The FDA here is the zero-regularization limit of the transport-based
objective: every coupling collapses to the uniform one, so the between and
within covariances become plain all-pairs difference covariances

    C^{c,c'} = 1/(n_c n_{c'}) sum_ij (x_i^c - x_j^{c'})(x_i^c - x_j^{c'})^T

and the ratio is maximized by the top generalized eigenvectors of
C_w^{-1} C_b. Note the within matrix uses all sample pairs, not the classical
mean-centered scatter; this keeps the limit equivalence with the transport
objective literal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .datasets import LabeledDataset
from .errors import DegenerateInputError, InvalidInputError
from .objective import cross_covariance, pair_keys


@dataclass(frozen=True)
class FdaModel:
    """Discriminant directions as rows (unit norm) with descending eigenvalues."""

    projection: np.ndarray   # (p, d)
    eigenvalues: np.ndarray  # (p,) descending, >= 0


def uniform_coupling_covariances(classes) -> tuple[np.ndarray, np.ndarray]:
    """Between/within covariances under uniform couplings: (C_b, C_w)."""
    blocks = [np.asarray(X, dtype=float) for X in classes]
    d = blocks[0].shape[0]
    cb = np.zeros((d, d))
    cw = np.zeros((d, d))
    for c, cp in pair_keys(len(blocks)):
        n_c = blocks[c].shape[1]
        n_cp = blocks[cp].shape[1]
        uniform = np.full((n_c, n_cp), 1.0 / (n_c * n_cp))
        C = cross_covariance(blocks[c], blocks[cp], uniform)
        if c == cp:
            cw += C
        else:
            cb += C
    return cb, cw


def fda_fit(data: LabeledDataset, p: int, ridge: float = 1e-10) -> FdaModel:
    """Top-p generalized eigenvectors of C_w^{-1} C_b from uniform couplings.

    A ridge of ``ridge * tr(C_w)/d`` is added to C_w before the
    symmetric-definite eigendecomposition; data whose within matrix stays
    singular beyond that is rejected.
    """
    blocks = data.class_blocks()
    if len(blocks) < 2:
        raise DegenerateInputError(f"need at least 2 classes, got {len(blocks)}")
    d = data.n_features
    if not 1 <= p <= d:
        raise InvalidInputError(f"p must lie in [1, {d}], got {p}")
    cb, cw = uniform_coupling_covariances(blocks)
    trace_w = float(np.trace(cw))
    if trace_w <= 0.0:
        raise DegenerateInputError("within-class covariance is zero")
    cw_ridged = cw + (ridge * trace_w / d) * np.eye(d)
    try:
        eigvals, eigvecs = scipy.linalg.eigh(cb, cw_ridged)
    except scipy.linalg.LinAlgError as exc:
        raise DegenerateInputError(
            f"within-class covariance is singular beyond the ridge: {exc}"
        ) from exc
    order = np.argsort(eigvals)[::-1][:p]
    values = np.maximum(eigvals[order], 0.0)
    vectors = eigvecs[:, order].T
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    return FdaModel(vectors, values)
