"""Shared test utilities: finite differences and subspace angles."""

import numpy as np

from wda import project_stiefel


def fd_gradient(f, P, h=1e-5):
    """Central finite differences of a scalar function, entrywise in the
    ambient space (no re-orthonormalization of the perturbed points)."""
    G = np.zeros_like(np.asarray(P, dtype=float))
    for idx in np.ndindex(P.shape):
        Pp = P.copy()
        Pp[idx] += h
        Pm = P.copy()
        Pm[idx] -= h
        G[idx] = (f(Pp) - f(Pm)) / (2.0 * h)
    return G


def random_stiefel(rng, p, d):
    return project_stiefel(rng.standard_normal((p, d)))


def principal_angle(A, B):
    """Largest principal angle (radians) between the row spans of A and B."""
    Qa = np.linalg.qr(np.asarray(A, dtype=float).T)[0]
    Qb = np.linalg.qr(np.asarray(B, dtype=float).T)[0]
    s = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def entropy(T):
    """Entropy of a strictly positive coupling, -sum t log t."""
    return -float(np.sum(T * np.log(T)))
