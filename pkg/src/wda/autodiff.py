"""Exact derivatives of the fixed-iteration Sinkhorn map w.r.t. the projection.

This is forward-mode accumulation through the scaling recursion: every entry
of the kernel and of the scaling vectors carries a (p, d) gradient block with
respect to the projection matrix P. The recursion replays the stored
iterates, so the result is the derivative of the program that actually ran,
not of its idealized fixed point. Two consumers exist: a contracted path
(production, returns sum_ij W_ij dT_ij/dP for a cotangent W) and a full
Jacobian path kept small by a capacity guard and used as a reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InvalidInputError
from .otcore import SinkhornTrace, cost_matrix

_TINY = 1e-300


@dataclass(frozen=True)
class KernelJacobian:
    """Per-entry kernel derivatives dK_ij/dP, stored as an (n, m, p, d) array.

    dK_ij/dP = -2 * lam * K_ij * P (x_i - z_j)(x_i - z_j)^T. The lam factor
    comes from K = exp(-lam * M); it is required for agreement with finite
    differences of the actual kernel computation.
    """

    entry_grads: np.ndarray  # (n, m, p, d)
    lam: float


def kernel_jacobian(
    P: np.ndarray,
    X: np.ndarray,
    Z: np.ndarray,
    lam: float,
    kernel: np.ndarray | None = None,
) -> KernelJacobian:
    """All n*m entry gradients of the Gibbs kernel w.r.t. the projection.

    ``kernel`` should be the matrix exp(-lam * M) already computed for
    (P, X, Z, lam); it is recomputed if omitted. Entries with x_i = z_j have
    exactly zero gradient.
    """
    self_pair = Z is X
    P = np.asarray(P, dtype=float)
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if P.ndim != 2 or X.ndim != 2 or Z.ndim != 2:
        raise InvalidInputError("P, X, Z must be 2-d arrays")
    if X.shape[0] != Z.shape[0] or P.shape[1] != X.shape[0]:
        raise InvalidInputError(
            f"dimension mismatch: P is {P.shape}, X is {X.shape}, Z is {Z.shape}"
        )
    if kernel is None:
        PX = P @ X
        kernel = np.exp(-lam * cost_matrix(PX, PX if self_pair else P @ Z))
    else:
        kernel = np.asarray(kernel, dtype=float)
        if kernel.shape != (X.shape[1], Z.shape[1]):
            raise InvalidInputError(
                f"kernel shape {kernel.shape} does not match sample counts "
                f"({X.shape[1]}, {Z.shape[1]})"
            )
    # displacement tensor (n, m, d) and its projection (n, m, p)
    D = X.T[:, None, :] - Z.T[None, :, :]
    PD = D @ P.T
    grads = (-2.0 * lam) * kernel[:, :, None, None] * PD[:, :, :, None] * D[:, :, None, :]
    return KernelJacobian(grads, float(lam))


@dataclass(frozen=True)
class ScalingJacobians:
    """Per-iteration (p, d) gradients of the scaling vectors.

    ``du_history[k][j]`` is du_j^k/dP (``du_history[0]`` is zero by the fixed
    all-ones initialization), ``dv_history[k-1][j]`` is dv_j^k/dP. Storage is
    linear in the iteration count.
    """

    du_history: np.ndarray  # (L+1, n, p, d)
    dv_history: np.ndarray  # (L, m, p, d)


def _check_pair(trace: SinkhornTrace, kjac: KernelJacobian) -> None:
    if kjac.entry_grads.shape[:2] != trace.kernel.shape:
        raise InvalidInputError(
            f"kernel jacobian shape {kjac.entry_grads.shape[:2]} does not match "
            f"trace kernel shape {trace.kernel.shape}"
        )
    if not np.isclose(kjac.lam, trace.lam, rtol=1e-12, atol=0.0):
        raise InvalidInputError(
            f"kernel jacobian lam {kjac.lam} does not match trace lam {trace.lam}"
        )


def scaling_jacobians(trace: SinkhornTrace, kjac: KernelJacobian) -> ScalingJacobians:
    """Forward recursion for du^k/dP and dv^k/dP over the stored iterates.

    Each iteration k replays v^k = (1/m) / (K^T u^{k-1}) and
    u^k = (1/n) / (K v^k) in derivative form:

        dv_j^k = -(1/m) / [K^T u^{k-1}]_j^2 * sum_i (dK_ij u_i^{k-1} + K_ij du_i^{k-1})
        du_j^k = -(1/n) / [K v^k]_j^2      * sum_i (dK_ji v_i^k     + K_ji dv_i^k)
    """
    _check_pair(trace, kjac)
    K = trace.kernel
    dK = kjac.entry_grads
    n, m = K.shape
    L = trace.iterations
    p, d = dK.shape[2:]

    du_history = np.zeros((L + 1, n, p, d))
    dv_history = np.zeros((L, m, p, d))
    du = du_history[0]
    for k in range(1, L + 1):
        u_prev = trace.u_history[k - 1]
        s = np.maximum(K.T @ u_prev, _TINY)
        ds = np.tensordot(u_prev, dK, axes=(0, 0)) + np.tensordot(K, du, axes=(0, 0))
        dv = (-(1.0 / m) / s**2)[:, None, None] * ds

        v = trace.v_history[k - 1]
        r = np.maximum(K @ v, _TINY)
        dr = np.tensordot(dK, v, axes=(1, 0)) + np.tensordot(K, dv, axes=(1, 0))
        du = (-(1.0 / n) / r**2)[:, None, None] * dr

        dv_history[k - 1] = dv
        du_history[k] = du
    return ScalingJacobians(du_history, dv_history)


def plan_jacobian_apply(
    trace: SinkhornTrace,
    kjac: KernelJacobian,
    W: np.ndarray,
) -> np.ndarray:
    """Contract the plan Jacobian with a cotangent: sum_ij W_ij dT_ij/dP.

    Uses the product rule on T = diag(u_L) K diag(v_L) after the forward
    scaling recursion; never materializes the full (n, m, p, d) tensor.
    Returns a (p, d) array. Linear in W.
    """
    _check_pair(trace, kjac)
    W = np.asarray(W, dtype=float)
    if W.shape != trace.kernel.shape:
        raise InvalidInputError(
            f"cotangent shape {W.shape} does not match kernel shape {trace.kernel.shape}"
        )
    sj = scaling_jacobians(trace, kjac)
    K = trace.kernel
    u = trace.u_history[-1]
    v = trace.v_history[-1]
    du = sj.du_history[-1]
    dv = sj.dv_history[-1]

    WK = W * K
    a = WK @ v        # a_i = sum_j W_ij K_ij v_j, pairs with du_i
    b = WK.T @ u      # b_j = sum_i W_ij K_ij u_i, pairs with dv_j
    G = np.tensordot(a, du, axes=(0, 0))
    G += np.tensordot(b, dv, axes=(0, 0))
    G += np.tensordot(W * np.outer(u, v), kjac.entry_grads, axes=([0, 1], [0, 1]))
    return G


def plan_jacobian_full(
    trace: SinkhornTrace,
    kjac: KernelJacobian,
    max_entries: int = 1024,
) -> np.ndarray:
    """Materialize the full Jacobian dT_ij/dP as an (n, m, p, d) array.

    Reference path only: refuses instances with more than ``max_entries``
    plan entries. The (i, j) block combines the three-term product rule
    du_i * K_ij v_j + u_i dK_ij v_j + u_i K_ij * dv_j.
    """
    _check_pair(trace, kjac)
    K = trace.kernel
    n, m = K.shape
    if n * m > max_entries:
        raise CapacityError(
            f"full jacobian requested for {n * m} plan entries, guard is {max_entries}"
        )
    sj = scaling_jacobians(trace, kjac)
    u = trace.u_history[-1]
    v = trace.v_history[-1]
    du = sj.du_history[-1]
    dv = sj.dv_history[-1]

    Kv = K * v[None, :]
    uK = u[:, None] * K
    full = du[:, None, :, :] * Kv[:, :, None, None]
    full += np.outer(u, v)[:, :, None, None] * kjac.entry_grads
    full += uK[:, :, None, None] * dv[None, :, :, :]
    return full
