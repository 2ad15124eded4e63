"""Local metrics ``H(x)`` for the Dikin walk.

Two metrics are provided:

* the log barrier Hessian ``A^T S^-2 A``;
* the Lee-Sidford (LS) matrix
  ``(1 + q^2)(1 + q) A^T S^-1 W^(1-2/q) S^-1 A`` where ``q = 2(1 + ln m)``
  and ``w`` solves the leverage-score fixed point ``sigma(w) = w``.

Every evaluation is an immutable :class:`MetricEvaluation` snapshot holding
the Cholesky factor and log-determinant, so the walk never refactors.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import check_point
from .exceptions import (
    FactorizationFailure,
    NoConvergence,
    StepOutOfDomain,
)
from .polytope import interior_slack

LOG = "log"
LS = "ls"
CONSTANT = "constant"

WEIGHT_TOL = 1e-10
MAX_WEIGHT_ITERS = 500
W_MIN = 1e-12
FD_REL_STEP = 1e-5


@dataclass(frozen=True)
class MetricKind:
    """Which local metric to use; ``q`` is set for the LS matrix only."""

    tag: str
    q: float = None

    @classmethod
    def for_polytope(cls, tag, P):
        if isinstance(tag, MetricKind):
            return tag
        if tag == LOG:
            return cls(LOG)
        if tag == LS:
            return cls(LS, ls_exponent(P.m))
        raise ValueError(f"unknown barrier {tag!r}; expected 'log' or 'ls'")

    @property
    def scale(self):
        """Constant factor baked into ``H`` (``(1+q^2)(1+q)`` for LS)."""
        if self.tag == LS:
            return (1.0 + self.q ** 2) * (1.0 + self.q)
        return 1.0


def ls_exponent(m):
    """``q = 2 (1 + ln m)``."""
    return 2.0 * (1.0 + math.log(m))


@dataclass(frozen=True, eq=False)
class MetricEvaluation:
    """Snapshot of the local metric at one interior point.

    Attributes
    ----------
    polytope : Polytope or None
        ``None`` only for synthetic metrics built by :func:`constant_metric`.
    x : ndarray of shape (n,)
    slacks : ndarray of shape (m,)
    weights : ndarray of shape (m,)
        LS weights; all ones for the log barrier.
    H : ndarray of shape (n, n)
    chol : ndarray of shape (n, n)
        Lower-triangular ``L`` with ``L L^T = H``.
    logdet : float
        ``2 * sum(log(diag(L)))``.
    kind : MetricKind
    weight_iterations : int
        Iterations spent in the LS weight solve (0 for the log barrier).
    """

    polytope: object
    x: np.ndarray
    slacks: np.ndarray
    weights: np.ndarray
    H: np.ndarray
    chol: np.ndarray
    logdet: float
    kind: MetricKind
    weight_iterations: int = 0

    def solve_chol_t(self, z):
        """``L^-T z``; maps unit vectors onto the boundary of ``E_x(1)``."""
        return scipy.linalg.solve_triangular(self.chol.T, z, lower=False)

    def solve_chol(self, z):
        """``L^-1 z``."""
        return scipy.linalg.solve_triangular(self.chol, z, lower=True)


@dataclass(frozen=True)
class LSWeightState:
    """One iterate of the LS weight solve."""

    w: np.ndarray
    sigma: np.ndarray
    residual: float
    iterations: int


def _factor(H):
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise FactorizationFailure(
            "local metric is numerically indefinite (near-degenerate point)"
        ) from None
    d = np.diag(L)
    if not np.all(d > 0) or not np.all(np.isfinite(L)):
        raise FactorizationFailure("local metric factor has a nonpositive pivot")
    return L, float(2.0 * np.sum(np.log(d)))


def log_barrier_hessian(P, x):
    """Log barrier Hessian ``sum_i a_i a_i^T / s_i^2`` at ``x``."""
    x = check_point(x, P.n)
    s = interior_slack(P, x)
    As = P.A / s[:, None]
    H = As.T @ As
    L, logdet = _factor(H)
    return MetricEvaluation(P, x, s, np.ones(P.m), H, L, logdet,
                            MetricKind(LOG))


def leverage_scores(B):
    """Diagonal of the orthogonal projection onto ``range(B)``.

    Returns ``(sigma, Z)`` with ``Z = L^-1 B^T`` for ``L L^T = B^T B``, so
    ``Z^T Z`` is the projection itself.
    """
    L, _ = _factor(B.T @ B)
    Z = scipy.linalg.solve_triangular(L, B.T, lower=True)
    return np.einsum("ij,ij->j", Z, Z), Z


def _ls_sigma(As, w, beta):
    B = As * np.sqrt(w ** beta)[:, None]
    return leverage_scores(B)


def ls_weight_iterates(P, x, w0=None, method="newton", damping=0.5,
                       max_iter=MAX_WEIGHT_ITERS):
    """Yield successive :class:`LSWeightState` iterates for the LS weights.

    The optimality condition for ``w`` is ``sigma(w) = w`` where ``sigma``
    are the leverage scores of ``W^(1/2 - 1/q) S^-1 A``.

    ``method="fixed_point"`` runs ``w <- w^(1-a) sigma(w)^a`` with
    ``a = damping``.  ``method="newton"`` applies Newton's method to
    ``log sigma(e^u) - u = 0``; its Jacobian is
    ``beta (I - Sigma^-1 P2) - I`` with ``P2`` the Hadamard square of the
    projection, and it falls back to a fixed-point step whenever a Newton
    step fails to reduce the residual.
    """
    s = interior_slack(P, x)
    As = P.A / s[:, None]
    m, n = P.A.shape
    q = ls_exponent(m)
    beta = 1.0 - 2.0 / q
    if w0 is None:
        w = np.full(m, n / m)
    else:
        w = np.maximum(np.asarray(w0, dtype=np.float64), W_MIN)
    sigma, Z = _ls_sigma(As, w, beta)
    residual = float(np.max(np.abs(w - sigma)))
    yield LSWeightState(w, sigma, residual, 0)
    for it in range(1, max_iter + 1):
        w_fp = np.maximum(w ** (1.0 - damping) * sigma ** damping, W_MIN)
        w_next = w_fp
        if method == "newton":
            F = np.log(np.maximum(sigma, W_MIN)) - np.log(w)
            Pm = Z.T @ Z
            # (1 - beta) Sigma + beta P2 is SPD; solve it instead of J.
            M = beta * Pm * Pm
            M[np.diag_indices(m)] += (1.0 - beta) * sigma
            try:
                du = scipy.linalg.solve(M, sigma * F, assume_a="pos")
                w_newton = np.maximum(w * np.exp(np.clip(du, -2.0, 2.0)), W_MIN)
                sig_n, Z_n = _ls_sigma(As, w_newton, beta)
                res_n = float(np.max(np.abs(w_newton - sig_n)))
            except (np.linalg.LinAlgError, FactorizationFailure):
                res_n = np.inf
            if res_n < residual:
                w, sigma, Z, residual = w_newton, sig_n, Z_n, res_n
                yield LSWeightState(w, sigma, residual, it)
                continue
        elif method != "fixed_point":
            raise ValueError(f"unknown weight method {method!r}")
        w = w_next
        sigma, Z = _ls_sigma(As, w, beta)
        residual = float(np.max(np.abs(w - sigma)))
        yield LSWeightState(w, sigma, residual, it)


def ls_weights(P, x, w0=None, tol=WEIGHT_TOL, max_iter=MAX_WEIGHT_ITERS,
               method="newton", damping=0.5):
    """Solve for the LS weights at ``x``.

    Parameters
    ----------
    P : Polytope
    x : array-like of shape (n,)
        Interior point.
    w0 : array-like of shape (m,), optional
        Warm start, typically the weights of a nearby point.  The cold
        start is ``(n / m) * ones(m)``.
    tol : float
        Required fixed-point residual ``max|w - sigma(w)|``.
    method : {"newton", "fixed_point"}
        See :func:`ls_weight_iterates`.

    Returns
    -------
    LSWeightState

    Raises
    ------
    NoConvergence
        If ``tol`` is not reached within ``max_iter`` iterations.
    """
    x = check_point(x, P.n)
    state = None
    for state in ls_weight_iterates(P, x, w0, method, damping, max_iter):
        if state.residual <= tol:
            return state
    raise NoConvergence(
        f"LS weights: residual {state.residual:.3e} > {tol:.1e} after "
        f"{max_iter} iterations")


def ls_matrix(P, x, w0=None, **weight_opts):
    """LS matrix ``(1+q^2)(1+q) A^T S^-1 W^(1-2/q) S^-1 A`` at ``x``."""
    x = check_point(x, P.n)
    state = ls_weights(P, x, w0, **weight_opts)
    kind = MetricKind.for_polytope(LS, P)
    s = P.slack(x)
    beta = 1.0 - 2.0 / kind.q
    B = (P.A / s[:, None]) * np.sqrt(state.w ** beta)[:, None]
    H = kind.scale * (B.T @ B)
    L, logdet = _factor(H)
    return MetricEvaluation(P, x, s, state.w, H, L, logdet, kind,
                            state.iterations)


def evaluate_metric(P, x, kind, w0=None, **weight_opts):
    """Dispatch on ``kind`` ("log", "ls" or a :class:`MetricKind`)."""
    tag = kind.tag if isinstance(kind, MetricKind) else kind
    if tag == LOG:
        return log_barrier_hessian(P, x)
    if tag == LS:
        return ls_matrix(P, x, w0, **weight_opts)
    raise ValueError(f"cannot evaluate metric kind {tag!r} on a polytope")


def constant_metric(H, x):
    """Synthetic evaluation of a metric that does not depend on ``x``."""
    H = np.array(H, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    L, logdet = _factor(H)
    return MetricEvaluation(None, x, np.empty(0), np.empty(0), H, L, logdet,
                            MetricKind(CONSTANT))


def default_fd_step(ev, h):
    Ah = np.abs(ev.polytope.A @ h).max()
    if Ah == 0.0:
        return 1.0
    return FD_REL_STEP * ev.slacks.min() / Ah


def hessian_directional_derivative(ev, h, fd_step=None):
    """Directional derivative ``DH(x)[h]``.

    Exact for the log barrier: ``-2 A^T S^-3 Diag(A h) A``.  For the LS
    matrix a central difference of :func:`ls_matrix` along ``h`` (warm
    started from ``ev.weights``), symmetrized.  The default step moves
    every slack by at most ``1e-5`` of the smallest slack.
    """
    h = check_point(h, ev.H.shape[0], "h")
    tag = ev.kind.tag
    if tag == CONSTANT:
        return np.zeros_like(ev.H)
    P = ev.polytope
    if tag == LOG:
        As = P.A / ev.slacks[:, None]
        return -2.0 * (As.T * (As @ h)) @ As
    if fd_step is None:
        fd_step = default_fd_step(ev, h)
    lo, hi = ev.x - fd_step * h, ev.x + fd_step * h
    if not (P.contains(lo) and P.contains(hi)):
        raise StepOutOfDomain("x +/- fd_step * h leaves the interior")
    tight = {"tol": 1e-12}
    H_hi = ls_matrix(P, hi, ev.weights, **tight).H
    H_lo = ls_matrix(P, lo, ev.weights, **tight).H
    D = (H_hi - H_lo) / (2.0 * fd_step)
    return 0.5 * (D + D.T)


def logdet_metric(ev):
    """``ln det H(x)`` from the stored factor."""
    return ev.logdet


def ellipsoid_norm(ev, v):
    """Local norm ``sqrt(v^T H v)`` computed as ``||L^T v||``."""
    v = check_point(v, ev.H.shape[0], "v")
    return float(np.linalg.norm(ev.chol.T @ v))
