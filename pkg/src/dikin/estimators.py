"""Unbiased stochastic estimators of log-determinants and determinant ratios.

``logdet_sample`` draws ``Y`` with ``E[Y] = ln det(A^T W A)`` by
integrating ``d/dt ln det H(t)`` along ``H(t) = A^T (I + t (W - I)) A``
with a random ``t`` and a Gaussian trace probe.  ``det_from_log_sample``
turns any unbiased estimator of ``ln r`` into an unbiased estimator of
``r`` through the exponential series with a Poisson(1) truncation index.

Each draw refactorizes ``H(t)`` (dense, ``O(m n^2)``); no inverse
maintenance is attempted.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_point
from .exceptions import DimensionMismatch, FactorizationFailure
from .polytope import interior_slack

CHUNK = 1 << 15
PILOT_DRAWS = 100
CV_LIMIT = 10.0


@dataclass(frozen=True, eq=False)
class LogDetEstimatorSpec:
    """Inputs of the log-det estimator: ``A`` (m, n), positive ``W`` (m,)."""

    A: np.ndarray
    W: np.ndarray
    base_logdet: float
    gram: np.ndarray
    delta: np.ndarray

    @classmethod
    def from_arrays(cls, A, W):
        A = np.asarray(A, dtype=np.float64)
        W = np.asarray(W, dtype=np.float64)
        if A.ndim != 2 or W.shape != (A.shape[0],):
            raise DimensionMismatch("need A of shape (m, n) and W of shape (m,)")
        if not np.all(W > 0):
            raise ValueError("W must be strictly positive")
        gram = A.T @ A
        try:
            L = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            raise FactorizationFailure("A^T A is singular") from None
        base = float(2.0 * np.log(np.diag(L)).sum())
        delta = A.T @ ((W - 1.0)[:, None] * A)
        return cls(A, W, base, gram, delta)

    def exact(self):
        """``ln det(A^T W A)`` by factorization (reference value)."""
        sign, value = np.linalg.slogdet(self.A.T @ (self.W[:, None] * self.A))
        return float(value)


def logdet_sample(spec, rng, size=None, include_base=True):
    """Draws of ``Y = v^T H(t)^-1 A^T (W - I) A v + ln det A^T A``.

    ``v ~ N(0, I_n)`` and ``t ~ U[0, 1]``; ``E[Y] = ln det(A^T W A)``.
    With ``include_base=False`` the constant term is dropped and
    ``E[Y] = ln det(A^T W A) - ln det(A^T A)``.

    Returns a float when ``size`` is None, otherwise an array.
    """
    count = 1 if size is None else int(size)
    n = spec.gram.shape[0]
    out = np.empty(count)
    for start in range(0, count, CHUNK):
        k = min(CHUNK, count - start)
        v = rng.standard_normal((k, n))
        t = rng.random(k)
        Ht = spec.gram[None, :, :] + t[:, None, None] * spec.delta[None, :, :]
        rhs = v @ spec.delta  # delta is symmetric
        try:
            sol = np.linalg.solve(Ht, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            raise FactorizationFailure("H(t) is numerically singular") from None
        out[start:start + k] = np.einsum("ij,ij->i", v, sol)
    if include_base:
        out += spec.base_logdet
    return float(out[0]) if size is None else out


def det_from_log_sample(y_sampler, rng, size=None, scale=1.0):
    """Unbiased draws of ``r`` from unbiased draws of ``ln r``.

    Each draw picks ``i ~ Poisson(1)`` (probability ``1/(e i!)``) and
    returns ``e * prod_{j<=i} (scale * Y_j)`` with fresh iid ``Y_j``;
    ``scale=0.5`` estimates ``sqrt(r)`` instead.  Single draws may be
    negative; only averages are meaningful.

    Parameters
    ----------
    y_sampler : callable ``(rng, k) -> ndarray of shape (k,)``
        Independent draws of an unbiased estimator of ``ln r``.
    """
    count = 1 if size is None else int(size)
    index = rng.poisson(1.0, count)
    total = int(index.sum())
    ys = np.asarray(y_sampler(rng, total), dtype=np.float64) * scale
    out = np.full(count, math.e)
    nonzero = index > 0
    if total:
        starts = np.concatenate([[0], np.cumsum(index)[:-1]])[nonzero]
        out[nonzero] *= np.multiply.reduceat(ys, starts)
    return float(out[0]) if size is None else out


@dataclass(frozen=True)
class RatioEstimate:
    """Averaged estimate of ``sqrt(det H(x) / det H(y))``."""

    value: float
    stderr: float
    n_draws: int
    pilot_cv: float = float("nan")
    high_variance: bool = False

    def __float__(self):
        return self.value


def _log_barrier_ratio_spec(P, x, y):
    # Base S_y^-1 A with W = S_y^2 S_x^-2, so A^T W A = A^T S_x^-2 A.
    s_x = interior_slack(P, x)
    s_y = interior_slack(P, y)
    return LogDetEstimatorSpec.from_arrays(P.A / s_y[:, None], (s_y / s_x) ** 2)


def det_ratio_estimate(P, x, y, n_draws, rng, pilot=PILOT_DRAWS,
                       cv_limit=CV_LIMIT):
    """Unbiased estimate of ``sqrt(det H(x) / det H(y))``, log barrier.

    Every elementary draw feeds halved log-det-difference samples into
    :func:`det_from_log_sample`; the result averages ``n_draws`` of them.
    When ``pilot > 0`` a separate pilot of that many draws measures the
    coefficient of variation and ``high_variance`` is set if it exceeds
    ``cv_limit``.
    """
    x = check_point(x, P.n)
    y = check_point(y, P.n, "y")
    spec = _log_barrier_ratio_spec(P, x, y)

    def sampler(g, k):
        return logdet_sample(spec, g, size=k, include_base=False)

    cv = float("nan")
    flagged = False
    if pilot:
        draws = det_from_log_sample(sampler, rng, size=pilot, scale=0.5)
        mean = draws.mean()
        cv = float(draws.std(ddof=1) / abs(mean)) if mean != 0 else float("inf")
        flagged = not cv <= cv_limit
    draws = det_from_log_sample(sampler, rng, size=n_draws, scale=0.5)
    se = float(draws.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else float("nan")
    return RatioEstimate(float(draws.mean()), se, int(n_draws), cv, flagged)


def smooth_accept_from_estimate(ratio_estimate):
    """``rho / (1 + rho)`` clamped to ``[0, 1]``; negative input counts as 0."""
    rho = float(ratio_estimate)
    if not rho > 0:
        return 0.0
    if math.isinf(rho):
        return 1.0
    return min(1.0, max(0.0, rho / (1.0 + rho)))
