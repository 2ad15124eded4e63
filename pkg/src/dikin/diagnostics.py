"""Numerical certification of metric properties and chain quality.

Structural checks (strong self-concordance, the global sandwich bounds,
symmetry, log-det convexity) evaluate a metric at random interior points
produced by hit-and-run from the analytic center, which shares no code
with the metric under test.  Statistical checks compare chain output
against exact uniform marginals of cubes and simplices.

Every report serializes to ``{check, metric, params, measured, bound,
pass}`` via ``as_dict``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import stats

from .barriers import (
    LOG,
    LS,
    MetricKind,
    evaluate_metric,
    hessian_directional_derivative,
)
from .exceptions import UnboundedDirection, UnknownReference
from .polytope import analytic_center, cube_dup

HIT_AND_RUN_STEPS = 100
ACCEPT_THRESHOLD = 0.9922
SSC_BOUND = 2.0
SSC_TOL = {LOG: 5e-7, LS: 1e-3}  # 2 * (1 + 5e-7) = 2 + 1e-6
EIG_SLACK = {LOG: 1e-8, LS: 1e-6}
FROB_SLACK = 1e-6
CONVEXITY_TOL = 1e-9
KS_ALPHA = 0.01
CHI2_ALPHA = 0.001
MIN_CELL_EXPECTATION = 20


# --- random interior points ---------------------------------------------

def hit_and_run_points(P, count, rng, steps=HIT_AND_RUN_STEPS, x0=None):
    """``count`` independent hit-and-run chains of ``steps`` steps each.

    All chains start at ``x0`` (the analytic center by default) and are
    advanced together; each step picks a uniform direction and a uniform
    point on the chord through the current point.
    """
    x0 = analytic_center(P) if x0 is None else np.asarray(x0, dtype=np.float64)
    X = np.tile(x0, (int(count), 1))
    for _ in range(steps):
        D = rng.standard_normal(X.shape)
        D /= np.linalg.norm(D, axis=1, keepdims=True)
        S = X @ P.A.T - P.b
        AD = D @ P.A.T
        with np.errstate(divide="ignore", over="ignore"):
            fwd = np.where(AD < 0, S / -AD, np.inf).min(axis=1)
            bwd = np.where(AD > 0, S / AD, np.inf).min(axis=1)
        if not (np.all(np.isfinite(fwd)) and np.all(np.isfinite(bwd))):
            raise UnboundedDirection("hit-and-run needs a bounded polytope")
        t = -bwd + (fwd + bwd) * rng.uniform(0.02, 0.98, size=len(X))
        X = X + t[:, None] * D
    return X


def _metric_fn(P, metric):
    """Return ``(label, f)`` with ``f(x, w0=None) -> MetricEvaluation``."""
    if callable(metric):
        return getattr(metric, "label", "custom"), metric
    kind = MetricKind.for_polytope(metric, P)

    def f(x, w0=None):
        return evaluate_metric(P, x, kind, w0)

    return kind.tag, f


def _whiten(ev, M):
    """``L^-1 M L^-T``, orthogonally similar to ``H^-1/2 M H^-1/2``."""
    Y = scipy.linalg.solve_triangular(ev.chol, M, lower=True)
    return scipy.linalg.solve_triangular(ev.chol, Y.T, lower=True)


def _unit_vectors(rng, k, n):
    U = rng.standard_normal((k, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


# --- strong self-concordance ----------------------------------------------

@dataclass
class SSCReport:
    metric: str
    samples: int
    max_ratio: float
    tolerance: float
    bound: float = SSC_BOUND
    ratios: np.ndarray = field(default=None, repr=False)

    @property
    def passed(self):
        return self.max_ratio <= self.bound * (1.0 + self.tolerance)

    def as_dict(self):
        return {
            "check": "strong_self_concordance",
            "metric": self.metric,
            "params": {"trials": self.samples, "tolerance": self.tolerance},
            "measured": {"max_ratio": self.max_ratio,
                         "mean_ratio": float(np.mean(self.ratios))},
            "bound": self.bound,
            "pass": bool(self.passed),
        }


def ssc_ratio(ev, h, derivative=hessian_directional_derivative):
    """``||H^-1/2 DH[h] H^-1/2||_F / ||h||_H`` at one point."""
    D = derivative(ev, h)
    h_norm = np.linalg.norm(ev.chol.T @ h)
    return float(np.linalg.norm(_whiten(ev, D), "fro") / h_norm)


def check_strong_self_concordance(P, metric, trials, rng, tolerance=None,
                                  derivative=hessian_directional_derivative,
                                  points=None):
    """Largest strong self-concordance ratio over random ``(x, h)``.

    ``derivative(ev, h)`` defaults to the library directional derivative;
    tests substitute corrupted versions as negative controls.
    """
    label, f = _metric_fn(P, metric)
    if points is None:
        points = hit_and_run_points(P, trials, rng)
    H = _unit_vectors(rng, len(points), P.n)
    ratios = np.array([ssc_ratio(f(x), h, derivative)
                       for x, h in zip(points, H)])
    if tolerance is None:
        tolerance = SSC_TOL.get(label, 1e-3)
    return SSCReport(label, len(ratios), float(ratios.max()), tolerance,
                     ratios=ratios)


# --- global sandwich ------------------------------------------------------

@dataclass
class SandwichReport:
    """Counts of pairs violating the two global bounds.

    For ``t = ||y - x||_x`` the spectral bound requires the eigenvalues of
    ``H(x)^-1/2 H(y) H(x)^-1/2`` to lie in ``[(1-t)^2, (1-t)^-2]``; the
    Frobenius bound requires ``||H(x)^-1/2 (H(y) - H(x)) H(x)^-1/2||_F``
    to be at most ``t / (1-t)^2``.  ``frob_corrected_violations`` counts
    pairs above ``(1-t)^-2 - 1``, the value obtained by integrating the
    strong self-concordance bound along the segment directly.
    """

    metric: str
    trials: int
    t_max: float
    eig_slack: float
    frob_slack: float
    eig_violations: int
    frob_violations: int
    frob_corrected_violations: int
    max_eig_excess: float
    max_frob_ratio: float
    max_frob_corrected_ratio: float

    @property
    def passed(self):
        return self.eig_violations == 0 and self.frob_violations == 0

    def as_dict(self):
        return {
            "check": "global_sandwich",
            "metric": self.metric,
            "params": {"trials": self.trials, "t_max": self.t_max,
                       "eig_slack": self.eig_slack,
                       "frob_slack": self.frob_slack},
            "measured": {
                "eig_violations": self.eig_violations,
                "frob_violations": self.frob_violations,
                "frob_corrected_violations": self.frob_corrected_violations,
                "max_eig_excess": self.max_eig_excess,
                "max_frob_ratio": self.max_frob_ratio,
                "max_frob_corrected_ratio": self.max_frob_corrected_ratio,
            },
            "bound": {"eig": "[(1-t)^2, (1-t)^-2]", "frob": "t/(1-t)^2"},
            "pass": bool(self.passed),
        }


def sandwich_quantities(ev_x, ev_y):
    """Eigenvalues of ``H(x)^-1/2 H(y) H(x)^-1/2`` and the Frobenius gap."""
    M = _whiten(ev_x, ev_y.H)
    M = 0.5 * (M + M.T)
    eig = np.linalg.eigvalsh(M)
    frob = float(np.linalg.norm(M - np.eye(len(M)), "fro"))
    return eig, frob


def check_global_sandwich(P, metric, trials, rng, t_max=0.5, eig_slack=None,
                          frob_slack=FROB_SLACK, points=None):
    """Test both global bounds on pairs with ``||y - x||_x`` in ``(0, t_max]``."""
    label, f = _metric_fn(P, metric)
    if eig_slack is None:
        eig_slack = EIG_SLACK.get(label, 1e-6)
    if points is None:
        points = hit_and_run_points(P, trials, rng)
    dirs = _unit_vectors(rng, len(points), P.n)
    ts = t_max * (1.0 - rng.random(len(points)))
    eig_bad = frob_bad = corr_bad = 0
    max_excess = -np.inf
    max_ratio = max_corr = 0.0
    for x, d, t in zip(points, dirs, ts):
        ev_x = f(x)
        y = x + t * d / np.linalg.norm(ev_x.chol.T @ d)
        ev_y = f(y, ev_x.weights)
        eig, frob = sandwich_quantities(ev_x, ev_y)
        lo, hi = (1.0 - t) ** 2, (1.0 - t) ** -2
        excess = max(lo - eig.min(), eig.max() - hi)
        max_excess = max(max_excess, excess)
        eig_bad += excess > eig_slack
        stated = t / (1.0 - t) ** 2
        corrected = (1.0 - t) ** -2 - 1.0
        frob_bad += frob > stated + frob_slack
        corr_bad += frob > corrected + frob_slack
        max_ratio = max(max_ratio, frob / stated)
        max_corr = max(max_corr, frob / corrected)
    return SandwichReport(label, len(points), t_max, eig_slack, frob_slack,
                          int(eig_bad), int(frob_bad), int(corr_bad),
                          float(max_excess), float(max_ratio), float(max_corr))


# --- symmetry -------------------------------------------------------------

@dataclass
class SymmetryReport:
    """Empirical symmetry parameter.

    ``nu_bar_emp`` is the largest ``||y - x||_H^2`` over symmetric-chord
    endpoints ``y`` (where ``min(slack(y), slack(2x - y)) = 0``).
    ``inner_violations`` counts boundary points of ``E_x(1)`` outside
    ``P ∩ (2x - P)``; ``inner_max`` is the largest
    ``||S_x^-1 A (y - x)||_inf`` seen on that boundary (at most 1 when
    containment holds).
    """

    metric: str
    x_samples: int
    chord_samples: int
    nu_bar_emp: float
    inner_violations: int
    inner_max: float
    theoretical_bound: float

    @property
    def passed(self):
        return (self.inner_violations == 0
                and self.nu_bar_emp <= self.theoretical_bound)

    def as_dict(self):
        return {
            "check": "symmetry",
            "metric": self.metric,
            "params": {"x_samples": self.x_samples,
                       "chord_samples": self.chord_samples},
            "measured": {"nu_bar_emp": self.nu_bar_emp,
                         "inner_violations": self.inner_violations,
                         "inner_max": self.inner_max},
            "bound": self.theoretical_bound,
            "pass": bool(self.passed),
        }


def symmetry_bound(P, metric):
    """Upper bound on ``nu_bar``: ``m`` for the log barrier and
    ``e n (1+q^2)(1+q)`` for the LS matrix."""
    kind = MetricKind.for_polytope(metric, P)
    if kind.tag == LOG:
        return float(P.m)
    return math.e * P.n * kind.scale


def symmetric_chord_norms(ev, directions):
    """``||y - x||_H^2`` at the symmetric-chord endpoint along each direction.

    The extent is ``min(t+, t-)`` where ``t+``/``t-`` are the exact chord
    extents forward and backward, so that both ``y`` and ``2x - y`` stay in
    ``P``.
    """
    P = ev.polytope
    D = np.atleast_2d(directions)
    AD = D @ P.A.T
    s = ev.slacks
    with np.errstate(divide="ignore", over="ignore"):
        fwd = np.where(AD < 0, s / -AD, np.inf).min(axis=1)
        bwd = np.where(AD > 0, s / AD, np.inf).min(axis=1)
    t = np.minimum(fwd, bwd)
    if not np.all(np.isfinite(t)):
        raise UnboundedDirection("symmetrized body is unbounded")
    HD = D @ ev.chol
    return t ** 2 * np.einsum("ij,ij->i", HD, HD)


def estimate_symmetry(P, metric, x_samples, chord_samples, rng, points=None):
    """Inner and outer symmetric containment at random interior points."""
    label, f = _metric_fn(P, metric)
    if points is None:
        points = hit_and_run_points(P, x_samples, rng)
    nu = 0.0
    bad = 0
    inner_max = 0.0
    for x in points:
        ev = f(x)
        U = _unit_vectors(rng, chord_samples, P.n)
        Y = x + scipy.linalg.solve_triangular(ev.chol.T, U.T, lower=False).T
        for y in Y:
            if not (P.contains(y) and P.contains(2.0 * x - y)):
                bad += 1
        ratios = np.abs((Y - x) @ P.A.T) / ev.slacks
        inner_max = max(inner_max, float(ratios.max()))
        D = _unit_vectors(rng, chord_samples, P.n)
        nu = max(nu, float(symmetric_chord_norms(ev, D).max()))
    return SymmetryReport(label, len(points), chord_samples, nu, int(bad),
                          inner_max, symmetry_bound(P, metric))


def nu_bar_sweep(n, ks, metric, x_samples, chord_samples, seed=0):
    """``nu_bar_emp`` on ``cube_dup(n, k)`` for each ``k``.

    Returns a list of ``(m, nu_bar_emp)``.
    """
    from .walk import make_rng

    out = []
    for i, k in enumerate(ks):
        P = cube_dup(n, k)
        rep = estimate_symmetry(P, metric, x_samples, chord_samples,
                                make_rng(seed, i))
        out.append((P.m, rep.nu_bar_emp))
    return out


# --- log-det convexity ------------------------------------------------------

@dataclass
class ConvexityReport:
    metric: str
    trials: int
    violations: int
    max_excess: float
    tolerance: float

    @property
    def passed(self):
        return self.violations == 0

    def as_dict(self):
        return {
            "check": "logdet_convexity",
            "metric": self.metric,
            "params": {"trials": self.trials, "tolerance": self.tolerance},
            "measured": {"violations": self.violations,
                         "max_excess": self.max_excess},
            "bound": "f((x+y)/2) <= (f(x)+f(y))/2",
            "pass": bool(self.passed),
        }


def check_logdet_convexity(P, metric, trials, rng, tol=CONVEXITY_TOL):
    """Midpoint convexity of ``ln det H`` on random interior segments."""
    label, f = _metric_fn(P, metric)
    X = hit_and_run_points(P, 2 * trials, rng)
    bad = 0
    worst = -np.inf
    for x, y in zip(X[:trials], X[trials:]):
        ex, ey = f(x), f(y)
        mid = f(0.5 * (x + y), ex.weights)
        excess = mid.logdet - 0.5 * (ex.logdet + ey.logdet)
        worst = max(worst, excess)
        bad += excess > tol
    return ConvexityReport(label, trials, int(bad), float(worst), tol)


# --- uniformity -------------------------------------------------------------

def effective_sample_size(x):
    """ESS of a scalar chain by Geyer's initial positive sequence."""
    x = np.asarray(x, dtype=np.float64)
    N = len(x)
    xc = x - x.mean()
    if N < 4 or np.ptp(x) == 0.0:
        return 1.0
    size = 1 << (2 * N - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:N] / N
    rho = acov / acov[0]
    tau = -1.0
    prev = np.inf
    for k in range(0, N - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)  # monotone sequence
        tau += 2.0 * pair
        prev = pair
    return float(min(N, N / max(tau, 1e-12)))


def reference_transform(P, X):
    """Map samples to coordinates that are iid ``U[0,1]`` under uniformity.

    Returns ``(U, marginal_cdfs)`` where ``marginal_cdfs[j]`` is the exact
    CDF of coordinate ``j`` of the raw samples.
    """
    ref = P.reference
    if ref is None:
        raise UnknownReference(f"no exact marginals known for {P.name or 'P'}")
    n = P.n
    if ref[0] == "cube":
        lo, hi = ref[1], ref[2]
        U = (X - lo) / (hi - lo)
        cdfs = [stats.uniform(lo, hi - lo).cdf] * n
        return U, cdfs
    if ref[0] == "simplex":
        U = np.empty_like(X)
        rest = np.ones(len(X))
        for k in range(n):
            frac = np.clip(X[:, k] / rest, 0.0, 1.0)
            U[:, k] = 1.0 - (1.0 - frac) ** (n - k)
            rest = rest - X[:, k]
        cdfs = [stats.beta(1, n).cdf] * n
        return U, cdfs
    raise UnknownReference(f"unsupported reference {ref!r}")


@dataclass
class UniformityReport:
    """Goodness of fit of chain samples against the uniform law on ``P``.

    Raw KS and chi-square p-values treat the samples as independent.  The
    adjusted p-values account for autocorrelation: KS uses the
    coordinate's effective sample size in place of ``n``, and the cell
    chi-square statistic is divided by the variance inflation of the
    cell frequencies measured with batch means.  The pass flag uses the
    adjusted values.
    """

    n_samples: int
    ks_statistics: list
    ks_pvalues: list
    ks_pvalues_adjusted: list
    cells_per_axis: int
    chi2_statistic: float
    chi2_pvalue: float
    chi2_inflation: float
    chi2_pvalue_adjusted: float
    ess: float
    ess_per_coordinate: list
    means: list

    @property
    def passed(self):
        return (min(self.ks_pvalues_adjusted) > KS_ALPHA
                and self.chi2_pvalue_adjusted > CHI2_ALPHA)

    def as_dict(self):
        return {
            "check": "uniformity",
            "metric": None,
            "params": {"n_samples": self.n_samples,
                       "cells_per_axis": self.cells_per_axis},
            "measured": {
                "means": self.means,
                "ks_statistics": self.ks_statistics,
                "ks_pvalues": self.ks_pvalues,
                "ks_pvalues_adjusted": self.ks_pvalues_adjusted,
                "chi2_statistic": self.chi2_statistic,
                "chi2_pvalue": self.chi2_pvalue,
                "chi2_inflation": self.chi2_inflation,
                "chi2_pvalue_adjusted": self.chi2_pvalue_adjusted,
                "ess": self.ess,
            },
            "bound": {"ks_pvalue": KS_ALPHA, "chi2_pvalue": CHI2_ALPHA},
            "pass": bool(self.passed),
        }


def _cell_index(U, k):
    idx = np.clip((U * k).astype(np.int64), 0, k - 1)
    return np.ravel_multi_index(idx.T, (k,) * U.shape[1])


def uniformity_tests(samples, P, cells_per_axis=None, batches=25):
    """KS per coordinate and a cell chi-square test of uniformity on ``P``.

    Parameters
    ----------
    samples : ndarray of shape (N, n) or ChainTrace
    P : Polytope
        Must be a generator-built cube or simplex.
    cells_per_axis : int, optional
        Grid resolution; by default the finest grid with at least 20
        expected samples per cell.
    batches : int
        Number of contiguous batches for the variance-inflation estimate.

    Raises
    ------
    UnknownReference
        If exact marginals are not available for ``P``.
    """
    X = np.asarray(getattr(samples, "samples", samples), dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("need a nonempty (N, n) array of samples")
    N, n = X.shape
    U, cdfs = reference_transform(P, X)
    ess = [effective_sample_size(X[:, j]) for j in range(n)]
    ks_stat, ks_p, ks_adj = [], [], []
    for j in range(n):
        res = stats.kstest(X[:, j], cdfs[j])
        ks_stat.append(float(res.statistic))
        ks_p.append(float(res.pvalue))
        n_eff = max(1, int(round(ess[j])))
        ks_adj.append(float(stats.kstwo.sf(res.statistic, n_eff)))

    if cells_per_axis is None:
        cells_per_axis = max(1, int((N / MIN_CELL_EXPECTATION) ** (1.0 / n)))
    K = cells_per_axis ** n
    cells = _cell_index(U, cells_per_axis)
    counts = np.bincount(cells, minlength=K)
    if K > 1:
        chi2 = float(((counts - N / K) ** 2).sum() / (N / K))
        chi2_p = float(stats.chi2.sf(chi2, K - 1))
        inflation = _batch_inflation(cells, K, batches)
        chi2_adj_p = float(stats.chi2.sf(chi2 / inflation, K - 1))
    else:
        chi2, chi2_p, inflation, chi2_adj_p = 0.0, 1.0, 1.0, 1.0
    return UniformityReport(
        N, ks_stat, ks_p, ks_adj, cells_per_axis, chi2, chi2_p,
        float(inflation), chi2_adj_p, float(min(ess)), ess,
        [float(v) for v in X.mean(axis=0)])


def _batch_inflation(cells, K, batches):
    """Variance inflation of cell frequencies relative to iid sampling."""
    b = len(cells) // batches
    if batches < 2 or b < 1:
        return 1.0
    freq = np.stack([np.bincount(cells[j * b:(j + 1) * b], minlength=K) / b
                     for j in range(batches)])
    p = 1.0 / K
    observed = freq.var(axis=0, ddof=1).sum()
    iid = K * p * (1.0 - p) / b
    return max(1.0, float(observed / iid))


# --- acceptance ---------------------------------------------------------------

@dataclass
class AcceptanceSummary:
    steps: int
    fraction_above_threshold: float
    mean_filter_value: float
    acceptance_rate: float
    threshold: float = ACCEPT_THRESHOLD

    def as_dict(self):
        return {
            "check": "acceptance",
            "metric": None,
            "params": {"steps": self.steps, "threshold": self.threshold},
            "measured": {
                "fraction_above_threshold": self.fraction_above_threshold,
                "mean_filter_value": self.mean_filter_value,
                "acceptance_rate": self.acceptance_rate,
            },
            "bound": None,
            "pass": None,
        }


def acceptance_statistics(trace, threshold=ACCEPT_THRESHOLD):
    """Summaries of the per-step acceptance probabilities of a trace."""
    values = np.asarray(trace.filter_values, dtype=np.float64)
    values = values[~np.isnan(values)]
    if len(values) == 0:
        return AcceptanceSummary(0, 0.0, 0.0, 0.0, threshold)
    return AcceptanceSummary(
        len(values),
        float(np.mean(values >= threshold)),
        float(values.mean()),
        float(trace.stats.acceptance_rate),
        threshold,
    )
