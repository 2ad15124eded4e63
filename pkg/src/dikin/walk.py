"""The Dikin walk with a pluggable local metric and acceptance filter.

Each step proposes ``y`` uniformly from the Dikin ellipsoid
``E_x(r) = {y : (y-x)^T H(x) (y-x) <= r^2}`` and accepts it with a filter
applied to the proposal-density ratio

    rho = p(y -> x) / p(x -> y) = sqrt(det H(y) / det H(x)) * [x in E_y(r)].

``"metropolis"`` accepts with ``min(1, rho)``; ``"smooth"`` accepts with
``rho / (1 + rho)``.  Both leave the uniform distribution stationary.

Random streams
--------------
Chain ``k`` of a run seeded with ``seed`` draws from
``Generator(Philox(SeedSequence(seed, spawn_key=(k,))))``.  Philox is a
counter-based generator, so streams of distinct chains never overlap and
the same ``(seed, k)`` always reproduces the same chain bit for bit.
"""

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from ._validation import check_point
from .barriers import LOG, LS, MetricKind, ellipsoid_norm, evaluate_metric
from .estimators import det_ratio_estimate, smooth_accept_from_estimate
from .exceptions import NotInterior

METROPOLIS = "metropolis"
SMOOTH = "smooth"
FILTERS = (METROPOLIS, SMOOTH)
DET_PATHS = ("exact", "estimator")
DEFAULT_RADIUS = 1.0 / 512.0


def make_rng(seed, chain=0):
    """Independent, reproducible stream for chain ``chain`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chain),))
    return np.random.Generator(np.random.Philox(ss))


def parse_radius(value):
    """Accept floats and fraction strings such as ``"1/512"``."""
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


@dataclass(frozen=True)
class WalkConfig:
    """Parameters of one chain.

    ``radius`` defaults to ``1/512``.  ``membership_guard`` rejects
    proposals outside ``P`` before any metric is evaluated; it never
    triggers for ``radius <= 1`` because ``E_x(1)`` lies inside ``P`` for
    both barriers.  ``reverse_check`` rejects moves with ``x`` outside
    ``E_y(r)``; switching it off gives a walk whose stationary law is not
    uniform and exists only as a negative control.  ``lazy`` stays put
    with probability 1/2 before proposing.  ``det_path="estimator"`` replaces the exact determinant
    ratio with the unbiased stochastic estimator (log barrier only),
    averaged over ``n_draws`` draws.
    """

    radius: float = DEFAULT_RADIUS
    barrier: str = LOG
    filter: str = METROPOLIS
    steps: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    membership_guard: bool = True
    reverse_check: bool = True
    lazy: bool = False
    det_path: str = "exact"
    n_draws: int = 64
    record_filter: bool = True

    def __post_init__(self):
        object.__setattr__(self, "radius", parse_radius(self.radius))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.barrier not in (LOG, LS):
            raise ValueError(f"barrier must be 'log' or 'ls', got {self.barrier!r}")
        if self.filter not in FILTERS:
            raise ValueError(f"filter must be one of {FILTERS}, got {self.filter!r}")
        if self.det_path not in DET_PATHS:
            raise ValueError(f"det_path must be one of {DET_PATHS}")
        if self.det_path == "estimator" and self.barrier != LOG:
            raise ValueError("the determinant estimator supports the log barrier only")
        for name, low in (("steps", 0), ("burn_in", 0), ("thin", 1),
                          ("n_draws", 1)):
            value = getattr(self, name)
            if int(value) != value or value < low:
                raise ValueError(f"{name} must be an integer >= {low}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self):
        return asdict(self)


@dataclass
class ChainStats:
    steps: int = 0
    proposals: int = 0
    accepted: int = 0
    rejected_by_filter: int = 0
    rejected_outside: int = 0
    lazy_stays: int = 0
    weight_iterations: int = 0

    @property
    def acceptance_rate(self):
        return self.accepted / self.proposals if self.proposals else 0.0


@dataclass
class ChainState:
    """Mutable state owned by one chain; ``eval.x`` is always ``current``."""

    polytope: object
    current: np.ndarray
    eval: object
    rng: np.random.Generator
    stats: ChainStats = field(default_factory=ChainStats)
    last_filter_value: float = float("nan")


@dataclass
class ChainTrace:
    """Samples recorded after burn-in and thinning plus bookkeeping."""

    samples: np.ndarray
    stats: ChainStats
    config: WalkConfig
    filter_values: np.ndarray = None
    final_state: ChainState = field(default=None, repr=False)

    @property
    def acceptance_rate(self):
        return self.stats.acceptance_rate

    def summary(self):
        return {
            "accept_rate": self.stats.acceptance_rate,
            "rejected_outside": self.stats.rejected_outside,
            "steps": self.stats.steps,
            "seed": self.config.seed,
        }


def init_state(P, x0, config, chain=0):
    x0 = check_point(x0, P.n, "x0")
    if not P.contains(x0):
        raise NotInterior("starting point is not interior")
    kind = MetricKind.for_polytope(config.barrier, P)
    ev = evaluate_metric(P, x0, kind)
    state = ChainState(P, x0.copy(), ev, make_rng(config.seed, chain))
    state.stats.weight_iterations += ev.weight_iterations
    return state


def sample_in_ellipsoid(ev, r, rng):
    """Uniform draw from ``{y : (y-x)^T H (y-x) <= r^2}``.

    A uniform point ``z`` of the Euclidean ``r``-ball (Gaussian direction,
    radius ``r U^(1/n)``) is mapped through ``L^-T`` where ``H = L L^T``.
    """
    n = ev.x.shape[0]
    g = rng.standard_normal(n)
    u = rng.random()
    z = (r * u ** (1.0 / n) / np.linalg.norm(g)) * g
    return ev.x + ev.solve_chol_t(z)


def acceptance_ratio(eval_x, eval_y):
    """``sqrt(det H(y) / det H(x)) = vol(E_x(r)) / vol(E_y(r))``."""
    return math.exp(0.5 * (eval_y.logdet - eval_x.logdet))


def metropolis_accept(rho):
    return min(1.0, rho)


def smooth_accept(rho):
    return smooth_accept_from_estimate(rho)


def filter_probability(rho, kind):
    """Acceptance probability of a move with density ratio ``rho``."""
    if kind == METROPOLIS:
        return metropolis_accept(rho)
    if kind == SMOOTH:
        return smooth_accept(rho)
    raise ValueError(f"unknown filter {kind!r}")


def dikin_step(state, config):
    """Advance ``state`` by one step in place and return it.

    Metric errors at the proposal (for example an unguarded proposal
    outside ``P``) propagate to the caller.
    """
    rng = state.rng
    stats = state.stats
    stats.steps += 1
    if config.lazy and rng.random() < 0.5:
        stats.lazy_stays += 1
        state.last_filter_value = float("nan")
        return state
    stats.proposals += 1
    ev = state.eval
    y = sample_in_ellipsoid(ev, config.radius, rng)
    coin = rng.random()
    P = state.polytope
    if config.membership_guard and not P.contains(y):
        stats.rejected_outside += 1
        state.last_filter_value = 0.0
        return state
    ev_y = evaluate_metric(P, y, ev.kind, w0=ev.weights)
    stats.weight_iterations += ev_y.weight_iterations
    if (config.reverse_check
            and ellipsoid_norm(ev_y, state.current - y) > config.radius):
        rho = 0.0  # x is outside E_y(r): the reverse move has density 0
    elif config.det_path == "estimator":
        est = det_ratio_estimate(P, y, state.current, config.n_draws, rng,
                                 pilot=0)
        rho = max(est.value, 0.0)
    else:
        rho = acceptance_ratio(ev, ev_y)
    prob = filter_probability(rho, config.filter)
    state.last_filter_value = prob
    if coin < prob:
        stats.accepted += 1
        state.current = y
        state.eval = ev_y
    else:
        stats.rejected_by_filter += 1
    return state


def run_chain(P, x0, config, chain=0):
    """Run ``burn_in + steps * thin`` steps from ``x0``.

    Every ``thin``-th point after burn-in is recorded, ``steps`` points in
    total.  The output is a deterministic function of
    ``(P, x0, config, chain)``.
    """
    state = init_state(P, x0, config, chain)
    total = config.burn_in + config.steps * config.thin
    samples = np.empty((config.steps, P.n))
    filt = np.empty(total) if config.record_filter else None
    k = 0
    for t in range(total):
        dikin_step(state, config)
        if filt is not None:
            filt[t] = state.last_filter_value
        done = t + 1 - config.burn_in
        if done > 0 and done % config.thin == 0:
            samples[k] = state.current
            k += 1
    return ChainTrace(samples, state.stats, config, filt, state)


def run_chains(P, x0, config, n_chains):
    """Independent chains sharing ``config``; chain ``k`` uses stream ``k``."""
    return [run_chain(P, x0, config, chain=k) for k in range(int(n_chains))]


def with_seed(config, seed):
    return replace(config, seed=seed)
