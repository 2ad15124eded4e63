"""Estimator-style front end to the Dikin walk."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .barriers import MetricKind
from .polytope import analytic_center, make_polytope
from .walk import DEFAULT_RADIUS, WalkConfig, run_chains


class DikinSampler(BaseEstimator):
    """Uniform sampler for ``{x : A x >= b}`` driven by the Dikin walk.

    Parameters
    ----------
    barrier : {"log", "ls"}, default="log"
        Local metric defining the proposal ellipsoids.
    radius : float or str, default=1/512
        Ellipsoid radius ``r``; fraction strings such as ``"1/512"`` work.
    filter : {"metropolis", "smooth"}, default="metropolis"
    burn_in : int, default=0
    thin : int, default=1
    lazy : bool, default=False
    det_path : {"exact", "estimator"}, default="exact"
    n_chains : int, default=1
        Independent chains; their samples are concatenated in chain order.
    random_state : int, default=0
        Seed of the counter-based streams (chain ``k`` uses stream ``k``).

    Attributes
    ----------
    polytope_ : Polytope
    center_ : ndarray of shape (n_features_in_,)
        Analytic center, the default starting point.
    q_ : float or None
        LS exponent ``2 (1 + ln m)`` when ``barrier="ls"``.
    traces_ : list of ChainTrace
        Traces of the most recent :meth:`sample` call.

    Examples
    --------
    >>> import numpy as np
    >>> A = np.vstack([np.eye(2), -np.eye(2)])
    >>> b = np.array([0.0, 0.0, -1.0, -1.0])
    >>> X = DikinSampler(radius=0.5, random_state=3).fit(A, b).sample(5)
    >>> X.shape
    (5, 2)
    """

    def __init__(self, barrier="log", radius=DEFAULT_RADIUS,
                 filter="metropolis", burn_in=0, thin=1, lazy=False,
                 det_path="exact", n_chains=1, random_state=0):
        self.barrier = barrier
        self.radius = radius
        self.filter = filter
        self.burn_in = burn_in
        self.thin = thin
        self.lazy = lazy
        self.det_path = det_path
        self.n_chains = n_chains
        self.random_state = random_state

    def _config(self, steps):
        return WalkConfig(radius=self.radius, barrier=self.barrier,
                          filter=self.filter, steps=steps,
                          burn_in=self.burn_in, thin=self.thin,
                          seed=self.random_state, lazy=self.lazy,
                          det_path=self.det_path)

    def fit(self, A, b):
        """Validate the constraints and locate the analytic center."""
        self._config(0)  # fail early on bad parameters
        P = make_polytope(A, b)
        self.polytope_ = P
        self.center_ = analytic_center(P)
        self.q_ = MetricKind.for_polytope(self.barrier, P).q
        self.n_features_in_ = P.n
        return self

    def sample(self, n_samples, x0=None):
        """Draw ``n_samples`` points per chain.

        Returns
        -------
        ndarray of shape (n_chains * n_samples, n_features_in_)
        """
        check_is_fitted(self, "polytope_")
        x0 = self.center_ if x0 is None else np.asarray(x0, dtype=np.float64)
        self.traces_ = run_chains(self.polytope_, x0,
                                  self._config(int(n_samples)),
                                  self.n_chains)
        return np.concatenate([t.samples for t in self.traces_])
