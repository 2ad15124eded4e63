"""Polytopes ``{x : A x >= b}``: membership, chords and starting points."""

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from ._validation import check_constraints, check_point
from .exceptions import (
    FactorizationFailure,
    NoConvergence,
    NoInteriorPoint,
    NotInterior,
    RankDeficient,
    UnboundedDirection,
)

RANK_RTOL = 1e-10
BOUNDARY_TOL = 1e-9
SLACK_FLOOR_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Polytope:
    """Full-dimensional polytope ``{x : A x >= b}``.

    Instances are immutable (the arrays are flagged read-only) and can be
    shared between chains.  Build them with :func:`make_polytope` or one
    of the named generators so the rank check runs.

    Attributes
    ----------
    A : ndarray of shape (m, n)
    b : ndarray of shape (m,)
    name : str or None
        Generator spec (``"cube(3)"``) or file path the polytope came from.
    reference : tuple or None
        Exact description used for uniformity tests, e.g.
        ``("cube", lo, hi)`` or ``("simplex",)``.
    """

    A: np.ndarray
    b: np.ndarray
    name: str = None
    reference: tuple = field(default=None, repr=False)

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def slack_floor(self):
        return SLACK_FLOOR_RTOL * (np.max(np.abs(self.b), initial=0.0) + 1.0)

    def slack(self, x):
        return self.A @ x - self.b

    def contains(self, x):
        return contains(self, x)

    def to_json(self):
        return {"A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True)
class Chord:
    """Chord of a polytope through an interior point.

    ``p = x - t_minus * direction`` and ``q = x + t_plus * direction`` are
    the boundary endpoints, ``direction`` has unit Euclidean norm.
    """

    p: np.ndarray
    q: np.ndarray
    direction: np.ndarray
    t_minus: float
    t_plus: float

    @property
    def length(self):
        return self.t_minus + self.t_plus


def make_polytope(A, b, name=None, reference=None):
    """Validate ``(A, b)`` and build a :class:`Polytope`.

    Raises
    ------
    DimensionMismatch
        If ``A`` and ``b`` disagree in the number of constraints.
    RankDeficient
        If ``m < n`` or ``A`` does not have full column rank.  The rank is
        read off a column-pivoted QR with threshold ``1e-10 * |R[0, 0]|``.
    """
    A, b = check_constraints(A, b)
    m, n = A.shape
    if m < n:
        raise RankDeficient(f"need m >= n constraints, got m={m}, n={n}")
    R = scipy.linalg.qr(A, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0 or np.count_nonzero(diag > RANK_RTOL * diag[0]) < n:
        raise RankDeficient(f"A has column rank < n = {n}")
    A.setflags(write=False)
    b.setflags(write=False)
    return Polytope(A, b, name=name, reference=reference)


def contains(P, x):
    """True iff every slack of ``x`` is strictly positive.

    Slacks below ``P.slack_floor`` count as boundary points.
    """
    x = check_point(x, P.n)
    return bool(np.all(P.slack(x) >= P.slack_floor))


def interior_slack(P, x):
    """Slack vector of ``x``, raising :class:`NotInterior` off the interior."""
    x = check_point(x, P.n)
    s = P.slack(x)
    if not np.all(s >= P.slack_floor):
        raise NotInterior(f"point has minimum slack {s.min():.3e}")
    return s


def _ray_extents(P, s, d):
    Ad = P.A @ d
    with np.errstate(divide="ignore", over="ignore"):
        fwd = np.where(Ad < 0, s / -Ad, np.inf)
        bwd = np.where(Ad > 0, s / Ad, np.inf)
    return bwd.min(), fwd.min()


def chord_through(P, x, direction):
    """Chord of ``P`` through interior ``x`` along ``direction``.

    The extents are the exact minimal ratios ``s_i / |(A d)_i|`` over the
    constraints that the ray approaches.

    Raises
    ------
    UnboundedDirection
        If the line leaves every constraint unbounded on either side.
    """
    s = interior_slack(P, x)
    d = check_point(direction, P.n, "direction")
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    d = d / norm
    t_minus, t_plus = _ray_extents(P, s, d)
    if not (np.isfinite(t_minus) and np.isfinite(t_plus)):
        raise UnboundedDirection("polytope is unbounded along the direction")
    return Chord(x - t_minus * d, x + t_plus * d, d, float(t_minus),
                 float(t_plus))


def cross_ratio_distance(P, x, y):
    """Cross-ratio distance ``|x-y| |p-q| / (|p-x| |y-q|)``.

    ``p, x, y, q`` are taken in that order along the chord through ``x``
    and ``y``.
    """
    x = check_point(x, P.n)
    y = check_point(y, P.n, "y")
    delta = float(np.linalg.norm(y - x))
    if delta == 0.0:
        return 0.0
    chord = chord_through(P, x, y - x)
    y_to_q = chord.t_plus - delta
    if y_to_q <= 0.0:
        raise NotInterior("y is not inside the polytope")
    return delta * chord.length / (chord.t_minus * y_to_q)


def _phase_one(P):
    # max tau s.t. A x - tau >= b, tau <= 1
    m, n = P.A.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-P.A, np.ones((m, 1))])
    bounds = [(None, None)] * n + [(None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=-P.b, bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] <= P.slack_floor:
        raise NoInteriorPoint("phase-1 found no strictly feasible point")
    return res.x[:n]


def analytic_center(P, x0=None, tol=1e-10, max_iter=200):
    """Minimizer of ``-sum(log(A x - b))`` by damped Newton.

    Parameters
    ----------
    P : Polytope
    x0 : array-like, optional
        Strictly feasible start.  Without one, a phase-1 linear program
        supplies it.
    tol : float
        Stop once the Newton decrement (the gradient norm in the local
        metric) is at most ``tol``.

    Raises
    ------
    NoInteriorPoint
        If phase-1 fails.
    NoConvergence
        If the decrement does not fall below ``tol``; this is what
        happens on unbounded polytopes, which have no analytic center.
    """
    x = _phase_one(P) if x0 is None else check_point(x0, P.n, "x0").copy()
    interior_slack(P, x)
    for _ in range(max_iter):
        s = P.slack(x)
        As = P.A / s[:, None]
        g = -As.sum(axis=0)
        try:
            L = np.linalg.cholesky(As.T @ As)
        except np.linalg.LinAlgError:
            raise FactorizationFailure("log-barrier Hessian is singular") from None
        z = scipy.linalg.solve_triangular(L, g, lower=True)
        decrement = float(np.linalg.norm(z))
        if decrement <= tol:
            return x
        dx = -scipy.linalg.solve_triangular(L.T, z, lower=False)
        step = 1.0 if decrement < 0.25 else 1.0 / (1.0 + decrement)
        while not np.all(P.slack(x + step * dx) > 0):
            step *= 0.5
        x = x + step * dx
    raise NoConvergence(
        f"analytic center not reached in {max_iter} Newton steps "
        "(is the polytope bounded?)")


# --- generators -----------------------------------------------------------

def cube(n, lo=0.0, hi=1.0):
    """Axis-aligned box ``[lo, hi]^n`` encoded with ``2n`` facets."""
    n = int(n)
    if not hi > lo:
        raise ValueError("cube needs hi > lo")
    A = np.vstack([np.eye(n), -np.eye(n)])
    b = np.concatenate([np.full(n, lo), np.full(n, -hi)])
    name = f"cube({n})" if (lo, hi) == (0.0, 1.0) else f"cube({n},{lo:g},{hi:g})"
    return make_polytope(A, b, name=name, reference=("cube", float(lo), float(hi)))


def simplex(n):
    """Standard simplex ``{x >= 0, sum(x) <= 1}``."""
    n = int(n)
    A = np.vstack([np.eye(n), -np.ones((1, n))])
    b = np.concatenate([np.zeros(n), [-1.0]])
    return make_polytope(A, b, name=f"simplex({n})", reference=("simplex",))


def cube_dup(n, k):
    """Unit cube whose facet ``x_1 >= 0`` appears ``k`` extra times.

    The body is still ``[0, 1]^n`` but ``m = 2n + k``; this is the
    standard family on which the log barrier walk is slow.
    """
    n, k = int(n), int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    e1 = np.zeros((k, n))
    e1[:, 0] = 1.0
    A = np.vstack([np.eye(n), -np.eye(n), e1])
    b = np.concatenate([np.zeros(n), -np.ones(n), np.zeros(k)])
    return make_polytope(A, b, name=f"cube_dup({n},{k})",
                         reference=("cube", 0.0, 1.0))


def random_polytope(m, n, seed=0):
    """Random bounded polytope with ``m`` facets containing the origin.

    ``n + 1`` of the normals positively span ``R^n`` (the coordinate
    vectors and ``-1/sqrt(n)``), which guarantees boundedness; the rest
    are uniform on the sphere.  Offsets are drawn so the origin has
    slacks in ``[0.5, 1.5]``.
    """
    m, n = int(m), int(n)
    if m < n + 1:
        raise ValueError("a bounded polytope needs m >= n + 1")
    rng = np.random.default_rng(seed)
    Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    base = np.vstack([np.eye(n), -np.ones((1, n)) / math.sqrt(n)]) @ Q.T
    extra = rng.standard_normal((m - n - 1, n))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    A = np.vstack([base, extra])
    A = A[rng.permutation(m)]
    b = -rng.uniform(0.5, 1.5, size=m)
    return make_polytope(A, b, name=f"random({m},{n},{seed})")


GENERATORS = {
    "cube": cube,
    "simplex": simplex,
    "cube_dup": cube_dup,
    "random": random_polytope,
}

_SPEC_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*\((.*)\)\s*$")


def _number(token):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return float(token)


def parse_generator(spec):
    """Build a polytope from a ``name(args)`` string such as ``cube(3)``."""
    match = _SPEC_RE.match(spec)
    if match is None or match.group(1) not in GENERATORS:
        raise ValueError(
            f"unknown generator {spec!r}; expected one of "
            + ", ".join(f"{g}(...)" for g in GENERATORS))
    args = [_number(t) for t in match.group(2).split(",") if t.strip()]
    try:
        return GENERATORS[match.group(1)](*args)
    except TypeError as exc:
        raise ValueError(f"bad arguments for {spec!r}: {exc}") from None


def from_json(obj, name=None):
    if not isinstance(obj, dict) or "A" not in obj or "b" not in obj:
        raise ValueError('polytope JSON must be an object {"A": ..., "b": ...}')
    return make_polytope(obj["A"], obj["b"], name=name)


def load_polytope(source):
    """Resolve a generator spec or a path to a JSON polytope file."""
    source = str(source)
    if _SPEC_RE.match(source):
        return parse_generator(source)
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"no such polytope file: {source}")
    with path.open() as fh:
        return from_json(json.load(fh), name=str(path))
