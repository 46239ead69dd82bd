"""Orthogonally split spacetimes: gbar = -beta dt^2 + g_t on I x F.

The ambient coordinates are (t, x1..xd) with slot 0 = t throughout the
package.  All types are immutable after construction and all operations are
pure functions, so concurrent evaluation is safe.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MetricDegeneracyError, UsageError
from .fields import MetricField, ScalarField

SEMIDEFINITE_TOL = 1e-12


@dataclass(frozen=True)
class ChartPoint:
    t: float
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))

    @property
    def coords(self):
        return np.concatenate([[self.t], self.x])


def point(t, *x):
    return ChartPoint(float(t), np.asarray(x, dtype=float))


@dataclass(frozen=True)
class TangentVector:
    base: ChartPoint
    dt: float
    dx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dx", np.asarray(self.dx, dtype=float))
        if self.dx.shape != self.base.x.shape:
            raise UsageError("fiber component length does not match the base point")

    @property
    def components(self):
        return np.concatenate([[self.dt], self.dx])

    def scaled(self, factor):
        return TangentVector(self.base, factor * self.dt, factor * self.dx)


def vector(base, dt, *dx):
    return TangentVector(base, float(dt), np.asarray(dx, dtype=float))


def vector_from_components(base, comps):
    comps = np.asarray(comps, dtype=float)
    return TangentVector(base, float(comps[0]), comps[1:])


@dataclass(frozen=True)
class MetricSample:
    """g_t components at a point together with the derivatives the
    monotonicity conditions need."""

    point: ChartPoint
    g: np.ndarray               # (d, d) fiber metric
    lie: np.ndarray             # (d, d) Lie derivative of g_t along d/dt
    d_beta_dt: float
    grad_beta_fiber: np.ndarray  # (d,) fiber partials of beta
    beta: float


@dataclass(frozen=True)
class MonotonicityReport:
    point: ChartPoint
    flags: frozenset            # subset of {expanding, nonContracting, ...}
    lie_min: float
    lie_max: float
    d_beta_dt: float

    def has(self, name):
        return name in self.flags


@dataclass(frozen=True)
class ModerateRateReport:
    inf_estimate: float
    sup_estimate: float
    positive: bool
    basis: str = "sample-based"   # cannot certify over non-compact sets
    n_samples: int = 0


class SplitSpacetime:
    """The ambient geometry oracle: beta, the metric family and derivatives."""

    def __init__(self, fiber_dim, beta, metric, interval=(-np.inf, np.inf),
                 kind="custom", params=None, beta_is_one=False):
        self.fiber_dim = int(fiber_dim)
        self.beta = beta
        self.metric = metric
        self.interval = (float(interval[0]), float(interval[1]))
        self.kind = kind
        self.params = dict(params or {})
        self.beta_is_one = beta_is_one

    @property
    def ambient_dim(self):
        return self.fiber_dim + 1

    @property
    def deriv_mode(self):
        return "analytic" if (self.beta.analytic and self.metric.analytic) else "fd"

    def __repr__(self):
        return (f"SplitSpacetime(kind={self.kind!r}, fiber_dim={self.fiber_dim}, "
                f"interval={self.interval})")

    # -- point/vector plumbing ------------------------------------------------

    def require_point(self, p):
        if not (self.interval[0] <= p.t <= self.interval[1]):
            raise DomainError(f"t={p.t} outside interval {self.interval}")
        if p.x.shape != (self.fiber_dim,):
            raise UsageError(
                f"point has {p.x.shape[0]} fiber coordinates, expected {self.fiber_dim}")
        return p

    def beta_at(self, p):
        self.require_point(p)
        b = self.beta.value(p.t, p.x)
        if not b > 0.0:
            raise MetricDegeneracyError(f"beta = {b} <= 0 at t={p.t}, x={p.x}")
        return b

    def partial_t(self, p):
        """The coordinate observer field d/dt at p."""
        return TangentVector(p, 1.0, np.zeros(self.fiber_dim))

    # -- metric access --------------------------------------------------------

    def metric_sample(self, p):
        """g_t, its t-derivative and the beta derivatives at p."""
        self.require_point(p)
        bval, bgrad = self.beta.value_and_grad(p.t, p.x)
        if not bval > 0.0:
            raise MetricDegeneracyError(f"beta = {bval} <= 0 at t={p.t}, x={p.x}")
        g, dg = self.metric.matrix_and_grad(p.t, p.x)
        eigs = np.linalg.eigvalsh(g)
        if eigs[0] <= 0.0:
            raise MetricDegeneracyError(
                f"g_t not positive definite at t={p.t}, x={p.x} "
                f"(min eigenvalue {eigs[0]:.3e})")
        return MetricSample(point=p, g=g, lie=dg[0], d_beta_dt=float(bgrad[0]),
                            grad_beta_fiber=bgrad[1:], beta=bval)

    def ambient_matrix(self, p):
        """gbar components at p: diag(-beta) ++ g_t."""
        b = self.beta_at(p)
        g = self.metric.matrix(p.t, p.x)
        d = self.fiber_dim
        gbar = np.zeros((d + 1, d + 1))
        gbar[0, 0] = -b
        gbar[1:, 1:] = g
        return gbar

    def ambient_matrix_many(self, t, x):
        b = self.beta.value_many(t, x)
        if np.any(b <= 0.0):
            i = int(np.argmax(b <= 0.0))
            raise MetricDegeneracyError(
                f"beta = {b[i]} <= 0 at t={np.asarray(t).reshape(-1)[i]}")
        g = self.metric.matrix_many(t, x)
        P, d = g.shape[0], self.fiber_dim
        gbar = np.zeros((P, d + 1, d + 1))
        gbar[:, 0, 0] = -b
        gbar[:, 1:, 1:] = g
        return gbar

    def ambient_and_grad_many(self, t, x):
        """gbar (P,D,D) and its coordinate partials (P,D,D,D); first index of
        the gradient block is the differentiation coordinate."""
        bval, bgrad = self.beta.value_and_grad_many(t, x)
        if np.any(bval <= 0.0):
            raise MetricDegeneracyError("beta <= 0 inside ambient_and_grad")
        g, dg = self.metric.matrix_and_grad_many(t, x)
        P, d = g.shape[0], self.fiber_dim
        D = d + 1
        gbar = np.zeros((P, D, D))
        gbar[:, 0, 0] = -bval
        gbar[:, 1:, 1:] = g
        dgbar = np.zeros((P, D, D, D))
        dgbar[:, :, 0, 0] = -bgrad
        dgbar[:, :, 1:, 1:] = dg
        return gbar, dgbar

    def ambient_metric(self, v, w):
        """gbar(v, w) for tangent vectors sharing a base point."""
        if v.base.t != w.base.t or not np.array_equal(v.base.x, w.base.x):
            raise UsageError("tangent vectors have different base points")
        b = self.beta_at(v.base)
        g = self.metric.matrix(v.base.t, v.base.x)
        return float(-b * v.dt * w.dt + v.dx @ g @ w.dx)

    def riemannized_norm_sq(self, v):
        """beta dt^2 + g_t norm; a positive scale for tolerance bands."""
        b = self.beta_at(v.base)
        g = self.metric.matrix(v.base.t, v.base.x)
        return float(b * v.dt ** 2 + v.dx @ g @ v.dx)


# ---------------------------------------------------------------------------
# Operations

def monotonicity_at(M, p):
    """Expanding/contracting flags with margins at one point.

    Expanding needs the Lie derivative of g_t strictly positive definite and
    d(beta)/dt <= 0; the semi-definite verdicts use a -1e-12 band so noise
    cannot flip open conditions.
    """
    s = M.metric_sample(p)
    eigs = np.linalg.eigvalsh(s.lie)
    lie_min, lie_max = float(eigs[0]), float(eigs[-1])
    scale = max(1.0, float(np.abs(s.g).max()))
    tol = SEMIDEFINITE_TOL * scale
    flags = set()
    if s.d_beta_dt <= tol:
        if lie_min > tol:
            flags |= {"expanding", "nonContracting"}
        elif lie_min >= -tol:
            flags.add("nonContracting")
    if s.d_beta_dt >= -tol:
        if lie_max < -tol:
            flags |= {"contracting", "nonExpanding"}
        elif lie_max <= tol:
            flags.add("nonExpanding")
    if not flags:
        flags.add("none")
    return MonotonicityReport(point=p, flags=frozenset(flags),
                              lie_min=lie_min, lie_max=lie_max,
                              d_beta_dt=s.d_beta_dt)


def moderate_proper_time_rate(M, samples):
    """Sample-based inf/sup of beta; positive iff the inf stays above zero.

    A finite sample can never certify the bounds over a non-compact region,
    hence the explicit basis tag on the report.
    """
    samples = list(samples)
    if not samples:
        raise UsageError("moderate_proper_time_rate needs at least one sample")
    vals = np.array([M.beta_at(p) for p in samples])
    inf_est, sup_est = float(vals.min()), float(vals.max())
    return ModerateRateReport(inf_estimate=inf_est, sup_estimate=sup_est,
                              positive=bool(inf_est > 0.0 and np.isfinite(sup_est)),
                              n_samples=len(samples))


def div_partial_t(M, p, frame=None):
    """Divergence of d/dt: (1/2)(dln(beta)/dt + trace of g^-1 Lie(g)).

    With an adapted frame supplied, the frame-sum route is used instead:
    sum_i gbar(D_{E_i} dt, E_i) + sum_j eps_j gbar(D_{N_j} dt, N_j); the two
    agree in exact arithmetic.
    """
    if frame is None:
        s = M.metric_sample(p)
        tr = float(np.trace(np.linalg.solve(s.g, s.lie)))
        return 0.5 * (s.d_beta_dt / s.beta + tr)
    from .curvature import christoffels
    conn = christoffels(M, p)
    gbar = M.ambient_matrix(p)
    # (D_X dt)^a = Gamma^a_{b0} X^b
    total = 0.0
    for e in frame.tangent_components():
        de = conn.gamma[:, :, 0] @ e
        total += float(e @ gbar @ de)
    for eps_j, nj in zip(frame.eps, frame.normal_components()):
        dn = conn.gamma[:, :, 0] @ nj
        total += eps_j * float(nj @ gbar @ dn)
    return total


# ---------------------------------------------------------------------------
# Catalog

def _probe_positive(field, fiber_dim, name, interval):
    lo = interval[0] if np.isfinite(interval[0]) else -1.0
    hi = interval[1] if np.isfinite(interval[1]) else 1.0
    ts = np.linspace(lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo), 5)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1.0, 1.0, size=(5, fiber_dim))
    try:
        vals = field.value_many(np.repeat(ts, 5)[:25], np.tile(xs, (5, 1))[:25])
    except Exception:
        return
    if np.any(vals <= 0.0):
        warnings.warn(f"{name} is non-positive at a probe point; evaluation "
                      "will raise where that happens", stacklevel=3)


def minkowski(fiber_dim=3):
    M = SplitSpacetime(fiber_dim, ScalarField.constant(1.0, fiber_dim),
                       MetricField.identity(fiber_dim), kind="minkowski",
                       beta_is_one=True)
    return M


def grw(f, g0=None, fiber_dim=3, interval=(-np.inf, np.inf)):
    """Warped product -dt^2 + f(t) g0; f must be positive."""
    if g0 is None:
        g0 = [["1" if i == j else "0" for j in range(fiber_dim)]
              for i in range(fiber_dim)]
    metric = MetricField.scaled(_wrap(f), g0, fiber_dim)
    beta = ScalarField.constant(1.0, fiber_dim)
    M = SplitSpacetime(fiber_dim, beta, metric, interval, kind="grw",
                       params={"f": _src(f)}, beta_is_one=True)
    _probe_positive(ScalarField.from_expression(_wrap(f), fiber_dim),
                    fiber_dim, "warping function", M.interval)
    return M


def standard_static(beta, g=None, fiber_dim=3, interval=(-np.inf, np.inf)):
    """Time-independent beta(x) and g(x)."""
    if g is None:
        g = [["1" if i == j else "0" for j in range(fiber_dim)]
             for i in range(fiber_dim)]
    beta_field = ScalarField.from_expression(_wrap(beta), fiber_dim)
    metric = MetricField.from_expressions(g, fiber_dim)
    M = SplitSpacetime(fiber_dim, beta_field, metric, interval,
                       kind="standardStatic", params={"beta": _src(beta)})
    _probe_positive(beta_field, fiber_dim, "beta", M.interval)
    return M


def twisted(f, g0=None, fiber_dim=3, interval=(-np.inf, np.inf)):
    """-dt^2 + f(t,x) g0 with a twisting function on the whole product."""
    M = grw(f, g0, fiber_dim, interval)
    return SplitSpacetime(fiber_dim, M.beta, M.metric, interval, kind="twisted",
                          params={"f": _src(f)}, beta_is_one=True)


def doubly_twisted(beta, f1, f2, g0=None, interval=(-np.inf, np.inf),
                   radial_interval=(0.0, np.inf)):
    """-beta dt^2 + f1 dr^2 + f2 g0 with a 2-dimensional base (F, g0).

    Fiber coordinates are (r, x2, x3) = (x1, x2, x3); expressions may use the
    alias r for x1, and g0 entries may depend on (x2, x3).
    """
    if g0 is None:
        g0 = [["1", "0"], ["0", "1"]]
    fiber_dim = 3
    z = "0"
    rows = [
        [_mul_src(f1, "1"), z, z],
        [z, _mul_src(f2, g0[0][0]), _mul_src(f2, g0[0][1])],
        [z, _mul_src(f2, g0[1][0]), _mul_src(f2, g0[1][1])],
    ]
    metric = MetricField.from_expressions(rows, fiber_dim)
    beta_field = ScalarField.from_expression(_wrap(beta), fiber_dim)
    M = SplitSpacetime(fiber_dim, beta_field, metric, interval,
                       kind="doublyTwisted",
                       params={"beta": _src(beta), "f1": _src(f1),
                               "f2": _src(f2),
                               "radial_interval": radial_interval},
                       beta_is_one=_src(beta) in ("1", "1.0"))
    _probe_positive(beta_field, fiber_dim, "beta", M.interval)
    return M


def _wrap(e):
    from .expr import Expression
    return e if isinstance(e, Expression) else Expression(str(e))


def _src(e):
    from .expr import Expression
    return e.source if isinstance(e, Expression) else str(e)


def _mul_src(a, b):
    sa, sb = _src(a), _src(b)
    if sb in ("0", "0.0"):
        return "0"
    if sa in ("1", "1.0"):
        return sb
    if sb in ("1", "1.0"):
        return sa
    return f"({sa})*({sb})"


def catalog_spacetime(kind, **params):
    """Scenario-facing constructor dispatch."""
    builders = {"minkowski": minkowski, "grw": grw,
                "standardStatic": standard_static, "twisted": twisted,
                "doublyTwisted": doubly_twisted}
    if kind not in builders:
        raise UsageError(f"unknown spacetime kind {kind!r}")
    return builders[kind](**params)
