"""Spacelike submanifolds: parametrized immersions, structured meshes,
adapted orthonormal frames, second fundamental form and mean curvature.

Conventions: II(X,Y) = -(ambient derivative of Y along X)^perp, the general
relativity sign (opposite to the usual differential-geometry one), and the
mean curvature vector is the plain trace H = sum_i II(E_i, E_i).  The
timelike normal is always first in the frame and future pointing.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FrameError, ImmersionError, UsageError
from .expr import Expression, compile_outputs, parse
from .fields import FD_STEP
from .spacetime import ChartPoint, TangentVector, vector_from_components

FRAME_TOL = 1e-10

# Sign of the trace term when splitting H through a spacelike hypersurface
# with future unit normal N: H = h + GAUSS_SPLIT_SIGN * (tr A) N.  Derived
# from the second-fundamental-form convention above and pinned by the
# warped-slice regression test.
GAUSS_SPLIT_SIGN = -1.0


# ---------------------------------------------------------------------------
# Immersions

class Immersion:
    """A map from an n-dimensional parameter chart into I x F."""

    def __init__(self, param_dim, fiber_dim, program=None, fn=None,
                 jac_fn=None, kind="custom", meta=None, sources=None,
                 fd_step=None):
        self.param_dim = int(param_dim)
        self.fiber_dim = int(fiber_dim)
        self._program = program
        self._fn = fn
        self._jac_fn = jac_fn
        self.kind = kind
        self.meta = dict(meta or {})
        self.sources = sources
        self.fd_step = FD_STEP if fd_step is None else fd_step

    @property
    def ambient_dim(self):
        return self.fiber_dim + 1

    @property
    def analytic(self):
        return self._program is not None

    def map_many(self, params):
        params = np.atleast_2d(np.asarray(params, dtype=float))
        if self._program is not None:
            return self._program(params)
        return np.array([self._fn(xi) for xi in params])

    def map_and_jac_many(self, params):
        """Chart coordinates (P, 1+d) and jacobian (P, 1+d, n)."""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        if self._program is not None:
            coords, grads = self._program(params, grad=True)
            return coords, grads
        coords = self.map_many(params)
        if self._jac_fn is not None:
            jac = np.array([self._jac_fn(xi) for xi in params])
            return coords, jac
        P, n = params.shape
        jac = np.empty((P, self.ambient_dim, n))
        for c in range(n):
            h = self.fd_step * (1.0 + np.abs(params[:, c]))
            up = params.copy()
            up[:, c] += h
            dn = params.copy()
            dn[:, c] -= h
            jac[:, :, c] = (self.map_many(up) - self.map_many(dn)) / (2 * h[:, None])
        return coords, jac

    def chart_point(self, xi):
        coords = self.map_many(np.asarray(xi, dtype=float)[None, :])[0]
        return ChartPoint(float(coords[0]), coords[1:])

    def jacobian(self, xi):
        return self.map_and_jac_many(np.asarray(xi, dtype=float)[None, :])[1][0]


def _as_expr(e):
    return e if isinstance(e, Expression) else Expression(str(e))


def custom_immersion(component_exprs, param_dim, fiber_dim, kind="custom",
                     meta=None):
    """Immersion from 1+fiber_dim expressions over parameters x1..xn."""
    exprs = [_as_expr(e) for e in component_exprs]
    if len(exprs) != fiber_dim + 1:
        raise UsageError(f"need {fiber_dim + 1} component expressions")
    order = tuple(f"x{i}" for i in range(1, param_dim + 1))
    for e in exprs:
        extra = e.variables - set(order)
        if extra:
            raise UsageError(f"component uses non-parameter variables {sorted(extra)}")
    program = compile_outputs([e.ast for e in exprs], order)
    return Immersion(param_dim, fiber_dim, program=program, kind=kind,
                     meta=meta, sources=[e.source for e in exprs])


def slice_immersion(M, t0, tail=()):
    """An n-plane inside the slice {t0} x F; trailing coordinates fixed."""
    tail = tuple(float(c) for c in tail)
    n = M.fiber_dim - len(tail)
    if n < 1:
        raise UsageError("slice immersion needs at least one free coordinate")
    comps = [str(float(t0))] + [f"x{i}" for i in range(1, n + 1)] + \
        [str(c) for c in tail]
    imm = custom_immersion(comps, n, M.fiber_dim, kind="slice",
                           meta={"t0": float(t0), "tail": tail})
    return imm


def graph_immersion(M, u, x2=()):
    """Graph x1 -> (u(x1), x1, x2) over the first factor of F = F1 x F2."""
    x2 = tuple(float(c) for c in x2)
    n = M.fiber_dim - len(x2)
    if n < 1:
        raise UsageError("graph immersion needs at least one base coordinate")
    u = _as_expr(u)
    comps = [u] + [f"x{i}" for i in range(1, n + 1)] + [str(c) for c in x2]
    return custom_immersion(comps, n, M.fiber_dim, kind="graph",
                            meta={"u": u.source, "x2": x2})


def radial_graph_immersion(M, r0, u):
    """Graph x -> (u(x), r0, x) over the 2-dimensional base of a doubly
    twisted product; parameters are the base coordinates."""
    if M.kind != "doublyTwisted":
        raise UsageError("radial graphs require a doubly twisted spacetime")
    u = _as_expr(u)
    comps = [u, str(float(r0)), "x1", "x2"]
    return custom_immersion(comps, 2, M.fiber_dim, kind="radialGraph",
                            meta={"r0": float(r0), "u": u.source})


# ---------------------------------------------------------------------------
# Meshes

@dataclass
class SurfaceMesh:
    """Structured sampling of an immersion with per-vertex induced metric."""

    immersion: Immersion
    shape: tuple                # vertices per axis
    spacings: np.ndarray        # (n,)
    axes: tuple                 # per-axis coordinate arrays
    periodic: tuple             # per-axis wrap flags
    params: np.ndarray          # (P, n)
    coords: np.ndarray          # (P, 1+d) chart coordinates of the vertices
    induced: np.ndarray         # (P, n, n) pullback metric
    spacelike_margin: np.ndarray  # (P,) min eigenvalue of the pullback
    boundary: np.ndarray        # (P,) True on non-periodic axis edges

    @property
    def n_vertices(self):
        return self.params.shape[0]

    @property
    def param_dim(self):
        return len(self.shape)

    @property
    def tau(self):
        """The time function: t-coordinate of every vertex."""
        return self.coords[:, 0]

    def grid(self, values):
        """Reshape a per-vertex array onto the structured grid."""
        values = np.asarray(values)
        return values.reshape(self.shape + values.shape[1:])

    def flat(self, grid_values):
        g = np.asarray(grid_values)
        return g.reshape((self.n_vertices,) + g.shape[len(self.shape):])

    def interior_mask(self, layers=1):
        """Vertices at least `layers` away from every non-periodic edge."""
        mask = np.ones(self.shape, dtype=bool)
        for ax, per in enumerate(self.periodic):
            if per:
                continue
            sl = [slice(None)] * len(self.shape)
            sl[ax] = slice(0, layers)
            mask[tuple(sl)] = False
            sl[ax] = slice(self.shape[ax] - layers, self.shape[ax])
            mask[tuple(sl)] = False
        return mask.reshape(-1)

    def shift(self, grid_values, axis, offset):
        """Neighbor values along an axis; non-periodic edges replicate
        (callers mask those vertices out)."""
        g = np.asarray(grid_values)
        if self.periodic[axis]:
            return np.roll(g, -offset, axis=axis)
        out = np.empty_like(g)
        n = self.shape[axis]
        src = np.clip(np.arange(n) + offset, 0, n - 1)
        sl = [slice(None)] * g.ndim
        sl[axis] = src
        out[...] = g[tuple(sl)]
        return out

    def axis_neighbors(self, flat_values):
        """Stack of the 2n axis neighbors of every vertex, (2n, P)."""
        g = self.grid(flat_values)
        out = []
        for ax in range(len(self.shape)):
            out.append(self.flat(self.shift(g, ax, +1)))
            out.append(self.flat(self.shift(g, ax, -1)))
        return np.stack(out)

    def refine(self):
        """Halve the grid spacing (counts 2k+1 stay odd; periodic axes
        double their count)."""
        new_axes = []
        for (lo, hi, count), per in zip(self._axes_spec, self.periodic):
            new_count = 2 * count if per else 2 * (count - 1) + 1
            new_axes.append((lo, hi, new_count))
        return build_mesh(self._M, self.immersion, new_axes, self.periodic,
                          require_spacelike=self._required)


def build_mesh(M, immersion, axes, periodic=None, require_spacelike=True):
    """Sample an immersion on a structured parameter grid.

    axes: per-parameter (lo, hi, count); periodic axes cover [lo, hi) with
    wraparound adjacency.
    """
    n = immersion.param_dim
    if len(axes) != n:
        raise UsageError(f"immersion has {n} parameters, got {len(axes)} axes")
    if periodic is None:
        periodic = (False,) * n
    periodic = tuple(bool(p) for p in periodic)
    coords_1d = []
    spacings = []
    for (lo, hi, count), per in zip(axes, periodic):
        if count < 2:
            raise UsageError("each axis needs at least two vertices")
        if per:
            h = (hi - lo) / count
            coords_1d.append(lo + h * np.arange(count))
        else:
            h = (hi - lo) / (count - 1)
            coords_1d.append(np.linspace(lo, hi, count))
        spacings.append(h)
    grids = np.meshgrid(*coords_1d, indexing="ij")
    shape = grids[0].shape
    params = np.stack([g.reshape(-1) for g in grids], axis=1)

    coords, jac = immersion.map_and_jac_many(params)
    gbar = M.ambient_matrix_many(coords[:, 0], coords[:, 1:])
    induced = np.einsum("pai,pab,pbj->pij", jac, gbar, jac)
    margins = np.linalg.eigvalsh(induced)[:, 0]

    boundary = np.zeros(shape, dtype=bool)
    for ax, per in enumerate(periodic):
        if per:
            continue
        sl = [slice(None)] * len(shape)
        sl[ax] = 0
        boundary[tuple(sl)] = True
        sl[ax] = shape[ax] - 1
        boundary[tuple(sl)] = True

    mesh = SurfaceMesh(immersion=immersion, shape=shape,
                       spacings=np.asarray(spacings), axes=tuple(coords_1d),
                       periodic=periodic, params=params, coords=coords,
                       induced=induced, spacelike_margin=margins,
                       boundary=boundary.reshape(-1))
    mesh._M = M
    mesh._axes_spec = tuple(axes)
    mesh._required = require_spacelike
    if require_spacelike and margins.min() <= 0.0:
        k = int(np.argmin(margins))
        raise ImmersionError(
            f"immersion is not spacelike at vertex {k} "
            f"(params {params[k]}, min eigenvalue {margins[k]:.3e})")
    return mesh


@dataclass(frozen=True)
class SpacelikeReport:
    ok: bool
    witness_vertex: int = -1
    witness_params: np.ndarray = None
    min_eigenvalue: float = np.nan


def spacelike_check(M, immersion, axes, periodic=None):
    """Positive definiteness of the pullback metric on a grid of vertices."""
    mesh = build_mesh(M, immersion, axes, periodic, require_spacelike=False)
    k = int(np.argmin(mesh.spacelike_margin))
    if mesh.spacelike_margin[k] > 0.0:
        return SpacelikeReport(ok=True,
                               min_eigenvalue=float(mesh.spacelike_margin[k]))
    return SpacelikeReport(ok=False, witness_vertex=k,
                           witness_params=mesh.params[k],
                           min_eigenvalue=float(mesh.spacelike_margin[k]))


# ---------------------------------------------------------------------------
# Adapted frames

@dataclass
class FrameBundle:
    """Orthonormal tangent/normal frames at a batch of parameter points."""

    params: np.ndarray    # (P, n)
    coords: np.ndarray    # (P, 1+d)
    E: np.ndarray         # (P, n, 1+d) tangent frame, rows orthonormal
    coeffs: np.ndarray    # (P, n, n): E_i = sum_c coeffs[i, c] * J[:, c]
    N: np.ndarray         # (P, m+1, 1+d) normal frame, timelike first
    eps: np.ndarray       # (m+1,) normal signs, eps[0] = -1
    gbar: np.ndarray      # (P, 1+d, 1+d)
    beta: np.ndarray      # (P,)


@dataclass
class AdaptedFrame:
    point: ChartPoint
    E: np.ndarray
    coeffs: np.ndarray
    N: np.ndarray
    eps: np.ndarray
    gbar: np.ndarray
    beta: float

    def tangent_components(self):
        return [self.E[i] for i in range(self.E.shape[0])]

    def normal_components(self):
        return [self.N[j] for j in range(self.N.shape[0])]

    def tangent_vectors(self):
        return [vector_from_components(self.point, e)
                for e in self.tangent_components()]

    def normal_vectors(self):
        return [vector_from_components(self.point, nv)
                for nv in self.normal_components()]

    def orthonormality_residual(self):
        """Largest deviation from gbar-orthonormality of the full frame."""
        basis = np.vstack([self.E, self.N])
        gram = basis @ self.gbar @ basis.T
        target = np.diag(np.concatenate([np.ones(self.E.shape[0]), self.eps]))
        return float(np.abs(gram - target).max())


def adapted_frames(M, immersion, params, tangent_rotation=None):
    """Gram-Schmidt frames at a batch of parameter points.

    The tangent frame comes from the jacobian columns in a fixed order (no
    pivoting), so the frame field is smooth away from degeneracies and safe
    to difference along parameter lines.  The normal space is seeded with
    d/dt, making the first normal timelike and future pointing.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    coords, jac = immersion.map_and_jac_many(params)
    gbar = M.ambient_matrix_many(coords[:, 0], coords[:, 1:])
    beta = -gbar[:, 0, 0]
    P, n = params.shape
    D = immersion.ambient_dim
    m1 = D - n  # codimension = m + 1
    E = np.empty((P, n, D))
    C = np.empty((P, n, n))
    N = np.empty((P, m1, D))
    eps = np.concatenate([[-1.0], np.ones(m1 - 1)])
    gplus = gbar.copy()
    gplus[:, 0, 0] = beta
    for p in range(P):
        g = gbar[p]
        J = jac[p]
        scale = float(np.abs(g).max())
        # tangent frame
        for i in range(n):
            v = J[:, i].copy()
            c = np.zeros(n)
            c[i] = 1.0
            for k in range(i):
                proj = float(E[p, k] @ g @ v)
                v -= proj * E[p, k]
                c -= proj * C[p, k]
            nrm2 = float(v @ g @ v)
            if nrm2 <= FRAME_TOL * scale:
                raise FrameError(
                    f"tangent frame degenerate at params {params[p]} "
                    f"(direction {i}, norm^2 {nrm2:.3e})")
            s = np.sqrt(nrm2)
            E[p, i] = v / s
            C[p, i] = c / s
        if tangent_rotation is not None:
            E[p] = tangent_rotation @ E[p]
            C[p] = tangent_rotation @ C[p]
        # timelike normal from d/dt
        w = np.zeros(D)
        w[0] = 1.0
        for i in range(n):
            w -= float(E[p, i] @ g @ w) * E[p, i]
        q = float(w @ g @ w)
        if not q < -FRAME_TOL * scale:
            raise FrameError(f"no timelike normal at params {params[p]}")
        w /= np.sqrt(-q)
        if w @ g @ np.eye(D)[0] > 0:  # future orientation: gbar(N1, dt) < 0
            w = -w
        N[p, 0] = w
        # spacelike normals: complete with coordinate directions, fixed order
        j = 1
        for a in range(D):
            if j >= m1:
                break
            v = np.zeros(D)
            v[a] = 1.0
            ref = float(v @ gplus[p] @ v)
            for i in range(n):
                v -= float(E[p, i] @ g @ v) * E[p, i]
            for k in range(j):
                v -= eps[k] * float(N[p, k] @ g @ v) * N[p, k]
            nrm2 = float(v @ g @ v)
            if nrm2 <= 1e-8 * ref:
                continue
            N[p, j] = v / np.sqrt(nrm2)
            j += 1
        if j < m1:
            raise FrameError(
                f"normal complement has dimension {j}, expected {m1} "
                f"at params {params[p]}")
    return FrameBundle(params=params, coords=coords, E=E, coeffs=C, N=N,
                       eps=eps, gbar=gbar, beta=beta)


def adapted_frame(M, immersion, xi, tangent_rotation=None):
    b = adapted_frames(M, immersion, np.asarray(xi, dtype=float)[None, :],
                       tangent_rotation)
    p = ChartPoint(float(b.coords[0, 0]), b.coords[0, 1:])
    return AdaptedFrame(point=p, E=b.E[0], coeffs=b.coeffs[0], N=b.N[0],
                        eps=b.eps, gbar=b.gbar[0], beta=float(b.beta[0]))


# ---------------------------------------------------------------------------
# Second fundamental form / mean curvature

@dataclass
class ExtrinsicBundle:
    frames: FrameBundle
    II: np.ndarray        # (P, n, n, 1+d) normal-valued
    H: np.ndarray         # (P, 1+d)
    h_dot_dt: np.ndarray  # (P,) gbar(d/dt, H)
    theta: np.ndarray     # (P,) hyperbolic angle
    grad_tau_sq: np.ndarray  # (P,) induced |grad tau|^2

    def h_vector(self, k):
        p = ChartPoint(float(self.frames.coords[k, 0]),
                       self.frames.coords[k, 1:])
        return vector_from_components(p, self.H[k])


@dataclass
class ExtrinsicData:
    point: ChartPoint
    frame: AdaptedFrame
    II: np.ndarray
    H: np.ndarray
    h_dot_dt: float
    theta: float
    grad_tau_sq: float

    def h_vector(self):
        return vector_from_components(self.point, self.H)


def extrinsic_bundle(M, immersion, params, tangent_rotation=None):
    """II, H and the hyperbolic angle at a batch of parameter points.

    The ambient derivative of the tangent frame fields is taken by central
    differences along the parameter directions that correspond to each
    frame vector, then corrected with the Christoffels at the base point.
    """
    from .curvature import christoffels_many
    params = np.atleast_2d(np.asarray(params, dtype=float))
    base = adapted_frames(M, immersion, params, tangent_rotation)
    P, n = params.shape
    D = immersion.ambient_dim
    h = FD_STEP * (1.0 + np.abs(params).max(axis=1))   # (P,)

    dE = np.empty((P, n, n, D))   # [p, i, k, a] = d(E_k^a)/ds along E_i
    for i in range(n):
        step = h[:, None] * base.coeffs[:, i, :]
        plus = adapted_frames(M, immersion, params + step, tangent_rotation)
        minus = adapted_frames(M, immersion, params - step, tangent_rotation)
        dE[:, i, :, :] = (plus.E - minus.E) / (2.0 * h[:, None, None])

    gamma = christoffels_many(M, base.coords[:, 0], base.coords[:, 1:])
    # (P, i, k, a): directional derivative + Gamma^a_{bc} E_i^b E_k^c
    cov = dE + np.einsum("pabc,pib,pkc->pika", gamma, base.E, base.E)
    # normal projection with signs; II = -(cov)^perp
    proj = np.einsum("pika,pab,pjb->pikj", cov, base.gbar, base.N)
    II = -np.einsum("pikj,j,pja->pika", proj, base.eps, base.N)
    H = np.einsum("piia->pa", II)
    h_dot_dt = np.einsum("pa,pa->p", base.gbar[:, 0, :], H)
    grad_tau_sq = np.einsum("pi,pi->p", base.E[:, :, 0], base.E[:, :, 0])
    theta = np.arcsinh(np.sqrt(np.maximum(base.beta * grad_tau_sq, 0.0)))
    return ExtrinsicBundle(frames=base, II=II, H=H, h_dot_dt=h_dot_dt,
                           theta=theta, grad_tau_sq=grad_tau_sq)


def second_fundamental_form(M, immersion, xi):
    return mean_curvature(M, immersion, xi)


def mean_curvature(M, immersion, xi, tangent_rotation=None):
    b = extrinsic_bundle(M, immersion, np.asarray(xi, dtype=float)[None, :],
                         tangent_rotation)
    fr = b.frames
    p = ChartPoint(float(fr.coords[0, 0]), fr.coords[0, 1:])
    frame = AdaptedFrame(point=p, E=fr.E[0], coeffs=fr.coeffs[0], N=fr.N[0],
                         eps=fr.eps, gbar=fr.gbar[0], beta=float(fr.beta[0]))
    return ExtrinsicData(point=p, frame=frame, II=b.II[0], H=b.H[0],
                         h_dot_dt=float(b.h_dot_dt[0]),
                         theta=float(b.theta[0]),
                         grad_tau_sq=float(b.grad_tau_sq[0]))


# ---------------------------------------------------------------------------
# Splitting H through a spacelike hypersurface (slice case)

@dataclass(frozen=True)
class HypersurfaceSplit:
    point: ChartPoint
    h_vec: np.ndarray          # mean curvature of the submanifold inside the slice
    tr_shape: float            # trace over the submanifold of the slice shape operator
    normal: np.ndarray         # future unit normal of the slice
    reconstructed: np.ndarray  # h_vec + GAUSS_SPLIT_SIGN * tr_shape * normal
    ambient_H: np.ndarray
    residual: float
    sign: float


def hypersurface_decomposition(M, immersion, xi, slice_t0, tol=1e-8):
    """Split H into the slice mean curvature plus a shape-operator trace.

    Only slice hypersurfaces are supported; the submanifold must lie in the
    slice at the evaluated point.  The inner mean curvature is computed from
    the fiber metric alone (its own Christoffels), which makes the
    reconstruction an independent check of the ambient route.
    """
    xi = np.asarray(xi, dtype=float)
    data = mean_curvature(M, immersion, xi)
    p = data.point
    if abs(p.t - slice_t0) > tol:
        raise UsageError(f"surface point has t={p.t}, not on slice t={slice_t0}")
    fr = data.frame
    n = fr.E.shape[0]
    D = fr.E.shape[1]
    if np.abs(fr.E[:, 0]).max() > 1e-8:
        raise UsageError("surface is not tangent to the slice at this point")

    # fiber Christoffels of g_{t0}
    g, dg = M.metric.matrix_and_grad(p.t, p.x)
    dgf = dg[1:]   # fiber partials only
    ginv = np.linalg.inv(g)
    di_gjl = dgf
    dj_gil = dgf.transpose(1, 0, 2)
    dl_gij = dgf.transpose(1, 2, 0)
    gamma_f = 0.5 * np.einsum("kl,ijl->kij", ginv, di_gjl + dj_gil - dl_gij)

    # differentiate the fiber frame fields along the surface
    h = FD_STEP * (1.0 + np.abs(xi).max())
    Ef = fr.E[:, 1:]
    dEf = np.empty((n, n, D - 1))
    for i in range(n):
        step = h * fr.coeffs[i]
        bp = adapted_frames(M, immersion, (xi + step)[None, :])
        bm = adapted_frames(M, immersion, (xi - step)[None, :])
        dEf[i] = (bp.E[0, :, 1:] - bm.E[0, :, 1:]) / (2.0 * h)
    cov = dEf + np.einsum("abc,ib,kc->ika", gamma_f, Ef, Ef)
    # normals of the submanifold inside the slice: the spacelike N_j
    Nf = fr.N[1:, 1:]
    proj = np.einsum("ika,ab,jb->ikj", cov, g, Nf)
    II_inner = -np.einsum("ikj,ja->ika", proj, Nf)
    h_fiber = np.einsum("iia->a", II_inner)
    h_vec = np.concatenate([[0.0], h_fiber])

    # slice shape operator trace over the surface tangents, N = dt/sqrt(beta)
    from .curvature import christoffels
    conn = christoffels(M, p)
    bval, bgrad = M.beta.value_and_grad(p.t, p.x)
    sqb = np.sqrt(bval)
    Nvec = np.zeros(D)
    Nvec[0] = 1.0 / sqb
    tr_shape = 0.0
    for i in range(n):
        e = fr.E[i]
        # D_e (dt / sqrt(beta)) = e(1/sqrt(beta)) dt + (1/sqrt(beta)) Gamma(e, dt)
        dinv = -(bgrad @ e) / (2.0 * bval * sqb)
        de = dinv * np.eye(D)[0] + (conn.gamma[:, :, 0] @ e) / sqb
        tr_shape += float(e @ fr.gbar @ de)

    recon = h_vec + GAUSS_SPLIT_SIGN * tr_shape * Nvec
    residual = float(np.abs(recon - data.H).max())
    return HypersurfaceSplit(point=p, h_vec=h_vec, tr_shape=tr_shape,
                             normal=Nvec, reconstructed=recon,
                             ambient_H=data.H, residual=residual,
                             sign=GAUSS_SPLIT_SIGN)
