"""Analysis of the time function on a spacelike submanifold.

tau is the t-coordinate restricted to the surface.  Its tangential gradient,
the expansion trace (the tangential trace of the Lie derivative of g_t), and
the Laplace-Beltrami of tau are evaluated in closed form from an adapted
frame; a structured-grid finite-difference Laplacian provides the
independent oracle.

Closed form used throughout (with theta the hyperbolic angle and H the mean
curvature vector):

    lap(tau) = -g(grad tau, grad ln beta)
               - (1/beta) [ -gbar(dt, H)
                            + (tr xi - d_t(ln beta) sinh^2 theta) / 2 ]

The companion conformal form (dimension n > 2 only) rescales the induced
metric by beta^(2/(n-2)), absorbing the gradient term:

    clap(tau) = -(1/2) beta^(-n/(n-2))
                * (tr xi - d_t(ln beta) sinh^2 theta - 2 gbar(dt, H))
"""

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedDimensionError, UsageError
from .surfaces import extrinsic_bundle


@dataclass
class TauField:
    params: np.ndarray
    tau: np.ndarray            # (P,)
    grad: np.ndarray           # (P, 1+d) ambient components of grad tau
    grad_alt: np.ndarray       # (P, 1+d) via the normal-sum route
    grad_norm_sq: np.ndarray   # (P,) g(grad tau, grad tau)
    boost_angle: np.ndarray    # (P,)


@dataclass
class XiSample:
    tr_xi: np.ndarray          # (P,) tangential trace
    tr_xi_bar: np.ndarray      # (P,) full split-basis trace
    normal_sum: np.ndarray     # (P,) signed normal contributions
    decomposition_residual: np.ndarray  # tr_xi_bar - tr_xi - normal_sum


@dataclass
class LaplacianReport:
    params: np.ndarray
    tau: np.ndarray
    laplacian: np.ndarray           # (P,) closed form
    terms: dict                     # name -> (P,) arrays summing to laplacian
    conformal: np.ndarray           # (P,) or None when n <= 2
    grad_norm_sq: np.ndarray
    boost_angle: np.ndarray
    tr_xi: np.ndarray
    h_dot_dt: np.ndarray


def tau_field(M, bundle):
    """Tangential gradient of tau from an extrinsic bundle.

    grad tau = sum_i E_i^t E_i; the equivalent normal-sum route
    -(1/beta)(dt - sum_j eps_j gbar(dt, N_j) N_j) is returned alongside as a
    frame-quality check (the two are algebraically identical).
    """
    fr = bundle.frames
    Et = fr.E[:, :, 0]                        # (P, n) t-components
    grad = np.einsum("pi,pia->pa", Et, fr.E)
    # normal-sum route
    D = fr.E.shape[2]
    dt = np.zeros(D)
    dt[0] = 1.0
    g_dt_N = np.einsum("pb,pjb->pj", fr.gbar[:, 0, :], fr.N)
    dt_tangent = dt[None, :] - np.einsum("pj,j,pja->pa", g_dt_N, fr.eps, fr.N)
    grad_alt = -dt_tangent / fr.beta[:, None]
    return TauField(params=fr.params, tau=fr.coords[:, 0], grad=grad,
                    grad_alt=grad_alt,
                    grad_norm_sq=bundle.grad_tau_sq,
                    boost_angle=bundle.theta)


def xi_trace(M, bundle):
    """Tangential, full and normal traces of the Lie derivative of g_t."""
    fr = bundle.frames
    P = fr.params.shape[0]
    g, dg = M.metric.matrix_and_grad_many(fr.coords[:, 0], fr.coords[:, 1:])
    lie = dg[:, 0]
    Ef = fr.E[:, :, 1:]
    Nf = fr.N[:, :, 1:]
    tr_xi = np.einsum("pia,pab,pib->p", Ef, lie, Ef)
    normal_sum = np.einsum("pja,pab,pjb,j->p", Nf, lie, Nf, fr.eps)
    tr_xi_bar = np.einsum("pab,pba->p", np.linalg.inv(g), lie)
    return XiSample(tr_xi=tr_xi, tr_xi_bar=tr_xi_bar, normal_sum=normal_sum,
                    decomposition_residual=tr_xi_bar - tr_xi - normal_sum)


def laplacian_report(M, immersion, params, with_conformal=True):
    """Closed-form Laplacian of tau, with its term breakdown."""
    bundle = extrinsic_bundle(M, immersion, params)
    fr = bundle.frames
    tf = tau_field(M, bundle)
    xs = xi_trace(M, bundle)
    bval, bgrad = M.beta.value_and_grad_many(fr.coords[:, 0], fr.coords[:, 1:])
    # tangential gradient of ln beta: sum_i (d ln beta)(E_i) E_i
    dlnb_E = np.einsum("pc,pic->pi", bgrad, fr.E) / bval[:, None]
    g_gradtau_gradlnb = np.einsum("pi,pi->p", fr.E[:, :, 0], dlnb_E)
    dt_lnb = bgrad[:, 0] / bval
    sinh_sq = bundle.grad_tau_sq * bval

    terms = {
        "grad_ln_beta": -g_gradtau_gradlnb,
        "mean_curvature": bundle.h_dot_dt / bval,
        "expansion_trace": -0.5 * xs.tr_xi / bval,
        "boost_correction": 0.5 * dt_lnb * sinh_sq / bval,
    }
    lap = sum(terms.values())

    n = immersion.param_dim
    conformal = None
    if with_conformal and n > 2:
        conformal = conformal_laplacian_many(bval, xs.tr_xi, dt_lnb, sinh_sq,
                                             bundle.h_dot_dt, n)
    return LaplacianReport(params=fr.params, tau=tf.tau, laplacian=lap,
                           terms=terms, conformal=conformal,
                           grad_norm_sq=bundle.grad_tau_sq,
                           boost_angle=bundle.theta, tr_xi=xs.tr_xi,
                           h_dot_dt=bundle.h_dot_dt)


def conformal_laplacian_many(beta, tr_xi, dt_lnb, sinh_sq, h_dot_dt, n):
    if n <= 2:
        raise UnsupportedDimensionError(
            "the conformal Laplacian needs submanifold dimension n > 2; "
            "fall back to the plain form")
    prefactor = beta ** (-n / (n - 2.0))
    return -0.5 * prefactor * (tr_xi - dt_lnb * sinh_sq - 2.0 * h_dot_dt)


def conformal_laplacian(M, immersion, params):
    """Conformal Laplacian of tau (n > 2 only)."""
    n = immersion.param_dim
    if n <= 2:
        raise UnsupportedDimensionError(
            "the conformal Laplacian needs submanifold dimension n > 2")
    rep = laplacian_report(M, immersion, params, with_conformal=True)
    return rep.conformal


def conformal_bridge_residual(M, immersion, params):
    """|clap(tau) - e^(-2 phi)(lap(tau) + (n-2) g(grad tau, grad phi))| with
    phi = ln(beta)/(n-2); an identity in exact arithmetic."""
    n = immersion.param_dim
    rep = laplacian_report(M, immersion, params)
    bundle = extrinsic_bundle(M, immersion, params)
    fr = bundle.frames
    bval, bgrad = M.beta.value_and_grad_many(fr.coords[:, 0], fr.coords[:, 1:])
    dlnb_E = np.einsum("pc,pic->pi", bgrad, fr.E) / bval[:, None]
    g_gradtau_gradphi = np.einsum("pi,pi->p", fr.E[:, :, 0], dlnb_E) / (n - 2.0)
    bridge = bval ** (-2.0 / (n - 2.0)) * (
        rep.laplacian + (n - 2.0) * g_gradtau_gradphi)
    return np.abs(rep.conformal - bridge)


def laplacian_intermediate(M, immersion, params):
    """The pre-simplification form carrying the explicit frame factor
    1 + sum_j eps_j gbar(dt/sqrt(beta), N_j)^2; equals the closed form up to
    frame round-off.  Internal identity check only."""
    bundle = extrinsic_bundle(M, immersion, params)
    fr = bundle.frames
    xs = xi_trace(M, bundle)
    bval, bgrad = M.beta.value_and_grad_many(fr.coords[:, 0], fr.coords[:, 1:])
    dlnb_E = np.einsum("pc,pic->pi", bgrad, fr.E) / bval[:, None]
    g_gradtau_gradlnb = np.einsum("pi,pi->p", fr.E[:, :, 0], dlnb_E)
    dt_lnb = bgrad[:, 0] / bval
    unit = 1.0 / np.sqrt(bval)
    g_dt_N = np.einsum("pb,pjb->pj", fr.gbar[:, 0, :], fr.N) * unit[:, None]
    factor = 1.0 + np.einsum("pj,j->p", g_dt_N ** 2, fr.eps)
    return (-g_gradtau_gradlnb
            - (1.0 / bval) * (-bundle.h_dot_dt + 0.5 * xs.tr_xi
                              + 0.5 * dt_lnb * factor))


# ---------------------------------------------------------------------------
# Discrete oracle

def discrete_laplace_beltrami(mesh, values):
    """Second-order Laplace-Beltrami on the structured parameter grid.

    Divergence form (1/sqrt(det g)) d_a(sqrt(det g) g^{ab} d_b f) with
    central differences applied twice, so two layers of margin are needed at
    non-periodic edges.

    Returns (laplacian, valid_mask); excluded vertices hold nan.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise UsageError("field must be one value per mesh vertex")
    n = mesh.param_dim
    ginv = np.linalg.inv(mesh.induced)
    sqrtdet = np.sqrt(np.linalg.det(mesh.induced))
    W = sqrtdet[:, None, None] * ginv           # (P, n, n)

    f = mesh.grid(values)
    df = np.empty((n,) + mesh.shape)
    for b in range(n):
        df[b] = (mesh.shift(f, b, +1) - mesh.shift(f, b, -1)) / (2 * mesh.spacings[b])
    Wg = mesh.grid(W)
    flux = np.einsum("...ab,b...->a...", Wg, df)
    div = np.zeros(mesh.shape)
    for a in range(n):
        div += (mesh.shift(flux[a], a, +1) - mesh.shift(flux[a], a, -1)) / (2 * mesh.spacings[a])
    lap = mesh.flat(div) / sqrtdet
    valid = mesh.interior_mask(layers=2)
    lap = np.where(valid, lap, np.nan)
    return lap, valid


def refinement_study(make_mesh_and_error, levels=3, floor=1e-12):
    """Run an error functional over a refinement ladder h, h/2, h/4.

    make_mesh_and_error(level) must return the max abs error at that level.
    Returns (errors, orders); an error pair below the floor reports infinite
    order (already converged).
    """
    errors = [float(make_mesh_and_error(k)) for k in range(levels)]
    orders = []
    for e0, e1 in zip(errors, errors[1:]):
        if e0 < floor and e1 < floor:
            orders.append(np.inf)
        elif e1 == 0.0:
            orders.append(np.inf)
        else:
            orders.append(np.log2(e0 / e1))
    return errors, orders
