"""Causal classification of vectors and trapped classification of surfaces.

The zero vector counts as lightlike; classification bands are relative to
the vector scale (and, for surfaces, to the largest mean-curvature norm on
the mesh), which keeps the verdicts scale invariant and deterministic at
the cone boundaries.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UsageError
from .surfaces import extrinsic_bundle

CAUSAL_TOL = 1e-9


class CausalClass(str, Enum):
    TIMELIKE_FUTURE = "timelikeFuture"
    TIMELIKE_PAST = "timelikePast"
    LIGHTLIKE_FUTURE = "lightlikeFuture"
    LIGHTLIKE_PAST = "lightlikePast"
    SPACELIKE = "spacelike"
    ZERO = "zero"


class TrappedClass(str, Enum):
    FUTURE_TRAPPED = "futureTrapped"
    NEARLY_FUTURE_TRAPPED = "nearlyFutureTrapped"
    WEAKLY_FUTURE_TRAPPED = "weaklyFutureTrapped"
    MARGINALLY_FUTURE_TRAPPED = "marginallyFutureTrapped"
    EXTREMAL = "extremal"
    PAST_TRAPPED = "pastTrapped"
    NEARLY_PAST_TRAPPED = "nearlyPastTrapped"
    WEAKLY_PAST_TRAPPED = "weaklyPastTrapped"
    MARGINALLY_PAST_TRAPPED = "marginallyPastTrapped"
    NONE = "none"


@dataclass(frozen=True)
class TrappedReport:
    surface_class: TrappedClass
    per_vertex: tuple            # CausalClass per mesh vertex
    counts: dict                 # class name -> count
    h_dot_dt: np.ndarray
    caveat: str = "sample-based: classification is over mesh vertices"


@dataclass(frozen=True)
class SignSummary:
    values: np.ndarray
    all_non_positive: bool
    all_non_negative: bool

    @property
    def mixed(self):
        return not (self.all_non_positive or self.all_non_negative)


ZERO_FLOOR = 1e-10   # absolute riemannized-norm floor absorbing FD noise


def _classify_arrays(q, s, scale_sq, zero_ref_sq, tol=CAUSAL_TOL):
    """Vectorized classification from gbar(v,v), gbar(v,dt) and scales."""
    out = np.empty(q.shape, dtype=object)
    zero = (scale_sq <= (tol * tol) * zero_ref_sq) | (scale_sq <= ZERO_FLOOR ** 2)
    band = tol * np.maximum(scale_sq, (tol * tol) * zero_ref_sq)
    timelike = q < -band
    lightlike = np.abs(q) <= band
    future = s < 0.0
    out[:] = CausalClass.SPACELIKE
    out[timelike & future] = CausalClass.TIMELIKE_FUTURE
    out[timelike & ~future] = CausalClass.TIMELIKE_PAST
    out[lightlike & future] = CausalClass.LIGHTLIKE_FUTURE
    out[lightlike & ~future] = CausalClass.LIGHTLIKE_PAST
    out[zero] = CausalClass.ZERO
    return out


def causal_classify(M, v, zero_scale=None):
    """Classify one tangent vector.

    zero_scale: optional external magnitude (same units as the riemannized
    norm) below which the vector counts as zero; without it only the exact
    zero vector classifies as zero.
    """
    q = M.ambient_metric(v, v)
    b = M.beta_at(v.base)
    s = -b * v.dt
    scale_sq = M.riemannized_norm_sq(v)
    if zero_scale is None:
        if scale_sq == 0.0:
            return CausalClass.ZERO
        zero_ref_sq = np.array([0.0])
    else:
        zero_ref_sq = np.array([zero_scale ** 2])
    cls = _classify_arrays(np.array([q]), np.array([s]),
                           np.array([scale_sq]), zero_ref_sq)
    return cls[0]


def classify_h_field(M, coords, H):
    """Per-vertex causal classes of a mean-curvature field on mesh vertices.

    The zero band is 1e-9 of the largest riemannized |H| over the mesh.
    """
    t, x = coords[:, 0], coords[:, 1:]
    gbar = M.ambient_matrix_many(t, x)
    q = np.einsum("pa,pab,pb->p", H, gbar, H)
    s = np.einsum("pa,pa->p", gbar[:, 0, :], H)
    gplus = gbar.copy()
    gplus[:, 0, 0] = -gbar[:, 0, 0]
    scale_sq = np.einsum("pa,pab,pb->p", H, gplus, H)
    # zero band: 1e-9 of the largest |H| on the mesh
    zero_ref_sq = np.full(q.shape, float(scale_sq.max()))
    return _classify_arrays(q, s, scale_sq, zero_ref_sq), s


def trapped_from_classes(classes, marginal_strict=False):
    """Decision table over per-vertex classes, future side first.

    Precedence: trapped > nearly > marginally > weakly > extremal > none.
    marginal_strict requires a strictly lightlike vector at every vertex
    instead of lightlike-or-zero with one nonzero.
    """
    classes = list(classes)
    cset = set(classes)
    Z = {CausalClass.ZERO}
    if cset <= Z:
        return TrappedClass.EXTREMAL

    def side(timelike, lightlike, trapped, nearly, marginally, weakly):
        if cset <= {timelike}:
            return trapped
        if cset <= {timelike, lightlike} | Z and timelike in cset:
            return nearly
        if marginal_strict:
            marginal_ok = cset <= {lightlike}
        else:
            marginal_ok = cset <= {lightlike} | Z and lightlike in cset
        if marginal_ok:
            return marginally
        if cset <= {timelike, lightlike} | Z:
            return weakly
        return None

    future = side(CausalClass.TIMELIKE_FUTURE, CausalClass.LIGHTLIKE_FUTURE,
                  TrappedClass.FUTURE_TRAPPED,
                  TrappedClass.NEARLY_FUTURE_TRAPPED,
                  TrappedClass.MARGINALLY_FUTURE_TRAPPED,
                  TrappedClass.WEAKLY_FUTURE_TRAPPED)
    if future is not None:
        return future
    past = side(CausalClass.TIMELIKE_PAST, CausalClass.LIGHTLIKE_PAST,
                TrappedClass.PAST_TRAPPED,
                TrappedClass.NEARLY_PAST_TRAPPED,
                TrappedClass.MARGINALLY_PAST_TRAPPED,
                TrappedClass.WEAKLY_PAST_TRAPPED)
    if past is not None:
        return past
    return TrappedClass.NONE


def trapped_classify(M, immersion, mesh, marginal_strict=False, bundle=None):
    """Classify a surface by the causal character of H over the mesh."""
    if mesh.n_vertices < 1:
        raise UsageError("mesh has no vertices")
    if bundle is None:
        bundle = extrinsic_bundle(M, immersion, mesh.params)
    classes, s = classify_h_field(M, bundle.frames.coords, bundle.H)
    surface = trapped_from_classes(classes, marginal_strict)
    counts = {}
    for c in classes:
        counts[c.value] = counts.get(c.value, 0) + 1
    return TrappedReport(surface_class=surface, per_vertex=tuple(classes),
                         counts=counts, h_dot_dt=s)


def signed_h_projection(M, immersion, mesh, bundle=None):
    """gbar(dt, H) per vertex with a tolerance-banded sign summary."""
    if bundle is None:
        bundle = extrinsic_bundle(M, immersion, mesh.params)
    s = bundle.h_dot_dt
    scale = float(np.abs(s).max()) if s.size else 0.0
    band = CAUSAL_TOL * max(scale, 1.0)
    return SignSummary(values=s,
                       all_non_positive=bool(np.all(s <= band)),
                       all_non_negative=bool(np.all(s >= -band)))
