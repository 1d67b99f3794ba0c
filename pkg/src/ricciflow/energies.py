"""Local curvature energies, the running energy envelope, and Sobolev
constant estimation on geodesic balls.

The Sobolev estimator maximizes the discrete quotient

    (sum w u^q)^(2/q) / sum w g^{ij} (d_i u)(d_j u),   q = 2n/(n-2),

over nonnegative u supported in a ball, with forward differences for the
gradient energy (central differences admit a checkerboard near-null mode
that inflates the quotient) and volume weights w = sqrt(det g) h^n. The
quotient is invariant under constant metric scalings: weights scale as
c^(n/2) and the gradient term as c^(n/2 - 1) * c^0 ... both sides carry
c^((n-2)/2), so A(c g) = A(g) exactly; tests pin this at c = 4 where the
float scalings are powers of two and the identity is bitwise.

Maximization is nonconcave, so the estimator runs a fixed number of random
starts (seeded, drawn in ball-offset order so translated balls on flat tori
produce bit-identical iterates) of projected gradient ascent with
per-start adaptive steps, and reports the best quotient found.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .curvature import CurvatureBundle, compute_curvature
from .distances import Ball, multi_source_distances
from .errors import ConfigError, UnsupportedFamilyError
from .manifolds import (
    FAMILY_GRID,
    FAMILY_SU2,
    FAMILY_WARPED,
    MetricField,
    node_multi_indices,
)
from .radial import get_radial_grid

DEFAULT_SEED = 0x5EED
SOBOLEV_STARTS = 20
SOBOLEV_TOL = 1e-6
SOBOLEV_MAX_ITER = 400


def unit_sphere_area(m: int) -> float:
    """Volume of the unit m-sphere."""
    return float(2.0 * np.pi ** ((m + 1) / 2.0) / gamma_fn((m + 1) / 2.0))


def volume_weights(metric: MetricField, bundle: CurvatureBundle) -> np.ndarray:
    """Per-node quadrature weights for integrals against the volume form."""
    model = metric.model
    if model.family == FAMILY_GRID:
        return bundle.sqrt_det * model.spacing**model.dim
    if model.family == FAMILY_WARPED:
        grid = get_radial_grid(model.resolution, model.extent)
        return unit_sphere_area(model.dim - 1) * bundle.sqrt_det * grid.trapezoid_weights()
    return unit_sphere_area(3) * bundle.sqrt_det


def local_energy(bundle: CurvatureBundle, ball_obj: Ball, metric: MetricField) -> float:
    """Scaled ball integral of the curvature norm: (int |Rm|^(n/2) dv)^(2/n)."""
    if ball_obj.node_count == 0:
        raise ConfigError("local energy of an empty ball")
    n = metric.model.dim
    w = volume_weights(metric, bundle)
    vals = bundle.norm_rm[ball_obj.nodes]
    integral = float((w[ball_obj.nodes] * vals ** (n / 2.0)).sum())
    return integral ** (2.0 / n)


# ---------------------------------------------------------------------------
# Energy envelope tracking
# ---------------------------------------------------------------------------


def energy_centers(metric: MetricField, bundle: CurvatureBundle, dense: bool = False):
    """Deterministic center sample for the sup over ball positions.

    Grid default: a stratified lattice of three positions per axis plus the
    node of largest curvature norm; dense mode uses every node and exists
    for oracle tests at small resolution. Warped spheres track both poles
    plus the max-curvature shell.
    """
    model = metric.model
    fam = model.family
    if fam == FAMILY_GRID:
        if dense:
            return np.arange(model.node_count, dtype=np.int64)
        res = model.resolution
        marks = [res // 6, res // 2, (5 * res) // 6]
        picks = []
        for raw in np.ndindex(*(3,) * model.dim):
            flat = 0
            for a in range(model.dim):
                flat = flat * res + marks[raw[a]]
            picks.append(flat)
        picks.append(int(np.argmax(bundle.norm_rm)))
        seen, ordered = set(), []
        for p in picks:
            if p not in seen:
                seen.add(p)
                ordered.append(p)
        return np.array(ordered, dtype=np.int64)
    if fam == FAMILY_WARPED:
        picks = [0, model.node_count - 1, int(np.argmax(bundle.norm_rm))]
        return np.array(sorted(set(picks)), dtype=np.int64)
    raise UnsupportedFamilyError("energy centers undefined for the SU(2) family")


@dataclass
class EnergyTracker:
    """Running sup of half-radius ball energies over centers and time.

    Ball membership is fixed at construction (cut in the initial metric);
    only the integrand and volume weights follow the evolving metric, so
    the envelope is a running max by construction and never decreases.
    """

    radius: float
    centers: np.ndarray
    masks: list = field(repr=False)
    times: list = field(default_factory=list)
    sup_series: list = field(default_factory=list)
    envelope: float = 0.0

    def update(self, t: float, bundle: CurvatureBundle, metric: MetricField) -> float:
        n = metric.model.dim
        w = volume_weights(metric, bundle)
        dens = w * bundle.norm_rm ** (n / 2.0)
        sup_now = 0.0
        for mask in self.masks:
            sup_now = max(sup_now, float(dens[mask].sum()) ** (2.0 / n))
        self.times.append(t)
        self.sup_series.append(sup_now)
        self.envelope = max(self.envelope, sup_now)
        return self.envelope


def build_energy_tracker(
    metric: MetricField,
    bundle: CurvatureBundle,
    ball_radius: float,
    graph=None,
    dense: bool = False,
) -> EnergyTracker:
    """Tracker over half-radius balls around the standard center sample."""
    centers = energy_centers(metric, bundle, dense=dense)
    dist = multi_source_distances(metric, centers, graph=graph)
    half = ball_radius / 2.0
    masks = [dist[k] <= half for k in range(len(centers))]
    return EnergyTracker(half, centers, masks)


def track_e0(tracker: EnergyTracker, state) -> EnergyTracker:
    """Fold one flow state into the running energy envelope."""
    tracker.update(state.t, state.curvature, state.metric)
    return tracker


# ---------------------------------------------------------------------------
# Sobolev quotient machinery
# ---------------------------------------------------------------------------


def rayleigh_quotient(
    metric: MetricField,
    ball_obj: Ball,
    u: np.ndarray,
    bundle: CurvatureBundle | None = None,
) -> float:
    """Discrete Sobolev quotient of one trial function.

    ``u`` is a full-length node array; values outside the ball are zeroed.
    Exposed separately from the maximizer so closed-form trial functions
    can be checked by hand quadrature.
    """
    model = metric.model
    n = model.dim
    q = 2.0 * n / (n - 2.0)
    if bundle is None:
        bundle = compute_curvature(metric)
    w = volume_weights(metric, bundle)
    u = np.where(ball_obj.mask, np.maximum(u, 0.0), 0.0)
    if model.family == FAMILY_GRID:
        shape = model.grid_shape
        ub = u.reshape(shape)
        h = model.spacing
        ginv = np.linalg.inv(metric.data)
        du = np.stack(
            [(np.roll(ub, -1, axis=a) - ub).reshape(-1) / h for a in range(n)]
        )
        dterm = float(np.einsum("aj,jab,bj,j->", du, ginv, du, w))
        nterm = float((w * u**q).sum()) ** (2.0 / q)
        if dterm <= 0:
            raise ConfigError("trial function has no gradient energy")
        return float(nterm / dterm)
    if model.family == FAMILY_WARPED:
        grid = get_radial_grid(model.resolution, model.extent)
        psi = metric.radial_factor
        ds = grid.spacing
        mid_w = (
            unit_sphere_area(n - 1)
            * (0.5 * (bundle.sqrt_det[1:] + bundle.sqrt_det[:-1]))
            * ds
        )
        mid_psi = 0.5 * (psi[1:] + psi[:-1])
        slopes = (u[1:] - u[:-1]) / ds
        dterm = float((mid_w * slopes**2 / mid_psi**2).sum())
        nterm = float((w * u**q).sum()) ** (2.0 / q)
        if dterm <= 0:
            raise ConfigError("trial function has no gradient energy")
        return float(nterm / dterm)
    raise UnsupportedFamilyError("no Sobolev quotient on the SU(2) family")


def _ball_offsets(model, ball_obj):
    """Signed lattice offsets of ball nodes from the center, wrap-aware."""
    res = model.resolution
    multis = node_multi_indices(model)
    cm = multis[ball_obj.center]
    rel = (multis[ball_obj.nodes] - cm + res // 2) % res - res // 2
    return rel


def _ascend(u, mask_flat, objective, gradient, tol, max_iter):
    """Shared projected gradient ascent over a batch of starts.

    ``u`` has shape (starts, dofs); the objective and gradient callbacks
    work on that layout. Steps adapt per start: growth on acceptance,
    halving on rejection, convergence once an accepted step improves the
    objective by less than ``tol`` relatively.
    """
    j = objective(u)
    step = np.full(u.shape[0], 0.25)
    done = np.zeros(u.shape[0], dtype=bool)
    for _ in range(max_iter):
        grad = gradient(u, j)
        grad[:, ~mask_flat] = 0.0
        gmax = np.abs(grad).max(axis=1)
        gmax[gmax == 0.0] = 1.0
        trial = u + (step / gmax)[:, None] * grad
        np.maximum(trial, 0.0, out=trial)
        trial[:, ~mask_flat] = 0.0
        jt = objective(trial)
        accept = jt >= j
        rel = np.zeros_like(j)
        pos = accept & (j > 0)
        rel[pos] = (jt[pos] - j[pos]) / j[pos]
        u[accept] = trial[accept]
        j[accept] = jt[accept]
        step[accept] = np.minimum(step[accept] * 1.2, 1.0)
        step[~accept] *= 0.5
        done |= (accept & (rel < tol)) | (step < 1e-12)
        if done.all():
            break
        peak = u.max(axis=1)
        peak[peak == 0.0] = 1.0
        u /= peak[:, None]
    return j


def sobolev_constant(
    ball_obj: Ball,
    metric: MetricField,
    bundle: CurvatureBundle | None = None,
    seed: int = DEFAULT_SEED,
    starts: int = SOBOLEV_STARTS,
    tol: float = SOBOLEV_TOL,
    max_iter: int = SOBOLEV_MAX_ITER,
) -> float:
    """Best discrete Sobolev constant over trial functions in a ball."""
    if ball_obj.node_count < 10:
        raise ConfigError(
            f"Sobolev estimation needs >= 10 ball nodes, got {ball_obj.node_count}"
        )
    model = metric.model
    if ball_obj.node_count >= model.node_count:
        # Constants make the quotient unbounded without a boundary condition.
        raise ConfigError("Sobolev ball must be a proper subset of the manifold")
    if bundle is None:
        bundle = compute_curvature(metric)
    if model.family == FAMILY_GRID:
        return _sobolev_grid(ball_obj, metric, bundle, seed, starts, tol, max_iter)
    if model.family == FAMILY_WARPED:
        return _sobolev_warped(ball_obj, metric, bundle, seed, starts, tol, max_iter)
    raise UnsupportedFamilyError("no Sobolev quotient on the SU(2) family")


def _sobolev_grid(ball_obj, metric, bundle, seed, starts, tol, max_iter):
    model = metric.model
    n, res, h = model.dim, model.resolution, model.spacing
    q = 2.0 * n / (n - 2.0)

    # Work on a node box around the ball (offset coordinates) instead of
    # the full lattice. A single-cell zero margin suffices: forward
    # differences reach one cell past the support, and the wrapped flux
    # read by the divergence roll is identically zero on the margin.
    rel = _ball_offsets(model, ball_obj)
    bmax = np.abs(rel).max(axis=0)
    box_shape = tuple(int(2 * b + 3) for b in bmax)
    if any(s > res for s in box_shape):
        raise ConfigError("ball too large for the box-local Sobolev estimator")
    multis = node_multi_indices(model)
    cm = multis[ball_obj.center]
    axes_idx = np.indices(box_shape)
    ids = np.zeros(box_shape, dtype=np.int64)
    for a in range(n):
        ids = ids * res + (cm[a] + axes_idx[a] - (int(bmax[a]) + 1)) % res
    ids_flat = ids.reshape(-1)
    w = (bundle.sqrt_det[ids_flat] * h**n).astype(np.float64)
    ginv = np.linalg.inv(metric.data[ids_flat])

    mask = np.zeros(box_shape, dtype=bool)
    box_of_rel = rel + (bmax + 1)
    mask[tuple(box_of_rel.T)] = True
    mask_flat = mask.reshape(-1)

    # Random starts keyed to offset order, not flat node ids, so the same
    # ball shape anywhere on a homogeneous lattice sees the same draws.
    # Box-flat order of member cells is already lex order on offsets.
    rng = np.random.default_rng(seed)
    draws = 0.05 + rng.random((starts, ball_obj.node_count))
    u = np.zeros((starts, ids_flat.size))
    member_flat = np.flatnonzero(mask_flat)
    u[:, member_flat] = draws

    roll_shape = (starts,) + box_shape

    def _forward_diffs(batch):
        ub = batch.reshape(roll_shape)
        return np.stack(
            [(np.roll(ub, -1, axis=1 + a) - ub) / h for a in range(n)]
        ).reshape((n, batch.shape[0], -1))

    def _nterm(batch):
        return (w[None, :] * batch**q).sum(axis=1)

    def _dterm(batch):
        du = _forward_diffs(batch)
        return np.einsum("asb,bac,csb,b->s", du, ginv, du, w)

    def objective(batch):
        p = _nterm(batch)
        d = _dterm(batch)
        out = np.zeros(batch.shape[0])
        ok = d > 0
        out[ok] = p[ok] ** (2.0 / q) / d[ok]
        return out

    def gradient(batch, _j):
        p = _nterm(batch)
        d = _dterm(batch)
        p[p == 0.0] = 1.0
        d[d == 0.0] = 1.0
        gn = 2.0 * w[None, :] * batch ** (q - 1.0) / p[:, None]
        du = _forward_diffs(batch)
        flux = np.einsum("bac,csb,b->asb", ginv, du, w).reshape((n,) + roll_shape)
        div = np.zeros(roll_shape)
        for a in range(n):
            div += (flux[a] - np.roll(flux[a], 1, axis=1 + a)) / h
        gd = -2.0 * div.reshape(batch.shape)
        return gn - gd / d[:, None]

    j = _ascend(u, mask_flat, objective, gradient, tol, max_iter)
    return float(j.max())


def _sobolev_warped(ball_obj, metric, bundle, seed, starts, tol, max_iter):
    model = metric.model
    n = model.dim
    q = 2.0 * n / (n - 2.0)
    grid = get_radial_grid(model.resolution, model.extent)
    nodes = ball_obj.nodes
    if not np.array_equal(nodes, np.arange(nodes[0], nodes[-1] + 1)):
        raise ConfigError("warped Sobolev balls must be contiguous shell ranges")
    lo, hi = int(nodes[0]), int(nodes[-1])
    psi = metric.radial_factor
    w_full = (
        unit_sphere_area(n - 1) * bundle.sqrt_det * grid.trapezoid_weights()
    )
    w = w_full[lo : hi + 1]
    ds = grid.spacing

    # Midpoint data for the gradient energy on the closed shell range,
    # including the half-step just outside each cut end where u drops to 0.
    sd_pad = bundle.sqrt_det[max(lo - 1, 0) : min(hi + 2, model.node_count)]
    psi_pad = psi[max(lo - 1, 0) : min(hi + 2, model.node_count)]
    lo_open = lo > 0
    hi_open = hi < model.node_count - 1
    mid_sd = 0.5 * (sd_pad[1:] + sd_pad[:-1])
    mid_psi = 0.5 * (psi_pad[1:] + psi_pad[:-1])
    mid_w = unit_sphere_area(n - 1) * mid_sd * ds / mid_psi**2

    m = hi - lo + 1
    mask_flat = np.ones(m, dtype=bool)
    rng = np.random.default_rng(seed)
    u = 0.05 + rng.random((starts, m))

    def _slopes(batch):
        padded = np.zeros((batch.shape[0], m + int(lo_open) + int(hi_open)))
        padded[:, int(lo_open) : int(lo_open) + m] = batch
        return (padded[:, 1:] - padded[:, :-1]) / ds

    def objective(batch):
        p = (w[None, :] * batch**q).sum(axis=1)
        d = (_slopes(batch) ** 2 * mid_w[None, :]).sum(axis=1)
        out = np.zeros(batch.shape[0])
        ok = d > 0
        out[ok] = p[ok] ** (2.0 / q) / d[ok]
        return out

    def gradient(batch, _j):
        p = (w[None, :] * batch**q).sum(axis=1)
        sl = _slopes(batch)
        d = (sl**2 * mid_w[None, :]).sum(axis=1)
        p[p == 0.0] = 1.0
        d[d == 0.0] = 1.0
        gn = 2.0 * w[None, :] * batch ** (q - 1.0) / p[:, None]
        flux = sl * mid_w[None, :] / ds
        start = int(lo_open)
        full = np.zeros((batch.shape[0], m + int(lo_open) + int(hi_open)))
        full[:, :-1] -= 2.0 * flux
        full[:, 1:] += 2.0 * flux
        gd = full[:, start : start + m]
        return gn - gd / d[:, None]

    j = _ascend(u, mask_flat, objective, gradient, tol, max_iter)
    return float(j.max())
