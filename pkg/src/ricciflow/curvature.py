"""Curvature tensors, norms, and metric-comparison diagnostics.

Grid metrics get the full finite-difference assembly (connection, lowered
curvature tensor, Ricci trace, scalar trace, tensor norms) through the
compiled kernels. The two symmetric families use closed-form curvature:
warped spheres from the profile's radial derivatives, SU(2) metrics from
the structure constants of an orthonormal Milnor frame. For those families
every tensor in the bundle is expressed in the orthonormal frame, where the
metric is the identity, so index raising is trivial and the connection
coefficients are not materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, DegenerateMetricError, UnsupportedFamilyError
from .manifolds import (
    FAMILY_GRID,
    FAMILY_SU2,
    FAMILY_WARPED,
    MetricField,
    neighbor_tables,
)
from .radial import get_radial_grid

DEGENERACY_FLOOR = 1e-10


@dataclass
class CurvatureBundle:
    """All curvature data derived from one metric snapshot.

    ``christoffel`` is only populated for grid metrics; symmetric families
    carry their tensors in an orthonormal frame (see module docstring).
    ``sqrt_det`` is the volume density used by integral norms: sqrt(det g)
    per node for grids, the radial density profile for warped spheres, and
    the total-volume factor for SU(2).
    """

    christoffel: np.ndarray | None
    riemann: np.ndarray | None
    ricci: np.ndarray | None
    scalar: np.ndarray
    norm_rm: np.ndarray
    norm_ric: np.ndarray
    sqrt_det: np.ndarray

    @property
    def node_count(self) -> int:
        return self.scalar.shape[0]


@dataclass
class ComparisonResult:
    """Extreme generalized eigenvalues of one metric against another."""

    lambda_min: float
    lambda_max: float
    deviation: float


def _pair_curvature_tensor(pairwise: np.ndarray) -> np.ndarray:
    """Lowered curvature tensor from pairwise sectional curvatures.

    ``pairwise`` has shape (nodes, n, n) with entry (i, j) the sectional
    curvature of the orthonormal plane spanned by frame directions i and j.
    Both symmetric families have curvature operators diagonal in the frame
    plane basis, so the only nonzero components are the (i j i j) type.
    """
    nodes, n, _ = pairwise.shape
    rm = np.zeros((nodes, n, n, n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            k = pairwise[:, i, j]
            rm[:, i, j, i, j] = k
            rm[:, j, i, j, i] = k
            rm[:, i, j, j, i] = -k
            rm[:, j, i, i, j] = -k
    return rm


# ---------------------------------------------------------------------------
# Warped-sphere closed form
# ---------------------------------------------------------------------------


def warped_profile_geometry(metric: MetricField) -> dict:
    """Radial derivatives and sectional curvatures of a warped metric.

    Returns arclength derivatives of the warp profile, the two sectional
    curvatures (radial planes and sphere planes), and the radial grid.
    Pole values use the 0/0 limits of the smooth profile: the radial
    curvature becomes -phi'''/phi' there and the sphere curvature matches
    it, as smoothness at a pole requires.
    """
    model = metric.model
    grid = get_radial_grid(model.resolution, model.extent)
    psi, phi = metric.data
    n = model.dim
    phi_s = grid.derivative(phi)
    phi_ss = grid.second_derivative(phi)
    psi_s = grid.fd_derivative(psi)
    d3a, d3b = grid.third_derivative_ends(phi)
    phi_r = phi_s / psi
    phi_rr = phi_ss / psi**2 - phi_s * psi_s / psi**3

    k_rad = np.empty(model.resolution + 1)
    k_rad[1:-1] = -phi_rr[1:-1] / phi[1:-1]
    k_rad[0] = -d3a / (psi[0] ** 2 * phi_s[0])
    k_rad[-1] = -d3b / (psi[-1] ** 2 * phi_s[-1])
    k_sph = np.empty_like(k_rad)
    k_sph[1:-1] = (1.0 - phi_r[1:-1] ** 2) / phi[1:-1] ** 2
    k_sph[0] = k_rad[0]
    k_sph[-1] = k_rad[-1]
    return {
        "grid": grid,
        "psi": psi,
        "phi": phi,
        "phi_s": phi_s,
        "phi_ss": phi_ss,
        "psi_s": psi_s,
        "phi_r": phi_r,
        "phi_rr": phi_rr,
        "k_rad": k_rad,
        "k_sph": k_sph,
        "dim": n,
    }


def _warped_bundle(metric: MetricField) -> CurvatureBundle:
    geo = warped_profile_geometry(metric)
    n = geo["dim"]
    k_rad, k_sph = geo["k_rad"], geo["k_sph"]
    nodes = k_rad.shape[0]

    pairwise = np.zeros((nodes, n, n))
    pairwise[:, 0, 1:] = k_rad[:, None]
    pairwise[:, 1:, 0] = k_rad[:, None]
    for a in range(1, n):
        for b in range(1, n):
            if a != b:
                pairwise[:, a, b] = k_sph
    riemann = _pair_curvature_tensor(pairwise)

    ricci = np.zeros((nodes, n, n))
    ricci[:, 0, 0] = (n - 1) * k_rad
    fib = k_rad + (n - 2) * k_sph
    for a in range(1, n):
        ricci[:, a, a] = fib
    scalar = 2.0 * (n - 1) * k_rad + (n - 1) * (n - 2) * k_sph
    norm_rm = np.sqrt(4.0 * (n - 1) * k_rad**2 + 2.0 * (n - 1) * (n - 2) * k_sph**2)
    norm_ric = np.sqrt((n - 1) ** 2 * k_rad**2 + (n - 1) * fib**2)
    sqrt_det = geo["psi"] * geo["phi"] ** (n - 1)
    return CurvatureBundle(None, riemann, ricci, scalar, norm_rm, norm_ric, sqrt_det)


# ---------------------------------------------------------------------------
# SU(2) closed form
# ---------------------------------------------------------------------------


def su2_frame_curvatures(coef: np.ndarray):
    """Ricci eigenvalues and pairwise sectional curvatures for (a, b, c).

    The orthonormal-frame structure constants are 2*sqrt(a/(b*c)) and its
    cycles; with all coefficients one they equal 2, which normalizes
    (1, 1, 1) to the unit round metric.
    """
    a, b, c = coef
    alpha = np.array(
        [
            2.0 * np.sqrt(a / (b * c)),
            2.0 * np.sqrt(b / (a * c)),
            2.0 * np.sqrt(c / (a * b)),
        ]
    )
    mu = alpha.sum() / 2.0 - alpha
    ric = 2.0 * np.array([mu[1] * mu[2], mu[0] * mu[2], mu[0] * mu[1]])
    # In three dimensions the diagonal Ricci values determine the sectional
    # curvatures: each Ricci entry is the sum of the two planes through it.
    sec = np.array(
        [
            (ric[0] + ric[1] - ric[2]) / 2.0,  # plane (0, 1)
            (ric[1] + ric[2] - ric[0]) / 2.0,  # plane (1, 2)
            (ric[0] + ric[2] - ric[1]) / 2.0,  # plane (0, 2)
        ]
    )
    return ric, sec


def _su2_bundle(metric: MetricField) -> CurvatureBundle:
    ric_diag, sec = su2_frame_curvatures(metric.data)
    pairwise = np.zeros((1, 3, 3))
    pairwise[0, 0, 1] = pairwise[0, 1, 0] = sec[0]
    pairwise[0, 1, 2] = pairwise[0, 2, 1] = sec[1]
    pairwise[0, 0, 2] = pairwise[0, 2, 0] = sec[2]
    riemann = _pair_curvature_tensor(pairwise)
    ricci = np.diag(ric_diag)[None, :, :]
    scalar = np.array([ric_diag.sum()])
    norm_rm = np.array([np.sqrt(4.0 * (sec**2).sum())])
    norm_ric = np.array([np.sqrt((ric_diag**2).sum())])
    sqrt_det = np.array([float(np.sqrt(np.prod(metric.data)))])
    return CurvatureBundle(None, riemann, ricci, scalar, norm_rm, norm_ric, sqrt_det)


# ---------------------------------------------------------------------------
# Grid finite differences
# ---------------------------------------------------------------------------


def _grid_bundle(metric: MetricField) -> CurvatureBundle:
    model = metric.model
    n, nodes = model.dim, model.node_count
    ip, im = neighbor_tables(model)
    g = metric.data
    gam = np.empty((nodes, n, n, n))
    rm = np.empty((nodes, n, n, n, n))
    ric = np.empty((nodes, n, n))
    scal = np.empty(nodes)
    nrm = np.empty(nodes)
    nric = np.empty(nodes)
    sdet = np.empty(nodes)
    kernel = _kernels.get_bundle_kernel(n)
    kernel(g, ip, im, model.spacing, gam, rm, ric, scal, nrm, nric, sdet)
    return CurvatureBundle(gam, rm, ric, scal, nrm, nric, sdet)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def compute_curvature(metric: MetricField) -> CurvatureBundle:
    """Assemble the full curvature bundle for any supported family.

    Degenerate inputs (minimum metric eigenvalue at or below 1e-10) are
    rejected up front rather than silently inverted.
    """
    lam = metric.min_eigenvalue()
    if not np.isfinite(lam) or lam <= DEGENERACY_FLOOR:
        raise DegenerateMetricError(
            f"refusing curvature of near-degenerate metric (min eig {lam:g})"
        )
    fam = metric.model.family
    if fam == FAMILY_GRID:
        return _grid_bundle(metric)
    if fam == FAMILY_WARPED:
        return _warped_bundle(metric)
    return _su2_bundle(metric)


def tensor_sup_norms(bundle: CurvatureBundle) -> dict:
    """Sup over nodes of the pointwise curvature norms."""
    return {
        "sup_rm": float(bundle.norm_rm.max()),
        "sup_ric": float(bundle.norm_ric.max()),
    }


def metric_comparison(metric: MetricField, base: MetricField) -> ComparisonResult:
    """Generalized-eigenvalue comparison of a metric against a baseline.

    Returns the extreme eigenvalues of ``base``:sup:`-1` ``metric`` over all
    nodes and the deviation, the sup over nodes of the spectral norm of
    base^{-1}(metric - base), which equals max |eigenvalue - 1|.
    """
    if metric.model != base.model:
        raise ConfigError("metric comparison requires matching models")
    fam = metric.model.family
    if fam == FAMILY_GRID:
        chol = np.linalg.cholesky(base.data)
        half = np.linalg.solve(chol, metric.data)
        whitened = np.linalg.solve(chol, half.swapaxes(1, 2))
        whitened = 0.5 * (whitened + whitened.swapaxes(1, 2))
        eigs = np.linalg.eigvalsh(whitened)
    elif fam == FAMILY_WARPED:
        psi, phi = metric.data
        psi0, phi0 = base.data
        ratios = [psi**2 / psi0**2]
        if metric.model.node_count > 2:
            ratios.append(phi[1:-1] ** 2 / phi0[1:-1] ** 2)
        eigs = np.concatenate(ratios)
    else:
        eigs = metric.data / base.data
    return ComparisonResult(
        float(eigs.min()), float(eigs.max()), float(np.abs(eigs - 1.0).max())
    )


def scalar_laplacian(metric: MetricField, bundle: CurvatureBundle, field: np.ndarray):
    """Laplace-Beltrami operator applied to a node scalar field.

    Grids use the metric-aware second-order stencil with the connection
    correction; warped spheres use the radial form with pole limits taken
    by symmetry; SU(2) fields are homogeneous so the result is zero.
    """
    fam = metric.model.family
    if fam == FAMILY_GRID:
        model = metric.model
        ip, im = neighbor_tables(model)
        h = model.spacing
        ginv = np.linalg.inv(metric.data)
        n = model.dim
        grad = np.empty((model.node_count, n))
        hess = np.empty((model.node_count, n, n))
        for a in range(n):
            grad[:, a] = (field[ip[:, a]] - field[im[:, a]]) / (2.0 * h)
            hess[:, a, a] = (field[ip[:, a]] - 2.0 * field + field[im[:, a]]) / h**2
            for b in range(a + 1, n):
                v = (
                    field[ip[ip[:, a], b]]
                    - field[im[ip[:, a], b]]
                    - field[ip[im[:, a], b]]
                    + field[im[im[:, a], b]]
                ) / (4.0 * h**2)
                hess[:, a, b] = v
                hess[:, b, a] = v
        lap = np.einsum("xij,xij->x", ginv, hess)
        contracted = np.einsum("xij,xkij->xk", ginv, bundle.christoffel)
        lap -= np.einsum("xk,xk->x", contracted, grad)
        return lap
    if fam == FAMILY_WARPED:
        geo = warped_profile_geometry(metric)
        grid, n = geo["grid"], geo["dim"]
        psi, phi = geo["psi"], geo["phi"]
        u_s = grid.fd_derivative(field)
        u_ss = grid.fd_derivative(u_s)
        u_r = u_s / psi
        u_rr = u_ss / psi**2 - u_s * geo["psi_s"] / psi**3
        lap = np.empty_like(field)
        lap[1:-1] = u_rr[1:-1] + (n - 1) * (geo["phi_r"][1:-1] / phi[1:-1]) * u_r[1:-1]
        # At a pole u_r vanishes and phi_r/phi ~ 1/s, so the angular term
        # tends to (n-1) * u_rr and the whole operator to n * u_rr.
        lap[0] = n * u_rr[0]
        lap[-1] = n * u_rr[-1]
        return lap
    if fam == FAMILY_SU2:
        return np.zeros_like(field)
    raise UnsupportedFamilyError(fam)


def evolution_residual(
    state_a,
    state_b,
    reaction_rm: float,
    reaction_ric: float,
) -> dict:
    """Residuals of the scalar evolution inequalities between two states.

    For consecutive flow states at small dt, the curvature norm should obey
    d|Rm|/dt <= lap|Rm| + reaction_rm * |Rm|^2 and the Ricci norm
    d|Ric|/dt <= lap|Ric| + reaction_ric * |Rm| |Ric|. Residuals are the
    left side minus the right side, evaluated at the earlier state with a
    forward time difference; nonpositive residuals mean the inequality
    holds pointwise.
    """
    dt = state_b.t - state_a.t
    if dt <= 0:
        raise ConfigError("evolution residual needs strictly increasing times")
    ba, bb = state_a.curvature, state_b.curvature
    dt_rm = (bb.norm_rm - ba.norm_rm) / dt
    dt_ric = (bb.norm_ric - ba.norm_ric) / dt
    lap_rm = scalar_laplacian(state_a.metric, ba, ba.norm_rm)
    lap_ric = scalar_laplacian(state_a.metric, ba, ba.norm_ric)
    rm_residual = dt_rm - lap_rm - reaction_rm * ba.norm_rm**2
    ric_residual = dt_ric - lap_ric - reaction_ric * ba.norm_rm * ba.norm_ric
    return {
        "rm_residual": rm_residual,
        "ric_residual": ric_residual,
        "sup_rm_residual": float(rm_residual.max()),
        "sup_ric_residual": float(ric_residual.max()),
    }


def calibrate_reaction_constants(states, floor: float = 1e-8) -> dict:
    """Smallest reaction coefficients making the residuals nonpositive.

    Scans consecutive state pairs and returns the max over nodes and pairs
    of (d|Rm|/dt - lap|Rm|) / |Rm|^2 and its Ricci analog, ignoring nodes
    where the normalizing product is below ``floor``. The coefficients are
    measured outputs, never inputs.
    """
    best_rm, best_ric = 0.0, 0.0
    for sa, sb in zip(states[:-1], states[1:]):
        res = evolution_residual(sa, sb, 0.0, 0.0)
        ba = sa.curvature
        denom_rm = ba.norm_rm**2
        mask = denom_rm > floor
        if mask.any():
            best_rm = max(best_rm, float((res["rm_residual"][mask] / denom_rm[mask]).max()))
        denom_ric = ba.norm_rm * ba.norm_ric
        mask = denom_ric > floor
        if mask.any():
            best_ric = max(
                best_ric, float((res["ric_residual"][mask] / denom_ric[mask]).max())
            )
    return {"reaction_rm": best_rm, "reaction_ric": best_ric}
