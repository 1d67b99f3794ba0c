"""Discretized closed manifolds and the metric fields living on them.

Three families cover the regimes the experiments need:

* ``periodic_grid``: an n-torus sampled on a regular lattice with periodic
  wraparound, carrying one symmetric matrix per node;
* ``warped_sphere``: a rotationally symmetric n-sphere stored as two radial
  profiles, the sphere-factor ``warp`` and the radial stretch factor;
* ``homogeneous_su2``: left-invariant metrics on SU(2) reduced to three
  positive frame coefficients, where everything is exact ODE arithmetic.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateMetricError

FAMILY_GRID = "periodic_grid"
FAMILY_WARPED = "warped_sphere"
FAMILY_SU2 = "homogeneous_su2"
FAMILIES = (FAMILY_GRID, FAMILY_WARPED, FAMILY_SU2)

# Builders gate resolution so the difference stencils stay meaningful.
MIN_GRID_RESOLUTION = 8
MIN_WARPED_RESOLUTION = 32
POLE_REGULARITY_TOL = 1e-8
SPD_FLOOR = 1e-10


@dataclass(frozen=True)
class ManifoldModel:
    """Immutable description of a discretized closed manifold.

    ``extent`` is the axis length for grids and the length of the radial
    coordinate interval for warped spheres; it is unused for the SU(2)
    family. ``resolution`` counts lattice nodes per axis for grids and
    radial intervals for warped spheres.
    """

    family: str
    dim: int
    resolution: int
    extent: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown manifold family {self.family!r}")
        if self.dim < 3:
            raise ConfigError(f"dimension must be >= 3, got {self.dim}")
        if self.family == FAMILY_GRID and self.resolution < MIN_GRID_RESOLUTION:
            raise ConfigError(
                f"grid resolution must be >= {MIN_GRID_RESOLUTION}, got {self.resolution}"
            )
        if self.family == FAMILY_WARPED and self.resolution < MIN_WARPED_RESOLUTION:
            raise ConfigError(
                f"warped-sphere resolution must be >= {MIN_WARPED_RESOLUTION},"
                f" got {self.resolution}"
            )
        if self.family == FAMILY_SU2 and self.dim != 3:
            raise ConfigError("the SU(2) family is three dimensional")
        if self.family != FAMILY_SU2 and self.extent <= 0:
            raise ConfigError(f"extent must be positive, got {self.extent}")

    @property
    def spacing(self) -> float:
        """Lattice spacing (grids) or radial node spacing (warped spheres)."""
        return self.extent / self.resolution

    @property
    def node_count(self) -> int:
        if self.family == FAMILY_GRID:
            return self.resolution**self.dim
        if self.family == FAMILY_WARPED:
            return self.resolution + 1
        return 1

    @property
    def grid_shape(self) -> tuple:
        if self.family != FAMILY_GRID:
            raise ConfigError("grid_shape only applies to the periodic_grid family")
        return (self.resolution,) * self.dim


@dataclass
class MetricField:
    """A Riemannian metric sampled on a ManifoldModel.

    The payload layout depends on the family:

    * grid: ``data`` has shape (node_count, n, n), one symmetric SPD matrix
      per node in C flattening order of the lattice;
    * warped sphere: ``data`` has shape (2, resolution + 1); row 0 is the
      radial stretch factor, row 1 the sphere-factor profile (zero at both
      poles);
    * SU(2): ``data`` has shape (3,), the positive frame coefficients.

    Holding every family in one float array keeps time stepping generic:
    the flow integrates ``data`` directly, whatever its meaning.
    """

    model: ManifoldModel
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        fam = self.model.family
        n, nc = self.model.dim, self.model.node_count
        expected = {
            FAMILY_GRID: (nc, n, n),
            FAMILY_WARPED: (2, nc),
            FAMILY_SU2: (3,),
        }[fam]
        if self.data.shape != expected:
            raise ConfigError(
                f"metric payload shape {self.data.shape} does not match"
                f" {fam} expectation {expected}"
            )

    # Family-specific views -------------------------------------------------

    @property
    def warp(self) -> np.ndarray:
        """Sphere-factor profile of a warped metric."""
        return self.data[1]

    @property
    def radial_factor(self) -> np.ndarray:
        """Radial stretch profile of a warped metric."""
        return self.data[0]

    @property
    def coef(self) -> np.ndarray:
        """Frame coefficients of an SU(2) metric."""
        return self.data

    # Generic operations ----------------------------------------------------

    def copy(self) -> "MetricField":
        return MetricField(self.model, self.data.copy())

    def scaled(self, c: float) -> "MetricField":
        """The metric multiplied by a positive constant.

        Grid matrices and SU(2) coefficients scale linearly; warped-sphere
        profiles carry the square roots of metric coefficients, so they
        scale by sqrt(c).
        """
        if c <= 0:
            raise ConfigError(f"metric scale factor must be positive, got {c}")
        if self.model.family == FAMILY_WARPED:
            return MetricField(self.model, np.sqrt(c) * self.data)
        return MetricField(self.model, c * self.data)

    def min_eigenvalue(self) -> float:
        """Smallest metric eigenvalue over all nodes."""
        fam = self.model.family
        if fam == FAMILY_GRID:
            return float(np.linalg.eigvalsh(self.data)[:, 0].min())
        if fam == FAMILY_SU2:
            return float(self.data.min())
        # Pole nodes have a degenerate sphere factor by construction; the
        # meaningful eigenvalues are the squared profile values elsewhere.
        psi, phi = self.data
        vals = [float((psi**2).min())]
        if self.model.node_count > 2:
            vals.append(float((phi[1:-1] ** 2).min()))
        return min(vals)

    def validate(self) -> None:
        """Raise DegenerateMetricError unless the field is symmetric SPD."""
        fam = self.model.family
        if fam == FAMILY_GRID:
            asym = np.abs(self.data - np.swapaxes(self.data, 1, 2)).max()
            if asym != 0.0:
                raise DegenerateMetricError(f"metric asymmetry {asym:g}")
        if not np.all(np.isfinite(self.data)):
            raise DegenerateMetricError("metric contains non-finite entries")
        lam = self.min_eigenvalue()
        if lam <= SPD_FLOOR:
            raise DegenerateMetricError(
                f"metric minimum eigenvalue {lam:g} at or below {SPD_FLOOR:g}"
            )


# ---------------------------------------------------------------------------
# Lattice index helpers for the grid family
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=32)
def neighbor_tables(model: ManifoldModel):
    """Flattened periodic neighbor indices, one step along each axis.

    Returns ``(ip, im)``, each of shape (node_count, dim) and dtype int64:
    ``ip[x, a]`` is the flat index of the node one lattice step forward
    along axis ``a`` from flat node ``x``, and ``im`` the step backward.
    """
    shape = model.grid_shape
    idx = np.arange(model.node_count, dtype=np.int64).reshape(shape)
    ip = np.empty((model.node_count, model.dim), dtype=np.int64)
    im = np.empty_like(ip)
    for a in range(model.dim):
        ip[:, a] = np.roll(idx, -1, axis=a).ravel()
        im[:, a] = np.roll(idx, 1, axis=a).ravel()
    return ip, im


def node_multi_indices(model: ManifoldModel) -> np.ndarray:
    """Integer lattice coordinates of every node, shape (node_count, dim)."""
    shape = model.grid_shape
    grids = np.indices(shape).reshape(model.dim, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


def node_coordinates(model: ManifoldModel) -> np.ndarray:
    """Physical coordinates of grid nodes, shape (node_count, dim)."""
    return node_multi_indices(model) * model.spacing


def flat_index(model: ManifoldModel, multi) -> int:
    """Flat node index of an integer lattice coordinate (wrapped)."""
    res = model.resolution
    out = 0
    for c in multi:
        out = out * res + (int(c) % res)
    return out


def radial_nodes(model: ManifoldModel) -> np.ndarray:
    """Radial coordinate samples of a warped-sphere model."""
    if model.family != FAMILY_WARPED:
        raise ConfigError("radial_nodes only applies to warped spheres")
    return np.linspace(0.0, model.extent, model.resolution + 1)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_torus_metric(
    dim: int,
    resolution: int,
    length: float = 1.0,
    amplitude: float = 0.0,
    wave=None,
) -> MetricField:
    """Conformally perturbed flat metric on an n-torus.

    The metric is exp(2 * amplitude * sin(2 pi wave . x / length)) times the
    identity at every node. ``wave`` is an integer vector selecting the
    perturbation mode; it defaults to the first axis mode.

    :arg amplitude: conformal amplitude, must satisfy ``|amplitude| < 0.5``
        so the metric stays within the monitored equivalence window.
    """
    if abs(amplitude) >= 0.5:
        raise ConfigError(f"conformal amplitude must satisfy |a| < 0.5, got {amplitude}")
    model = ManifoldModel(FAMILY_GRID, dim, resolution, length)
    if wave is None:
        wave = [1] + [0] * (dim - 1)
    wave = np.asarray(wave, dtype=np.int64)
    if wave.shape != (dim,):
        raise ConfigError(f"wave vector must have {dim} integer entries")
    coords = node_coordinates(model)
    phase = 2.0 * np.pi * (coords @ wave) / length
    factor = np.exp(2.0 * amplitude * np.sin(phase))
    g = factor[:, None, None] * np.eye(dim)[None, :, :]
    metric = MetricField(model, g)
    metric.validate()
    return metric


def build_warped_sphere_metric(
    dim: int,
    resolution: int,
    radius: float = 1.0,
    amplitude: float = 0.0,
) -> MetricField:
    """Rotationally symmetric metric on an n-sphere.

    With ``amplitude`` zero this is the round sphere of the given radius:
    warp(s) = radius * sin(s / radius) on s in [0, pi * radius], with a unit
    radial stretch. A nonzero amplitude multiplies the profile by
    ``1 + amplitude * sin(s / radius)**2``, which is band limited and keeps
    the pole slopes at exactly +1 and -1, so pole regularity is preserved.
    """
    if radius <= 0:
        raise ConfigError(f"sphere radius must be positive, got {radius}")
    model = ManifoldModel(FAMILY_WARPED, dim, resolution, np.pi * radius)
    s = radial_nodes(model)
    base = np.sin(s / radius)
    phi = radius * base * (1.0 + amplitude * base**2)
    psi = np.ones_like(phi)
    metric = MetricField(model, np.stack([psi, phi]))
    _check_pole_regularity(metric)
    metric.validate()
    return metric


def _check_pole_regularity(metric: MetricField) -> None:
    """Gate warped profiles on closedness at the poles.

    The profile must vanish at both ends and open with arclength slope +1
    at the first pole and -1 at the last, within POLE_REGULARITY_TOL.
    Slopes are measured spectrally so band-limited profiles pass exactly.
    """
    from .radial import RadialGrid

    psi, phi = metric.data
    if abs(phi[0]) > POLE_REGULARITY_TOL or abs(phi[-1]) > POLE_REGULARITY_TOL:
        raise ConfigError("warp profile must vanish at both poles")
    grid = RadialGrid(metric.model.resolution, metric.model.extent)
    dphi = grid.derivative(phi)
    slope0 = dphi[0] / psi[0]
    slope1 = dphi[-1] / psi[-1]
    if abs(slope0 - 1.0) > POLE_REGULARITY_TOL or abs(slope1 + 1.0) > POLE_REGULARITY_TOL:
        raise ConfigError(
            f"pole regularity violated: opening slopes ({slope0:.3e}, {slope1:.3e})"
        )
    if np.any(phi[1:-1] <= 0):
        raise ConfigError("warp profile must be positive between the poles")


def build_su2_metric(a: float, b: float, c: float) -> MetricField:
    """Left-invariant metric on SU(2) with frame coefficients (a, b, c).

    The coefficients live on a fixed Milnor frame whose brackets make
    (1, 1, 1) the round metric of constant sectional curvature one.
    """
    if min(a, b, c) <= 0:
        raise ConfigError(f"frame coefficients must be positive, got {(a, b, c)}")
    model = ManifoldModel(FAMILY_SU2, 3, 1, 1.0)
    return MetricField(model, np.array([a, b, c], dtype=np.float64))
