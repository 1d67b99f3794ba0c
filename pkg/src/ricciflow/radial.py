"""Spectral derivative helpers for radial profiles on [0, extent].

Warped-sphere profiles vanish at both interval ends, so they are exactly
representable in a sine basis; derivatives of the trigonometric interpolant
are then spectrally accurate and, for band-limited profiles like the round
sphere, exact to roundoff. That exactness is what lets shrinking-sphere
regression tests hold at 1e-6 with a fixed 1e-4 time step.

Functions that do not vanish at the ends (the radial stretch factor) get
ordinary second-order finite differences instead; they are constant for the
round case, where the finite difference is exact anyway.
"""

from __future__ import annotations

import functools

import numpy as np
from scipy.fft import dct, dst


class RadialGrid:
    """Derivative and quadrature operators on a uniform radial grid.

    :arg intervals: number of radial intervals (nodes = intervals + 1).
    :arg extent: length of the radial coordinate interval.
    """

    def __init__(self, intervals: int, extent: float):
        self.intervals = int(intervals)
        self.extent = float(extent)
        self.nodes = np.linspace(0.0, extent, self.intervals + 1)
        self.spacing = extent / self.intervals
        # Interior sine-mode wavenumbers k*pi/extent, k = 1..intervals-1.
        self.wavenumbers = np.arange(1, self.intervals) * np.pi / extent
        self._alternating = np.cos(np.pi * np.arange(1, self.intervals))

    # Sine-basis transforms --------------------------------------------------

    def sine_coefficients(self, values: np.ndarray) -> np.ndarray:
        """Coefficients b with values_j = sum_k b_k sin(pi k j / M)."""
        return dst(values[1:-1], type=1) / self.intervals

    def _eval_sine(self, coef: np.ndarray) -> np.ndarray:
        return dst(coef, type=1) / 2.0

    def _eval_cosine(self, coef: np.ndarray) -> np.ndarray:
        padded = np.zeros(self.intervals + 1)
        padded[1:-1] = coef
        return dct(padded, type=1) / 2.0

    # Derivatives ------------------------------------------------------------

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """Spectral derivative of a profile vanishing at both ends."""
        b = self.sine_coefficients(values)
        return self._eval_cosine(b * self.wavenumbers)

    def second_derivative(self, values: np.ndarray) -> np.ndarray:
        """Spectral second derivative; zero at the ends for odd profiles."""
        b = self.sine_coefficients(values)
        out = np.zeros(self.intervals + 1)
        out[1:-1] = self._eval_sine(-b * self.wavenumbers**2)
        return out

    def third_derivative_ends(self, values: np.ndarray):
        """Third derivative of the sine interpolant at both interval ends."""
        b = self.sine_coefficients(values)
        scaled = b * self.wavenumbers**3
        return -scaled.sum(), -(scaled * self._alternating).sum()

    def fd_derivative(self, values: np.ndarray) -> np.ndarray:
        """Second-order finite-difference derivative, any end values."""
        h = self.spacing
        out = np.empty_like(values)
        out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
        out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
        out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
        return out

    # Quadrature -------------------------------------------------------------

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.intervals + 1, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


@functools.lru_cache(maxsize=32)
def get_radial_grid(intervals: int, extent: float) -> RadialGrid:
    return RadialGrid(intervals, extent)
