"""Periodic Legendre duality in one variable.

A convex potential v(y) = y^2/2 + psi(y) with periodic psi has a convex
conjugate u(x) = x^2/2 + phi(x) with periodic phi; the gradient map
y -> x(y) = y + psi'(y) is an increasing diffeomorphism of the circle of
degree one, and

    (1 + phi''(x)) (1 + psi''(y(x))) = 1.

Both potentials are stored mean-zero; the additive constant of the
conjugation u(x) + v(y) = x y is fixed by that normalization (so the
conjugation identity holds up to a single global constant).

Transforming twice returns the input: the transform is an involution on
mean-zero profiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotConvex, NotMonotone
from .spectral import PeriodicProfile, grid, spectral_chop, spectral_derivative, trig_interpolate

__all__ = ["MonotoneMap", "legendre_forward", "datum_pushforward", "datum_pullback"]


@dataclass(frozen=True)
class MonotoneMap:
    """The gradient map s -> s + p'(s) of a uniformly convex potential.

    ``values`` are the images of the uniform grid nodes; the map has degree
    one (m(s+1) = m(s) + 1) by construction.  ``d1`` and ``d2`` hold the
    sampled first and second derivatives of p for off-grid evaluation.
    """

    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self):
        ext = np.append(self.values, self.values[0] + 1.0)
        if not (np.diff(ext) > 0.0).all():
            raise NotMonotone("gradient map is not strictly increasing")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def forward(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts + trig_interpolate(self.d1, pts)

    def inverse(self, points) -> np.ndarray:
        """Invert the map at arbitrary points by safeguarded Newton.

        Each target is bracketed between adjacent grid images (monotonicity
        makes the bracket valid); Newton steps that leave the bracket fall
        back to bisection.
        """
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        base = self.values[0]
        shift = np.floor(pts - base)  # reduce into [m(0), m(0)+1)
        tau = pts - shift
        ext = np.append(self.values, self.values[0] + 1.0)
        idx = np.clip(np.searchsorted(ext, tau, side="right") - 1, 0, self.n - 1)
        nodes = grid(self.n)
        lo = nodes[idx]
        hi = nodes[idx] + 1.0 / self.n
        y = 0.5 * (lo + hi)
        for _ in range(80):
            m = y + trig_interpolate(self.d1, y)
            err = m - tau
            if np.abs(err).max() < 1e-14:
                break
            below = err < 0.0
            lo = np.where(below, y, lo)
            hi = np.where(below, hi, y)
            dm = 1.0 + trig_interpolate(self.d2, y)
            step = err / dm
            cand = y - step
            inside = (cand > lo) & (cand < hi)
            y = np.where(inside, cand, 0.5 * (lo + hi))
        return (y + shift) if np.ndim(points) else float(y[0] + shift[0])


def legendre_forward(psi: PeriodicProfile):
    """Convex conjugate of y^2/2 + psi(y); returns (phi, map).

    phi is the mean-zero periodic part of the conjugate potential sampled on
    the uniform dual grid, and map is the gradient map y -> y + psi'(y).
    Requires 1 + psi'' > 0 everywhere (uniform convexity on the grid).
    """
    d1 = spectral_derivative(psi.samples, 1)
    d2 = spectral_derivative(psi.samples, 2)
    if (1.0 + d2).min() <= 0.0:
        raise NotConvex("1 + psi'' must be positive for the Legendre transform")
    m = MonotoneMap(values=psi.x + d1, d1=d1, d2=d2)
    x_nodes = grid(psi.n)
    y_at = m.inverse(x_nodes)
    # u(x) = x y - v(y) at y = y(x): the periodic part is -psi(y) - psi'(y)^2/2
    phi_raw = -trig_interpolate(psi.samples, y_at) - 0.5 * trig_interpolate(d1, y_at) ** 2
    # node inversion and interpolation leave sample-level noise that later
    # differentiation would amplify; the conjugate of a smooth profile is
    # smooth, so the noise bins are chopped
    phi = PeriodicProfile.from_samples(spectral_chop(phi_raw), demean=True)
    return phi, m


def datum_pushforward(a: PeriodicProfile, m: MonotoneMap) -> PeriodicProfile:
    """Transport a datum through the gradient map: f(m(s)) = a(s).

    Given a on the source grid and the map m, returns f resampled on the
    uniform image grid, so that composing back with m recovers a.
    """
    targets = m.inverse(grid(a.n))
    return PeriodicProfile.from_samples(trig_interpolate(a.samples, targets))


def datum_pullback(f: PeriodicProfile, m: MonotoneMap) -> PeriodicProfile:
    """Inverse transport: a(s) = f(m(s)) sampled on the source grid."""
    return PeriodicProfile.from_samples(trig_interpolate(f.samples, m.forward(grid(f.n))))
