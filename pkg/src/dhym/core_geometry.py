"""Pointwise linear algebra of the coupled equations on a flat torus.

The building blocks are a metric matrix ``v`` (symmetric positive definite)
and a curvature matrix ``F`` (symmetric), both 2x2 in the surface case but
n x n where noted.  Everything here is algebra at a single point or over a
sampled field of points: eigenvalues of the pencil (F, v), the radius and
phase functions built from them, the constant-representative phase angle of
the underlying classes, and the residuals/bound checks of the surface
equations.

Matrix fields are plain numpy arrays of shape ``(..., n, n)``; all operations
broadcast over the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDenominator,
    DegeneratePhase,
    DhymError,
    DimensionMismatch,
    NonPositiveMetric,
    PhasePreconditionViolated,
)

__all__ = [
    "ConstantCurvature2",
    "Phase",
    "SpectralData",
    "pencil_eigenvalues",
    "phase_radius",
    "torus_constant_phase",
    "phase_positivity_constant",
    "dhym_residual_surface",
    "surface_ma_check",
    "surface_apriori_check",
    "SurfaceAprioriReport",
    "average_radius",
]


def _as_sym(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, np.swapaxes(m, -1, -2), rtol=0.0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise DimensionMismatch(f"{name} must be symmetric")
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def _inv_sqrt_spd(v: np.ndarray, name: str = "v") -> np.ndarray:
    """Inverse square root of an SPD matrix (field) by eigendecomposition."""
    w, q = np.linalg.eigh(v)
    if w.min() <= 0.0:
        raise NonPositiveMetric(f"{name} has a nonpositive eigenvalue ({w.min():g})")
    d = 1.0 / np.sqrt(w)
    return np.einsum("...ij,...j,...kj->...ik", q, d, q)


@dataclass(frozen=True)
class ConstantCurvature2:
    """Constant symmetric 2x2 representative [[a, b], [b, c]] of the
    curvature class on the unit torus."""

    a: float
    b: float
    c: float

    @property
    def det(self) -> float:
        return self.a * self.c - self.b * self.b

    @property
    def tr(self) -> float:
        return self.a + self.c

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]])

    @classmethod
    def from_matrix(cls, m) -> "ConstantCurvature2":
        m = _as_sym(m, "F0")
        if m.shape != (2, 2):
            raise DimensionMismatch("constant curvature representative must be 2x2")
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 1]))


@dataclass(frozen=True)
class Phase:
    """Unit complex number exp(i theta_hat) stored as (cos, sin)."""

    cos: float
    sin: float
    magnitude: float = field(default=float("nan"))
    #: magnitude is the modulus N of the defining integral, when known

    def __post_init__(self):
        if abs(self.cos**2 + self.sin**2 - 1.0) > 1e-12:
            raise DegeneratePhase("phase is not on the unit circle")

    @property
    def conj(self) -> complex:
        """exp(-i theta_hat)."""
        return complex(self.cos, -self.sin)

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.sin, self.cos))


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues of v^{-1} F with the induced radius and phase.

    Satisfies det(v - iF) = det(v) * radius * exp(-i theta).
    """

    lambdas: np.ndarray
    radius: float
    theta: float


def pencil_eigenvalues(v, f) -> np.ndarray:
    """Eigenvalues of v^{-1} F, ascending (the pencil det(F - lambda v) = 0).

    Computed through the symmetric similarity v^{-1/2} F v^{-1/2}, so the
    result is real by construction.  Works on single matrices or on stacked
    matrix fields of shape (..., n, n).
    """
    v = _as_sym(v, "v")
    f = _as_sym(f, "F")
    if v.shape[-1] != f.shape[-1]:
        raise DimensionMismatch(f"dimension mismatch: v is {v.shape}, F is {f.shape}")
    r = _inv_sqrt_spd(v)
    sym = r @ f @ r
    return np.linalg.eigvalsh(sym)


def phase_radius(lambdas) -> SpectralData:
    """Radius prod sqrt(1 + l_i^2) and phase sum arctan(l_i) of eigenvalues."""
    lam = np.sort(np.atleast_1d(np.asarray(lambdas, dtype=float)))
    radius = float(np.prod(np.sqrt(1.0 + lam**2)))
    theta = float(np.arctan(lam).sum())
    return SpectralData(lambdas=lam, radius=radius, theta=theta)


def torus_constant_phase(f0: ConstantCurvature2) -> Phase:
    """Phase angle of the classes on the unit 2-torus, from the constant
    representative: the integral of det(I - i F0) equals
    (1 - det F0) - i tr F0, so

        cos = (1 - det F0)/N,   sin = -tr F0 / N,
        N   = ((1 - det F0)^2 + (tr F0)^2)^(1/2).
    """
    re = 1.0 - f0.det
    im = -f0.tr
    n = float(np.hypot(re, im))
    if n == 0.0:
        raise DegeneratePhase("the defining integral vanishes for this class")
    return Phase(cos=re / n, sin=im / n, magnitude=n)


def phase_positivity_constant(f0: ConstantCurvature2, phase: Phase) -> float:
    """The coefficient b^2 / (cos - c sin) controlling the coupling term.

    It is nonnegative, vanishes exactly when b = 0, and coincides with
    b^2 N / (1 + b^2 + c^2); both expressions are evaluated and must agree
    to 1e-12.
    """
    den = phase.cos - f0.c * phase.sin
    if abs(den) < 1e-14:
        raise DegenerateDenominator("cos - c sin is numerically zero")
    value = f0.b**2 / den
    alt = f0.b**2 * phase.magnitude / (1.0 + f0.b**2 + f0.c**2)
    if not np.isnan(alt) and abs(value - alt) > 1e-12 * max(1.0, abs(value)):
        raise DhymError(f"positivity constant mismatch: {value!r} vs {alt!r}")
    return float(value)


def _det2(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def _mixed2(v: np.ndarray, f: np.ndarray) -> np.ndarray:
    # polarization of the determinant: det(v+f) = det v + det f + mixed
    return (
        v[..., 0, 0] * f[..., 1, 1]
        + v[..., 1, 1] * f[..., 0, 0]
        - 2.0 * v[..., 0, 1] * f[..., 0, 1]
    )


def _check_spd2(v: np.ndarray) -> None:
    if v.shape[-2:] != (2, 2):
        raise DimensionMismatch("surface operations expect 2x2 matrices")
    det = _det2(v)
    tr = v[..., 0, 0] + v[..., 1, 1]
    if det.min() <= 0.0 or tr.min() <= 0.0:
        raise NonPositiveMetric("metric field is not positive definite everywhere")


def dhym_residual_surface(v, f, phase: Phase):
    """Im and Re parts of exp(-i theta_hat) det(v - iF), pointwise.

    det(v - iF) = (det v - det F) - i * mixed(v, F), so with
    e = cos - i sin:

        im = -sin (det v - det F) - cos * mixed,
        re =  cos (det v - det F) - sin * mixed.

    The first equation of the coupled system is im == 0.
    """
    v = _as_sym(v, "v")
    f = _as_sym(f, "F")
    _check_spd2(v)
    dv = _det2(v)
    df = _det2(f)
    mixed = _mixed2(v, f)
    im = -phase.sin * (dv - df) - phase.cos * mixed
    re = phase.cos * (dv - df) - phase.sin * mixed
    return im, re


def surface_ma_check(v, f, phase: Phase) -> float:
    """Defect of the Monge-Ampere form of the surface equation.

    With chi = -sin * F + cos * v one has det chi - det v =
    sin * Im(e^{-i theta} det(v - iF)) pointwise, so the defect vanishes
    together with the imaginary part.  Returns sup |det chi - det v|.
    """
    v = _as_sym(v, "v")
    f = _as_sym(f, "F")
    _check_spd2(v)
    chi = -phase.sin * f + phase.cos * v
    return float(np.abs(_det2(chi) - _det2(v)).max())


@dataclass(frozen=True)
class SurfaceAprioriReport:
    det_ratio_ok: np.ndarray
    trace_ratio_ok: np.ndarray
    curvature_nonneg: bool
    max_det_ratio: float
    max_trace_ratio: float
    trace_bound: float

    @property
    def passed(self) -> bool:
        """Both bounds hold everywhere; only meaningful when F >= 0."""
        return bool(self.curvature_nonneg and self.det_ratio_ok.all() and self.trace_ratio_ok.all())


def surface_apriori_check(v, f, phase: Phase) -> SurfaceAprioriReport:
    """Check the a priori bounds det F / det v < 1 and tr(v^{-1}F)/2 <
    |tan theta|/2 that any solution with F >= 0 must satisfy when
    sin < 0 < cos."""
    if not (phase.sin < 0.0 < phase.cos):
        raise PhasePreconditionViolated(
            "the bounds require sin(theta_hat) < 0 < cos(theta_hat)"
        )
    v = _as_sym(v, "v")
    f = _as_sym(f, "F")
    _check_spd2(v)
    det_ratio = _det2(f) / _det2(v)
    lam = pencil_eigenvalues(v, f)
    trace_ratio = 0.5 * lam.sum(axis=-1)
    bound = 0.5 * abs(phase.sin / phase.cos)
    f_nonneg = bool((_det2(f) >= -1e-12).all() and (f[..., 0, 0] + f[..., 1, 1] >= -1e-12).all())
    return SurfaceAprioriReport(
        det_ratio_ok=det_ratio < 1.0,
        trace_ratio_ok=trace_ratio < bound,
        curvature_nonneg=f_nonneg,
        max_det_ratio=float(det_ratio.max()),
        max_trace_ratio=float(trace_ratio.max()),
        trace_bound=bound,
    )


def average_radius(n: int, f0) -> float:
    """Average radius |det(I - i F0)| of the constant representative on the
    unit n-torus."""
    f0 = _as_sym(f0, "F0")
    if f0.shape != (n, n):
        raise DimensionMismatch(f"expected a {n}x{n} matrix, got {f0.shape}")
    return float(abs(np.linalg.det(np.eye(n) - 1j * f0)))
