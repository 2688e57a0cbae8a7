"""Discrete linearized operator of the coupled large-radius system on T^2.

The background is a symplectic potential u = |x|^2/2 + u_pert and a bundle
potential phi entering the curvature decomposition F = B + Hess(phi), with B
a constant symmetric matrix.  Tangent directions are Hessians of scalar
periodic potentials, so the operator L maps scalars to scalars.

L splits as L0 + L1 where L1 carries the solution phi-dot of the linearized
degree equation

    udot_ij B_ij + Delta phi-dot - d_i(u^{ia} udot_ab u^{bj} phi_j) = 0,
    Delta = d_i u^{ij} d_j,  mean(phi-dot) = 0.

L is formally self-adjoint for the flat Lebesgue product and nonpositive on
mean-zero fields, *provided the background satisfies the degree equation*
Delta phi + u_ij B_ij = const (the integration by parts uses it); use
``make_consistent_context`` to build such backgrounds.  At the flat
background the operator is diagonal in Fourier modes with symbol

    -(2 pi)^4 |k|^4 - 2 (2 pi)^2 k.B^2 k + 2 (2 pi)^2 (k.B k)^2 / |k|^2,

which is nonpositive by Cauchy-Schwarz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .core_geometry import _as_sym
from .errors import DimensionMismatch, InvalidConfig, SingularElliptic
from .spectral import hessian2, partial2, resample2

__all__ = [
    "LinearizedContext",
    "make_consistent_context",
    "solve_lincond",
    "apply_L",
    "apply_L_terms",
    "flat_symbol",
    "selfadjointness_defect",
    "selfadjointness_refinement",
    "negativity_check",
    "dense_operator",
    "inner",
]

_DENSE_SOLVE_LIMIT = 40  # factorize the elliptic operator densely up to this N


def inner(f: np.ndarray, g: np.ndarray) -> float:
    """Flat Lebesgue L^2 product: mean of the pointwise product."""
    return float((f * g).mean())


def _gradient(f: np.ndarray):
    return partial2(f, 1, 0), partial2(f, 0, 1)


def _divergence(f0: np.ndarray, f1: np.ndarray) -> np.ndarray:
    return partial2(f0, 1, 0) + partial2(f1, 0, 1)


@dataclass
class LinearizedContext:
    """Background data; Hessian and inverse-Hessian fields precomputed."""

    u_pert: np.ndarray
    b_matrix: np.ndarray
    phi: np.ndarray
    u_hess: np.ndarray = field(init=False)
    u_inv: np.ndarray = field(init=False)
    _lu: tuple | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        self.u_pert = np.asarray(self.u_pert, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.b_matrix = _as_sym(self.b_matrix, "B")
        if self.u_pert.shape != self.phi.shape or self.u_pert.ndim != 2:
            raise DimensionMismatch("background fields must share an N x N grid")
        if self.u_pert.shape[0] < 16:
            raise InvalidConfig("background grid too coarse (N >= 16)")
        hess = np.eye(2) + hessian2(self.u_pert)
        det = hess[..., 0, 0] * hess[..., 1, 1] - hess[..., 0, 1] ** 2
        tr = hess[..., 0, 0] + hess[..., 1, 1]
        if det.min() <= 0.0 or tr.min() <= 0.0:
            raise InvalidConfig("background Hessian is not positive definite")
        inv = np.empty_like(hess)
        inv[..., 0, 0] = hess[..., 1, 1]
        inv[..., 1, 1] = hess[..., 0, 0]
        inv[..., 0, 1] = inv[..., 1, 0] = -hess[..., 0, 1]
        self.u_hess = hess
        self.u_inv = inv / det[..., None, None]

    @property
    def n(self) -> int:
        return self.u_pert.shape[0]

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Divergence-form operator d_i(u^{ij} d_j f)."""
        g0, g1 = _gradient(f)
        q0 = self.u_inv[..., 0, 0] * g0 + self.u_inv[..., 0, 1] * g1
        q1 = self.u_inv[..., 1, 0] * g0 + self.u_inv[..., 1, 1] * g1
        return _divergence(q0, q1)

    def degree_defect(self) -> float:
        """Sup-deviation of u_ij B_ij + Delta(phi) from its mean; zero for a
        consistent background."""
        lhs = np.einsum("...ij,ij->...", self.u_hess, self.b_matrix) + self.laplacian(self.phi)
        return float(np.abs(lhs - lhs.mean()).max())


def _nyquist_projector(f: np.ndarray) -> np.ndarray:
    """Project onto the modes carrying a Nyquist frequency in either axis.

    First spectral derivatives annihilate these modes, so the divergence-form
    operator is singular on them; they carry no resolvable information and
    are pinned by a penalty in the dense factorization.
    """
    n = f.shape[0]
    if n % 2 != 0:
        return np.zeros_like(f)
    coeff = np.fft.fft2(f)
    keep = np.zeros_like(coeff)
    keep[n // 2, :] = coeff[n // 2, :]
    keep[:, n // 2] = coeff[:, n // 2]
    return np.real(np.fft.ifft2(keep))


def _flat_inverse_laplacian(rhs: np.ndarray) -> np.ndarray:
    n = rhs.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    sym = -(2.0 * np.pi) ** 2 * (kx**2 + ky**2)
    sym[0, 0] = 1.0
    coeff = np.fft.fft2(rhs)
    coeff /= sym
    coeff[0, 0] = 0.0
    return np.real(np.fft.ifft2(coeff))


def _solve_elliptic(ctx: LinearizedContext, rhs: np.ndarray) -> np.ndarray:
    """Solve Delta f = rhs for mean-zero f (rhs must be mean free).

    Dense LU of the bordered operator for small grids; preconditioned CG on
    the mean-zero subspace otherwise.  Both paths are deterministic.
    """
    rhs = rhs - rhs.mean()
    n = ctx.n
    if n <= _DENSE_SOLVE_LIMIT:
        if ctx._lu is None:
            size = n * n
            sigma = -((np.pi * n) ** 2)  # pins the Nyquist kernel modes
            mat = np.zeros((size + 1, size + 1))
            basis = np.zeros((n, n))
            for j in range(size):
                basis.flat[j] = 1.0
                resp = ctx.laplacian(basis) + sigma * _nyquist_projector(basis)
                mat[:size, j] = resp.ravel()
                basis.flat[j] = 0.0
            mat[:size, size] = 1.0
            mat[size, :size] = 1.0 / size
            ctx._lu = lu_factor(mat)
        sol = lu_solve(ctx._lu, np.concatenate([rhs.ravel(), [0.0]]))
        return sol[:-1].reshape(n, n)
    # CG on -Delta (SPD on mean-zero fields), flat inverse Laplacian preconditioner
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = -_flat_inverse_laplacian(r)
    p = z.copy()
    rz = inner(r, z)
    scale = float(np.abs(rhs).max())
    for _ in range(20 * n):
        ap = -ctx.laplacian(p)
        denom = inner(p, ap)
        if denom <= 0.0:
            raise SingularElliptic("background Laplacian lost definiteness")
        a = rz / denom
        x += a * p
        r -= a * ap
        if float(np.abs(r).max()) <= 1e-13 * max(scale, 1.0):
            break
        z = -_flat_inverse_laplacian(r)
        rz_new = inner(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:  # pragma: no cover - defensive
        raise SingularElliptic("elliptic solve failed to converge")
    # note: CG preserves zero mean only approximately; project
    return -(x - x.mean())


def _as_hessian_field(ctx: LinearizedContext, udot) -> np.ndarray:
    """Accept a scalar potential (N, N) or a matrix field (N, N, 2, 2)."""
    udot = np.asarray(udot, dtype=float)
    if udot.shape == (ctx.n, ctx.n):
        return hessian2(udot)
    if udot.shape == (ctx.n, ctx.n, 2, 2):
        return udot
    raise DimensionMismatch(f"tangent field has shape {udot.shape}")


def solve_lincond(ctx: LinearizedContext, udot) -> np.ndarray:
    """Solve the linearized degree equation for the bundle direction.

    Returns the mean-zero phi-dot with
    Delta phi-dot = d_i(u^{ia} udot_ab u^{bj} phi_j) - udot_ij B_ij;
    the right-hand side is mean free because udot is a periodic Hessian.
    """
    gdot = _as_hessian_field(ctx, udot)
    p0, p1 = _gradient(ctx.phi)
    m = ctx.u_inv @ gdot @ ctx.u_inv
    q0 = m[..., 0, 0] * p0 + m[..., 0, 1] * p1
    q1 = m[..., 1, 0] * p0 + m[..., 1, 1] * p1
    rhs = _divergence(q0, q1) - np.einsum("...ij,ij->...", gdot, ctx.b_matrix)
    return _solve_elliptic(ctx, rhs)


def apply_L_terms(ctx: LinearizedContext, udot) -> dict[str, np.ndarray]:
    """All seven contributions to L(udot), keyed for debugging.

    ``l0_*`` are the terms not involving phi-dot, ``l1_*`` the two that do.
    """
    gdot = _as_hessian_field(ctx, udot)
    b = ctx.b_matrix
    uinv = ctx.u_inv
    # recurring vector fields
    p0, p1 = _gradient(ctx.phi)  # phi_j
    w = np.stack(
        [uinv[..., 0, 0] * p0 + uinv[..., 0, 1] * p1,
         uinv[..., 1, 0] * p0 + uinv[..., 1, 1] * p1],
        axis=-1,
    )  # u^{in} phi_n
    m = uinv @ gdot @ uinv  # u^{ia} udot_ab u^{bj}
    q = np.stack(
        [m[..., 0, 0] * p0 + m[..., 0, 1] * p1,
         m[..., 1, 0] * p0 + m[..., 1, 1] * p1],
        axis=-1,
    )  # u^{ia} udot_ab u^{bm} phi_m

    def dvec(vec):
        """d_j vec[k] -> array [..., j, k]."""
        out = np.empty(vec.shape[:-1] + (2, 2))
        for kk in range(2):
            out[..., 0, kk] = partial2(vec[..., kk], 1, 0)
            out[..., 1, kk] = partial2(vec[..., kk], 0, 1)
        return out

    dw = dvec(w)
    dq = dvec(q)

    terms = {}
    terms["l0_hessian"] = -(
        partial2(m[..., 0, 0], 2, 0)
        + 2.0 * partial2(m[..., 0, 1], 1, 1)
        + partial2(m[..., 1, 1], 0, 2)
    )
    terms["l0_transport"] = 2.0 * np.einsum("...jk,...kl,jl->...", dw, gdot, b)
    terms["l0_quadratic"] = -2.0 * np.einsum("...il,...li->...", dq, dw)
    terms["l0_degree"] = 2.0 * np.einsum("ik,jl,...ij,...kl->...", b, b, gdot, ctx.u_hess)
    terms["l0_mixed"] = -2.0 * np.einsum("...jk,...kl,jl->...", dq, ctx.u_hess, b)
    phidot = solve_lincond(ctx, gdot)
    s0, s1 = _gradient(phidot)
    s = np.stack(
        [uinv[..., 0, 0] * s0 + uinv[..., 0, 1] * s1,
         uinv[..., 1, 0] * s0 + uinv[..., 1, 1] * s1],
        axis=-1,
    )  # u^{kn} phidot_n
    ds = dvec(s)
    terms["l1_degree"] = 2.0 * np.einsum("...jk,...kl,jl->...", ds, ctx.u_hess, b)
    terms["l1_transport"] = 2.0 * np.einsum("...il,...li->...", ds, dw)
    return terms


def apply_L(ctx: LinearizedContext, udot) -> np.ndarray:
    """The full linearized operator L(udot) = L0 + L1."""
    return sum(apply_L_terms(ctx, udot).values())


def flat_symbol(k: np.ndarray, b_matrix: np.ndarray) -> float:
    """Fourier symbol of L at the flat background, for integer mode k != 0."""
    k = np.asarray(k, dtype=float)
    b = _as_sym(b_matrix, "B")
    k2 = float(k @ k)
    if k2 == 0.0:
        raise InvalidConfig("the symbol is defined for nonzero modes")
    tp = 2.0 * np.pi
    kbk = float(k @ b @ k)
    kb2k = float(k @ (b @ b) @ k)
    return -(tp**4) * k2**2 - 2.0 * tp**2 * kb2k + 2.0 * tp**2 * kbk**2 / k2


def make_consistent_context(u_pert: np.ndarray, b_matrix) -> LinearizedContext:
    """Build a background satisfying the degree equation.

    Given the metric perturbation and B, solves Delta phi = tr(B) - u_ij B_ij
    for the mean-zero bundle potential (tr B is the unique compatible degree,
    because the periodic Hessian integrates to zero).
    """
    ctx = LinearizedContext(u_pert=u_pert, b_matrix=b_matrix, phi=np.zeros_like(u_pert))
    mu = float(np.trace(ctx.b_matrix))
    rhs = mu - np.einsum("...ij,ij->...", ctx.u_hess, ctx.b_matrix)
    phi = _solve_elliptic(ctx, rhs)
    out = LinearizedContext(u_pert=ctx.u_pert, b_matrix=ctx.b_matrix, phi=phi)
    out._lu = ctx._lu  # the elliptic operator only depends on u
    return out


def selfadjointness_defect(ctx: LinearizedContext, trial_pairs) -> list[float]:
    """Relative defect |<xi, L gamma> - <gamma, L xi>| for each trial pair.

    Normalized by the sizes of the operator images, so values compare across
    grids; vanishing defect means formal self-adjointness at this resolution.
    """
    defects = []
    for xi, gamma in trial_pairs:
        lx = apply_L(ctx, xi)
        lg = apply_L(ctx, gamma)
        raw = abs(inner(xi, lg) - inner(gamma, lx))
        scale = (
            float(np.abs(lg).max()) * float(np.abs(xi).max())
            + float(np.abs(lx).max()) * float(np.abs(gamma).max())
        )
        defects.append(raw / scale if scale > 0.0 else 0.0)
    return defects


def selfadjointness_refinement(u_pert, b_matrix, trial_pairs, grid_sizes):
    """Defects of the same background/trials across grids, plus a fitted order.

    The coarse fields must be band-limited; they are transplanted to each
    grid by Fourier padding and the bundle potential is re-solved per grid,
    so every context is consistent at its own resolution.
    """
    grid_sizes = sorted(grid_sizes)
    max_defects = []
    for n in grid_sizes:
        ctx = make_consistent_context(resample2(u_pert, n), b_matrix)
        pairs = [(resample2(a, n), resample2(b, n)) for a, b in trial_pairs]
        max_defects.append(max(selfadjointness_defect(ctx, pairs)))
    order = float("nan")
    if len(grid_sizes) >= 2 and min(max_defects) > 0.0:
        logs = np.log(max_defects)
        order = float(-np.polyfit(np.log(grid_sizes), logs, 1)[0])
    return max_defects, order


def negativity_check(ctx: LinearizedContext, trials) -> float:
    """Max Rayleigh quotient <gamma, L gamma>/<gamma, gamma> over the trials.

    Trials must be mean-zero and nonzero; constants span the gauge direction
    and are rejected.  Nonpositive up to discretization error.
    """
    worst = -np.inf
    for gamma in trials:
        gamma = np.asarray(gamma, dtype=float)
        norm2 = inner(gamma, gamma)
        if norm2 == 0.0 or abs(gamma.mean()) > 1e-12 * np.abs(gamma).max():
            raise InvalidConfig("trials must be nonzero and mean-free")
        worst = max(worst, inner(gamma, apply_L(ctx, gamma)) / norm2)
    return float(worst)


def dense_operator(ctx: LinearizedContext) -> np.ndarray:
    """Dense matrix of L on scalar potentials (columns are basis responses).

    Memory grows like N^4; callers should keep N small (the transpose test
    uses N <= 24).
    """
    n = ctx.n
    if n > 32:
        raise InvalidConfig("dense assembly is capped at N = 32")
    size = n * n
    mat = np.empty((size, size))
    basis = np.zeros((n, n))
    for j in range(size):
        basis.flat[j] = 1.0
        mat[:, j] = apply_L(ctx, basis).ravel()
        basis.flat[j] = 0.0
    return mat
