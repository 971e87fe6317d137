"""Desk-scale solvers for the weighted dbar problem.

The solid Cauchy transform u(z) = (1/pi) int g(w)/(z - w) dA(w) is realized as
an FFT convolution against *exact* cell integrals of 1/w (corner antiderivative
-i (w log w - w)), so the quadrature error comes only from the cellwise
averaging of g.  Weighted solves conjugate by e^{tau p}; the minimal weighted
solution subtracts the weighted-least-squares holomorphic component on a disk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import poly as _poly
from .fields import FieldOp, GridField, apply_grid, spectral_diff

__all__ = [
    "SolveResult",
    "cauchy_transform",
    "solve_zbar",
    "minimal_solution",
    "fs_lq_check",
    "box_assemble",
    "BoxOperator",
    "WeightOverflowError",
]

WEIGHT_BUDGET = 40.0  # hard cap on tau * max p over the grid (exp headroom)


class WeightOverflowError(ValueError):
    """tau * max p exceeds the exponential budget; shrink the domain or tau."""


@dataclass
class SolveResult:
    u: GridField
    residual: float
    norms: dict
    method: str
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "norms": self.norms,
            "method": self.method,
            "meta": self.meta,
        }


# ---------------------------------------------------------------------------
# exact cell integrals of 1/w
# ---------------------------------------------------------------------------


def _corner_anti(w: np.ndarray) -> np.ndarray:
    """-i (w log w - w), continuous up to the cut approached from above."""
    out = np.zeros_like(w, dtype=complex)
    nz = w != 0
    ww = w[nz]
    out[nz] = -1j * (ww * np.log(ww) - ww)
    return out


def _upper_rect_integral(x0, x1, y0, y1) -> np.ndarray:
    """int 1/w over [x0,x1] x [y0,y1] with y0 >= 0 (principal log is valid)."""
    g = _corner_anti
    return (
        g(x1 + 1j * y1) - g(x1 + 1j * y0) - g(x0 + 1j * y1) + g(x0 + 1j * y0)
    )


def _inv_z_cell_table(n: int, h: float) -> np.ndarray:
    """Integrals of 1/w over the cells centered at (m h, k h), |m|,|k| < n."""
    m = np.arange(-(n - 1), n)
    x0 = m * h - h / 2.0
    x1 = m * h + h / 2.0
    table = np.zeros((2 * n - 1, 2 * n - 1), dtype=complex)
    # rows k >= 1 directly; k <= -1 by the reflection conjugation symmetry
    kpos = np.arange(1, n)
    y0 = kpos * h - h / 2.0
    y1 = kpos * h + h / 2.0
    block = _upper_rect_integral(
        x0[:, None], x1[:, None], y0[None, :], y1[None, :]
    )
    table[:, n - 1 + kpos] = block
    table[:, n - 1 - kpos] = np.conj(block)
    # row k = 0 splits at the axis: cell = upper half + its mirror image
    half = _upper_rect_integral(x0, x1, np.zeros_like(x0), np.full_like(x0, h / 2.0))
    table[:, n - 1] = 2.0 * half.real
    return table


def cauchy_transform(g: GridField) -> GridField:
    """Solve d u / dzbar = g by the solid Cauchy integral on the grid.

    ``g`` must be compactly supported strictly inside the box (the outermost
    cell ring must vanish).  The returned field samples u on the same grid.
    """
    if g.axes[:2] != ("x", "y") or g.values.ndim != 2:
        raise ValueError("cauchy_transform expects a 2-d (x, y) field")
    hx, hy = g.spacing
    if not math.isclose(hx, hy, rel_tol=1e-12):
        raise ValueError("grid must be square (equal spacing)")
    v = g.values
    n = v.shape[0]
    if v.shape[1] != n:
        raise ValueError("grid must have equal extents")
    edge = np.concatenate([v[0, :], v[-1, :], v[:, 0], v[:, -1]])
    if np.any(edge != 0):
        raise ValueError("support touches the grid boundary; enlarge the box")

    table = _inv_z_cell_table(n, hx)
    wrapped = np.zeros((2 * n, 2 * n), dtype=complex)
    wrapped[0:n, 0:n] = table[n - 1 :, n - 1 :]
    wrapped[0:n, n + 1 :] = table[n - 1 :, : n - 1]
    wrapped[n + 1 :, 0:n] = table[: n - 1, n - 1 :]
    wrapped[n + 1 :, n + 1 :] = table[: n - 1, : n - 1]
    pad = np.zeros((2 * n, 2 * n), dtype=complex)
    pad[:n, :n] = v
    conv = np.fft.ifft2(np.fft.fft2(pad) * np.fft.fft2(wrapped))[:n, :n]
    return g.with_values(conv / np.pi)


# ---------------------------------------------------------------------------
# weighted solves
# ---------------------------------------------------------------------------


def _weight_arrays(p: _poly.HermitianPoly, grid: GridField, tau: float):
    pvals = _poly.evaluate(p, grid.zmesh())
    budget = abs(tau) * float(np.max(np.abs(pvals)))
    if budget > WEIGHT_BUDGET:
        raise WeightOverflowError(
            f"tau * max|p| = {budget:.1f} exceeds the budget {WEIGHT_BUDGET}; "
            "shrink the domain or reduce tau"
        )
    return pvals


def solve_zbar(p: _poly.HermitianPoly, tau: float, f: GridField) -> SolveResult:
    """Solve (d/dzbar + tau p_zbar) u = f by conjugating the Cauchy transform.

    u = e^{-tau p} C(e^{tau p} f); the residual is recomputed independently
    with 4th-order differences, never from solver internals.
    """
    pvals = _weight_arrays(p, f, tau)
    boosted = f.with_values(np.exp(tau * pvals) * f.values)
    ct = cauchy_transform(boosted)
    u = f.with_values(np.exp(-tau * pvals) * ct.values)

    zbar_u = apply_grid(FieldOp("Zb", tau=tau), u, p, mode="fd4")
    diff = zbar_u.values - f.values
    m = max(zbar_u.valid_margin[0], zbar_u.valid_margin[1], 2)
    inner = (slice(m, -m), slice(m, -m))
    h2 = f.spacing[0] * f.spacing[1]
    residual = float(np.sqrt(np.sum(np.abs(diff[inner]) ** 2) * h2))
    wgt = np.exp(-tau * pvals)
    norms = {
        "u_weighted_l2": float(np.sqrt(np.sum(np.abs(u.values * wgt) ** 2) * h2)),
        "f_weighted_l2": float(np.sqrt(np.sum(np.abs(f.values * wgt) ** 2) * h2)),
        "f_l2": float(np.sqrt(np.sum(np.abs(f.values) ** 2) * h2)),
    }
    return SolveResult(u=u, residual=residual, norms=norms, method="cauchy", meta={"tau": tau})


def _disk_mask(grid: GridField, center: complex, radius: float) -> np.ndarray:
    return np.abs(grid.zmesh() - center) < radius


def minimal_solution(
    p: _poly.HermitianPoly,
    f: GridField,
    center: complex = 0.0,
    radius: float = 0.45,
    basis_degree: int | None = None,
) -> SolveResult:
    """Minimal-weighted-norm solution of dbar u = f on a disk of diameter <= 1.

    A particular solution comes from the Cauchy transform of f cut off just
    outside the disk; the weighted-L2-minimal representative subtracts the
    least-squares projection onto holomorphic monomials (scaled to the disk).
    The reported ratio ||u e^{-p}||_2 / ||f e^{-p}||_2 is the quantity the
    classical estimate bounds by 1 on domains of unit diameter.
    """
    if 2.0 * radius > 1.0 + 1e-12:
        raise ValueError("disk diameter must be at most 1")
    center = complex(center)
    zz = f.zmesh()
    if np.max(np.abs(zz - center)) < 1.4 * radius:
        raise ValueError("grid box too small around the disk")
    pvals = _weight_arrays(p, f, 1.0)

    # smooth cutoff == 1 on the disk, supported well inside the box
    r = np.abs(zz - center) / radius
    from .fields import _smooth_ramp

    cut = _smooth_ramp((1.3 - r) / 0.3)
    u0 = cauchy_transform(f.with_values(f.values * cut)).values

    mask = _disk_mask(f, center, radius)
    weight = np.exp(-pvals[mask])
    h2 = f.spacing[0] * f.spacing[1]
    k_max = basis_degree if basis_degree is not None else max(2 * p.degree + 4, 16)
    zs = (zz[mask] - center) / radius
    basis = np.stack([zs**k for k in range(k_max + 1)], axis=1)
    cols = basis * weight[:, None]
    target = u0[mask] * weight
    coef, _, rank, sv = np.linalg.lstsq(cols, target, rcond=None)

    hol_full = np.zeros_like(u0)
    zfull = (zz - center) / radius
    for k, c in enumerate(coef):
        hol_full = hol_full + c * zfull**k
    u_vals = u0 - hol_full
    u = f.with_values(u_vals)

    ratio_num = float(np.sqrt(np.sum(np.abs(u_vals[mask] * weight) ** 2) * h2))
    ratio_den = float(np.sqrt(np.sum(np.abs(f.values[mask] * weight) ** 2) * h2))
    orth = np.abs(cols.conj().T @ ((u_vals[mask]) * weight)) * h2
    cond = float(sv[0] / sv[-1]) if len(sv) and sv[-1] > 0 else math.inf

    zbar_u = apply_grid(FieldOp("Zb", tau=0.0), u, p, mode="fd4")
    inner = mask & (np.abs(zz - center) < 0.9 * radius)
    residual = float(
        np.sqrt(np.sum(np.abs((zbar_u.values - f.values)[inner]) ** 2) * h2)
    )
    norms = {
        "u_weighted_l2": ratio_num,
        "f_weighted_l2": ratio_den,
        "ratio": ratio_num / ratio_den if ratio_den > 0 else math.inf,
    }
    return SolveResult(
        u=u,
        residual=residual,
        norms=norms,
        method="minimal",
        meta={
            "orthogonality_max": float(np.max(orth)) if orth.size else 0.0,
            "condition": cond,
            "basis_rank": int(rank),
            "basis_degree": k_max,
            "center": [center.real, center.imag],
            "radius": radius,
        },
    )


def fs_lq_check(
    p: _poly.HermitianPoly,
    f: GridField,
    q: float,
    center: complex = 0.0,
    radius: float = 0.45,
) -> dict:
    """Weighted L^q ratio for the minimal-L2 solution, 1 < q <= 2 only.

    Informational: the minimal-L2 representative need not be the L^q extremal
    one, so the ratio is reported, not asserted against a constant.
    """
    if not (1.0 < q <= 2.0):
        raise ValueError("q must lie in (1, 2]")
    res = minimal_solution(p, f, center=center, radius=radius)
    zz = f.zmesh()
    mask = _disk_mask(f, center, radius)
    pv = _poly.evaluate(p, zz)[mask]
    h2 = f.spacing[0] * f.spacing[1]
    wu = np.sum(np.abs(res.u.values[mask]) ** q * np.exp(-2.0 * pv) * h2) ** (1.0 / q)
    wf = np.sum(np.abs(f.values[mask]) ** q * np.exp(-2.0 * pv) * h2) ** (1.0 / q)
    return {
        "q": q,
        "ratio": float(wu / wf) if wf > 0 else math.inf,
        "l2_ratio": res.norms["ratio"],
        "method": res.method,
    }


# ---------------------------------------------------------------------------
# box operator
# ---------------------------------------------------------------------------


class BoxOperator:
    """Matrix-free v -> -Zb(Z v) on a periodic grid (spectral derivatives).

    The discretization is exactly -Zb Z with Zb* = -Z on the grid, hence
    Hermitian and positive semidefinite to roundoff.
    """

    def __init__(self, p: _poly.HermitianPoly, tau: float, grid: GridField):
        from .geom import GeometryContext

        self.grid = grid
        self.tau = float(tau)
        ctx = GeometryContext(p)
        zz = grid.zmesh()
        self.pz = ctx.pz(zz)
        self.pzb = ctx.pzb(zz)
        self.h = grid.spacing[0]

    def _dz(self, v):
        return 0.5 * (spectral_diff(v, 0, self.h) - 1j * spectral_diff(v, 1, self.h))

    def _dzb(self, v):
        return 0.5 * (spectral_diff(v, 0, self.h) + 1j * spectral_diff(v, 1, self.h))

    def apply(self, v: np.ndarray) -> np.ndarray:
        zv = self._dz(v) - self.tau * self.pz * v
        return -(self._dzb(zv) + self.tau * self.pzb * zv)

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        return complex(np.sum(np.conj(b) * a) * self.h * self.h)

    def self_adjointness(self, n_pairs: int = 4, seed: int = 1) -> float:
        """max |<Av, u> - <v, Au>| / scale over random pairs."""
        rng = np.random.default_rng(seed)
        shape = self.grid.values.shape[:2]
        worst = 0.0
        for _ in range(n_pairs):
            u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            lhs = self.inner(self.apply(v), u)
            rhs = self.inner(v, self.apply(u))
            scale = max(abs(lhs), abs(rhs), 1.0)
            worst = max(worst, abs(lhs - rhs) / scale)
        return worst

    def nonnegativity(self, n_vectors: int = 6, seed: int = 2) -> float:
        """Most negative normalized Rayleigh quotient over random vectors."""
        rng = np.random.default_rng(seed)
        shape = self.grid.values.shape[:2]
        worst = 0.0
        for _ in range(n_vectors):
            v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            quad = self.inner(self.apply(v), v)
            norm = self.inner(v, v).real
            worst = min(worst, quad.real / norm)
        return worst


def box_assemble(p: _poly.HermitianPoly, tau: float, grid: GridField) -> BoxOperator:
    return BoxOperator(p, tau, grid)
