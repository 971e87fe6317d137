"""Partial Fourier transform between vertical-model kernels k(z, w, t) and
parameter families K(tau, z, w).

Conventions (fixed once, used everywhere):

    K(tau) = int e^{-i tau t} k(t) dt          (downward)
    k(t)   = (1/2pi) int e^{+i t tau} K(tau) dtau   (upward)

realized as windowed FFT quadrature on matched grids: the tau grid is the
exact DFT dual of the t grid (dtau = 2 pi / (n_t dt)), the smooth window
equals 1 on the inner half of the extent, and window-limit convergence is
probed by widening the extent.  Distribution-sense integrals are never
attempted directly; the window is the regularization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import GeometryContext
from .kernels import ConditionReport, KernelFamily, KernelSamples, NisKernel, smooth_window

__all__ = [
    "TransformPlan",
    "to_opf",
    "to_nis",
    "plancherel_residual",
    "window_stability",
    "intertwine_pair_discrepancy",
    "intertwine_check",
    "TransformedOpf",
    "TransformedNis",
    "correspondence_report",
    "INTERTWINE_PAIRS",
]

INTERTWINE_PAIRS = (("L", "Z"), ("Lb", "Zb"), ("cL", "W"), ("cLb", "Wb"), ("cM", "M"))


@dataclass(frozen=True)
class TransformPlan:
    """Matched t / tau grids plus the taper window.

    The tau spacing is forced to 2 pi / (n_t dt); the window is identically 1
    on the inner half of each extent and rolls smoothly to zero at the ends.
    """

    n_t: int
    dt: float

    def __post_init__(self):
        if self.n_t < 8 or self.n_t % 2:
            raise ValueError("n_t must be even and at least 8")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def extent(self) -> float:
        return self.n_t * self.dt

    @property
    def t0(self) -> float:
        return -(self.n_t // 2) * self.dt

    @property
    def t_grid(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_t)

    @property
    def dtau(self) -> float:
        return 2.0 * np.pi / (self.n_t * self.dt)

    @property
    def tau_grid(self) -> np.ndarray:
        """tau nodes in FFT order (0, positive, negative)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_t, d=self.dt)

    def window_t(self) -> np.ndarray:
        return smooth_window(self.t_grid / (0.5 * self.extent))

    def window_tau(self) -> np.ndarray:
        band = np.pi / self.dt
        return smooth_window(self.tau_grid / band)

    def refined(self, factor: int = 2) -> "TransformPlan":
        """Widen the extent (same dt, more samples); the tau grid refines."""
        return TransformPlan(n_t=self.n_t * factor, dt=self.dt)

    def tau_index(self, tau: float) -> int:
        idx = int(np.argmin(np.abs(self.tau_grid - tau)))
        if abs(self.tau_grid[idx] - tau) > 1e-9 * max(1.0, abs(tau)):
            raise ValueError(f"tau={tau} is not on the transform grid")
        return idx


def to_opf(values, plan: TransformPlan, window: bool = True) -> np.ndarray:
    """Windowed downward transform along the last axis (t -> tau, FFT order)."""
    x = np.asarray(values, dtype=complex)
    if x.shape[-1] != plan.n_t:
        raise ValueError("last axis must match the plan's t grid")
    if window:
        x = x * plan.window_t()
    phase = np.exp(-1j * plan.tau_grid * plan.t0)
    return plan.dt * phase * np.fft.fft(x, axis=-1)


def to_nis(values, plan: TransformPlan, window: bool = True) -> np.ndarray:
    """Windowed upward transform along the last axis (tau -> t)."""
    x = np.asarray(values, dtype=complex)
    if x.shape[-1] != plan.n_t:
        raise ValueError("last axis must match the plan's tau grid")
    if window:
        x = x * plan.window_tau()
    return np.fft.ifft(x * np.exp(1j * plan.tau_grid * plan.t0), axis=-1) / plan.dt


def plancherel_residual(values_t, plan: TransformPlan) -> float:
    """Relative defect of ||eta k||^2 dt = ||K||^2 dtau / (2 pi)."""
    x = np.asarray(values_t, dtype=complex) * plan.window_t()
    lhs = float(np.sum(np.abs(x) ** 2) * plan.dt)
    big_k = to_opf(values_t, plan)
    rhs = float(np.sum(np.abs(big_k) ** 2) * plan.dtau / (2.0 * np.pi))
    return abs(lhs - rhs) / max(lhs, 1e-300)


def window_stability(k: NisKernel, z, w, plan: TransformPlan) -> dict:
    """Change in the transform when the window extent doubles.

    Returns the observed change and the next-doubling estimate; the former
    should not exceed the latter by more than its own size for kernels that
    genuinely decay inside the window.
    """
    wide = plan.refined(2)
    wider = plan.refined(4)
    base = to_opf(k.eval(z, w, plan.t_grid), plan)
    mid = to_opf(k.eval(z, w, wide.t_grid), wide)
    far = to_opf(k.eval(z, w, wider.t_grid), wider)
    scale = max(float(np.max(np.abs(far))), 1e-300)
    idx = [wide.tau_index(t) for t in plan.tau_grid]
    idx2 = [wider.tau_index(t) for t in plan.tau_grid]
    change = float(np.max(np.abs(base - mid[idx])) / scale)
    estimate = float(np.max(np.abs(mid[idx] - far[idx2])) / scale)
    return {"change": change, "next_estimate": estimate}


# ---------------------------------------------------------------------------
# intertwining
# ---------------------------------------------------------------------------


def _nis_partial(k: NisKernel, which: str, z, w, t_grid, fd_step):
    fn = k.derivs.get(which)
    if fn is not None:
        return np.asarray(fn(z, w, t_grid), dtype=complex)
    if which == "dt":
        n = len(t_grid)
        dt = t_grid[1] - t_grid[0]
        freq = 2.0 * np.pi * np.fft.fftfreq(n, d=dt)
        return np.fft.ifft(1j * freq * np.fft.fft(k.eval(z, w, t_grid)))
    s = fd_step

    def g(dz, dw):
        return k.eval(z + dz, w + dw, t_grid)

    if which in ("dz", "dzb"):
        dfx = (-g(2 * s, 0) + 8 * g(s, 0) - 8 * g(-s, 0) + g(-2 * s, 0)) / (12 * s)
        dfy = (-g(2j * s, 0) + 8 * g(1j * s, 0) - 8 * g(-1j * s, 0) + g(-2j * s, 0)) / (12 * s)
    else:
        dfx = (-g(0, 2 * s) + 8 * g(0, s) - 8 * g(0, -s) + g(0, -2 * s)) / (12 * s)
        dfy = (-g(0, 2j * s) + 8 * g(0, 1j * s) - 8 * g(0, -1j * s) + g(0, -2j * s)) / (12 * s)
    if which in ("dzb", "dwb"):
        return 0.5 * (dfx + 1j * dfy)
    return 0.5 * (dfx - 1j * dfy)


def _transform_fd(k: NisKernel, plan: TransformPlan, var: str, bar: bool, z, w, fd_step):
    """4th-order FD (in z or w) applied to the transformed kernel."""
    s = fd_step

    def big_k(dz, dw):
        return to_opf(k.eval(z + dz, w + dw, plan.t_grid), plan)

    if var == "z":
        dfx = (-big_k(2 * s, 0) + 8 * big_k(s, 0) - 8 * big_k(-s, 0) + big_k(-2 * s, 0)) / (12 * s)
        dfy = (
            -big_k(2j * s, 0) + 8 * big_k(1j * s, 0) - 8 * big_k(-1j * s, 0) + big_k(-2j * s, 0)
        ) / (12 * s)
    else:
        dfx = (-big_k(0, 2 * s) + 8 * big_k(0, s) - 8 * big_k(0, -s) + big_k(0, -2 * s)) / (12 * s)
        dfy = (
            -big_k(0, 2j * s) + 8 * big_k(0, 1j * s) - 8 * big_k(0, -1j * s) + big_k(0, -2j * s)
        ) / (12 * s)
    if bar:
        return 0.5 * (dfx + 1j * dfy)
    return 0.5 * (dfx - 1j * dfy)


def _spectral_dtau(big_k: np.ndarray, plan: TransformPlan) -> np.ndarray:
    """d/dtau of a sampled transform, via its own t-dual representation."""
    inner = np.fft.ifft(big_k * np.exp(1j * plan.tau_grid * plan.t0))
    inner = inner * (-1j * plan.t_grid)
    return np.fft.fft(inner) * np.exp(-1j * plan.tau_grid * plan.t0)


def intertwine_pair_discrepancy(
    k: NisKernel,
    geom: GeometryContext,
    plan: TransformPlan,
    zw_pairs,
    up: str,
    down: str,
    fd_step: float = 0.02,
    tau_band: tuple[float, float] = (0.25, 4.0),
) -> float:
    """Relative L2 discrepancy of transform(up k) against down(transform k)."""
    tau = plan.tau_grid
    band = (np.abs(tau) >= tau_band[0]) & (np.abs(tau) <= tau_band[1])
    num = 0.0
    den = 0.0
    for z, w in zw_pairs:
        z, w = complex(z), complex(w)
        x = k.eval(z, w, plan.t_grid)
        big_k = to_opf(x, plan)
        tw = geom.twist(w, z)
        if up == "L":
            lhs_t = _nis_partial(k, "dz", z, w, plan.t_grid, fd_step) + 1j * geom.pz(z) * _nis_partial(k, "dt", z, w, plan.t_grid, fd_step)
        elif up == "Lb":
            lhs_t = _nis_partial(k, "dzb", z, w, plan.t_grid, fd_step) - 1j * geom.pzb(z) * _nis_partial(k, "dt", z, w, plan.t_grid, fd_step)
        elif up == "cL":
            lhs_t = _nis_partial(k, "dw", z, w, plan.t_grid, fd_step) - 1j * geom.pz(w) * _nis_partial(k, "dt", z, w, plan.t_grid, fd_step)
        elif up == "cLb":
            lhs_t = _nis_partial(k, "dwb", z, w, plan.t_grid, fd_step) + 1j * geom.pzb(w) * _nis_partial(k, "dt", z, w, plan.t_grid, fd_step)
        elif up == "cM":
            lhs_t = -1j * (plan.t_grid + tw) * x
        else:
            raise ValueError(f"unknown upstairs tag {up!r}")
        lhs = to_opf(lhs_t, plan)

        if down == "Z":
            rhs = _transform_fd(k, plan, "z", False, z, w, fd_step) - tau * geom.pz(z) * big_k
        elif down == "Zb":
            rhs = _transform_fd(k, plan, "z", True, z, w, fd_step) + tau * geom.pzb(z) * big_k
        elif down == "W":
            rhs = _transform_fd(k, plan, "w", False, z, w, fd_step) + tau * geom.pz(w) * big_k
        elif down == "Wb":
            rhs = _transform_fd(k, plan, "w", True, z, w, fd_step) - tau * geom.pzb(w) * big_k
        elif down == "M":
            rhs = _spectral_dtau(big_k, plan) - 1j * tw * big_k
        else:
            raise ValueError(f"unknown downstairs tag {down!r}")

        num += float(np.sum(np.abs(lhs[band] - rhs[band]) ** 2))
        den += float(np.sum(np.abs(rhs[band]) ** 2))
    if den == 0:
        return math.inf
    return math.sqrt(num / den)


def intertwine_check(
    k: NisKernel,
    geom: GeometryContext,
    plan: TransformPlan,
    zw_pairs,
    fd_step: float = 0.02,
    tol: float = 1e-6,
    tau_band: tuple[float, float] = (0.25, 4.0),
) -> ConditionReport:
    """All five operator pairs through the transform; pass when each relative
    discrepancy is at most ``tol`` at this resolution."""
    rep = ConditionReport(name=k.name, order=k.order)
    for up, down in INTERTWINE_PAIRS:
        rel = intertwine_pair_discrepancy(
            k, geom, plan, zw_pairs, up, down, fd_step=fd_step, tau_band=tau_band
        )
        rep.add(
            "intertwine",
            {"pair": f"{up}~{down}", "fd_step": fd_step, "n_t": plan.n_t},
            rel,
            1.0,
            rel <= tol,
        )
    return rep


# ---------------------------------------------------------------------------
# transformed kernel wrappers
# ---------------------------------------------------------------------------


class TransformedOpf(KernelFamily):
    """Parameter family obtained by transforming a vertical-model kernel.

    Evaluations require tau on the plan's grid; each distinct (z, w) pair
    costs one windowed FFT.
    """

    def __init__(self, k: NisKernel, plan: TransformPlan, box: float = 2.0):
        self.k = k
        self.plan = plan
        super().__init__(
            fn=None,
            order=k.order,
            box=box,
            name=k.name + ">opf",
            tau_step=plan.dtau,
        )

    def eval(self, tau, z, w, eps: float | None = None):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        shape = np.broadcast(z, w, np.asarray(tau)).shape
        zf = np.broadcast_to(z, shape).ravel()
        wf = np.broadcast_to(w, shape).ravel()
        tf = np.broadcast_to(np.asarray(tau, dtype=float), shape).ravel()
        out = np.empty(len(zf), dtype=complex)
        cache: dict[tuple[complex, complex], np.ndarray] = {}
        for i, (zz, ww, tt) in enumerate(zip(zf, wf, tf)):
            key = (zz, ww)
            big_k = cache.get(key)
            if big_k is None:
                big_k = to_opf(self.k.eval(zz, ww, self.plan.t_grid), self.plan)
                cache[key] = big_k
            out[i] = big_k[self.plan.tau_index(tt)]
        return out.reshape(shape) if shape else complex(out[0])


class TransformedNis(NisKernel):
    """Vertical-model kernel obtained by transforming a parameter family.

    The family is evaluated on the full tau grid per (z, w) pair (cached), so
    grid-backed families amortize their solves across pairs.
    """

    def __init__(self, K: KernelFamily, plan: TransformPlan):
        self.K = K
        self.plan = plan
        self._cache: dict[tuple[complex, complex], np.ndarray] = {}
        super().__init__(
            fn=None,
            order=K.order,
            name=K.name + ">nis",
            t_step=plan.dt,
        )

    def _kt(self, z: complex, w: complex) -> np.ndarray:
        key = (z, w)
        vals = self._cache.get(key)
        if vals is None:
            big_k = np.array(
                [self.K.eval(float(t), z, w) for t in self.plan.tau_grid], dtype=complex
            )
            vals = to_nis(big_k, self.plan)
            self._cache[key] = vals
        return vals

    def eval(self, z, w, t):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        shape = np.broadcast(z, w, t).shape
        zf = np.broadcast_to(z, shape).ravel()
        wf = np.broadcast_to(w, shape).ravel()
        tf = np.broadcast_to(t, shape).ravel()
        it = np.rint((tf - self.plan.t0) / self.plan.dt).astype(int)
        if np.any((it < 0) | (it >= self.plan.n_t)):
            raise ValueError("t outside the transform extent")
        out = np.empty(len(zf), dtype=complex)
        for i, (zz, ww) in enumerate(zip(zf, wf)):
            out[i] = self._kt(zz, ww)[it[i]]
        return out.reshape(shape) if shape else complex(out[0])


def correspondence_report(
    obj,
    geom: GeometryContext,
    plan: TransformPlan,
    samples,
    stability_factor: float = 2.0,
) -> ConditionReport:
    """Transform, then size-screen the image on the other side.

    For a vertical-model kernel the image family is screened with the
    pointwise size ratio at the sampled (tau, z, w); for a parameter family
    the image model kernel is screened with the nonisotropic size ratio at the
    sampled (z, w, t).  Both delegate to the pointwise checkers with the empty
    derivative word.
    """
    from .kernels import nis_check, size_check

    if isinstance(obj, NisKernel):
        image = TransformedOpf(obj, plan)
        tau = np.asarray([plan.tau_grid[plan.tau_index(t)] for t in samples.tau])
        snapped = KernelSamples(tau, samples.z, samples.w)
        rep = size_check(image, geom, snapped, words=((),), k_values=(0,), stability_factor=stability_factor)
        rep.name = image.name
        return rep
    image = TransformedNis(obj, plan)
    triples = [(z, w, t) for z, w, t in samples]
    rep = nis_check(image, geom, triples, bumps=(), words=((),), stability_factor=stability_factor)
    rep.name = image.name
    return rep
