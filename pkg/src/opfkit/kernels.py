"""Model kernels and numerical verifiers for the size / cancellation conditions.

A kernel family K(tau, z, w) is screened against:

* size estimates for derivative words in the weighted fields, with the
  rapid-decay factors |tau|^k lam(z, |w-z|)^k and the logarithmic branch for
  order-2 families near the diagonal;
* cancellation against smooth bumps in w and against windowed integrals in tau;
* the gradient and difference bounds of the twist-conjugated kernel
  (Calderon-Zygmund shape), with uniformity across tau;
* restricted boundedness ||S phi^{R,z0}||_2 <~ R over dilated bumps;
* discrete L^q operator norms.

No absolute constants are assumed: a condition passes when the fitted constant
is finite and stable under shrinking the near-diagonal cutoff, refining
quadrature, or sweeping tau, mirroring how the estimates are actually used.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .fields import _smooth_ramp
from .geom import GeometryContext

__all__ = [
    "ConditionRow",
    "ConditionReport",
    "KernelFamily",
    "GreenKernel",
    "NisKernel",
    "BumpSpec",
    "KernelSamples",
    "make_kernel_samples",
    "size_check",
    "cancellation_w_check",
    "tau_cancellation_check",
    "nis_check",
    "twist_conjugate",
    "cz_check",
    "restricted_bound_check",
    "lq_operator_norm",
    "newtonian_kernel",
    "cz_model",
    "green_kernel",
    "gaussian_tau_kernel",
    "rank_one_kernel",
    "bump_profile",
    "order_inflated",
    "phase_stripped_cz",
    "cauchy_tail_kernel",
    "constant_nis_kernel",
    "nis_surrogate",
]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class ConditionRow:
    condition: str
    params: dict
    constant: float
    stability: float
    passed: bool
    worst: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "params": self.params,
            "constant": self.constant,
            "stability": self.stability,
            "passed": bool(self.passed),
            "worst": self.worst,
            "note": self.note,
        }


@dataclass
class ConditionReport:
    name: str
    order: int
    rows: list[ConditionRow] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(r.passed for r in self.rows)

    def add(self, *args, **kwargs) -> ConditionRow:
        row = ConditionRow(*args, **kwargs)
        self.rows.append(row)
        return row

    def extend(self, other: "ConditionReport") -> None:
        self.rows.extend(other.rows)
        self.errors.extend(other.errors)

    def constants(self, condition: str) -> list[float]:
        return [r.constant for r in self.rows if r.condition == condition]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "order": self.order,
            "passed": self.passed,
            "rows": [r.to_dict() for r in self.rows],
            "errors": self.errors,
        }

    def to_json(self, indent=1) -> str:
        return json.dumps(self.to_dict(), indent=indent, default=float)


# ---------------------------------------------------------------------------
# kernel families
# ---------------------------------------------------------------------------


class KernelFamily:
    """Evaluator K(tau, z, w) with order and regularization metadata.

    ``eps`` is the near-diagonal regularization scale: inside |z - w| < eps the
    kernel is evaluated at the radially clamped point (grid smoothing stand-in,
    kept proportional to quadrature spacing by the checkers).  ``diagonal_rule``
    selects what an exactly-diagonal evaluation returns: "clamp" or "pv-zero".
    """

    def __init__(
        self,
        fn,
        order: int,
        box: float,
        name: str = "kernel",
        derivs: dict | None = None,
        eps: float = 0.0,
        tau_step: float = 0.05,
        diagonal_rule: str = "clamp",
        fd_base_step: float | None = None,
    ):
        self.fn = fn
        self.order = int(order)
        self.box = float(box)
        self.name = name
        self.derivs = derivs or {}
        self.eps = float(eps)
        self.tau_step = float(tau_step)
        self.diagonal_rule = diagonal_rule
        self.fd_base_step = fd_base_step

    def eval(self, tau, z, w, eps: float | None = None):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        eps = self.eps if eps is None else eps
        if eps > 0:
            u = w - z
            r = np.abs(u)
            tiny = r < eps
            if np.any(tiny):
                unit = np.where(r > 0, u / np.where(r > 0, r, 1.0), 1.0 + 0j)
                w = np.where(tiny, z + eps * unit, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(self.fn(tau, z, w), dtype=complex)
        if eps == 0 and self.diagonal_rule == "pv-zero":
            out = np.where(np.asarray(w) == np.asarray(z), 0.0, out)
        return out

    def adjoint(self) -> "KernelFamily":
        """Kernel of the adjoint family: conj(K(tau, w, z))."""
        return KernelFamily(
            fn=lambda tau, z, w: np.conj(self.fn(tau, w, z)),
            order=self.order,
            box=self.box,
            name=self.name + "*",
            eps=self.eps,
            tau_step=self.tau_step,
            diagonal_rule=self.diagonal_rule,
            fd_base_step=self.fd_base_step,
        )


class NisKernel:
    """Kernel k(z, w, t) on the model space, convolution structure in t."""

    def __init__(
        self,
        fn,
        order: int,
        name: str = "nis",
        derivs: dict | None = None,
        fd_step: float = 0.02,
        t_step: float = 0.05,
        convolution: bool = True,
    ):
        self.fn = fn
        self.order = int(order)
        self.name = name
        self.derivs = derivs or {}
        self.fd_step = float(fd_step)
        self.t_step = float(t_step)
        self.convolution = bool(convolution)

    def eval(self, z, w, t):
        return np.asarray(self.fn(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex), np.asarray(t, dtype=float)), dtype=complex)


@dataclass(frozen=True)
class BumpSpec:
    """Dilated smooth bump: center, radius, and (upstairs) a t-center."""

    center: complex
    radius: float
    t_center: float = 0.0


def bump_profile(r):
    """Standard C-infinity profile exp(1 - 1/(1 - r^2)) on r < 1, else 0."""
    r = np.asarray(r, dtype=float)
    inside = r < 1.0
    r2 = np.where(inside, r * r, 0.0)
    with np.errstate(divide="ignore", over="ignore"):
        v = np.where(inside, np.exp(1.0 - 1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
    return v


def smooth_window(x):
    """Even window, 1 on |x| <= 1/2, smooth roll to 0 at |x| = 1."""
    x = np.abs(np.asarray(x, dtype=float))
    return _smooth_ramp(2.0 * (1.0 - x))


# ---------------------------------------------------------------------------
# derivative words on kernels
# ---------------------------------------------------------------------------

DOWN_LETTERS = ("Z", "Zb", "W", "Wb", "M")
UP_LETTERS = ("L", "Lb", "cL", "cLb")


def _fd_step(K: KernelFamily, z, w):
    if K.fd_base_step is not None:
        return np.full(np.broadcast(np.asarray(z), np.asarray(w)).shape, K.fd_base_step)
    r = np.abs(np.asarray(w) - np.asarray(z))
    return np.clip(0.05 * r, 1e-5, 0.02)


def _fd4(g, x, step):
    return (-g(x + 2 * step) + 8.0 * g(x + step) - 8.0 * g(x - step) + g(x - 2 * step)) / (
        12.0 * step
    )


def _complex_deriv(f, tau, z, w, var: str, bar: bool, step):
    """4th-order FD approximation of d/dz or d/dzbar (or the w versions)."""
    if var == "z":
        gx = lambda s: f(tau, z + s, w)  # noqa: E731
        gy = lambda s: f(tau, z + 1j * s, w)  # noqa: E731
    else:
        gx = lambda s: f(tau, z, w + s)  # noqa: E731
        gy = lambda s: f(tau, z, w + 1j * s)  # noqa: E731
    dfx = _fd4(gx, 0.0, step)
    dfy = _fd4(gy, 0.0, step)
    if bar:
        return 0.5 * (dfx + 1j * dfy)
    return 0.5 * (dfx - 1j * dfy)


def _deriv_eval(K: KernelFamily, which: str, tau, z, w, step):
    """First derivative of the kernel, closed form if provided."""
    fn = K.derivs.get(which)
    if fn is not None:
        return np.asarray(fn(tau, z, w), dtype=complex)
    var = "z" if which in ("dz", "dzb") else "w"
    bar = which in ("dzb", "dwb")
    return _complex_deriv(lambda tt, zz, ww: K.eval(tt, zz, ww), tau, z, w, var, bar, step)


def apply_kernel_word(K: KernelFamily, geom: GeometryContext, word, tau, z, w):
    """Nested application of weighted-operator letters to K(tau, z, w)."""
    if not word:
        return K.eval(tau, z, w)
    head, rest = word[0], tuple(word[1:])
    step = _fd_step(K, z, w)
    if rest:
        f = lambda tt, zz, ww: apply_kernel_word(K, geom, rest, tt, zz, ww)  # noqa: E731
        base = f(tau, z, w)
        dd = lambda which: _complex_deriv(  # noqa: E731
            f, tau, z, w, "z" if which in ("dz", "dzb") else "w", which in ("dzb", "dwb"), step
        )
    else:
        base = K.eval(tau, z, w)
        dd = lambda which: _deriv_eval(K, which, tau, z, w, step)  # noqa: E731
        f = lambda tt, zz, ww: K.eval(tt, zz, ww)  # noqa: E731

    if head == "Z":
        return dd("dz") - tau * geom.pz(z) * base
    if head == "Zb":
        return dd("dzb") + tau * geom.pzb(z) * base
    if head == "W":
        return dd("dw") + tau * geom.pz(w) * base
    if head == "Wb":
        return dd("dwb") - tau * geom.pzb(w) * base
    if head == "M":
        dt = K.tau_step
        dk = (f(tau + dt, z, w) - f(tau - dt, z, w)) / (2.0 * dt)
        return dk - 1j * geom.twist(w, z) * base
    raise ValueError(f"unknown downstairs letter {head!r}")


def apply_nis_word(k: NisKernel, geom: GeometryContext, word, z, w, t):
    """Upstairs derivative words on k(z, w, t)."""
    if not word:
        return k.eval(z, w, t)
    head, rest = word[0], tuple(word[1:])
    f = lambda zz, ww, tt: apply_nis_word(k, geom, rest, zz, ww, tt)  # noqa: E731
    hs = k.fd_step
    ht = k.t_step

    def dvar(var, bar):
        if var == "z":
            gx = lambda s: f(z + s, w, t)  # noqa: E731
            gy = lambda s: f(z + 1j * s, w, t)  # noqa: E731
        else:
            gx = lambda s: f(z, w + s, t)  # noqa: E731
            gy = lambda s: f(z, w + 1j * s, t)  # noqa: E731
        dfx = _fd4(gx, 0.0, hs)
        dfy = _fd4(gy, 0.0, hs)
        return 0.5 * (dfx + 1j * dfy) if bar else 0.5 * (dfx - 1j * dfy)

    dt_val = _fd4(lambda s: f(z, w, t + s), 0.0, ht)
    if head == "L":
        return dvar("z", False) + 1j * geom.pz(z) * dt_val
    if head == "Lb":
        return dvar("z", True) - 1j * geom.pzb(z) * dt_val
    if head == "cL":
        return dvar("w", False) - 1j * geom.pz(w) * dt_val
    if head == "cLb":
        return dvar("w", True) + 1j * geom.pzb(w) * dt_val
    raise ValueError(f"unknown upstairs letter {head!r}")


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass
class KernelSamples:
    tau: np.ndarray
    z: np.ndarray
    w: np.ndarray

    def __len__(self):
        return len(self.z)

    def subset(self, mask) -> "KernelSamples":
        return KernelSamples(self.tau[mask], self.z[mask], self.w[mask])


def make_kernel_samples(
    box: float,
    taus,
    n_per_tau: int = 64,
    r_min: float = 1e-3,
    r_max: float | None = None,
    seed: int = 0,
    lattice: tuple[np.ndarray, np.ndarray] | None = None,
    center_scale: float = 0.5,
) -> KernelSamples:
    """Sample (tau, z, w) with |z - w| log-spaced in [r_min, r_max].

    When ``lattice`` is given (the 1-d x and y node arrays of a grid-backed
    kernel), points are snapped to nodes and pairs that collapse are dropped.
    """
    rng = np.random.default_rng(seed)
    r_max = r_max or box
    taus_out, zs, ws = [], [], []
    for tau in np.atleast_1d(taus):
        r = np.exp(rng.uniform(math.log(r_min), math.log(r_max), n_per_tau))
        ang = rng.uniform(0, 2 * np.pi, n_per_tau)
        z = center_scale * box * (rng.uniform(-1, 1, n_per_tau) + 1j * rng.uniform(-1, 1, n_per_tau))
        w = z + r * np.exp(1j * ang)
        if lattice is not None:
            xg, yg = lattice
            snap = lambda v: xg[np.clip(np.searchsorted(xg, v.real), 0, len(xg) - 1)] + 1j * yg[  # noqa: E731
                np.clip(np.searchsorted(yg, v.imag), 0, len(yg) - 1)
            ]
            z = snap(z)
            w = snap(w)
        keep = np.abs(w - z) >= max(r_min * 0.5, 1e-12)
        keep &= (np.abs(w.real) < box) & (np.abs(w.imag) < box)
        taus_out.append(np.full(keep.sum(), float(tau)))
        zs.append(z[keep])
        ws.append(w[keep])
    return KernelSamples(np.concatenate(taus_out), np.concatenate(zs), np.concatenate(ws))


# ---------------------------------------------------------------------------
# size estimates
# ---------------------------------------------------------------------------

_DEFAULT_WORDS = ((), ("Z",), ("Zb",), ("W",), ("Wb",), ("M",), ("Zb", "Z"), ("M", "Zb"))


def size_check(
    K: KernelFamily,
    geom: GeometryContext,
    samples: KernelSamples,
    words=_DEFAULT_WORDS,
    k_values=(0, 1, 2),
    stability_factor: float = 2.0,
    r_split: float = 4.0,
) -> ConditionReport:
    """Fit the constants of the pointwise size estimates.

    For each derivative word Y^J (length l + n, n = number of M letters) and
    decay exponent k, the fitted constant is

        sup |Y^J K| |tau|^(n+k) lam(z, |w-z|)^k / |z-w|^(m-2-l)

    over the samples in the applicable regime; for m = 2 the near-diagonal
    logarithmic branch is fitted for pure-M words.  Stability compares the sup
    against the sup over samples with |z-w| >= r_split * min separation.
    """
    m = K.order
    rep = ConditionReport(name=K.name, order=m)
    tau, z, w = samples.tau, samples.z, samples.w
    if np.any(tau == 0):
        raise ValueError("size samples must avoid tau == 0")
    r = np.abs(z - w)
    if np.any(r == 0):
        raise ValueError("size samples must avoid z == w")
    lam_r = geom.lam(z, r)
    mu_inv_tau = geom.mu(z, 1.0 / np.abs(tau))
    r_lo = r.min()

    for word in words:
        n_m = sum(1 for c in word if c == "M")
        l = len(word) - n_m
        try:
            vals = np.abs(apply_kernel_word(K, geom, word, tau, z, w))
        except FloatingPointError as exc:  # pragma: no cover - defensive
            rep.errors.append(f"word {word}: FD failure {exc}")
            continue
        bad = ~np.isfinite(vals)
        if np.any(bad):
            rep.errors.append(f"word {word}: {int(bad.sum())} non-finite samples rejected")
        for k in k_values:
            applicable = np.isfinite(vals)
            if m == 2 and k == 0:
                applicable &= r > mu_inv_tau
            ratio = vals * np.abs(tau) ** (n_m + k) * lam_r**k / r ** (m - 2 - l)
            _add_sup_row(
                rep,
                "size-estimate",
                {"word": "".join(word) or "1", "k": k, "l": l, "n": n_m},
                ratio,
                r,
                applicable,
                r_split * r_lo,
                stability_factor,
                samples,
            )
        if m == 2 and all(c == "M" for c in word):
            near = (r <= mu_inv_tau) & np.isfinite(vals)
            if np.any(near):
                if n_m == 0:
                    ratio = vals / np.log(2.0 * mu_inv_tau / r)
                else:
                    ratio = vals * np.abs(tau) ** n_m
                _add_sup_row(
                    rep,
                    "size-log-branch",
                    {"word": "".join(word) or "1", "n": n_m},
                    ratio,
                    r,
                    near,
                    r_split * r[near].min(),
                    stability_factor,
                    samples,
                )
    return rep


def _add_sup_row(rep, condition, params, ratio, r, mask, r_wide, stability_factor, samples):
    mask = mask & np.isfinite(ratio)
    if not np.any(mask):
        rep.add(condition, params, math.nan, math.nan, False, note="no applicable samples")
        return
    c_all = float(np.max(ratio[mask]))
    wide = mask & (r >= r_wide)
    c_wide = float(np.max(ratio[wide])) if np.any(wide) else c_all
    stability = c_all / c_wide if c_wide > 0 else math.inf
    i = int(np.argmax(np.where(mask, ratio, -np.inf)))
    worst = {
        "tau": float(samples.tau[i]),
        "z": [float(samples.z[i].real), float(samples.z[i].imag)],
        "w": [float(samples.w[i].real), float(samples.w[i].imag)],
        "r": float(r[i]),
    }
    passed = math.isfinite(c_all) and stability <= stability_factor
    rep.add(condition, params, c_all, stability, passed, worst=worst)


# ---------------------------------------------------------------------------
# cancellation in w
# ---------------------------------------------------------------------------


def _grid_fd4(arr, axis, h):
    r = lambda s: np.roll(arr, -s, axis=axis)  # noqa: E731
    return (-r(2) + 8.0 * r(1) - 8.0 * r(-1) + r(-2)) / (12.0 * h)


def _bump_word_sups(geom, tau, z0, delta, n: int = 96, max_len: int = 4):
    """sup |X^I phi| for words in the weighted pair at the bump's own scale.

    phi is the standard profile dilated to radius delta; words are over
    (d/dw - tau p_w .) and (d/dwbar + tau p_wbar .) applied on a lattice.
    Returns sums over words grouped by length.
    """
    half = 1.15 * delta
    h = 2 * half / n
    x = z0.real - half + h * (np.arange(n) + 0.5)
    y = z0.imag - half + h * (np.arange(n) + 0.5)
    W = x[:, None] + 1j * y[None, :]
    phi = bump_profile(np.abs(W - z0) / delta)
    pw = geom.pz(W)
    pwb = geom.pzb(W)

    def apply_letter(arr, letter):
        dx = _grid_fd4(arr, 0, h)
        dy = _grid_fd4(arr, 1, h)
        if letter == "X":
            return 0.5 * (dx - 1j * dy) - tau * pw * arr
        return 0.5 * (dx + 1j * dy) + tau * pwb * arr

    sums = {0: float(np.max(np.abs(phi)))}
    level = {(): phi}
    for length in range(1, max_len + 1):
        nxt = {}
        total = 0.0
        for word, arr in level.items():
            for letter in ("X", "Xb"):
                out = apply_letter(arr, letter)
                nxt[word + (letter,)] = out
                total += float(np.max(np.abs(out)))
        sums[length] = total
        level = nxt
    return sums, phi


def cancellation_w_check(
    K: KernelFamily,
    geom: GeometryContext,
    bumps,
    taus,
    z_samples,
    words=((), ("Zb",), ("M",)),
    k_values=(0, 1),
    n_quad: int = 48,
    max_n: int = 4,
    quad_fail: float = 0.25,
) -> ConditionReport:
    """Fit the bump-cancellation constants and the minimal derivative budget.

    For each bump the integral int Y^J K(z, w) phi(w) dw is computed by
    midpoint quadrature with the kernel regularized at twice the quadrature
    spacing, then compared against the stated right-hand side; the report
    records the fitted constant, the smallest derivative budget N <= max_n
    that stabilizes it, and the change under quadrature doubling.
    """
    m = K.order
    rep = ConditionReport(name=K.name, order=m)
    z_samples = np.asarray(z_samples, dtype=complex)
    for bump in bumps:
        z0, delta = complex(bump.center), float(bump.radius)
        for tau in np.atleast_1d(taus):
            tau = float(tau)
            sums, _ = _bump_word_sups(geom, tau, z0, delta, max_len=max_n)
            budgets = {
                n: sum(delta**l * sums[l] for l in range(n + 1)) for n in range(max_n + 1)
            }
            for word in words:
                n_m = sum(1 for c in word if c == "M")
                l = len(word) - n_m
                vals = _bump_integral(K, geom, word, tau, z0, delta, z_samples, n_quad)
                vals_fine = _bump_integral(K, geom, word, tau, z0, delta, z_samples, 2 * n_quad)
                denom_scale = max(float(np.max(np.abs(vals_fine))), 1e-300)
                quad_change = float(np.max(np.abs(vals - vals_fine)) / denom_scale)
                if quad_change > quad_fail:
                    rep.errors.append(
                        f"quadrature nonconvergence for word {word} at delta={delta:g}: "
                        f"doubling changed result by {quad_change:.2g}"
                    )
                for k in k_values:
                    cs = {}
                    for n_budget in range(max_n + 1):
                        rhs = _cancellation_rhs(
                            geom, m, l, n_m, k, tau, z0, delta, z_samples, sums, budgets, n_budget
                        )
                        with np.errstate(divide="ignore", invalid="ignore"):
                            cvals = np.abs(vals_fine) / rhs
                        cs[n_budget] = float(np.nanmax(cvals))
                    c_ref = cs[max_n]
                    n_l = max_n
                    for n_budget in range(max_n + 1):
                        if cs[n_budget] <= 1.1 * c_ref or math.isclose(cs[n_budget], c_ref):
                            n_l = n_budget
                            break
                    rep.add(
                        "w-cancellation",
                        {
                            "word": "".join(word) or "1",
                            "k": k,
                            "delta": delta,
                            "tau": tau,
                            "N": n_l,
                        },
                        cs[n_l],
                        1.0 + quad_change,
                        math.isfinite(cs[n_l]) and n_l <= max_n,
                        note=f"quad_change={quad_change:.2e}",
                    )
    return rep


def _bump_integral(K, geom, word, tau, z0, delta, z_samples, nq):
    half = 1.05 * delta
    h = 2 * half / nq
    x = z0.real - half + h * (np.arange(nq) + 0.5)
    y = z0.imag - half + h * (np.arange(nq) + 0.5)
    W = (x[:, None] + 1j * y[None, :]).ravel()
    phi = bump_profile(np.abs(W - z0) / delta)
    keep = phi > 0
    W, phi = W[keep], phi[keep]
    out = np.empty(len(z_samples), dtype=complex)
    eps_saved = K.eps
    K.eps = 2.0 * h
    try:
        for i, z in enumerate(z_samples):
            zz = np.full(W.shape, z)
            tt = np.full(W.shape, tau)
            vals = apply_kernel_word(K, geom, word, tt, zz, W)
            out[i] = np.sum(vals * phi) * h * h
    finally:
        K.eps = eps_saved
    return out


def _cancellation_rhs(geom, m, l, n_m, k, tau, z0, delta, z_samples, sums, budgets, n_budget):
    rhs = np.empty(len(z_samples))
    for i, z in enumerate(z_samples):
        mu_it = geom.mu(z, 1.0 / abs(tau))
        if m == 2 and l == 0 and delta < mu_it:
            deriv_part = sum(delta**ll * sums[ll] for ll in range(1, max(n_budget, 1) + 1))
            rhs[i] = (
                delta**2
                * (math.log(2.0 * mu_it / delta) * sums[0] + deriv_part)
                / abs(tau) ** n_m
            )
        else:
            lam_d = geom.lam(z, delta)
            rhs[i] = (
                delta ** (m - l)
                / (abs(tau) ** (n_m + k) * lam_d**k)
                * budgets[n_budget]
            )
    return rhs


# ---------------------------------------------------------------------------
# cancellation in tau
# ---------------------------------------------------------------------------


def tau_cancellation_check(
    K: KernelFamily,
    geom: GeometryContext,
    samples,
    words=((), ("Zb",)),
    window_a: float = 8.0,
    n_tau: int = 1024,
    stability_factor: float = 2.0,
) -> ConditionReport:
    """Windowed integrals over tau against the vertical-scale bound.

    samples: iterable of (z, w, t).  The integral
    int X^J(e^{i tau t} K) eta(tau/A) dtau is computed on a symmetric tau grid,
    compared with mu(z, r)^(m-n) / (mu(z, r)^2 r) at r = |t + T(w, z)|, and the
    window limit is probed by doubling A.
    """
    m = K.order
    rep = ConditionReport(name=K.name, order=m)
    zs = np.array([s[0] for s in samples], dtype=complex)
    ws = np.array([s[1] for s in samples], dtype=complex)
    ts = np.array([s[2] for s in samples], dtype=float)
    r = np.abs(ts + geom.twist(ws, zs))
    mu_r = geom.mu(zs, r)
    for word in words:
        n = len(word)
        vals_a = _tau_integral(K, geom, word, zs, ws, ts, window_a, n_tau)
        vals_2a = _tau_integral(K, geom, word, zs, ws, ts, 2 * window_a, 2 * n_tau)
        change = np.abs(vals_2a - vals_a)
        scale = np.maximum(np.abs(vals_2a), 1e-300)
        window_err = float(np.max(change / scale))
        if window_err > 0.2:
            rep.errors.append(
                f"window-limit nonconvergence for word {word}: doubling A changed "
                f"result by {window_err:.2g}"
            )
        rhs = mu_r ** (m - n) / (mu_r**2 * r)
        ratio = np.abs(vals_2a) / rhs
        c = float(np.nanmax(ratio))
        rep.add(
            "tau-cancellation",
            {"word": "".join(word) or "1", "window_a": window_a},
            c,
            1.0 + window_err,
            math.isfinite(c),
            note=f"window_change={window_err:.2e}",
        )
    return rep


def _tau_integral(K, geom, word, zs, ws, ts, a, n_tau):
    taus = np.linspace(-2 * a, 2 * a, n_tau)
    dtau = taus[1] - taus[0]
    eta = smooth_window(taus / (2 * a))
    out = np.zeros(len(zs), dtype=complex)
    for tau, wt in zip(taus, eta):
        if tau == 0.0 or wt == 0.0:
            continue
        tt = np.full(zs.shape, tau)
        vals = apply_kernel_word(K, geom, word, tt, zs, ws)
        out += np.exp(1j * tau * ts) * vals * wt * dtau
    return out


# ---------------------------------------------------------------------------
# NIS conditions
# ---------------------------------------------------------------------------


def nis_check(
    k: NisKernel,
    geom: GeometryContext,
    samples,
    bumps=(),
    words=((), ("Lb",)),
    stability_factor: float = 2.0,
    r_split: float = 4.0,
    n_quad: tuple[int, int] = (28, 48),
) -> ConditionReport:
    """Size and bump cancellation in the nonisotropic geometry.

    samples: iterable of (z, w, t) triples for the size rows; bumps: BumpSpec
    list for the cancellation rows (support is placed inside the nonisotropic
    ball via the calibrated scale functions).
    """
    m = k.order
    rep = ConditionReport(name=k.name, order=m)
    zs = np.array([s[0] for s in samples], dtype=complex)
    ws = np.array([s[1] for s in samples], dtype=complex)
    ts = np.array([s[2] for s in samples], dtype=float)
    d = np.array([geom.dni(z, w, t) for z, w, t in zip(zs, ws, ts)])
    v = np.array([geom.vni(z, w, t) for z, w, t in zip(zs, ws, ts)])
    for word in words:
        vals = np.abs(apply_nis_word(k, geom, word, zs, ws, ts))
        ratio = vals * v / d ** (m - len(word))
        _add_sup_row(
            rep,
            "nis-size",
            {"word": "".join(word) or "1"},
            ratio,
            d,
            np.isfinite(ratio),
            r_split * d.min(),
            stability_factor,
            KernelSamples(np.zeros_like(ts), zs, ws),
        )
    for bump in bumps:
        row = _nis_bump_row(k, geom, bump, n_quad)
        rep.rows.append(row)
    return rep


def _nis_bump_row(k: NisKernel, geom: GeometryContext, bump: BumpSpec, n_quad):
    z0, t0, delta = complex(bump.center), float(bump.t_center), float(bump.radius)
    lam_scale = geom.lam(z0, delta / 4.0)
    while geom.mu(z0, lam_scale) > delta / 2.0:
        lam_scale /= 2.0
    nw, ns = n_quad
    half = 0.55 * delta
    hw = 2 * half / nw
    x = z0.real - half + hw * (np.arange(nw) + 0.5)
    y = z0.imag - half + hw * (np.arange(nw) + 0.5)
    W = (x[:, None] + 1j * y[None, :]).ravel()
    tw = geom.twist(W, z0)
    s_lo = float(np.min(t0 + tw) - lam_scale)
    s_hi = float(np.max(t0 + tw) + lam_scale)
    s = np.linspace(s_lo, s_hi, ns)
    hs = s[1] - s[0]
    Wg = W[:, None]
    Sg = s[None, :]
    phi = bump_profile(np.abs(Wg - z0) * 2.0 / delta) * bump_profile(
        np.abs(t0 - Sg + geom.twist(Wg, z0)) * 2.0 / lam_scale
    )

    def t_phi(z, t):
        vals = k.eval(np.full(Wg.shape, z), Wg, t - Sg)
        return np.sum(vals * phi) * hw * hw * hs

    out = abs(t_phi(z0, t0))
    # phi derivative budget in the upstairs fields, on the (w, s) lattice
    sums = _nis_bump_word_sups(geom, phi, x, y, s, hw, hs)
    rhs = delta**k.order * sum(delta**l * sums[l] for l in range(len(sums)))
    c = out / rhs if rhs > 0 else math.inf
    return ConditionRow(
        "nis-cancellation",
        {"delta": delta, "z0": [z0.real, z0.imag], "t0": t0},
        float(c),
        1.0,
        math.isfinite(c),
    )


def _nis_bump_word_sups(geom, phi, x, y, s, hw, hs, max_len: int = 2):
    arr = phi.reshape(len(x), len(y), len(s))
    W = x[:, None, None] + 1j * y[None, :, None]
    pw = geom.pz(W)
    pwb = geom.pzb(W)

    def letter(a, which):
        dx = _grid_fd4(a, 0, hw)
        dy = _grid_fd4(a, 1, hw)
        ds = _grid_fd4(a, 2, hs)
        if which == "cL":
            return 0.5 * (dx - 1j * dy) - 1j * pw * ds
        return 0.5 * (dx + 1j * dy) + 1j * pwb * ds

    sums = {0: float(np.max(np.abs(arr)))}
    level = {(): arr}
    for ln in range(1, max_len + 1):
        nxt = {}
        tot = 0.0
        for word, a in level.items():
            for which in ("cL", "cLb"):
                o = letter(a, which)
                nxt[word + (which,)] = o
                tot += float(np.max(np.abs(o)))
        sums[ln] = tot
        level = nxt
    return sums


# ---------------------------------------------------------------------------
# twist conjugation and Calderon-Zygmund shape
# ---------------------------------------------------------------------------


def twist_conjugate(K: KernelFamily, geom: GeometryContext, sign: int = -1) -> KernelFamily:
    """Kernel multiplied by exp(sign * i tau T(w, z)); sign=-1 straightens the
    oscillation, sign=+1 undoes it exactly."""

    def fn(tau, z, w):
        return np.exp(sign * 1j * tau * geom.twist(w, z)) * K.eval(tau, z, w)

    return KernelFamily(
        fn,
        order=K.order,
        box=K.box,
        name=K.name + ("~" if sign < 0 else "~inv"),
        eps=K.eps,
        tau_step=K.tau_step,
        diagonal_rule=K.diagonal_rule,
        fd_base_step=K.fd_base_step,
    )


def cz_check(
    S: KernelFamily,
    geom: GeometryContext,
    samples: KernelSamples,
    k_values=(0,),
    pair_scale: float = 0.4,
    stability_factor: float = 2.0,
    tau_uniformity: float = 2.0,
    r_split: float = 4.0,
) -> ConditionReport:
    """Gradient and difference bounds of a twist-conjugated kernel.

    Fits sup |grad_{z,w} S| |tau|^k lam^k / |w-z|^(m-3) per tau, the two
    difference quotients under 2|w-w'| <= |w-z|, and checks the fitted
    constants stay within ``tau_uniformity`` across the tau sweep.
    """
    m = S.order
    rep = ConditionReport(name=S.name, order=m)
    rng = np.random.default_rng(5)
    grad_by_tau: dict[float, float] = {}
    for tau in np.unique(samples.tau):
        sel = samples.tau == tau
        z, w = samples.z[sel], samples.w[sel]
        tt = np.full(z.shape, tau)
        r = np.abs(w - z)
        lam_r = geom.lam(z, r)
        step = _fd_step(S, z, w)
        comps = [
            np.abs(_complex_deriv(lambda a, b, c: S.eval(a, b, c), tt, z, w, var, bar, step))
            for var, bar in (("z", False), ("z", True), ("w", False), ("w", True))
        ]
        grad = np.max(comps, axis=0)
        for k in k_values:
            ratio = grad * np.abs(tau) ** k * lam_r**k / r ** (m - 3)
            _add_sup_row(
                rep,
                "cz-gradient",
                {"tau": float(tau), "k": k},
                ratio,
                r,
                np.isfinite(ratio),
                r_split * r.min(),
                stability_factor,
                KernelSamples(tt, z, w),
            )
            if k == 0:
                grad_by_tau[float(tau)] = rep.rows[-1].constant

        rho = pair_scale * r / 2.0
        ang = rng.uniform(0, 2 * np.pi, len(z))
        w2 = w + rho * np.exp(1j * ang)
        z2 = z + rho * np.exp(1j * ang)
        dw = np.abs(S.eval(tt, z, w) - S.eval(tt, z, w2))
        dz = np.abs(S.eval(tt, z, w) - S.eval(tt, z2, w))
        for k in k_values:
            fac = np.abs(tau) ** k * lam_r**k
            ratio_w = dw * r ** (3 - m) * fac / np.abs(w2 - w)
            ratio_z = dz * r ** (3 - m) * fac / np.abs(z2 - z)
            _add_sup_row(
                rep,
                "cz-difference-w",
                {"tau": float(tau), "k": k},
                ratio_w,
                r,
                np.isfinite(ratio_w),
                r_split * r.min(),
                stability_factor,
                KernelSamples(tt, z, w),
            )
            _add_sup_row(
                rep,
                "cz-difference-z",
                {"tau": float(tau), "k": k},
                ratio_z,
                r,
                np.isfinite(ratio_z),
                r_split * r.min(),
                stability_factor,
                KernelSamples(tt, z, w),
            )
    if len(grad_by_tau) > 1:
        cs = np.array(list(grad_by_tau.values()))
        spread = float(cs.max() / cs.min()) if cs.min() > 0 else math.inf
        rep.add(
            "cz-tau-uniformity",
            {"taus": sorted(grad_by_tau)},
            spread,
            spread,
            spread <= tau_uniformity,
        )
    return rep


# ---------------------------------------------------------------------------
# restricted boundedness and operator norms
# ---------------------------------------------------------------------------


def restricted_bound_check(
    S: KernelFamily,
    radii,
    taus,
    z0: complex = 0.0,
    points_per_radius: int = 12,
    box_factor: float = 6.0,
    slope_window: tuple[float, float] = (0.85, 1.15),
    tau_uniformity: float = 2.0,
) -> ConditionReport:
    """Quadrature norms ||S phi^{R,z0}||_2 over an R sweep, with slope fits.

    Each radius uses a lattice scaled to the bump (points_per_radius nodes per
    R) shared between the response and support grids so odd/zero-mean kernels
    are integrated in the principal-value sense exactly on symmetric rings.
    """
    rep = ConditionReport(name=S.name, order=S.order)
    radii = np.asarray(sorted(radii), dtype=float)
    norms = np.zeros((len(np.atleast_1d(taus)), len(radii)))
    for i_tau, tau in enumerate(np.atleast_1d(taus)):
        for i_r, R in enumerate(radii):
            norms[i_tau, i_r] = _bump_response_norm(
                S, float(tau), complex(z0), float(R), points_per_radius, box_factor
            )
            rep.add(
                "restricted-bound-norm",
                {"tau": float(tau), "R": float(R)},
                norms[i_tau, i_r],
                1.0,
                True,
            )
        slope, _ = np.polyfit(np.log(radii), np.log(norms[i_tau]), 1)
        a_fit = float(np.max(norms[i_tau] / radii))
        ok = slope_window[0] <= slope <= slope_window[1]
        rep.add(
            "restricted-bound-slope",
            {"tau": float(tau)},
            float(slope),
            a_fit,
            bool(ok),
            note=f"A={a_fit:.4g}",
        )
    a_fits = [r.stability for r in rep.rows if r.condition == "restricted-bound-slope"]
    if len(a_fits) > 1:
        spread = max(a_fits) / min(a_fits) if min(a_fits) > 0 else math.inf
        rep.add(
            "restricted-bound-tau-uniformity",
            {"taus": list(map(float, np.atleast_1d(taus)))},
            float(spread),
            float(spread),
            spread <= tau_uniformity,
        )
    return rep


def _bump_response_norm(S, tau, z0, R, ppr, box_factor):
    h = R / ppr
    n_half = int(box_factor * ppr)
    idx = np.arange(-n_half, n_half + 1)
    lattice = z0 + h * (idx[:, None] + 1j * idx[None, :])
    w_mask = np.abs(lattice - z0) < R
    W = lattice[w_mask]
    phi = bump_profile(np.abs(W - z0) / R)
    zs = lattice.ravel()
    out = np.zeros(zs.shape, dtype=complex)
    chunk = max(1, 2_000_000 // max(len(W), 1))
    for start in range(0, len(zs), chunk):
        zz = zs[start : start + chunk, None]
        vals = S.eval(np.full(zz.shape, tau), zz, W[None, :])
        if S.diagonal_rule == "pv-zero":
            vals = np.where(zz == W[None, :], 0.0, vals)
        out[start : start + chunk] = vals @ (phi * h * h)
    return float(np.sqrt(np.sum(np.abs(out) ** 2) * h * h))


def lq_operator_norm(
    K: KernelFamily,
    q: float,
    tau: float,
    box: float,
    n: int = 32,
    trials: int = 8,
    seed: int = 0,
    iters: int = 200,
    tol: float = 1e-9,
) -> float:
    """Discrete L^q -> L^q operator norm estimate on an n x n lattice.

    q = 2 uses power iteration on the normal operator (plus the Monte-Carlo
    lower bound); other q report the Monte-Carlo lower bound only.
    Deterministic in ``seed``.
    """
    h = 2.0 * box / n
    x = -box + h / 2.0 + h * np.arange(n)
    zz = (x[:, None] + 1j * x[None, :]).ravel()
    A = K.eval(np.full((len(zz), len(zz)), tau), zz[:, None], zz[None, :])
    if K.diagonal_rule == "pv-zero":
        np.fill_diagonal(A, 0.0)
    A = A * h * h
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        f = rng.standard_normal(len(zz)) + 1j * rng.standard_normal(len(zz))
        nf = np.sum(np.abs(f) ** q) ** (1.0 / q)
        if nf == 0:
            continue
        g = A @ f
        best = max(best, float(np.sum(np.abs(g) ** q) ** (1.0 / q) / nf))
    if q != 2:
        return best
    v = rng.standard_normal(len(zz)) + 1j * rng.standard_normal(len(zz))
    nv = np.linalg.norm(v)
    if nv == 0 or not np.any(A):
        return best
    v /= nv
    prev = 0.0
    for _ in range(iters):
        u = A.conj().T @ (A @ v)
        nu = np.linalg.norm(u)
        if nu == 0:
            return best
        v = u / nu
        val = math.sqrt(nu)
        if abs(val - prev) <= tol * max(val, 1.0):
            prev = val
            break
        prev = val
    return max(best, prev)


# ---------------------------------------------------------------------------
# model kernels
# ---------------------------------------------------------------------------


def newtonian_kernel(box: float = 2.0) -> KernelFamily:
    """(2/pi) log(1/|z-w|): the order-2 model (inverts the flat Laplacian/4)."""

    def fn(tau, z, w):
        return (2.0 / np.pi) * np.log(1.0 / np.abs(z - w)) + 0j

    c = 1.0 / np.pi
    derivs = {
        "dz": lambda tau, z, w: -c / (z - w),
        "dzb": lambda tau, z, w: -c / np.conj(z - w),
        "dw": lambda tau, z, w: c / (z - w),
        "dwb": lambda tau, z, w: c / np.conj(z - w),
    }
    return KernelFamily(fn, order=2, box=box, name="newtonian", derivs=derivs)


def cz_model(geom: GeometryContext, box: float = 2.0, with_twist: bool = True) -> KernelFamily:
    """Order-0 model: a pure second derivative of the order-2 model, carrying
    the oscillation exp(i tau T(w, z)) so its twist conjugate is the classical
    smooth-away-from-diagonal kernel with zero angular mean."""

    def fn(tau, z, w):
        base = -1.0 / (np.pi * (z - w) ** 2)
        if with_twist:
            return np.exp(1j * tau * geom.twist(w, z)) * base
        return base

    return KernelFamily(
        fn,
        order=0,
        box=box,
        name="cz-model" + ("" if with_twist else "-flat"),
        diagonal_rule="pv-zero",
    )


def phase_stripped_cz(geom: GeometryContext, box: float = 2.0) -> KernelFamily:
    """Mutation: the order-0 model without its compensating oscillation, so
    twist conjugation injects a tau-growing phase gradient."""
    return cz_model(geom, box=box, with_twist=False)


def cauchy_tail_kernel(box: float = 2.0) -> KernelFamily:
    """Mutation: |z-w|^{-1} singularity with no extra decay; its dilated-bump
    response norm grows like R^2, not R."""

    def fn(tau, z, w):
        return 1.0 / (np.pi * (z - w))

    return KernelFamily(fn, order=0, box=box, name="cauchy-tail", diagonal_rule="pv-zero")


def order_inflated(K: KernelFamily) -> KernelFamily:
    """Mutation: divide by |z-w|, inflating the diagonal singularity by one
    order while keeping the claimed order."""

    def fn(tau, z, w):
        return K.fn(tau, z, w) / np.abs(z - w)

    return KernelFamily(
        fn,
        order=K.order,
        box=K.box,
        name=K.name + "/r",
        eps=K.eps,
        tau_step=K.tau_step,
        diagonal_rule=K.diagonal_rule,
        fd_base_step=K.fd_base_step,
    )


def gaussian_tau_kernel(box: float = 2.0, width: float = 1.0) -> KernelFamily:
    """Smooth separable family A(z, w) exp(-tau^2 / (2 width^2))."""

    def amp(z, w):
        return np.exp(-np.abs(z) ** 2 - np.abs(w) ** 2)

    def fn(tau, z, w):
        return amp(z, w) * np.exp(-(tau**2) / (2.0 * width**2))

    return KernelFamily(fn, order=0, box=box, name="gaussian-tau")


def rank_one_kernel(phi, psi, box: float = 2.0) -> KernelFamily:
    return KernelFamily(
        lambda tau, z, w: phi(z) * psi(w), order=0, box=box, name="rank-one"
    )


def constant_nis_kernel(value: complex = 1.0, order: int = 0) -> NisKernel:
    """Mutation: no decay at large nonisotropic distance."""
    return NisKernel(lambda z, w, t: np.full(np.broadcast(z, w, t).shape, value), order, name="constant-nis")


def nis_surrogate(geom: GeometryContext, m: int = 2) -> NisKernel:
    """Self-referential smooth surrogate d^m / V away from the diagonal."""

    def fn(z, w, t):
        z = np.atleast_1d(z)
        w = np.atleast_1d(w)
        t = np.atleast_1d(t)
        shape = np.broadcast(z, w, t).shape
        zb, wb, tb = (np.broadcast_to(a, shape) for a in (z, w, t))
        out = np.empty(shape, dtype=complex)
        flat = out.reshape(-1)
        for i, (zi, wi, ti) in enumerate(zip(zb.reshape(-1), wb.reshape(-1), tb.reshape(-1))):
            d = geom.dni(zi, wi, ti)
            v = geom.vni(zi, wi, ti)
            flat[i] = d**m / v if v > 0 else 0.0
        return out if out.shape else complex(out)

    return NisKernel(fn, order=m, name=f"nis-surrogate-m{m}")


# ---------------------------------------------------------------------------
# discrete Green kernel
# ---------------------------------------------------------------------------


class GreenKernel(KernelFamily):
    """Sampled inverse of the discretized box operator -Zb(Z .).

    The operator is assembled spectrally on a periodic cell-centered grid, so
    the discrete adjoint structure is exact and the inverse is Hermitian to
    solver precision.  tau = 0 is gauged by deflating the constant mode (the
    relative-solution convention); other tau get a tiny diagonal shift, both
    recorded in ``shifts``.
    """

    def __init__(
        self,
        geom: GeometryContext,
        n: int = 32,
        box: float = 2.0,
        eps_rel: float = 1e-8,
        tau_step: float = 0.25,
        chunk: int = 256,
    ):
        self.geom = geom
        self.n = int(n)
        self.h = 2.0 * box / n
        self.x = -box + self.h / 2.0 + self.h * np.arange(n)
        self.eps_rel = float(eps_rel)
        self.chunk = int(chunk)
        self.shifts: dict[float, tuple[str, float]] = {}
        self._lu: dict[float, tuple] = {}
        self._cols: dict[tuple[float, int], np.ndarray] = {}
        super().__init__(
            fn=None,
            order=2,
            box=box,
            name=f"green-{n}",
            tau_step=tau_step,
            fd_base_step=self.h,
        )

    # -- lattice helpers --------------------------------------------------
    def lattice(self) -> np.ndarray:
        return self.x[:, None] + 1j * self.x[None, :]

    def snap_index(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=complex)
        ix = np.rint((pts.real - self.x[0]) / self.h).astype(int)
        iy = np.rint((pts.imag - self.x[0]) / self.h).astype(int)
        if np.any((ix < 0) | (ix >= self.n) | (iy < 0) | (iy >= self.n)):
            raise ValueError("point off the sampled lattice")
        off = np.abs(self.x[ix] + 1j * self.x[iy] - pts)
        if np.any(off > 1e-6 * self.h):
            raise ValueError("green kernel must be evaluated at lattice nodes")
        return ix * self.n + iy

    def _operator_matrix(self, tau: float) -> np.ndarray:
        n, h = self.n, self.h
        big_n = n * n
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        mult_dz = 0.5 * (1j * k[:, None] + k[None, :])
        mult_dzb = 0.5 * (1j * k[:, None] - k[None, :])
        zz = self.lattice()
        pz = self.geom.pz(zz)
        pzb = self.geom.pzb(zz)
        a = np.empty((big_n, big_n), dtype=complex)
        for start in range(0, big_n, self.chunk):
            stop = min(start + self.chunk, big_n)
            e = np.zeros((stop - start, n, n), dtype=complex)
            idx = np.arange(start, stop)
            e[np.arange(stop - start), idx // n, idx % n] = 1.0
            zv = np.fft.ifft2(np.fft.fft2(e, axes=(1, 2)) * mult_dz, axes=(1, 2)) - tau * pz * e
            bv = -(
                np.fft.ifft2(np.fft.fft2(zv, axes=(1, 2)) * mult_dzb, axes=(1, 2))
                + tau * pzb * zv
            )
            a[:, start:stop] = bv.reshape(stop - start, big_n).T
        return a

    def _ensure_factor(self, tau: float):
        tau = float(tau)
        if tau in self._lu:
            return self._lu[tau]
        a = self._operator_matrix(tau)
        sigma = (np.pi / self.h) ** 2 / 2.0
        if abs(tau) < 1e-12:
            a += sigma / (self.n * self.n)
            self.shifts[tau] = ("deflate-constant", sigma)
        else:
            eps = self.eps_rel * sigma
            a[np.diag_indices_from(a)] += eps
            self.shifts[tau] = ("diagonal", eps)
        lu = scipy.linalg.lu_factor(a, overwrite_a=True, check_finite=False)
        self._lu[tau] = lu
        return lu

    def column(self, tau: float, iw: int) -> np.ndarray:
        tau = float(tau)
        key = (tau, int(iw))
        col = self._cols.get(key)
        if col is None:
            lu = self._ensure_factor(tau)
            rhs = np.zeros(self.n * self.n, dtype=complex)
            rhs[iw] = 1.0 / (self.h * self.h)
            deflated = self.shifts[tau][0] == "deflate-constant"
            if deflated:
                rhs -= rhs.mean()
            col = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
            if deflated:
                col -= col.mean()
            self._cols[key] = col
        return col

    def eval(self, tau, z, w, eps: float | None = None):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        tau_arr = np.broadcast_to(np.asarray(tau, dtype=float), np.broadcast(z, w).shape).ravel()
        zf = np.broadcast_to(z, np.broadcast(z, w).shape).ravel()
        wf = np.broadcast_to(w, np.broadcast(z, w).shape).ravel()
        iz = self.snap_index(zf)
        iw = self.snap_index(wf)
        out = np.empty(len(zf), dtype=complex)
        for t_val in np.unique(tau_arr):
            sel = tau_arr == t_val
            for col_idx in np.unique(iw[sel]):
                sel2 = sel & (iw == col_idx)
                out[sel2] = self.column(t_val, int(col_idx))[iz[sel2]]
        shape = np.broadcast(np.asarray(z), np.asarray(w)).shape
        return out.reshape(shape) if shape else complex(out[0])

    def hermitian_residual(self, tau: float, n_pairs: int = 16, seed: int = 3) -> float:
        """max |K(z,w) - conj(K(w,z))| over random interior lattice pairs."""
        rng = np.random.default_rng(seed)
        m = self.n
        ii = rng.integers(m // 4, 3 * m // 4, size=(n_pairs, 4))
        zz = self.x[ii[:, 0]] + 1j * self.x[ii[:, 1]]
        ww = self.x[ii[:, 2]] + 1j * self.x[ii[:, 3]]
        fwd = self.eval(tau, zz, ww)
        bwd = self.eval(tau, ww, zz)
        return float(np.max(np.abs(fwd - np.conj(bwd))))


def green_kernel(geom: GeometryContext, n: int = 32, box: float = 2.0, **kw) -> GreenKernel:
    return GreenKernel(geom, n=n, box=box, **kw)
