"""Nonisotropic geometry attached to a subharmonic, nonharmonic polynomial.

Provides the two size functions

    lam(z, delta) = sum_{j,k>=1} |A_jk(z)| delta^(j+k)
    mu(z, delta)  = min_{j,k>=1, A_jk(z)!=0} (delta / |A_jk(z)|)^(1/(j+k)),

the twist T(w, z), the pseudodistance d_NI, the comparable volume V_NI, and
empirical calibration of every comparability constant.  All evaluators accept
scalars or broadcastable numpy arrays.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import poly as _poly

__all__ = [
    "GeometryContext",
    "CalibrationSpec",
    "RatioStat",
    "CalibrationRecord",
    "calibrate_corpus",
]

# indices with |A_jk| below this relative floor are treated as structural zeros
_MU_REL_FLOOR = 1e-14


class GeometryContext:
    """Geometric quantities of one polynomial, with cached Taylor frames.

    Frames are cached per queried center; the cache is guarded by a lock so
    concurrent readers are safe.  All derived evaluations are pure.
    """

    def __init__(self, p: _poly.HermitianPoly):
        if not p.nonharmonic:
            raise _poly.HarmonicError("geometry requires a nonharmonic polynomial")
        self.p = p
        self._frames: dict[complex, _poly.TaylorFrame] = {}
        self._derivs: dict[tuple[int, int], np.ndarray] = {}
        self._lock = threading.Lock()
        self.calibration: CalibrationRecord | None = None

    # -- frames and raw derivatives --------------------------------------
    def frame(self, z: complex) -> _poly.TaylorFrame:
        z = complex(z)
        with self._lock:
            f = self._frames.get(z)
        if f is None:
            f = _poly.recenter(self.p, z)
            with self._lock:
                self._frames[z] = f
        return f

    def frame_stack(self, z) -> np.ndarray:
        """A_jk at an array of centers: shape (d+1, d+1) + z.shape."""
        z = np.asarray(z, dtype=complex)
        c = self.p.coeffs
        d = self.p.degree
        zp = [np.ones_like(z)]
        for _ in range(d):
            zp.append(zp[-1] * z)
        zbp = [np.conj(v) for v in zp]
        out = np.zeros((d + 1, d + 1) + z.shape, dtype=complex)
        for j in range(d + 1):
            for k in range(d + 1):
                acc = None
                for bigj in range(j, d + 1):
                    for bigk in range(k, d + 1):
                        cc = c[bigj, bigk]
                        if cc != 0:
                            term = (
                                cc
                                * math.comb(bigj, j)
                                * math.comb(bigk, k)
                                * zp[bigj - j]
                                * zbp[bigk - k]
                            )
                            acc = term if acc is None else acc + term
                if acc is not None:
                    out[j, k] = acc
        return out

    def deriv_coeffs(self, j: int, k: int) -> np.ndarray:
        key = (j, k)
        with self._lock:
            c = self._derivs.get(key)
        if c is None:
            c = _poly.mixed_derivative(self.p, j, k)
            with self._lock:
                self._derivs[key] = c
        return c

    def _eval_coeffs(self, coeffs: np.ndarray, z):
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        out = np.zeros(z.shape, dtype=complex)
        for j in range(coeffs.shape[0]):
            for k in range(coeffs.shape[1]):
                cc = coeffs[j, k]
                if cc != 0:
                    out = out + cc * z**j * zb**k
        return out

    def pz(self, z):
        """dp/dz evaluated at z."""
        return self._eval_coeffs(self.deriv_coeffs(1, 0), z)

    def pzb(self, z):
        """dp/dzbar evaluated at z."""
        return self._eval_coeffs(self.deriv_coeffs(0, 1), z)

    # -- size functions ---------------------------------------------------
    def lam(self, z, delta):
        """lam(z, delta); strictly increasing in delta, zero iff delta == 0."""
        delta = np.asarray(delta, dtype=float)
        if np.any(delta < 0):
            raise ValueError("delta must be nonnegative")
        a = np.abs(self.frame_stack(z))
        d = self.p.degree
        out = 0.0
        for j in range(1, d + 1):
            for k in range(1, d + 1):
                ajk = a[j, k]
                if np.any(ajk != 0):
                    out = out + ajk * delta ** (j + k)
        out = np.asarray(out + np.zeros(np.broadcast(np.asarray(z), delta).shape))
        return float(out) if out.ndim == 0 else out

    def mu(self, z, delta):
        """Approximate inverse of lam: the smallest monomial inversion."""
        delta = np.asarray(delta, dtype=float)
        if np.any(delta < 0):
            raise ValueError("delta must be nonnegative")
        a = np.abs(self.frame_stack(z))
        d = self.p.degree
        amax = np.max(a[1:, 1:], axis=(0, 1)) if d >= 1 else 0.0
        floor = _MU_REL_FLOOR * np.maximum(amax, _MU_REL_FLOOR)
        shape = np.broadcast(np.asarray(z), delta).shape
        best = np.full(shape, np.inf)
        for j in range(1, d + 1):
            for k in range(1, d + 1):
                ajk = a[j, k]
                active = ajk > floor
                if not np.any(active):
                    continue
                safe = np.where(active, ajk, 1.0)
                cand = (delta / safe) ** (1.0 / (j + k))
                cand = np.where(active, cand, np.inf)
                best = np.minimum(best, np.broadcast_to(cand, shape))
        if np.any(~np.isfinite(best) & (np.broadcast_to(delta, shape) > 0)):
            raise ValueError("mu undefined: no active mixed Taylor coefficient")
        best = np.where(np.broadcast_to(delta, shape) == 0.0, 0.0, best)
        return float(best) if best.ndim == 0 else best

    # -- twist -------------------------------------------------------------
    def twist(self, w, z):
        """T(w, z) = -2 Im sum_{j>=1} (1/j!) d^j p/dz^j (z) (w - z)^j."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        a = self.frame_stack(z)
        d = self.p.degree
        u = w - z
        s = np.zeros(np.broadcast(w, z).shape, dtype=complex)
        up = np.ones_like(u)
        for j in range(1, d + 1):
            up = up * u
            s = s + a[j, 0] * up
        out = -2.0 * s.imag
        return float(out) if out.ndim == 0 else out

    def twist_dz(self, w, z):
        """dT/dz(w, z) = -i dp/dz(z) - i sum_{j>=1} A_1j(z) conj(w-z)^j."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        a = self.frame_stack(z)
        d = self.p.degree
        ub = np.conj(w - z)
        s = np.zeros(np.broadcast(w, z).shape, dtype=complex)
        ubp = np.ones_like(ub)
        for j in range(1, d + 1):
            ubp = ubp * ub
            s = s + a[1, j] * ubp
        out = -1j * self.pz(z) - 1j * s
        return complex(out) if out.ndim == 0 else out

    def twist_dzb(self, w, z):
        return np.conj(self.twist_dz(w, z))

    def twist_dw(self, w, z):
        """dT/dw(w, z) = i sum_{j>=1} j A_j0(z) (w-z)^(j-1)."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        a = self.frame_stack(z)
        d = self.p.degree
        u = w - z
        s = np.zeros(np.broadcast(w, z).shape, dtype=complex)
        up = np.ones_like(u)
        for j in range(1, d + 1):
            s = s + j * a[j, 0] * up
            up = up * u
        out = 1j * s
        return complex(out) if out.ndim == 0 else out

    def twist_dwb(self, w, z):
        return np.conj(self.twist_dw(w, z))

    # -- pseudodistance, volume, balls --------------------------------------
    def dni(self, z, w, t):
        """d_NI(z, w, t) = |z - w| + mu(z, |t + T(w, z)|)."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        t = np.asarray(t, dtype=float)
        r = np.abs(t + self.twist(w, z))
        out = np.abs(z - w) + self.mu(z, r)
        return float(out) if np.ndim(out) == 0 else out

    def vni(self, z, w, t):
        """Closed-form comparable volume: d^2 lam(z, d) with d = dni(z, w, t)."""
        d = self.dni(z, w, t)
        out = np.asarray(d) ** 2 * self.lam(z, d)
        return float(out) if out.ndim == 0 else out

    def ball_contains(self, center, delta: float, point) -> bool:
        """Membership of (w, s) in the nonisotropic ball about (z, t)."""
        z, t = center
        w, s = point
        return bool(self.dni(z, w, t - s) < delta)

    # -- calibration ---------------------------------------------------------
    def calibrate(self, spec: "CalibrationSpec") -> "CalibrationRecord":
        rec = calibrate_corpus([self.p], spec)
        self.calibration = rec
        return rec


@dataclass(frozen=True)
class CalibrationSpec:
    n_centers: int = 24
    n_deltas: int = 48
    decades: tuple[float, float] = (-3.0, 3.0)
    n_pairs: int = 400
    radius: float = 2.0
    seed: int = 7


@dataclass
class RatioStat:
    lo: float = math.inf
    hi: float = 0.0
    n: int = 0

    def update(self, values) -> None:
        values = np.asarray(values, dtype=float).ravel()
        values = values[np.isfinite(values) & (values > 0)]
        if values.size:
            self.lo = min(self.lo, float(values.min()))
            self.hi = max(self.hi, float(values.max()))
            self.n += int(values.size)

    @property
    def constant(self) -> float:
        """Single two-sided comparability constant C with ratios in [1/C, C]."""
        if self.n == 0:
            return math.nan
        return max(self.hi, 1.0 / self.lo)


@dataclass
class CalibrationRecord:
    """Empirical comparability constants, keyed by polynomial degree."""

    stats: dict[int, dict[str, RatioStat]] = field(default_factory=dict)

    def stat(self, degree: int, name: str) -> RatioStat:
        return self.stats.setdefault(degree, {}).setdefault(name, RatioStat())

    def constant(self, name: str, degree: int | None = None) -> float:
        cs = [
            s[name].constant
            for d, s in self.stats.items()
            if name in s and (degree is None or d == degree)
        ]
        return max(cs) if cs else math.nan

    def merge(self, other: "CalibrationRecord") -> None:
        for d, group in other.stats.items():
            for name, st in group.items():
                mine = self.stat(d, name)
                mine.lo = min(mine.lo, st.lo)
                mine.hi = max(mine.hi, st.hi)
                mine.n += st.n

    def rows(self) -> list[dict]:
        out = []
        for d in sorted(self.stats):
            for name in sorted(self.stats[d]):
                st = self.stats[d][name]
                out.append(
                    {
                        "degree": d,
                        "quantity": name,
                        "min_ratio": st.lo,
                        "max_ratio": st.hi,
                        "constant": st.constant,
                        "samples": st.n,
                    }
                )
        return out

    def to_csv(self) -> str:
        lines = ["degree,quantity,min_ratio,max_ratio,constant,samples"]
        for r in self.rows():
            lines.append(
                f"{r['degree']},{r['quantity']},{r['min_ratio']:.6g},"
                f"{r['max_ratio']:.6g},{r['constant']:.6g},{r['samples']}"
            )
        return "\n".join(lines) + "\n"


def calibrate_corpus(polys, spec: CalibrationSpec | None = None) -> CalibrationRecord:
    """Sample the four comparability ratios over a polynomial corpus.

    Records max/min of mu(z, lam(z, delta))/delta, lam(z, mu(z, delta))/delta,
    the d_NI symmetry ratio, and lam(z, delta)/lam(w, delta) for
    delta > |w - z|.  Raises on an empty corpus.
    """
    if not polys:
        raise ValueError("empty corpus")
    spec = spec or CalibrationSpec()
    rng = np.random.default_rng(spec.seed)
    rec = CalibrationRecord()
    deltas = np.logspace(spec.decades[0], spec.decades[1], spec.n_deltas)
    for p in polys:
        ctx = GeometryContext(p)
        deg = p.degree
        centers = spec.radius * (
            rng.uniform(-1, 1, spec.n_centers) + 1j * rng.uniform(-1, 1, spec.n_centers)
        )
        for z in centers:
            lam_d = ctx.lam(z, deltas)
            mu_d = ctx.mu(z, deltas)
            rec.stat(deg, "mu_lambda").update(ctx.mu(z, lam_d) / deltas)
            rec.stat(deg, "lambda_mu").update(ctx.lam(z, mu_d) / deltas)
        zs = spec.radius * (rng.uniform(-1, 1, spec.n_pairs) + 1j * rng.uniform(-1, 1, spec.n_pairs))
        ws = zs + 10.0 ** rng.uniform(-3, 0.5, spec.n_pairs) * np.exp(
            2j * np.pi * rng.uniform(0, 1, spec.n_pairs)
        )
        ts = np.sign(rng.uniform(-1, 1, spec.n_pairs)) * 10.0 ** rng.uniform(-4, 2, spec.n_pairs)
        fwd = np.array([ctx.dni(z, w, t) for z, w, t in zip(zs, ws, ts)])
        bwd = np.array([ctx.dni(w, z, t) for z, w, t in zip(zs, ws, ts)])
        rec.stat(deg, "dni_symmetry").update(fwd / bwd)
        sep = np.abs(ws - zs)
        for z, w, s in zip(zs, ws, sep):
            big = deltas[deltas > s]
            if big.size:
                rec.stat(deg, "lambda_shift").update(ctx.lam(z, big) / ctx.lam(w, big))
    return rec
