"""Exact coefficient algebra for real-valued polynomials on C.

A polynomial is stored as a Hermitian matrix ``c`` with

    p(z) = sum_{j,k} c[j][k] z^j zbar^k,

so realness is a structural property rather than a numerical accident.
Recentering and differentiation are integer-weighted coefficient shifts,
never finite differences; with integer (or dyadic) input coefficients every
operation here is exact in double precision.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "HermitianPoly",
    "TaylorFrame",
    "SampleSpec",
    "SubharmonicVerdict",
    "NotHermitianError",
    "HarmonicError",
    "evaluate",
    "recenter",
    "reconstruct",
    "mixed_derivative",
    "laplacian",
    "check_subharmonic",
    "random_subharmonic",
    "from_holomorphic",
    "poly_to_dict",
    "poly_from_dict",
    "save_poly",
    "load_poly",
]


class NotHermitianError(ValueError):
    """Coefficient matrix fails c[k][j] == conj(c[j][k]) exactly."""


class HarmonicError(ValueError):
    """A polynomial required to be nonharmonic has no mixed z^j zbar^k term."""


def _trim(c: np.ndarray) -> np.ndarray:
    """Drop trailing all-zero rows and columns (independently)."""
    nr = c.shape[0]
    while nr > 1 and not c[nr - 1, :].any():
        nr -= 1
    nc = c.shape[1]
    while nc > 1 and not c[:nr, nc - 1].any():
        nc -= 1
    return np.ascontiguousarray(c[:nr, :nc])


def _has_mixed_term(c: np.ndarray) -> bool:
    return c.shape[0] > 1 and bool(np.any(c[1:, 1:] != 0))


class HermitianPoly:
    """Real polynomial on C as a Hermitian coefficient matrix in (z, zbar)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, require_nonharmonic: bool = True):
        c = np.array(coeffs, dtype=np.complex128)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"coefficient matrix must be square, got shape {c.shape}")
        if not np.array_equal(c, c.conj().T):
            raise NotHermitianError("coefficients must satisfy c[k][j] == conj(c[j][k])")
        c = _trim(c)
        if require_nonharmonic and not _has_mixed_term(c):
            raise HarmonicError("polynomial is harmonic: no nonzero c[j][k] with j,k >= 1")
        self.coeffs = c
        self.coeffs.setflags(write=False)

    @property
    def degree(self) -> int:
        """Largest power of z (equivalently zbar) in the coefficient matrix."""
        return self.coeffs.shape[0] - 1

    @property
    def total_degree(self) -> int:
        jj, kk = np.nonzero(self.coeffs)
        return int(np.max(jj + kk)) if len(jj) else 0

    @property
    def nonharmonic(self) -> bool:
        return _has_mixed_term(self.coeffs)

    def __call__(self, z):
        return evaluate(self, z)

    def __eq__(self, other):
        if not isinstance(other, HermitianPoly):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and np.array_equal(
            self.coeffs, other.coeffs
        )

    def __hash__(self):
        return hash((self.coeffs.shape, self.coeffs.tobytes()))

    def __repr__(self):
        return f"HermitianPoly(degree={self.degree})"


@dataclass(frozen=True)
class TaylorFrame:
    """Coefficients of p recentred at ``center``.

    ``a[j, k]`` holds (1/(j! k!)) d^{j+k} p / dz^j dzbar^k at the center,
    so p(w) = sum a[j,k] (w-center)^j conj(w-center)^k exactly.
    ``holo[j]`` is the purely holomorphic column a[j, 0].
    """

    center: complex
    a: np.ndarray

    @property
    def holo(self) -> np.ndarray:
        return self.a[:, 0]

    @property
    def degree(self) -> int:
        return self.a.shape[0] - 1

    def mixed_nonzero(self, tol: float = 0.0) -> bool:
        """True when some a[j,k] with j,k >= 1 exceeds tol in modulus."""
        if self.a.shape[0] < 2:
            return False
        return bool(np.any(np.abs(self.a[1:, 1:]) > tol))


def evaluate(p: HermitianPoly, z):
    """Evaluate p at z (scalar or array), returning an exactly real result.

    Terms are summed in (j,k)/(k,j) pairs so the imaginary parts cancel by
    construction instead of by floating-point luck.
    """
    z = np.asarray(z, dtype=np.complex128)
    c = p.coeffs
    d = p.degree
    zp = [np.ones_like(z)]
    for _ in range(d):
        zp.append(zp[-1] * z)
    zbp = [np.conj(v) for v in zp]
    out = np.zeros(z.shape, dtype=np.float64)
    for j in range(d + 1):
        cjj = c[j, j].real
        if cjj != 0.0:
            out = out + cjj * (zp[j] * zbp[j]).real
        for k in range(j + 1, d + 1):
            if c[j, k] != 0:
                out = out + 2.0 * (c[j, k] * zp[j] * zbp[k]).real
    if out.ndim == 0:
        return float(out)
    return out


def _binom_table(n: int) -> np.ndarray:
    t = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(i + 1):
            t[i, j] = math.comb(i, j)
    return t


def recenter(p: HermitianPoly, z: complex) -> TaylorFrame:
    """Taylor frame of p about z via exact binomial coefficient shifts."""
    c = p.coeffs
    d = p.degree
    z = complex(z)
    zb = z.conjugate()
    zp = [1.0 + 0.0j]
    for _ in range(d):
        zp.append(zp[-1] * z)
    zbp = [v.conjugate() for v in zp]
    comb = _binom_table(d)
    a = np.zeros((d + 1, d + 1), dtype=np.complex128)
    for j in range(d + 1):
        for k in range(d + 1):
            s = 0.0 + 0.0j
            for bigj in range(j, d + 1):
                for bigk in range(k, d + 1):
                    cc = c[bigj, bigk]
                    if cc != 0:
                        s += cc * comb[bigj, j] * comb[bigk, k] * zp[bigj - j] * zbp[bigk - k]
            a[j, k] = s
    return TaylorFrame(center=z, a=a)


def reconstruct(frame: TaylorFrame) -> np.ndarray:
    """Re-expand a Taylor frame into (z, zbar) monomial coefficients.

    Inverse of :func:`recenter` at the coefficient level; used to verify the
    reconstruction identity exactly.
    """
    d = frame.degree
    z0 = frame.center
    zb0 = z0.conjugate()
    comb = _binom_table(d)
    zp = [1.0 + 0.0j]
    for _ in range(d):
        zp.append(zp[-1] * (-z0))
    zbp = [v.conjugate() for v in zp]
    c = np.zeros((d + 1, d + 1), dtype=np.complex128)
    # (w - z0)^j conj(w - z0)^k expanded binomially in (w, wbar)
    for j in range(d + 1):
        for k in range(d + 1):
            ajk = frame.a[j, k]
            if ajk == 0:
                continue
            for r in range(j + 1):
                for s in range(k + 1):
                    c[r, s] += ajk * comb[j, r] * comb[k, s] * zp[j - r] * zbp[k - s]
    return _trim(c)


def mixed_derivative(p, j: int, k: int) -> np.ndarray:
    """Coefficient array of d^{j+k} p / dz^j dzbar^k.

    Accepts a HermitianPoly or a raw coefficient matrix and returns a raw
    coefficient matrix (Hermitian iff j == k).
    """
    if j < 0 or k < 0:
        raise ValueError("derivative orders must be nonnegative")
    c = p.coeffs if isinstance(p, HermitianPoly) else np.asarray(p, dtype=np.complex128)
    dj = c.shape[0] - 1
    dk = c.shape[1] - 1
    if j > dj or k > dk:
        return np.zeros((1, 1), dtype=np.complex128)
    out = np.zeros((dj - j + 1, dk - k + 1), dtype=np.complex128)
    for bigj in range(j, dj + 1):
        fj = math.perm(bigj, j)
        for bigk in range(k, dk + 1):
            cc = c[bigj, bigk]
            if cc != 0:
                out[bigj - j, bigk - k] = cc * fj * math.perm(bigk, k)
    return _trim(out)


def laplacian(p: HermitianPoly) -> HermitianPoly:
    """Laplacian of p: 4 d^2 p / dz dzbar, as a (possibly harmonic) polynomial."""
    c = 4.0 * mixed_derivative(p, 1, 1)
    n = max(c.shape)
    full = np.zeros((n, n), dtype=np.complex128)
    full[: c.shape[0], : c.shape[1]] = c
    return HermitianPoly(full, require_nonharmonic=False)


@dataclass(frozen=True)
class SampleSpec:
    """Sampling request for the subharmonicity screen: a grid of ``count``
    points covering the square of half-width ``radius``."""

    radius: float = 2.0
    count: int = 4096


@dataclass(frozen=True)
class SubharmonicVerdict:
    passed: bool
    witness: complex | None
    min_value: float
    leading_min: float

    def __bool__(self):
        return self.passed


def check_subharmonic(p: HermitianPoly, spec: SampleSpec | None = None, tol: float | None = None) -> SubharmonicVerdict:
    """Screen Delta p >= 0 on a sample grid plus its leading part on the circle.

    This is a screen, not a certificate: a pass means no witness was found on
    the grid and the top-degree homogeneous part of Delta p is nonnegative on
    the sampled unit circle.
    """
    spec = spec or SampleSpec()
    lap = laplacian(p)
    scale = float(np.max(np.abs(lap.coeffs))) if lap.coeffs.any() else 1.0
    if tol is None:
        tol = 1e-9 * max(scale, 1.0)
    n_side = max(2, int(math.isqrt(spec.count)))
    xs = np.linspace(-spec.radius, spec.radius, n_side)
    zz = (xs[:, None] + 1j * xs[None, :]).ravel()
    vals = evaluate(lap, zz)
    i_min = int(np.argmin(vals))
    min_val = float(vals[i_min])

    c = lap.coeffs
    deg_tot = 0
    for j in range(c.shape[0]):
        for k in range(c.shape[1]):
            if c[j, k] != 0:
                deg_tot = max(deg_tot, j + k)
    theta = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    circ = np.exp(1j * theta)
    lead = np.zeros_like(theta)
    for j in range(c.shape[0]):
        for k in range(c.shape[1]):
            if j + k == deg_tot and c[j, k] != 0:
                lead = lead + (c[j, k] * circ**j * np.conj(circ) ** k).real
    leading_min = float(lead.min())

    if min_val < -tol:
        return SubharmonicVerdict(False, complex(zz[i_min]), min_val, leading_min)
    if leading_min < -tol:
        return SubharmonicVerdict(False, None, min_val, leading_min)
    return SubharmonicVerdict(True, None, min_val, leading_min)


def from_holomorphic(qs) -> HermitianPoly:
    """Build p = sum_i |q_i(z)|^2 from holomorphic coefficient vectors q_i.

    Each q is a 1-d coefficient sequence (q[a] multiplies z^a).  The result is
    subharmonic by construction (Delta p = 4 sum |q_i'|^2) and nonharmonic as
    soon as one q_i is nonconstant.
    """
    qs = [np.asarray(q, dtype=np.complex128) for q in qs]
    d = max(len(q) - 1 for q in qs)
    c = np.zeros((d + 1, d + 1), dtype=np.complex128)
    for q in qs:
        m = len(q)
        c[:m, :m] += np.outer(q, np.conj(q))
    return HermitianPoly(c)


def random_subharmonic(degree: int, count: int, seed: int) -> list[HermitianPoly]:
    """Deterministic corpus of subharmonic, nonharmonic polynomials.

    ``degree`` is the degree of the holomorphic generators q_i (so the output
    polynomials have degree 2*degree).  Coefficients are small Gaussian
    integers, which keeps downstream identity tests exact.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n_gen = int(rng.integers(1, 3))
        qs = []
        for i in range(n_gen):
            qdeg = degree if i == 0 else int(rng.integers(0, degree + 1))
            q = rng.integers(-3, 4, size=qdeg + 1) + 1j * rng.integers(-3, 4, size=qdeg + 1)
            while q[qdeg] == 0:
                q[qdeg] = complex(rng.integers(-3, 4), rng.integers(-3, 4))
            qs.append(q)
        out.append(from_holomorphic(qs))
    return out


def poly_to_dict(p: HermitianPoly) -> dict:
    d = p.degree
    flat = [[float(v.real), float(v.imag)] for v in p.coeffs.ravel()]
    return {"degree": d, "coeffs": flat}


def poly_from_dict(obj: dict, require_nonharmonic: bool = True) -> HermitianPoly:
    try:
        d = int(obj["degree"])
        flat = obj["coeffs"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed polynomial object: {exc}") from exc
    if len(flat) != (d + 1) ** 2:
        raise ValueError(
            f"expected {(d + 1) ** 2} coefficients for degree {d}, got {len(flat)}"
        )
    c = np.array([complex(re, im) for re, im in flat], dtype=np.complex128)
    c = c.reshape(d + 1, d + 1)
    return HermitianPoly(c, require_nonharmonic=require_nonharmonic)


def save_poly(p: HermitianPoly, path) -> None:
    Path(path).write_text(json.dumps(poly_to_dict(p), indent=1) + "\n")


def load_poly(path, require_nonharmonic: bool = True) -> HermitianPoly:
    obj = json.loads(Path(path).read_text())
    return poly_from_dict(obj, require_nonharmonic=require_nonharmonic)


def load_poly_lenient(path) -> HermitianPoly:
    """Load accepting harmonic polynomials, with a warning."""
    p = load_poly(path, require_nonharmonic=False)
    if not p.nonharmonic:
        warnings.warn("loaded polynomial is harmonic", stacklevel=2)
    return p
