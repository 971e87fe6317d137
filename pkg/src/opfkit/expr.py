"""Sparse exact polynomial expressions in (z, zbar, w, wbar, t, tau).

PolyExpr is a dict from exponent 6-tuples to complex coefficients.  With
integer inputs every operation (add, multiply, differentiate, conjugate) is
exact in double precision, so identity tests can demand a residual of
exactly zero.
"""
from __future__ import annotations

import numpy as np

VARS = ("z", "zb", "w", "wb", "t", "tau")
_IDX = {name: i for i, name in enumerate(VARS)}
# formal conjugation swaps z <-> zb and w <-> wb; t and tau are real symbols
_CONJ_PERM = (1, 0, 3, 2, 4, 5)

__all__ = ["VARS", "PolyExpr"]


class PolyExpr:
    """Polynomial in six commuting variables with complex coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for mono, coeff in terms.items():
                if coeff != 0:
                    self.terms[tuple(mono)] = complex(coeff)

    # -- constructors ---------------------------------------------------
    @classmethod
    def const(cls, value) -> "PolyExpr":
        e = cls()
        if value != 0:
            e.terms[(0, 0, 0, 0, 0, 0)] = complex(value)
        return e

    @classmethod
    def var(cls, name: str, power: int = 1) -> "PolyExpr":
        mono = [0] * 6
        mono[_IDX[name]] = power
        return cls({tuple(mono): 1.0})

    @classmethod
    def from_zzbar(cls, coeffs, slot: str = "z") -> "PolyExpr":
        """Lift a (z, zbar) coefficient matrix into the z- or w-variable pair."""
        coeffs = np.asarray(coeffs, dtype=complex)
        if slot == "z":
            i0, i1 = _IDX["z"], _IDX["zb"]
        elif slot == "w":
            i0, i1 = _IDX["w"], _IDX["wb"]
        else:
            raise ValueError(f"slot must be 'z' or 'w', got {slot!r}")
        e = cls()
        for j in range(coeffs.shape[0]):
            for k in range(coeffs.shape[1]):
                c = coeffs[j, k]
                if c != 0:
                    mono = [0] * 6
                    mono[i0] = j
                    mono[i1] = k
                    e.terms[tuple(mono)] = complex(c)
        return e

    # -- algebra ---------------------------------------------------------
    def copy(self) -> "PolyExpr":
        out = PolyExpr()
        out.terms = dict(self.terms)
        return out

    def __add__(self, other):
        other = _coerce(other)
        out = self.copy()
        for mono, c in other.terms.items():
            v = out.terms.get(mono, 0.0) + c
            if v == 0:
                out.terms.pop(mono, None)
            else:
                out.terms[mono] = v
        return out

    __radd__ = __add__

    def __neg__(self):
        out = PolyExpr()
        out.terms = {m: -c for m, c in self.terms.items()}
        return out

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            if other == 0:
                return PolyExpr()
            out = PolyExpr()
            out.terms = {m: c * other for m, c in self.terms.items()}
            return out
        out = PolyExpr()
        terms = out.terms
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                v = terms.get(mono, 0.0) + c1 * c2
                if v == 0:
                    terms.pop(mono, None)
                else:
                    terms[mono] = v
        return out

    __rmul__ = __mul__

    def pow(self, n: int) -> "PolyExpr":
        if n < 0:
            raise ValueError("negative power")
        out = PolyExpr.const(1.0)
        for _ in range(n):
            out = out * self
        return out

    def diff(self, name: str) -> "PolyExpr":
        i = _IDX[name]
        out = PolyExpr()
        for mono, c in self.terms.items():
            e = mono[i]
            if e:
                m = list(mono)
                m[i] = e - 1
                out.terms[tuple(m)] = out.terms.get(tuple(m), 0.0) + c * e
        return out

    def conj(self) -> "PolyExpr":
        out = PolyExpr()
        for mono, c in self.terms.items():
            m = tuple(mono[_CONJ_PERM[i]] for i in range(6))
            out.terms[m] = c.conjugate()
        return out

    # -- queries ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, float, complex)):
            other = PolyExpr.const(other)
        if not isinstance(other, PolyExpr):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def max_abs(self) -> float:
        """Largest coefficient modulus; 0.0 for the zero expression."""
        if not self.terms:
            return 0.0
        return max(abs(c) for c in self.terms.values())

    def __len__(self):
        return len(self.terms)

    def eval(self, z=0.0, w=0.0, t=0.0, tau=0.0):
        """Numeric evaluation; arguments broadcast as numpy arrays."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        vals = (z, np.conj(z), w, np.conj(w), t, tau)
        shape = np.broadcast(z, w, t, tau).shape
        out = np.zeros(shape, dtype=complex)
        for mono, c in self.terms.items():
            term = np.full(shape, c, dtype=complex)
            for i, e in enumerate(mono):
                if e:
                    term = term * vals[i] ** e
            out = out + term
        if out.ndim == 0:
            return complex(out)
        return out

    def __repr__(self):
        if not self.terms:
            return "PolyExpr(0)"
        parts = []
        for mono, c in sorted(self.terms.items()):
            factors = [f"{name}^{e}" if e > 1 else name for name, e in zip(VARS, mono) if e]
            parts.append(f"({c:g})" + ("*" + "*".join(factors) if factors else ""))
        return "PolyExpr(" + " + ".join(parts[:8]) + (" + ..." if len(parts) > 8 else "") + ")"


def _coerce(x) -> PolyExpr:
    if isinstance(x, PolyExpr):
        return x
    return PolyExpr.const(x)
