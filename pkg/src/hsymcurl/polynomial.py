"""Sparse trivariate polynomials in reference coordinates (xi, eta, zeta)."""
import numpy as np


class Poly:
    """Polynomial stored as ``{(i, j, k): coefficient}`` for xi^i eta^j zeta^k."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {m: float(c) for m, c in (terms or {}).items() if c != 0.0}

    @classmethod
    def const(cls, c):
        return cls({(0, 0, 0): c})

    @classmethod
    def var(cls, axis):
        m = [0, 0, 0]
        m[axis] = 1
        return cls({tuple(m): 1.0})

    @property
    def degree(self):
        return max((sum(m) for m in self.terms), default=0)

    def _coerce(self, other):
        return other if isinstance(other, Poly) else Poly.const(float(other))

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly({m: c * float(other) for m, c in self.terms.items()})
        out = {}
        for (a, b, c), u in self.terms.items():
            for (d, e, f), v in other.terms.items():
                key = (a + d, b + e, c + f)
                out[key] = out.get(key, 0.0) + u * v
        return Poly(out)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / s)

    def __pow__(self, n):
        out = Poly.const(1.0)
        for _ in range(int(n)):
            out = out * self
        return out

    def deriv(self, axis):
        out = {}
        for m, c in self.terms.items():
            if m[axis] > 0:
                k = list(m)
                k[axis] -= 1
                out[tuple(k)] = out.get(tuple(k), 0.0) + c * m[axis]
        return Poly(out)

    def grad(self):
        return [self.deriv(a) for a in range(3)]

    def is_zero(self, tol=0.0):
        return all(abs(c) <= tol for c in self.terms.values())

    def key(self):
        """Hashable rounded representation used to merge duplicate polynomials."""
        return tuple(sorted((m, round(c, 12)) for m, c in self.terms.items()))

    def __call__(self, pts):
        return tabulate([self], pts)[:, 0]

    def __repr__(self):
        return f"Poly({self.terms})"


def tabulate(polys, pts):
    """Values of ``polys`` at ``pts`` (shape (..., 3)) -> array (..., len(polys))."""
    pts = np.asarray(pts, dtype=float)
    lead = pts.shape[:-1]
    flat = pts.reshape(-1, 3)
    monos = sorted({m for p in polys for m in p.terms})
    if not monos:
        return np.zeros(lead + (len(polys),))
    deg = max(max(m) for m in monos)
    powers = [np.power.outer(flat[:, a], np.arange(deg + 1)) for a in range(3)]
    index = {m: i for i, m in enumerate(monos)}
    V = np.empty((flat.shape[0], len(monos)))
    for m, i in index.items():
        V[:, i] = powers[0][:, m[0]] * powers[1][:, m[1]] * powers[2][:, m[2]]
    C = np.zeros((len(monos), len(polys)))
    for j, p in enumerate(polys):
        for m, c in p.terms.items():
            C[index[m], j] = c
    return (V @ C).reshape(lead + (len(polys),))


def tabulate_grad(polys, pts):
    """Reference gradients -> array (..., len(polys), 3)."""
    parts = [tabulate([p.deriv(a) for p in polys], pts) for a in range(3)]
    return np.stack(parts, axis=-1)
