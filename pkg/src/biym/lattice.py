"""Periodic hypercubic lattice, conformal metrics and bundle-valued forms.

A p-form is stored densely as an array of shape ``(C, L_1, ..., L_n, m, m)``
where ``C = binom(n, p)`` enumerates strictly increasing axis tuples in
``itertools.combinations`` order.  Every cell is anchored at its
lexicographically smallest corner, and all metric factors are read there.

The metric on the lattice is ``g = c(x) h^2 delta`` in index coordinates, so
the weight of a p-cell is ``c^(n/2 - p) h^(n - 2p)``.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np

from biym.algebra import dim_so, inner

__all__ = [
    "LatticeSpec",
    "ConformalMetric",
    "PForm",
    "components",
    "weight",
    "volume",
    "inner_form",
    "norm",
    "pointwise_norm2",
    "shift",
]

MAX_DEGREE = 3


@lru_cache(maxsize=None)
def components(n, p):
    """Strictly increasing axis tuples of length p, in canonical order."""
    return tuple(combinations(range(n), p))


@lru_cache(maxsize=None)
def _component_index(n, p):
    return {c: i for i, c in enumerate(components(n, p))}


@dataclass(frozen=True)
class LatticeSpec:
    n: int
    extents: tuple
    h: float = 1.0

    def __post_init__(self):
        ext = tuple(int(e) for e in self.extents)
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "h", float(self.h))
        if not 2 <= self.n <= 6:
            raise ValueError(f"base dimension must be in [2, 6], got {self.n}")
        if len(ext) != self.n:
            raise ValueError(f"need {self.n} extents, got {len(ext)}")
        if min(ext) < 3:
            raise ValueError("every extent must be >= 3")
        if not self.h > 0:
            raise ValueError("lattice spacing must be positive")

    @classmethod
    def cubic(cls, n, L, h=1.0):
        return cls(n, (L,) * n, h)

    @property
    def sites(self):
        return int(np.prod(self.extents))

    def cells(self, p):
        return self.sites * len(components(self.n, p))

    def form_shape(self, p, m):
        return (len(components(self.n, p)),) + self.extents + (m, m)


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    """Metric ``c(x) * g_flat`` with a positive per-site factor."""

    lattice: LatticeSpec
    c: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape == ():
            c = np.full(self.lattice.extents, float(c))
        if c.shape != self.lattice.extents:
            raise ValueError(f"conformal factor shape {c.shape} != {self.lattice.extents}")
        if not np.all(c > 0):
            raise ValueError("conformal factor must be positive at every site")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def uniform(cls, lattice, value=1.0):
        return cls(lattice, np.full(lattice.extents, float(value)))

    @property
    def is_uniform(self):
        return bool(np.all(self.c == self.c.flat[0]))

    def scaled(self, factor):
        """Metric ``factor(x) * g`` (factor scalar or per-site)."""
        return ConformalMetric(self.lattice, self.c * factor)


@dataclass(eq=False)
class PForm:
    p: int
    lattice: LatticeSpec
    m: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0 <= self.p <= MAX_DEGREE:
            raise ValueError(f"form degree must be in [0, {MAX_DEGREE}], got {self.p}")
        self.values = np.asarray(self.values, dtype=float)
        want = self.lattice.form_shape(self.p, self.m)
        if self.values.shape != want:
            raise ValueError(f"values shape {self.values.shape} != {want}")

    @classmethod
    def zeros(cls, p, lattice, m):
        return cls(p, lattice, m, np.zeros(lattice.form_shape(p, m)))

    @classmethod
    def from_components(cls, p, lattice, m, comps):
        """Build from ``{axis tuple: (L..., m, m) array}``; tuples may be unsorted."""
        out = cls.zeros(p, lattice, m)
        idx = _component_index(lattice.n, p)
        for axes, val in comps.items():
            order = np.argsort(axes)
            sign = _perm_sign(order)
            out.values[idx[tuple(sorted(axes))]] += sign * np.asarray(val, dtype=float)
        return out

    @property
    def axes(self):
        return components(self.lattice.n, self.p)

    def component(self, axes):
        """Component for an arbitrary axis tuple, with antisymmetry sign."""
        if len(set(axes)) < len(axes):
            return np.zeros(self.lattice.extents + (self.m, self.m))
        order = np.argsort(axes)
        return _perm_sign(order) * self.values[_component_index(self.lattice.n, self.p)[tuple(sorted(axes))]]

    def like(self, values):
        return PForm(self.p, self.lattice, self.m, values)

    def copy(self):
        return self.like(self.values.copy())

    def _compatible(self, other):
        if not isinstance(other, PForm):
            return False
        if (other.p, other.lattice, other.m) != (self.p, self.lattice, self.m):
            raise ValueError("forms differ in degree, lattice or fiber dimension")
        return True

    def __add__(self, other):
        self._compatible(other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        self._compatible(other)
        return self.like(self.values - other.values)

    def __neg__(self):
        return self.like(-self.values)

    def __mul__(self, s):
        if isinstance(s, PForm):
            return NotImplemented
        s = np.asarray(s, dtype=float)
        if s.ndim == 0:
            return self.like(self.values * s)
        if s.shape != self.lattice.extents:
            raise ValueError(f"site field shape {s.shape} != {self.lattice.extents}")
        # per-site scalar, read at each cell's base site
        return self.like(self.values * s[None, ..., None, None])

    __rmul__ = __mul__

    def to_vector(self):
        """Strict upper-triangle coordinates, flattened (length cells * dim so(m))."""
        iu = np.triu_indices(self.m, 1)
        return self.values[..., iu[0], iu[1]].reshape(-1).copy()

    @classmethod
    def from_vector(cls, p, lattice, m, vec):
        iu = np.triu_indices(m, 1)
        shape = lattice.form_shape(p, m)[:-2] + (dim_so(m),)
        tri = np.asarray(vec, dtype=float).reshape(shape)
        vals = np.zeros(lattice.form_shape(p, m))
        vals[..., iu[0], iu[1]] = tri
        vals[..., iu[1], iu[0]] = -tri
        return cls(p, lattice, m, vals)


def _perm_sign(order):
    order = list(order)
    sign = 1
    for i in range(len(order)):
        while order[i] != i:
            j = order[i]
            order[i], order[j] = order[j], order[i]
            sign = -sign
    return sign


def shift(values, axis, k=1):
    """``f(x + k e_axis)`` for a field whose site axes start at position 1."""
    return np.roll(values, -k, axis=1 + axis)


def weight(metric, p, site=None):
    """Cell weight ``c^(n/2 - p) h^(n - 2p)`` at every site (or one site)."""
    lat = metric.lattice
    if not 0 <= p <= MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}]")
    w = metric.c ** (lat.n / 2 - p) * lat.h ** (lat.n - 2 * p)
    return w if site is None else float(w[tuple(site)])


def volume(metric):
    return weight(metric, 0)


def inner_form(phi, psi, metric):
    """Weighted L2 pairing of two forms of equal degree."""
    phi._compatible(psi)
    if metric.lattice != phi.lattice:
        raise ValueError("metric and forms live on different lattices")
    local = inner(phi.values, psi.values).sum(axis=0)
    return float(np.sum(weight(metric, phi.p) * local))


def norm(phi, metric):
    return float(np.sqrt(max(inner_form(phi, phi, metric), 0.0)))


def pointwise_norm2(phi, metric, site=None):
    """Orthonormal-frame norm squared of a 2-form, per site."""
    if phi.p != 2:
        raise ValueError("pointwise_norm2 expects a 2-form")
    lat = phi.lattice
    q = inner(phi.values, phi.values).sum(axis=0) * metric.c ** -2 * lat.h ** -4
    return q if site is None else float(q[tuple(site)])
