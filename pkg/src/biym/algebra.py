"""Fiber algebra so(m): skew-symmetric real matrices.

All kernels broadcast over leading axes, so a whole lattice field of shape
``(..., m, m)`` can be bracketed or paired in one call.  ``AlgebraElement``
is the single-element value type; the functions accept either it or raw
arrays.
"""
from dataclasses import dataclass

import numpy as np

from biym._rng import stream

__all__ = [
    "AlgebraElement",
    "bracket",
    "inner",
    "random_element",
    "generator",
    "dim_so",
    "skew_defect",
]


@dataclass(frozen=True)
class AlgebraElement:
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if skew_defect(a) > 1e-12 * max(1.0, np.abs(a).max(initial=0.0)):
            raise ValueError("entries are not skew-symmetric")
        object.__setattr__(self, "entries", a)

    @property
    def m(self):
        return self.entries.shape[0]

    def __add__(self, other):
        return AlgebraElement(self.entries + _raw(other))

    def __sub__(self, other):
        return AlgebraElement(self.entries - _raw(other))

    def __mul__(self, s):
        return AlgebraElement(float(s) * self.entries)

    __rmul__ = __mul__

    def __neg__(self):
        return AlgebraElement(-self.entries)


def _raw(x):
    return x.entries if isinstance(x, AlgebraElement) else np.asarray(x, dtype=float)


def _check_dims(a, b):
    if a.shape[-2:] != b.shape[-2:]:
        raise ValueError(f"fiber dimension mismatch: {a.shape[-2:]} vs {b.shape[-2:]}")


def dim_so(m):
    return m * (m - 1) // 2


def skew_defect(a):
    a = _raw(a)
    if a.size == 0:
        return 0.0
    return float(np.abs(a + np.swapaxes(a, -1, -2)).max())


def bracket(a, b):
    """Matrix commutator ``ab - ba`` (broadcasting over leading axes)."""
    wrap = isinstance(a, AlgebraElement) and isinstance(b, AlgebraElement)
    a, b = _raw(a), _raw(b)
    _check_dims(a, b)
    ab = a @ b
    # ba = (ab)^T for skew a, b, which keeps the result exactly skew
    out = ab - np.swapaxes(ab, -1, -2)
    return AlgebraElement(out) if wrap else out


def inner(a, b):
    """Pairing ``0.5 * tr(a^T b)``; returns an array over the leading axes."""
    a, b = _raw(a), _raw(b)
    _check_dims(a, b)
    out = 0.5 * np.einsum("...ij,...ij->...", a, b)
    return float(out) if np.ndim(out) == 0 else out


def generator(m, i, j):
    """Elementary skew generator with +1 at (i, j) and -1 at (j, i), 0-based."""
    e = np.zeros((m, m))
    e[i, j] = 1.0
    e[j, i] = -1.0
    return AlgebraElement(e)


def random_element(m, seed, amplitude=1.0):
    """Skew matrix with strictly-upper entries uniform in [-amplitude, amplitude]."""
    if m < 1:
        raise ValueError("m must be >= 1")
    a = np.zeros((m, m))
    iu = np.triu_indices(m, 1)
    a[iu] = stream(seed, "algebra.element").uniform(-amplitude, amplitude, size=len(iu[0]))
    a -= a.T
    return AlgebraElement(a)
