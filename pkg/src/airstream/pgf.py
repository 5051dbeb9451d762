"""Finite probability generating functions (PGFs) stored as dense coefficient arrays.

A PGF here is a polynomial ``p(z) = sum_i c[i] * z**i`` whose coefficients are
probabilities.  Coefficient arrays may carry leading batch axes so that whole
parameter sweeps (e.g. a grid of candidate busy probabilities) evaluate in one
vectorised pass; the polynomial axis is always the last one.
"""
from __future__ import annotations

from typing import Iterable, Sequence, Union

import numpy as np

# Coefficients more negative than this indicate a real bug rather than float noise.
_NEG_TOL = 1e-9

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _pad_last(c: np.ndarray, n: int) -> np.ndarray:
    """Zero-pad the polynomial axis of ``c`` up to length ``n``."""
    if c.shape[-1] >= n:
        return c
    pad = [(0, 0)] * (c.ndim - 1) + [(0, n - c.shape[-1])]
    return np.pad(c, pad)


class Pgf:
    """Dense-coefficient polynomial distribution with batch support."""

    __slots__ = ("c",)

    def __init__(self, coeffs: ArrayLike, clamp: bool = True):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if clamp:
            if np.any(c < -_NEG_TOL):
                raise ValueError(f"PGF coefficient below tolerance: min={c.min()}")
            c = np.clip(c, 0.0, None)
        self.c = c

    # -- constructors -------------------------------------------------------
    @classmethod
    def unit(cls) -> "Pgf":
        """Degenerate distribution at 0, i.e. the constant polynomial 1."""
        return cls(np.array([1.0]))

    @classmethod
    def bernoulli(cls, p: ArrayLike) -> "Pgf":
        """(1-p) + p*z.  ``p`` may be an array (one Bernoulli per batch entry)."""
        p = np.asarray(p, dtype=float)
        if np.any(p < -_NEG_TOL) or np.any(p > 1 + _NEG_TOL):
            raise ValueError("Bernoulli parameter outside [0, 1]")
        p = np.clip(p, 0.0, 1.0)
        return cls(np.stack([1.0 - p, p], axis=-1))

    # -- basic queries -------------------------------------------------------
    @property
    def degree(self) -> int:
        return self.c.shape[-1] - 1

    def at0(self) -> np.ndarray:
        """p(0): probability mass at zero."""
        return self.c[..., 0]

    def at1(self) -> np.ndarray:
        """p(1): total mass (1 for a proper distribution)."""
        return self.c.sum(axis=-1)

    def mean(self) -> np.ndarray:
        """p'(1): expected value."""
        idx = np.arange(self.c.shape[-1], dtype=float)
        return (self.c * idx).sum(axis=-1)

    def __call__(self, z: float) -> np.ndarray:
        powers = np.power(float(z), np.arange(self.c.shape[-1]))
        return (self.c * powers).sum(axis=-1)

    # -- algebra -------------------------------------------------------------
    def __add__(self, other: "Pgf") -> "Pgf":
        n = max(self.c.shape[-1], other.c.shape[-1])
        return Pgf(_pad_last(self.c, n) + _pad_last(other.c, n))

    def scale(self, w: ArrayLike) -> "Pgf":
        """Multiply every coefficient by scalar/batch weight ``w``."""
        w = np.asarray(w, dtype=float)
        return Pgf(self.c * w[..., None])

    def __mul__(self, other: "Pgf") -> "Pgf":
        """Polynomial (distribution of a sum) product, batch aware."""
        a, b = self.c, other.c
        if b.shape[-1] > a.shape[-1]:
            a, b = b, a
        na, nb = a.shape[-1], b.shape[-1]
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (na + nb - 1,)
        out = np.zeros(shape)
        for i in range(nb):
            out[..., i : i + na] += a * b[..., i : i + 1]
        return Pgf(out)

    def shift_div(self) -> "Pgf":
        """Exact (p(z) - p(0)) / z: drop the constant term and shift down."""
        if self.c.shape[-1] == 1:
            return Pgf(np.zeros_like(self.c))
        return Pgf(self.c[..., 1:].copy())

    def normalized(self) -> "Pgf":
        tot = self.at1()
        return Pgf(self.c / np.where(tot == 0.0, 1.0, tot)[..., None])

    def take(self, idx) -> "Pgf":
        """Select one batch entry (keeps the polynomial axis)."""
        return Pgf(self.c[idx])

    def __repr__(self) -> str:  # pragma: no cover
        return f"Pgf({self.c!r})"


def lincomb(pairs: Iterable[tuple[ArrayLike, Pgf]]) -> Pgf:
    """Weighted sum ``sum_k w_k * p_k(z)`` with length alignment."""
    pairs = [(np.asarray(w, dtype=float), p) for w, p in pairs]
    n = max(p.c.shape[-1] for _, p in pairs)
    out = None
    for w, p in pairs:
        term = _pad_last(p.c, n) * w[..., None]
        out = term if out is None else out + term
    return Pgf(out)
