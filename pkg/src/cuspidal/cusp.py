"""Exact solutions on the cusp half-line [0, inf) in the gauged frame.

In the gauged frame each channel operator is -d^2/du^2 + theta_c and the L^2
inner product is the plain integral in u, so a cusp field is a finite sum of
exponentials per basis coordinate and every norm is available in closed form.
Un-gauged values are recovered by multiplying with exp(a_c u).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .branchcut import sqrt_plus
from .errors import BranchError

_SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class CuspField:
    """sum_j coef_j exp(rate_j u) on coordinate coord_j, for u >= 0."""

    dim: int
    coord: np.ndarray
    coef: np.ndarray
    rate: np.ndarray

    @classmethod
    def from_terms(cls, dim, terms):
        terms = list(terms)
        if not terms:
            return cls(dim, np.zeros(0, int), np.zeros(0, complex), np.zeros(0, complex))
        coord, coef, rate = zip(*terms)
        return cls(dim, np.asarray(coord, int), np.asarray(coef, complex), np.asarray(rate, complex))

    def __add__(self, other):
        if self.dim != other.dim:
            raise ValueError("cusp fields live on different channel spaces")
        return CuspField(self.dim, np.concatenate([self.coord, other.coord]),
                         np.concatenate([self.coef, other.coef]),
                         np.concatenate([self.rate, other.rate]))

    def scaled(self, factor):
        return CuspField(self.dim, self.coord, self.coef * factor, self.rate)

    def values(self, u, deriv=0):
        """Field (or its deriv-th u-derivative) on a grid; shape (dim, len(u))."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.zeros((self.dim, u.size), dtype=complex)
        terms = self.coef[:, None] * self.rate[:, None] ** deriv * np.exp(np.outer(self.rate, u))
        np.add.at(out, self.coord, terms)
        return out

    def l2_flags(self):
        """Per coordinate: every term with nonzero coefficient decays."""
        ok = np.ones(self.dim, dtype=bool)
        bad = (self.rate.real >= 0) & (self.coef != 0)
        ok[self.coord[bad]] = False
        return ok

    def _pairs(self):
        same = self.coord[:, None] == self.coord[None, :]
        sig = self.rate[:, None] + np.conj(self.rate)[None, :]
        cc = self.coef[:, None] * np.conj(self.coef)[None, :]
        return same, sig, cc


def free_solution(channel, pt, sign, dim=1, coord=0):
    """exp(+- i sqrt(lambda - theta) u) with value 1 at u = 0."""
    rate = 1j * pt.root(channel.theta) * (1 if sign > 0 else -1)
    return CuspField.from_terms(dim, [(coord, 1.0, rate)])


def sin_solution(channel, lam, dim=1, coord=0):
    """(e_+ - e_-) / 2i = sin(w u): zero at u = 0, derivative w there."""
    w = complex(sqrt_plus(complex(lam) - channel.theta))
    return CuspField.from_terms(dim, [(coord, 1 / 2j, 1j * w), (coord, -1 / 2j, -1j * w)])


def _on_spectrum(channel, lam):
    lam = complex(lam)
    return lam.imag == 0 and lam.real >= channel.theta


def resolvent_kernel(channel, lam, u, r, gauged=True):
    """Dirichlet resolvent kernel of -d^2 + theta - lam on the half line.

    (i/2w) (exp(i w |u-r|) - exp(i w (u+r))), w = sqrt_plus(lam - theta); the
    un-gauged kernel carries the extra factor exp(a (u + r)).
    """
    if _on_spectrum(channel, lam):
        raise BranchError(f"lambda = {lam} lies on the continuous spectrum of {channel.label}")
    w = complex(sqrt_plus(complex(lam) - channel.theta))
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    A = np.abs(u - r)
    B = u + r
    big = np.abs(w) * B >= _SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = 1j / (2 * w) * (np.exp(1j * w * A) - np.exp(1j * w * B)) if w != 0 else 0 * B
    # (i/2) sum_{n>=1} (i w)^(n-1) i (A^n - B^n) / n!  truncated at n = 4
    iw = 1j * w
    series = -0.5 * ((A - B) + iw * (A**2 - B**2) / 2 + iw**2 * (A**3 - B**3) / 6
                     + iw**3 * (A**4 - B**4) / 24)
    K = np.where(big, exact, series)
    if not gauged:
        K = K * np.exp(channel.a * B)
    return K[()] if K.ndim == 0 else K


def apply_resolvent(channel, lam, f_samples, U):
    """g(u) = int_0^U K(u, r) f(r) dr on the uniform grid of f by the trapezoid rule."""
    f_samples = np.asarray(f_samples)
    n = f_samples.size - 1
    h = U / n
    w = complex(sqrt_plus(complex(lam) - channel.theta))
    if abs(w) > 0 and h >= np.pi / (4 * abs(w)):
        raise ValueError(f"step {h:.3g} does not resolve oscillation scale pi/(4|w|) = {np.pi / (4 * abs(w)):.3g}")
    u = np.linspace(0.0, U, n + 1)
    K = resolvent_kernel(channel, lam, u[:, None], u[None, :])
    wts = np.full(n + 1, h)
    wts[0] = wts[-1] = h / 2
    g = K @ (wts * f_samples)
    g[0] = 0.0
    return g


def l2_norm_tail(field, start=0.0):
    """Closed-form int_start^inf |field|^2 du (summed over coordinates)."""
    same, sig, cc = field._pairs()
    live = same & (cc != 0)
    if np.any(sig.real[live] >= 0):
        i, j = np.argwhere(live & (sig.real >= 0))[0]
        raise ArithmeticError(f"divergent tail on coordinate {field.coord[i]} (rate pair {field.rate[i]}, {field.rate[j]})")
    if not live.any():
        return 0.0
    val = -np.sum(cc[live] * np.exp(sig[live] * start) / sig[live])
    return float(val.real)


def inner_segment(F, G, a, b):
    """Closed-form int_a^b <F(u), G(u)> du; exact also for purely oscillating pairs."""
    same = F.coord[:, None] == G.coord[None, :]
    sig = F.rate[:, None] + np.conj(G.rate)[None, :]
    cc = F.coef[:, None] * np.conj(G.coef)[None, :]
    live = same & (cc != 0)
    if not live.any():
        return 0j
    sg, c = sig[live], cc[live]
    x = sg * (b - a)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    ratio = np.where(small, 1 + x / 2 + x * x / 6, np.expm1(safe) / safe)
    return complex(np.sum(c * np.exp(sg * a) * (b - a) * ratio))


def l2_norm_segment(field, a, b):
    """Closed-form int_a^b |field|^2 du."""
    return inner_segment(field, field, a, b).real
