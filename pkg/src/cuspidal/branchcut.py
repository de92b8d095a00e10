"""Branch-aware square roots and the s <-> lambda parametrization near lambda = 0.

Every channel with threshold theta contributes a root w = sqrt(lambda - theta).
On the physical sheet Im w > 0; on the positive real axis the boundary value
from the upper half plane (w = +sqrt) is used.  The reference threshold d_k^2
is uniformized by s, lambda = s (2 d_k - s), so its root is i (s - d_k) and is
single valued in s.  Other thresholds carry an explicit sheet sign.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BranchError

THRESHOLD_ATOL = 1e-12


def sqrt_plus(z):
    """Square root with Im >= 0, continuous from above onto the positive axis.

    Implemented as i * sqrt(-z) with the principal root.  Points exactly on the
    positive real axis get +sqrt(z), the limit from the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    w = 1j * np.sqrt(-z)
    on_axis = (z.imag == 0) & (z.real > 0)
    w = np.where(on_axis, np.sqrt(np.abs(z.real)) + 0j, w)
    return w[()] if w.ndim == 0 else w


def lambda_of_s(s, d):
    return s * (2 * d - s)


def s_of_lambda(lam, d):
    """Physical-sheet preimage d - i sqrt_plus(lam - d^2); Re s >= d."""
    return d - 1j * sqrt_plus(np.asarray(lam, dtype=complex) - d * d)


def tau_one(thresholds):
    """Smallest strictly positive threshold (inf when there is none)."""
    pos = [float(t) for t in thresholds if t > THRESHOLD_ATOL]
    return min(pos) if pos else float("inf")


def same_threshold(a, b):
    return abs(a - b) <= THRESHOLD_ATOL * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class SpectralPoint:
    """A point of the two-sheeted spectral surface near lambda = 0.

    s is the uniformizing parameter for the reference fiber degree k
    (d = |f/2 - k|).  ``flipped`` lists the non-reference thresholds whose
    root is taken on the continued sheet, i.e. -sqrt_plus(lambda - theta).
    """

    s: complex
    k: int
    d: float
    flipped: frozenset = field(default_factory=frozenset)

    @property
    def lam(self):
        return complex(lambda_of_s(self.s, self.d))

    def is_reference(self, theta):
        return same_threshold(theta, self.d * self.d)

    def root(self, theta):
        """Continued value of sqrt(lambda - theta) at this point."""
        if self.is_reference(theta):
            return 1j * (self.s - self.d)
        w = complex(sqrt_plus(self.lam - theta))
        return -w if any(same_threshold(theta, t) for t in self.flipped) else w

    def outgoing_rate(self, theta):
        """Gauged outgoing exponent i * sqrt(lambda - theta)."""
        if self.is_reference(theta):
            return complex(self.d - self.s)
        return 1j * self.root(theta)

    @property
    def incoming_rate(self):
        return complex(self.s - self.d)

    @property
    def physical(self):
        return self.s.real >= self.d and not self.flipped

    def continue_to(self, s_new, thresholds):
        """Analytic continuation along a short straight segment to s_new.

        For each non-reference threshold the new root is the one of the two
        candidates closest to the current root.  Valid while the step is small
        compared with the distance to the branch points.
        """
        lam_new = complex(lambda_of_s(s_new, self.d))
        flipped = set()
        for theta in sorted(set(float(t) for t in thresholds)):
            if self.is_reference(theta):
                continue
            w_old = self.root(theta)
            w_new = complex(sqrt_plus(lam_new - theta))
            if abs(-w_new - w_old) < abs(w_new - w_old):
                flipped.add(theta)
        return SpectralPoint(complex(s_new), self.k, self.d, frozenset(flipped))


def point_from_lambda(lam, k, d):
    """Physical-sheet point over lam (the lambda-parametrization)."""
    return SpectralPoint(complex(s_of_lambda(lam, d)), k, float(d))


def channel_rate(pt, channel, direction):
    """Gauged exponent of the incoming or outgoing mode of a channel.

    Incoming modes exist only on the reference block (fiber degree k, nu = 0),
    where the rate is s - d_k.  Outgoing rates are i sqrt(lambda - theta_c).
    """
    if direction == "incoming":
        if channel.s != pt.k or channel.nu != 0:
            raise BranchError(f"channel {channel.label} is outside the reference block")
        return pt.incoming_rate
    if direction == "outgoing":
        return pt.outgoing_rate(channel.theta)
    raise ValueError(f"unknown direction {direction!r}")


def deck_flip(pt, tau1):
    """s -> 2 d_k - s, flipping the reference sheet; requires |lambda| < tau1."""
    if abs(pt.lam) >= tau1:
        raise BranchError(f"|lambda| = {abs(pt.lam):.3g} is not below tau1 = {tau1:.3g}")
    return replace(pt, s=complex(2 * pt.d - pt.s))
