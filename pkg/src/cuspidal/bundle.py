"""Channel inventory of a fibration M -> B with fiber F.

Cohomology dimensions h[r][s] = dim H^r(B, H^s(F)) are input data.  Each
(r, s) block, optionally with a positive eigenvalue nu of the base Laplacian,
is one channel of the cusp model; tangential channels carry forms of degree
r + s = p, normal (du ^ .) channels forms with r + s = p - 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .errors import ScenarioError


@dataclass(frozen=True)
class Channel:
    r: int
    s: int
    nu: float
    mult: int
    normal: bool
    f: int

    @property
    def a(self):
        return self.f / 2 - self.s

    @property
    def d(self):
        return abs(self.a)

    @property
    def theta(self):
        return self.nu + self.d * self.d

    @property
    def degree(self):
        return self.r + self.s + (1 if self.normal else 0)

    @property
    def label(self):
        kind = "N" if self.normal else "T"
        return f"{kind}({self.r},{self.s};nu={self.nu:g})"


@dataclass(frozen=True)
class BundleData:
    f: int
    b: int
    h: Tuple[Tuple[int, ...], ...]
    nu_lists: Dict[Tuple[int, int], Tuple[Tuple[float, int], ...]] = field(default_factory=dict)
    star_signs: Dict[Tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        if self.f < 0 or self.b < 0:
            raise ScenarioError("fiber and base dimensions must be nonnegative")
        h = tuple(tuple(int(x) for x in row) for row in self.h)
        if len(h) != self.b + 1 or any(len(row) != self.f + 1 for row in h):
            raise ScenarioError(f"h must be a ({self.b + 1} x {self.f + 1}) table")
        if any(x < 0 for row in h for x in row):
            raise ScenarioError("cohomology dimensions must be nonnegative")
        object.__setattr__(self, "h", h)
        nus = {}
        for key, entries in dict(self.nu_lists).items():
            r, s = (int(x) for x in key)
            if not (0 <= r <= self.b and 0 <= s <= self.f):
                raise ScenarioError(f"nu list for ({r},{s}) is outside the bidegree range")
            items = tuple((float(nu), int(m)) for nu, m in entries)
            vals = [nu for nu, _ in items]
            if any(nu <= 0 for nu in vals) or any(m <= 0 for _, m in items):
                raise ScenarioError(f"nu list for ({r},{s}) needs positive eigenvalues and multiplicities")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ScenarioError(f"nu list for ({r},{s}) must be strictly ascending")
            if items:
                nus[(r, s)] = items
        object.__setattr__(self, "nu_lists", nus)
        signs = {}
        for key, sign in dict(self.star_signs).items():
            r, s = (int(x) for x in key)
            if sign not in (1, -1):
                raise ScenarioError("star signs must be +1 or -1")
            signs[(r, s)] = int(sign)
        object.__setattr__(self, "star_signs", signs)

    @property
    def n(self):
        return self.b + self.f

    def dim(self, r, s):
        if 0 <= r <= self.b and 0 <= s <= self.f:
            return self.h[r][s]
        return 0

    def is_dual_symmetric(self):
        return all(self.dim(r, s) == self.dim(self.b - r, self.f - s)
                   for r in range(self.b + 1) for s in range(self.f + 1))


def _block_channels(bundle, total, normal, include_nonzero_nu):
    out = []
    for s in range(bundle.f + 1):
        r = total - s
        if not 0 <= r <= bundle.b:
            continue
        if bundle.h[r][s] > 0:
            out.append(Channel(r, s, 0.0, bundle.h[r][s], normal, bundle.f))
        if include_nonzero_nu:
            for nu, m in bundle.nu_lists.get((r, s), ()):
                out.append(Channel(r, s, nu, m, normal, bundle.f))
    return out


def channels_for_degree(bundle, p, include_nonzero_nu=True):
    """All channels carrying p-forms: tangential (r+s=p) then normal (r+s=p-1).

    Within each kind the order is by fiber degree s, then r, then nu.
    """
    if p < 0 or p > bundle.n + 1:
        return []
    tang = _block_channels(bundle, p, False, include_nonzero_nu)
    norm = _block_channels(bundle, p - 1, True, include_nonzero_nu)
    key = lambda c: (c.normal, c.s, c.r, c.nu)
    return sorted(tang, key=key) + sorted(norm, key=key)


def total_cohomology(bundle, p):
    return sum(bundle.dim(p - s, s) for s in range(bundle.f + 1)) if p >= 0 else 0


def kunneth_table(betti_B, betti_F):
    """Trivial product bundle: h[r][s] = b_r(B) * b_s(F), no nu lists."""
    bB = [int(x) for x in betti_B]
    bF = [int(x) for x in betti_F]
    if not bB or not bF or any(x < 0 for x in bB + bF):
        raise ScenarioError("Betti numbers must be nonempty lists of nonnegative integers")
    h = tuple(tuple(x * y for y in bF) for x in bB)
    return BundleData(f=len(bF) - 1, b=len(bB) - 1, h=h)


def star_square_sign(bundle, q):
    """Sign of the Hodge star squared on q-forms of the n-dimensional M."""
    return -1 if (q * (bundle.n - q)) % 2 else 1


def _block_sign(bundle, r, s):
    """Star sign of the (r, s) block; the partner block carries the square sign."""
    partner = (bundle.b - r, bundle.f - s)
    if (r, s) <= partner:
        return bundle.star_signs.get((r, s), 1)
    return star_square_sign(bundle, r + s) * bundle.star_signs.get(partner, 1)


def _check_dual(bundle, c):
    rr, ss = bundle.b - c.r, bundle.f - c.s
    if bundle.dim(c.r, c.s) != bundle.dim(rr, ss):
        raise ScenarioError(f"duality dimension constraint fails for {c.label}")
    if c.nu != 0:
        mine = dict(bundle.nu_lists.get((c.r, c.s), ()))
        theirs = dict(bundle.nu_lists.get((rr, ss), ()))
        if theirs.get(c.nu) != mine.get(c.nu):
            raise ScenarioError(f"nu spectrum is not star-symmetric for {c.label}")


def star_map(bundle, c):
    """Channel-level Hodge star: (r, s) -> (b - r, f - s) with its sign."""
    _check_dual(bundle, c)
    img = Channel(bundle.b - c.r, bundle.f - c.s, c.nu, c.mult, c.normal, c.f)
    return img, _block_sign(bundle, c.r, c.s)


def star_block(bundle, c):
    """Signed permutation realizing the star on the basis of one channel block.

    Columns index the basis of ``c``, rows the basis of its image.  For a
    self-paired block the basis is reversed so the square equals the star
    square sign; this needs an even multiplicity when that sign is -1.
    """
    img, sign = star_map(bundle, c)
    m = c.mult
    mat = np.zeros((m, m))
    if (img.r, img.s) != (c.r, c.s):
        mat[np.arange(m), np.arange(m)] = sign
        return mat
    eps = star_square_sign(bundle, c.r + c.s)
    for i in range(m):
        j = m - 1 - i
        if i == j:
            if eps != 1:
                raise ScenarioError(f"self-paired block {c.label} has odd multiplicity but star^2 = -1")
            mat[j, i] = sign
        else:
            mat[j, i] = sign if i < j else eps * sign
    return mat


def star_matrix(bundle, channels_from, channels_to):
    """Assemble the star on a full channel list into the coordinates of ``channels_to``."""
    offs_to = {}
    pos = 0
    for c in channels_to:
        offs_to[(c.r, c.s, c.nu, c.normal)] = (pos, c.mult)
        pos += c.mult
    total = pos
    out = np.zeros((total, sum(c.mult for c in channels_from)))
    col = 0
    for c in channels_from:
        img, _ = star_map(bundle, c)
        key = (img.r, img.s, img.nu, img.normal)
        if key not in offs_to:
            raise ScenarioError(f"star image of {c.label} is missing from the target channel list")
        row, m = offs_to[key]
        out[row:row + m, col:col + c.mult] = star_block(bundle, c)
        col += c.mult
    return out
