"""Numerical settings shared by the pipeline stages."""
from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ScenarioError


@dataclass(frozen=True)
class Numerics:
    h_max: float | None = None      # cavity RK4 step; None means L / 2000
    halving_tol: float = 1e-9       # accepted change under step halving
    contour_rho: float | None = None  # residue contour radius; None means automatic
    contour_M: int = 64             # trapezoid points per loop
    deriv_rho: float = 0.05         # upper bound for derivative contours in s
    rank_tol: float = 1e-8          # relative eigenvalue cut for ker / im splits
    cond_max: float = 1e12          # matching matrix condition number treated as a pole
    sigma_floor: float = 1e-4       # minimum normalized sigma_min off the real axis
    pole_margin: float = 1e-3       # MS verification refuses tau this close to a pole
    scan_points: int = 400          # real-axis scan resolution on (d_k, 2 d_k]
    involution_tol: float = 1e-8    # middle involution checks
    tail_eps: float = 1e-16         # truncation level for decaying Maass-Selberg sums

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not isinstance(v, (int, float)) or v != v:
                raise ScenarioError(f"numerics.{f.name} must be a number")
            if v <= 0:
                raise ScenarioError(f"numerics.{f.name} must be positive, got {v}")
        if int(self.contour_M) != self.contour_M or self.contour_M < 8:
            raise ScenarioError("numerics.contour_M must be an integer >= 8")
