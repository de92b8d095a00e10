"""Matrix Sturm-Liouville cavity on [-L, 0] standing in for the compact part.

The cavity solves Y'' = (Theta + V(u) - lambda) Y with a left boundary
condition at u = -L and reports its boundary data (Y(0), Y'(0)) for a basis of
admissible solutions.  The DtN map is N = Y'(0) Y(0)^-1.  All computations are
batched over lambda.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CavitySingular, ConvergenceError, ScenarioError

HERMITIAN_TOL = 1e-12


def _as_hermitian(mat, n, what):
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim == 0:
        mat = mat * np.eye(n)
    if mat.shape != (n, n):
        raise ScenarioError(f"{what} must be {n}x{n}, got {mat.shape}")
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERMITIAN_TOL * max(1.0, np.max(np.abs(mat))):
        raise ScenarioError(f"{what} is not Hermitian")
    return (mat + mat.conj().T) / 2


class Potential:
    """Hermitian matrix potential on [-L, 0]; ``values(u)`` has shape (len(u), n, n)."""

    tag = "abstract"
    degree_free = False

    def values(self, u):
        raise NotImplementedError


@dataclass
class ZeroPotential(Potential):
    n: int
    tag = "zero"
    degree_free = True

    def values(self, u):
        return np.zeros((np.size(u), self.n, self.n), dtype=complex)


@dataclass
class ConstantPotential(Potential):
    matrix: np.ndarray
    tag = "constant"

    def __post_init__(self):
        self.matrix = _as_hermitian(self.matrix, np.shape(self.matrix)[0] if np.ndim(self.matrix) else 1, "constant potential")
        self.degree_free = bool(np.allclose(self.matrix, self.matrix[0, 0] * np.eye(len(self.matrix))))

    def values(self, u):
        return np.broadcast_to(self.matrix, (np.size(u),) + self.matrix.shape).copy()


@dataclass
class PiecewisePotential(Potential):
    """Constant matrices on the intervals [breaks[i], breaks[i+1]) covering [-L, 0]."""

    breaks: np.ndarray
    matrices: list
    tag = "piecewise"

    def __post_init__(self):
        self.breaks = np.asarray(self.breaks, dtype=float)
        n = np.shape(self.matrices[0])[0]
        self.matrices = np.array([_as_hermitian(m, n, "piecewise potential block") for m in self.matrices])
        if len(self.breaks) != len(self.matrices) + 1 or np.any(np.diff(self.breaks) <= 0):
            raise ScenarioError("piecewise potential needs ascending breaks, one more than blocks")

    def values(self, u):
        idx = np.clip(np.searchsorted(self.breaks, np.atleast_1d(u), side="right") - 1, 0, len(self.matrices) - 1)
        return self.matrices[idx]


@dataclass
class SampledPotential(Potential):
    """Samples on a uniform grid, interpolated by a cubic spline per entry."""

    u: np.ndarray
    samples: np.ndarray
    tag = "samples"

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.samples = np.asarray(self.samples, dtype=complex)
        n = self.samples.shape[1]
        for k, m in enumerate(self.samples):
            self.samples[k] = _as_hermitian(m, n, f"potential sample {k}")
        self._spline = CubicSpline(self.u, self.samples, axis=0)

    def values(self, u):
        return self._spline(np.atleast_1d(u))


@dataclass
class SmoothRandomPotential(Potential):
    """sum_j H_j cos(j pi (u + L) / L) with seeded random Hermitian H_j.

    A reproducible smooth coupling of all channels; ``scale`` bounds the
    operator norm of each H_j.
    """

    n: int
    L: float
    seed: int
    scale: float = 0.3
    modes: int = 3
    offset: float = 0.0
    tag = "smooth-random"

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        hs = []
        for j in range(self.modes):
            a = rng.normal(size=(self.n, self.n)) + 1j * rng.normal(size=(self.n, self.n))
            herm = (a + a.conj().T) / 2
            hs.append(self.scale * herm / max(np.linalg.norm(herm, 2), 1e-300) / (j + 1))
        self._h = np.array(hs)

    def values(self, u):
        u = np.atleast_1d(u)
        ph = np.cos(np.outer(u + self.L, np.arange(self.modes)) * np.pi / self.L)
        return np.einsum("kj,jab->kab", ph, self._h) + self.offset * np.eye(self.n)


def load_potential_csv(path, n):
    """Rows: u, then the n*n entries column-major with re/im interleaved."""
    us, mats = [], []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        next(rows)
        for row in rows:
            vals = [float(x) for x in row]
            if len(vals) != 1 + 2 * n * n:
                raise ScenarioError(f"potential row has {len(vals)} fields, expected {1 + 2 * n * n}")
            us.append(vals[0])
            z = np.array(vals[1::2]) + 1j * np.array(vals[2::2])
            mats.append(z.reshape((n, n), order="F"))
    return SampledPotential(np.array(us), np.array(mats))


def _bc_data(bc, n, where):
    kind = bc[0] if isinstance(bc, tuple) else bc
    if kind == "dirichlet":
        return np.zeros((n, n), complex), np.eye(n, dtype=complex)
    if kind == "neumann":
        return np.eye(n, dtype=complex), np.zeros((n, n), complex)
    if kind == "robin":
        return np.eye(n, dtype=complex), _as_hermitian(bc[1], n, f"{where} Robin matrix")
    raise ScenarioError(f"unknown {where} boundary condition {bc!r}")


@dataclass
class CompactModel:
    """Cavity [-L, 0] coupled to the cusp at u = 0.

    vertex 'transparent' joins cavity and cusp with continuous value and
    derivative; 'dirichlet', 'neumann' and ('robin', R) replace the cavity by a
    boundary condition at u = 0.
    """

    L: float
    channels: list
    V: Potential = None
    left_bc: object = "dirichlet"
    vertex: object = "transparent"
    h_max: float = None
    halving_tol: float = 1e-9
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.L <= 0:
            raise ScenarioError("cavity length must be positive")
        if self.V is None:
            self.V = ZeroPotential(self.dim)
        if self.h_max is None:
            self.h_max = self.L / 2000
        if self.h_max <= 0:
            raise ScenarioError("h_max must be positive")
        probe = self.V.values(np.array([-self.L]))
        if probe.shape[1:] != (self.dim, self.dim):
            raise ScenarioError(f"potential is {probe.shape[1:]}, channel space has dimension {self.dim}")
        _bc_data(self.left_bc, self.dim, "left")
        self._vertex_data = None if self.vertex == "transparent" else _bc_data(self.vertex, self.dim, "vertex")

    @property
    def dim(self):
        return sum(c.mult for c in self.channels)

    @property
    def thetas(self):
        return np.concatenate([np.full(c.mult, c.theta) for c in self.channels]) if self.channels else np.zeros(0)

    @property
    def has_interior(self):
        return self._vertex_data is None

    @property
    def hermitian(self):
        return True

    @property
    def degree_free(self):
        """The model does not depend on the channel list beyond its size."""
        return (not self.has_interior) or self.V.degree_free

    def steps(self):
        return int(np.ceil(self.L / self.h_max - 1e-9))

    def _q_nodes(self, nsteps):
        key = ("q", nsteps)
        if key not in self._cache:
            u = np.linspace(-self.L, 0.0, 2 * nsteps + 1)
            self._cache[key] = self.V.values(u) + np.diag(self.thetas)[None]
        return self._cache[key]

    def _rk4(self, lams, nsteps, keep=False):
        lams = np.asarray(lams, dtype=complex)
        n = self.dim
        h = self.L / nsteps
        q = self._q_nodes(nsteps)
        eye = np.eye(n)
        y0, y1 = _bc_data(self.left_bc, n, "left")
        Y = np.broadcast_to(y0, (lams.size, n, n)).copy()
        P = np.broadcast_to(y1, (lams.size, n, n)).copy()
        shift = lams[:, None, None] * eye
        path = [Y.copy()] if keep else None
        for j in range(nsteps):
            qa = q[2 * j] - shift
            qm = q[2 * j + 1] - shift
            qb = q[2 * j + 2] - shift
            k1y, k1p = P, qa @ Y
            k2y, k2p = P + 0.5 * h * k1p, qm @ (Y + 0.5 * h * k1y)
            k3y, k3p = P + 0.5 * h * k2p, qm @ (Y + 0.5 * h * k2y)
            k4y, k4p = P + h * k3p, qb @ (Y + h * k3y)
            Y = Y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
            P = P + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
            if keep:
                path.append(Y.copy())
        return Y, P, (np.array(path) if keep else None)

    def propagate(self, lams):
        """Boundary data (Y(0), Y'(0)) of the left-BC basis, shape (B, n, n) each.

        Fixed-step RK4 at h and h/2; the h/2 result is returned and the
        difference is the error estimate checked against ``halving_tol``.
        """
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        N = self.steps()
        Yc, Pc, _ = self._rk4(lams, N)
        Yf, Pf, _ = self._rk4(lams, 2 * N)
        scale = np.maximum(1.0, np.maximum(np.abs(Yf).max(axis=(1, 2)), np.abs(Pf).max(axis=(1, 2))))
        err = np.maximum(np.abs(Yf - Yc).max(axis=(1, 2)), np.abs(Pf - Pc).max(axis=(1, 2))) / scale
        if np.any(err > self.halving_tol):
            worst = int(np.argmax(err))
            raise ConvergenceError(f"step halving changed the cavity solution by {err[worst]:.2e} "
                                   f"at lambda = {lams[worst]:.6g}; decrease h_max")
        return Yf, Pf

    def boundary_data(self, lams):
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        if self._vertex_data is not None:
            y0, y1 = self._vertex_data
            return (np.broadcast_to(y0, (lams.size,) + y0.shape).copy(),
                    np.broadcast_to(y1, (lams.size,) + y1.shape).copy())
        return self.propagate(lams)

    def interior(self, lam, coeffs):
        """Samples of Y(u) c on the fine grid: (u, array of shape (n, len(u)))."""
        if not self.has_interior:
            return np.zeros(0), np.zeros((self.dim, 0), complex)
        N = 2 * self.steps()
        _, _, path = self._rk4(np.array([lam]), N, keep=True)
        u = np.linspace(-self.L, 0.0, N + 1)
        vals = path[:, 0] @ np.asarray(coeffs, dtype=complex)
        return u, vals.T


def _check_regular(Y0, Y1, lam, cond_max):
    """Y(0) is singular when its smallest singular value is negligible next to (Y(0), Y'(0))."""
    scale = np.linalg.norm(np.vstack([Y0, Y1]), 2)
    smin = np.linalg.svd(Y0, compute_uv=False).min()
    if smin * cond_max <= scale:
        raise CavitySingular(f"Y(0) is singular to tolerance at lambda = {lam}; perturb lambda")


def dtn(model, lam, cond_max=1e12):
    """N(lambda) = Y'(0) Y(0)^-1 for a single lambda."""
    Y0, Y1 = model.boundary_data(np.array([lam]))
    Y0, Y1 = Y0[0], Y1[0]
    _check_regular(Y0, Y1, lam, cond_max)
    return np.linalg.solve(Y0.T, Y1.T).T


def interior_field(model, lam, boundary_value):
    """The left-BC solution with prescribed value at u = 0, sampled on the cavity grid."""
    Y0, Y1 = model.boundary_data(np.array([lam]))
    _check_regular(Y0[0], Y1[0], lam, 1e12)
    c = np.linalg.solve(Y0[0], np.asarray(boundary_value, dtype=complex))
    return model.interior(lam, c)
