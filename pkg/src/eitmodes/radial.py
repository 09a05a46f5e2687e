"""Bound transverse eigenmodes of the radial equation, one angular channel at a time.

The radial operator ``-(1/r) d/dr (r d/dr) + m^2/r^2 + V(r)`` is discretized by
finite volumes on nodes ``r_j = j dr`` (j = 0..n_points, R = n_points dr).  Node
j owns the annulus ``[r_j - dr/2, r_j + dr/2]`` (``[0, dr/2]`` at the axis), whose
area ``w_j`` is the quadrature weight used for every radial integral.  Scaling
the unknowns by ``sqrt(w_j)`` (a discrete Liouville transform, ``u ~ sqrt(r) psi``)
makes the matrix symmetric tridiagonal.

Boundary handling falls out of the stencil: the flux through r = 0 vanishes,
which is the regular (psi'(0) = 0) condition for m = 0; for m != 0 the axis node
is pinned to zero; psi(R) = 0 always.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import physics
from ._validation import check_int, check_negative_detuning, check_positive
from .errors import ConvergenceFailed, ProfileZero, TruncationFailed
from .physics import MediumBeamConfig

logger = logging.getLogger(__name__)

DEFAULT_N_POINTS = 4000
MIN_N_POINTS = 200
NODE_NOISE_FLOOR = 1e-9
# smallest positive abstol asks LAPACK's bisection for full working accuracy
_BISECTION_TOL = 2.0 * np.finfo(float).tiny


class UnconvergedModeWarning(UserWarning):
    """An eigenvalue reached the truncation barrier V(R) and the mode was dropped."""


@dataclass(frozen=True)
class RadialGrid:
    n_points: int
    dr: float
    m_channel: int = 0

    def __post_init__(self):
        check_int(self.n_points, "n_points", MIN_N_POINTS)
        check_positive(self.dr, "dr")
        check_int(self.m_channel, "m_channel")

    @classmethod
    def from_radius(cls, R: float, n_points: int = DEFAULT_N_POINTS, m_channel: int = 0) -> RadialGrid:
        return cls(n_points, check_positive(R, "R") / n_points, m_channel)

    @property
    def R(self) -> float:
        return self.n_points * self.dr

    @property
    def r(self) -> np.ndarray:
        """All node radii 0, dr, ..., R (m)."""
        return self.dr * np.arange(self.n_points + 1)

    @property
    def weights(self) -> np.ndarray:
        """Annulus areas per radian, so that sum(w * f) approximates the integral of r f dr."""
        dr = self.dr
        w = self.r * dr
        w[0] = dr * dr / 8.0
        w[-1] = 0.5 * (self.R**2 - (self.R - 0.5 * dr) ** 2)
        return w

    @property
    def first_unknown(self) -> int:
        return 0 if self.m_channel == 0 else 1

    def with_m(self, m: int) -> RadialGrid:
        return RadialGrid(self.n_points, self.dr, m)

    def integrate(self, values) -> float:
        """Radial quadrature of r * values over [0, R]."""
        return float(np.dot(self.weights, values))


@dataclass(frozen=True, eq=False)
class TridiagonalSystem:
    """Symmetric tridiagonal operator acting on u_j = sqrt(w_j) psi_j for the unknown nodes."""

    diag: np.ndarray
    offdiag: np.ndarray
    grid: RadialGrid
    nodes: np.ndarray  # indices into grid.r of the unknowns

    @property
    def size(self) -> int:
        return self.diag.size

    def to_psi(self, u: np.ndarray) -> np.ndarray:
        psi = np.zeros(self.grid.n_points + 1, dtype=u.dtype)
        psi[self.nodes] = u / np.sqrt(self.grid.weights[self.nodes])
        return psi

    def to_u(self, psi: np.ndarray) -> np.ndarray:
        return np.asarray(psi)[self.nodes] * np.sqrt(self.grid.weights[self.nodes])

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[:-1] += self.offdiag * u[1:]
        out[1:] += self.offdiag * u[:-1]
        return out


@dataclass(frozen=True, eq=False)
class TransverseMode:
    """One bound eigenpair (m, n, beta_mn, psi_mn) at a fixed detuning.

    ``psi`` is sampled on every node of ``grid`` (including r = 0 and r = R) in
    m^-1, normalized to ``sum(grid.weights * psi**2) == 1``, with its first
    significant sample positive.
    """

    m: int
    n: int
    beta: float
    psi: np.ndarray
    nodes: int
    delta: float
    grid: RadialGrid

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def norm(self) -> float:
        return self.grid.integrate(self.psi**2)

    def expectation(self, values) -> float:
        return self.grid.integrate(self.psi**2 * values)

    def rms_radius(self) -> float:
        return math.sqrt(self.expectation(self.grid.r**2))

    def wavevector_mismatch(self, config: MediumBeamConfig) -> float:
        """Delta_mn = delta/c - beta/(2 k0): longitudinal phase rate relative to k0 (rad/m)."""
        return self.delta / config.c - self.beta / (2.0 * physics.wavenumber(config))

    def same_basis(self, other: TransverseMode) -> bool:
        return self.m == other.m and self.delta == other.delta and self.grid == other.grid


@dataclass
class SpectrumRequest:
    m_list: Sequence[int]
    n_max: int
    delta: float
    n_points: int | None = None
    R: float | None = None
    dropped: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.m_list = [check_int(m, "m") for m in self.m_list]
        if not self.m_list:
            raise ValueError("m_list is empty")
        self.n_max = check_int(self.n_max, "n_max", 1)
        self.delta = check_negative_detuning(self.delta)
        if self.n_points is not None:
            self.n_points = check_int(self.n_points, "n_points", MIN_N_POINTS)
        if self.R is not None:
            self.R = check_positive(self.R, "R")


def harmonic_beta(config: MediumBeamConfig, delta: float, m: int, n: int) -> float:
    """2-D harmonic-oscillator estimate of beta_mn for the Gaussian well.

    Expanding V0 exp(r^2/a^2) ~ V0 (1 + r^2/a^2) gives levels
    V0 + (2(n-1) + |m| + 1) * 2 sqrt(V0) / a.
    """
    v0 = physics.well_floor(config, delta)
    return v0 + (2 * (n - 1) + abs(m) + 1) * 2.0 * math.sqrt(v0) / config.beam_radius


def auto_truncation_radius(
    config: MediumBeamConfig,
    delta: float,
    beta_guess: float | None = None,
    *,
    n_max: int = 3,
    m_max: int = 0,
    barrier_factor: float = 10.0,
    bounds: tuple[float, float] = (3.0, 20.0),
    search_step: float = 0.05,
) -> float:
    """Smallest radius where V(R) >= barrier_factor * beta_guess, clamped to [3a, 20a].

    The search walks outward on a coarse grid of ``search_step * a``.  For the
    Gaussian profile the condition is solved in closed form instead.
    """
    delta = check_negative_detuning(delta)
    a = config.beam_radius
    if beta_guess is None:
        v0 = physics.well_floor(config, delta)
        beta_guess = v0 + (2 * n_max + abs(m_max) + 1) * 2.0 * math.sqrt(v0) / a
    target = barrier_factor * beta_guess
    lo, hi = bounds[0] * a, bounds[1] * a

    if config.profile.kind == "gaussian":
        v0 = physics.well_floor(config, delta)
        ratio = target / v0
        R = a * math.sqrt(math.log(ratio)) if ratio > 1.0 else 0.0
        if R > hi:
            raise TruncationFailed(f"barrier {target:.3g} m^-2 not reached within {bounds[1]:g} a")
        return min(max(R, lo), hi)

    radii = a * search_step * np.arange(1, int(round(bounds[1] / search_step)) + 1)
    # the far tail of a user table may underflow the Omega floor; stop there
    values = []
    for r in radii:
        try:
            values.append(float(physics.potential(config, delta, r)))
        except ProfileZero:
            break
    hits = np.nonzero(np.asarray(values) >= target)[0]
    if hits.size == 0:
        raise TruncationFailed(
            f"V(r) never reaches {target:.3g} m^-2 for r <= {bounds[1]:g} a; "
            "the control profile does not confine this detuning"
        )
    return min(max(float(radii[hits[0]]), lo), hi)


def radial_operator(grid: RadialGrid, potential_values: np.ndarray) -> TridiagonalSystem:
    """Finite-volume tridiagonal operator for an arbitrary potential sampled on ``grid.r``."""
    dr = grid.dr
    m = grid.m_channel
    r = grid.r
    w = grid.weights
    nodes = np.arange(grid.first_unknown, grid.n_points)  # psi(R) = 0
    rn = r[nodes]
    flux_out = (rn + 0.5 * dr) / dr  # r_{j+1/2} / dr
    flux_in = np.maximum(rn - 0.5 * dr, 0.0) / dr  # zero through the axis
    centrifugal = np.zeros_like(rn)
    np.divide(m * m, rn**2, out=centrifugal, where=rn > 0)
    pot = np.asarray(potential_values, dtype=float)[nodes]
    diag = (flux_out + flux_in) / w[nodes] + centrifugal + pot
    offdiag = -flux_out[:-1] / np.sqrt(w[nodes[:-1]] * w[nodes[1:]])
    return TridiagonalSystem(diag, offdiag, grid, nodes)


def assemble_operator(config: MediumBeamConfig, delta: float, grid: RadialGrid) -> TridiagonalSystem:
    """Discrete radial operator for detuning ``delta`` on ``grid``."""
    delta = check_negative_detuning(delta)
    return radial_operator(grid, physics.potential(config, delta, grid.r))


def sturm_count(diag: np.ndarray, offdiag: np.ndarray, x: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal matrix strictly below ``x``.

    Counts negative pivots of the LDL^T factorization of T - x I.
    """
    count = 0
    q = diag[0] - x
    if q < 0:
        count += 1
    tiny = np.finfo(float).tiny
    for k in range(1, diag.size):
        if q == 0.0:
            q = tiny
        q = (diag[k] - x) - offdiag[k - 1] ** 2 / q
        if q < 0:
            count += 1
    return count


def lowest_eigenpairs(system: TridiagonalSystem, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``k`` smallest eigenvalues and unit eigenvectors (bisection + inverse iteration)."""
    k = min(k, system.size)
    try:
        vals, vecs = eigh_tridiagonal(
            system.diag,
            system.offdiag,
            select="i",
            select_range=(0, k - 1),
            lapack_driver="stebz",
            tol=_BISECTION_TOL,
        )
    except LinAlgError as exc:
        raise ConvergenceFailed(f"tridiagonal eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(vecs)):
        raise ConvergenceFailed("tridiagonal eigensolver returned non-finite values")
    return vals, vecs


def count_nodes(psi, noise_floor: float = NODE_NOISE_FLOOR) -> int:
    """Sign changes between consecutive samples above ``noise_floor * max|psi|``."""
    psi = np.asarray(psi, dtype=float)
    peak = np.max(np.abs(psi)) if psi.size else 0.0
    if peak == 0.0:
        return 0
    significant = psi[np.abs(psi) > noise_floor * peak]
    signs = np.sign(significant)
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _fix_sign(psi: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(psi))
    first = psi[np.abs(psi) > NODE_NOISE_FLOOR * peak][0]
    return -psi if first < 0 else psi


def solve_channel(
    config: MediumBeamConfig,
    delta: float,
    grid: RadialGrid,
    n_max: int,
    *,
    dropped: list | None = None,
) -> list[TransverseMode]:
    """Lowest ``n_max`` bound modes for the channel ``grid.m_channel``."""
    system = assemble_operator(config, delta, grid)
    vals, vecs = lowest_eigenpairs(system, n_max)
    barrier = float(physics.potential(config, delta, grid.R))
    v0 = physics.well_floor(config, delta)
    modes = []
    for idx, (beta, u) in enumerate(zip(vals, vecs.T)):
        n = idx + 1
        if not beta < barrier:
            msg = (
                f"mode (m={grid.m_channel}, n={n}) at delta={delta:g}: beta={beta:.6g} m^-2 is not "
                f"below the truncation barrier V(R)={barrier:.6g} m^-2; dropped"
            )
            warnings.warn(msg, UnconvergedModeWarning, stacklevel=3)
            logger.warning(msg)
            if dropped is not None:
                dropped.append((grid.m_channel, n, float(beta)))
            continue
        if not beta > v0 * (1.0 - 1e-12):
            raise ConvergenceFailed(f"eigenvalue {beta:.6g} below the well floor {v0:.6g}")
        psi = system.to_psi(u / np.linalg.norm(u))
        psi = _fix_sign(psi)
        modes.append(
            TransverseMode(
                m=grid.m_channel,
                n=n,
                beta=float(beta),
                psi=psi,
                nodes=count_nodes(psi),
                delta=float(delta),
                grid=grid,
            )
        )
    return modes


def default_grid(
    config: MediumBeamConfig,
    delta: float,
    *,
    n_max: int,
    m_max: int,
    n_points: int | None = None,
    R: float | None = None,
) -> RadialGrid:
    if R is None:
        R = auto_truncation_radius(config, delta, n_max=n_max, m_max=m_max)
    return RadialGrid.from_radius(R, n_points or DEFAULT_N_POINTS)


def solve_spectrum(request: SpectrumRequest, config: MediumBeamConfig) -> list[TransverseMode]:
    """Bound modes for every requested channel, grouped by m, sorted by beta within a channel.

    All channels share one radial grid whose truncation radius covers the
    largest |m|.  Modes whose eigenvalue reaches V(R) are dropped with an
    :class:`UnconvergedModeWarning` and recorded on ``request.dropped``.
    """
    m_max = max(abs(m) for m in request.m_list)
    base = default_grid(
        config, request.delta, n_max=request.n_max, m_max=m_max, n_points=request.n_points, R=request.R
    )
    request.dropped.clear()
    modes: list[TransverseMode] = []
    for m in request.m_list:
        modes.extend(solve_channel(config, request.delta, base.with_m(m), request.n_max, dropped=request.dropped))
    return modes


def rayleigh_quotient(config: MediumBeamConfig, delta: float, grid: RadialGrid, psi) -> float:
    """Discrete Rayleigh quotient of a trial radial function; an upper bound on the lowest beta."""
    system = assemble_operator(config, delta, grid)
    u = system.to_u(np.asarray(psi, dtype=float))
    return float(np.dot(u, system.matvec(u)) / np.dot(u, u))


class TransverseModeSolver(BaseEstimator):
    """Estimator-style front end to :func:`solve_spectrum`.

    ``fit()`` solves the requested channels; results land in ``modes_`` (list of
    :class:`TransverseMode`) and ``betas_`` (dict keyed by ``(m, n)``).

    >>> solver = TransverseModeSolver(delta=-1e6, m_list=(0,), n_max=3).fit()
    >>> [mode.nodes for mode in solver.modes_]
    [0, 1, 2]
    """

    def __init__(self, config=None, delta=-1e6, m_list=(0,), n_max=3, n_points=None, R=None):
        self.config = config
        self.delta = delta
        self.m_list = m_list
        self.n_max = n_max
        self.n_points = n_points
        self.R = R

    def fit(self, X=None, y=None):
        config = self.config if self.config is not None else MediumBeamConfig()
        request = SpectrumRequest(list(self.m_list), self.n_max, self.delta, self.n_points, self.R)
        self.modes_ = solve_spectrum(request, config)
        self.betas_ = {(md.m, md.n): md.beta for md in self.modes_}
        self.dropped_ = list(request.dropped)
        self.grid_ = self.modes_[0].grid if self.modes_ else None
        return self

    def mode(self, m: int, n: int) -> TransverseMode:
        check_is_fitted(self, "modes_")
        for md in self.modes_:
            if md.m == m and md.n == n:
                return md
        raise KeyError((m, n))
