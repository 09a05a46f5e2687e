"""Expansion of a transverse probe field in the bound eigenmode basis.

Convention: a field is split as ``E(r, theta) = sum_m f_m(r) exp(i m theta)`` and
each radial profile is projected with the real inner product
``<f, psi> = integral r f psi dr``.  Powers are reported per radian, i.e.
``P = (1 / 2 pi) * integral |E|^2 dA = sum_m integral r |f_m|^2 dr``, so a mode
``psi_mn(r) exp(i m theta)`` carries unit power and coefficient 1.

The bound modes do not span every transverse field (there is an unbound
continuum above the truncation barrier), so the unexplained power is reported
as a residual rather than hidden.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import physics
from ._validation import check_int, check_negative_detuning, check_positive
from .errors import BasisMismatch, OffAxisField
from .physics import MediumBeamConfig
from .radial import SpectrumRequest, TransverseMode, solve_spectrum

OFF_AXIS_LIMIT = 0.05
RESIDUAL_FLOOR = -1e-9


@dataclass(frozen=True, eq=False)
class Field2D:
    """Complex transverse field on an N x N Cartesian grid.

    ``values[iy, ix]`` is the sample at ``x = (ix - N/2) dx``, ``y = (iy - N/2) dx``
    with ``dx = 2 extent / N``; ``center`` is the beam-axis position in metres.
    """

    values: np.ndarray
    extent: float
    center: tuple[float, float] = (0.0, 0.0)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"field must be square 2-D, got shape {vals.shape}")
        n = vals.shape[0]
        if n < 2 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two, got {n}")
        check_positive(self.extent, "extent")
        object.__setattr__(self, "values", vals.astype(np.complex128, copy=False))
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def from_function(cls, fn: Callable, N: int, extent: float, center=(0.0, 0.0), **meta) -> Field2D:
        """Sample ``fn(rho, phi)`` in polar coordinates about ``center``."""
        x = (np.arange(N) - N // 2) * (2.0 * extent / N)
        X, Y = np.meshgrid(x - center[0], x - center[1], indexing="xy")
        return cls(np.asarray(fn(np.hypot(X, Y), np.arctan2(Y, X)), dtype=complex), extent, center, dict(meta))

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def dx(self) -> float:
        return 2.0 * self.extent / self.N

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.dx

    def polar(self) -> tuple[np.ndarray, np.ndarray]:
        """(rho, phi) of every sample about the beam axis."""
        X, Y = np.meshgrid(self.axis - self.center[0], self.axis - self.center[1], indexing="xy")
        return np.hypot(X, Y), np.arctan2(Y, X)

    def power(self) -> float:
        """Integral of |E|^2 over the grid (field units^2 m^2)."""
        return float(np.sum(np.abs(self.values) ** 2) * self.dx**2)

    def inner(self, other: Field2D) -> complex:
        return complex(np.vdot(other.values, self.values) * self.dx**2)

    def with_values(self, values) -> Field2D:
        return Field2D(values, self.extent, self.center, dict(self.meta))


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """One azimuthal channel f_m sampled at ring radii ``r`` (ring spacing ``dr``)."""

    m: int
    r: np.ndarray
    values: np.ndarray
    dr: float

    def power(self) -> float:
        return float(np.sum(self.r * np.abs(self.values) ** 2) * self.dr)

    def evaluate(self, r) -> np.ndarray:
        """Cubic interpolation of the ring samples; zero beyond the outermost ring."""
        r = np.asarray(r, dtype=float)
        re = CubicSpline(self.r, self.values.real)(r)
        im = CubicSpline(self.r, self.values.imag)(r)
        out = re + 1j * im
        out[r > self.r[-1] + 0.5 * self.dr] = 0.0
        return out


@dataclass(frozen=True, eq=False)
class AzimuthalSplit:
    profiles: dict[int, RadialProfile]
    total_power: float  # per radian, from the Cartesian samples
    n_theta: int

    def channel_power(self, m: int) -> float:
        return self.profiles[m].power()


def azimuthal_split(field: Field2D, m_max: int, *, n_theta: int | None = None) -> AzimuthalSplit:
    """Resample onto N/2 polar rings (bilinear) and Fourier-transform each ring in theta.

    Ring radii are ``(k + 1/2) dx``.  Each ring gets ``max(64, 8 m_max)``
    azimuthal samples unless ``n_theta`` is given.
    """
    m_max = check_int(m_max, "m_max", 0)
    if n_theta is None:
        n_theta = max(64, 8 * m_max)
    if n_theta < 2 * m_max + 1:
        raise ValueError("n_theta too small to resolve m_max")

    rho, _ = field.polar()
    inscribed = field.extent - max(abs(field.center[0]), abs(field.center[1]))
    p_total = field.power()
    if p_total == 0 or not np.isfinite(p_total):
        raise ValueError("field has zero or non-finite power")
    outside = float(np.sum(np.abs(field.values[rho > inscribed]) ** 2) * field.dx**2) / p_total
    if outside > OFF_AXIS_LIMIT:
        raise OffAxisField(
            f"{outside:.1%} of the power lies outside the inscribed circle of radius {inscribed:.4g} m"
        )

    n_rings = field.N // 2
    dr = field.dx
    r = (np.arange(n_rings) + 0.5) * dr
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    px = (field.center[0] + r[:, None] * np.cos(theta)[None, :]) / field.dx + field.N // 2
    py = (field.center[1] + r[:, None] * np.sin(theta)[None, :]) / field.dx + field.N // 2
    coords = np.array([py.ravel(), px.ravel()])
    ring = map_coordinates(field.values.real, coords, order=1, mode="constant", cval=0.0)
    ring = ring + 1j * map_coordinates(field.values.imag, coords, order=1, mode="constant", cval=0.0)
    spectrum = np.fft.fft(ring.reshape(n_rings, n_theta), axis=1) / n_theta

    profiles = {m: RadialProfile(m, r, spectrum[:, m % n_theta].copy(), dr) for m in range(-m_max, m_max + 1)}
    return AzimuthalSplit(profiles, p_total / (2.0 * np.pi), n_theta)


@dataclass(frozen=True, eq=False)
class ChannelProjection:
    m: int
    coefficients: np.ndarray  # complex, ordered like the modes
    channel_power: float
    residual: float


def _check_basis(modes: Sequence[TransverseMode]) -> None:
    if not modes:
        raise BasisMismatch("empty mode basis")
    first = modes[0]
    for md in modes[1:]:
        if not first.same_basis(md):
            raise BasisMismatch(
                f"modes (m={first.m}, delta={first.delta:g}) and (m={md.m}, delta={md.delta:g}) "
                "do not share channel, detuning and grid"
            )


def project(radial_profile: RadialProfile, modes: Sequence[TransverseMode]) -> ChannelProjection:
    """Coefficients c_n = integral r f_m psi_mn dr and the unexplained channel power.

    The profile is interpolated onto the modes' radial grid, where the basis is
    orthonormal under the grid quadrature, so the residual is non-negative up
    to rounding.  Power beyond the grid's truncation radius counts as residual.
    """
    _check_basis(modes)
    if modes[0].m != radial_profile.m:
        raise BasisMismatch(f"profile is channel m={radial_profile.m}, basis is m={modes[0].m}")
    grid = modes[0].grid
    f = radial_profile.evaluate(grid.r)
    f[-1] = 0.0
    w = grid.weights
    coeffs = np.array([np.dot(w * md.psi, f) for md in modes], dtype=complex)
    inside = float(np.dot(w, np.abs(f) ** 2))
    beyond = radial_profile.r > grid.R
    outside = float(np.sum((radial_profile.r * np.abs(radial_profile.values) ** 2)[beyond]) * radial_profile.dr)
    power = inside + outside
    residual = power - float(np.sum(np.abs(coeffs) ** 2))
    if residual < RESIDUAL_FLOOR * max(power, 1.0):
        raise BasisMismatch(f"negative residual {residual:.3g}: basis is not orthonormal")
    return ChannelProjection(radial_profile.m, coeffs, power, max(residual, 0.0))


@dataclass(frozen=True)
class ExpansionTerm:
    m: int
    n: int
    coefficient: complex

    @property
    def power(self) -> float:
        return abs(self.coefficient) ** 2


@dataclass(frozen=True, eq=False)
class ModeExpansion:
    """Per-mode coefficients of a decomposed field.

    ``sum(|c|^2) + residual_power_fraction * input_power == input_power``, with
    ``input_power`` per radian as in the module docstring.
    """

    terms: list[ExpansionTerm]
    residual_power_fraction: float
    input_power: float
    modes: dict[tuple[int, int], TransverseMode]
    delta: float
    k0: float
    c: float
    config_hash: str
    field_grid: tuple[int, float, tuple[float, float]]  # (N, extent, center) of the input

    def coefficient(self, m: int, n: int) -> complex:
        for t in self.terms:
            if (t.m, t.n) == (m, n):
                return t.coefficient
        raise KeyError((m, n))

    def captured_power(self) -> float:
        return float(sum(t.power for t in self.terms))

    def wavevector_mismatch(self, m: int, n: int) -> float:
        return self.delta / self.c - self.modes[(m, n)].beta / (2.0 * self.k0)

    def to_dict(self) -> dict:
        return {
            "delta_s": self.delta,
            "config_hash": self.config_hash,
            "input_power": self.input_power,
            "captured_power": self.captured_power(),
            "residual_power_fraction": self.residual_power_fraction,
            "terms": [
                {
                    "m": t.m,
                    "n": t.n,
                    "coefficient_re": t.coefficient.real,
                    "coefficient_im": t.coefficient.imag,
                    "power": t.power,
                    "beta_m2": self.modes[(t.m, t.n)].beta,
                    "Delta_rad_per_m": self.wavevector_mismatch(t.m, t.n),
                }
                for t in self.terms
            ],
        }


def synthesize(
    expansion: ModeExpansion,
    z: float = 0.0,
    *,
    N: int | None = None,
    extent: float | None = None,
    center=None,
) -> Field2D:
    """Sum c_mn psi_mn(r) exp(i m theta) exp(i Delta_mn z) on a Cartesian grid.

    Defaults to the grid of the decomposed input.  Each mode only picks up its
    own longitudinal phase, so a single-term expansion keeps |E| unchanged in z.
    """
    N0, extent0, center0 = expansion.field_grid
    N = N or N0
    extent = extent or extent0
    center = center0 if center is None else center
    grids = {md.grid for md in expansion.modes.values()}
    deltas = {md.delta for md in expansion.modes.values()}
    if len(deltas) > 1 or (deltas and deltas.pop() != expansion.delta):
        raise BasisMismatch("expansion modes computed at different detunings")
    if len({(g.n_points, g.dr) for g in grids}) > 1:
        raise BasisMismatch("expansion modes computed on different radial grids")

    proto = Field2D(np.zeros((N, N), complex), extent, center)
    rho, phi = proto.polar()
    out = np.zeros((N, N), complex)
    for t in expansion.terms:
        if t.coefficient == 0:
            continue
        md = expansion.modes[(t.m, t.n)]
        radial = np.interp(rho, md.r, md.psi, right=0.0)
        phase = expansion.wavevector_mismatch(t.m, t.n) * z
        out += t.coefficient * np.exp(1j * phase) * radial * np.exp(1j * t.m * phi)
    return Field2D(out, extent, center, {"z_m": float(z)})


def decompose(field: Field2D, modes: Sequence[TransverseMode], config: MediumBeamConfig, m_max: int | None = None) -> ModeExpansion:
    """Split ``field`` azimuthally and project every channel onto ``modes``."""
    by_m: dict[int, list[TransverseMode]] = {}
    for md in modes:
        by_m.setdefault(md.m, []).append(md)
    deltas = {md.delta for md in modes}
    if len(deltas) != 1:
        raise BasisMismatch("basis modes must share one detuning")
    if m_max is None:
        m_max = max(abs(m) for m in by_m)
    split = azimuthal_split(field, m_max)
    terms = []
    for m in sorted(by_m, key=lambda k: (abs(k), k)):
        chan = sorted(by_m[m], key=lambda md: md.n)
        proj = project(split.profiles[m], chan)
        terms.extend(ExpansionTerm(md.m, md.n, complex(c)) for md, c in zip(chan, proj.coefficients))
    captured = sum(t.power for t in terms)
    p_in = split.total_power
    return ModeExpansion(
        terms=terms,
        residual_power_fraction=1.0 - captured / p_in,
        input_power=p_in,
        modes={(md.m, md.n): md for md in modes},
        delta=deltas.pop(),
        k0=physics.wavenumber(config),
        c=config.c,
        config_hash=config.config_hash(),
        field_grid=(field.N, field.extent, field.center),
    )


def mode_field(mode: TransverseMode, N: int, extent: float, center=(0.0, 0.0), coefficient: complex = 1.0) -> Field2D:
    """Cartesian rendering of a single mode psi_mn(r) exp(i m theta)."""
    return Field2D.from_function(
        lambda rho, phi: coefficient * np.interp(rho, mode.r, mode.psi, right=0.0) * np.exp(1j * mode.m * phi),
        N,
        extent,
        center,
        m=mode.m,
        n=mode.n,
    )


def gaussian_field(waist: float, N: int, extent: float, center=(0.0, 0.0), m: int = 0) -> Field2D:
    """exp(-r^2 / waist^2) (times exp(i m theta)), scaled to unit power per radian."""
    norm = 2.0 / waist  # integral of r exp(-2 r^2 / w^2) dr is w^2 / 4
    return Field2D.from_function(
        lambda rho, phi: norm * np.exp(-(rho**2) / waist**2) * np.exp(1j * m * phi),
        N,
        extent,
        center,
        waist_m=waist,
    )


class ModeDecomposer(BaseEstimator):
    """Fit a bound-mode basis once, then transform fields into :class:`ModeExpansion`.

    ``inverse_transform(expansion, z)`` resynthesizes the field after a
    propagation distance ``z`` with every mode advancing at its own phase rate.
    """

    def __init__(self, config=None, delta=-1e6, m_max=2, n_max=3, n_points=None, R=None):
        self.config = config
        self.delta = delta
        self.m_max = m_max
        self.n_max = n_max
        self.n_points = n_points
        self.R = R

    def _config(self) -> MediumBeamConfig:
        return self.config if self.config is not None else MediumBeamConfig()

    def fit(self, X=None, y=None):
        check_negative_detuning(self.delta)
        m_max = check_int(self.m_max, "m_max", 0)
        request = SpectrumRequest(list(range(-m_max, m_max + 1)), self.n_max, self.delta, self.n_points, self.R)
        self.modes_ = solve_spectrum(request, self._config())
        self.dropped_ = list(request.dropped)
        return self

    def transform(self, X: Field2D) -> ModeExpansion:
        check_is_fitted(self, "modes_")
        return decompose(X, self.modes_, self._config(), self.m_max)

    def fit_transform(self, X: Field2D, y=None) -> ModeExpansion:
        return self.fit(X).transform(X)

    def inverse_transform(self, expansion: ModeExpansion, z: float = 0.0) -> Field2D:
        check_is_fitted(self, "modes_")
        return synthesize(expansion, z)
