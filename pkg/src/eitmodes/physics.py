"""Physical parameters of the EIT medium and control beam, plus derived scalars.

All quantities are SI: Rabi frequencies in s^-1, lengths in m, the coupling
density product g^2 N in s^-2.  Only g^2 N ever enters the equations, so g and
N are never stored separately.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ProfileZero

SPEED_OF_LIGHT = 2.99792458e8  # m/s

# Parameter set used for the reference runs: peak Rabi frequency 1e8 s^-1,
# beam width 50 um, g^2 N = 1e22 s^-2, 780 nm transition.
DEFAULT_OMEGA0 = 1.0e8
DEFAULT_BEAM_RADIUS = 50e-6
DEFAULT_G2N = 1.0e22
DEFAULT_LAMBDA0 = 780e-9


@dataclass(frozen=True, eq=False)
class ControlProfile:
    """Radial shape of the control Rabi frequency Omega(r).

    ``kind="gaussian"`` evaluates ``omega0 * exp(-r**2 / (2 a**2))`` in closed
    form.  ``kind="user-table"`` interpolates strictly positive samples with a
    monotone cubic (PCHIP) and clamps queries beyond the last radius to the
    last value.
    """

    kind: str
    omega0: float
    beam_radius: float | None = None
    table_r: np.ndarray | None = None
    table_omega: np.ndarray | None = None
    _interp: PchipInterpolator | None = field(default=None, init=False, repr=False)

    KINDS: ClassVar[tuple[str, ...]] = ("gaussian", "user-table")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {self.KINDS}")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.kind == "gaussian":
            if self.beam_radius is None or not self.beam_radius > 0:
                raise ValueError("gaussian profile needs beam_radius > 0")
            return
        r = np.asarray(self.table_r, dtype=float)
        om = np.asarray(self.table_omega, dtype=float)
        if r.ndim != 1 or r.shape != om.shape or r.size < 2:
            raise ValueError("user table needs two equal-length 1-D columns with >= 2 rows")
        if r[0] != 0.0:
            raise ValueError("user table must start at r = 0")
        if np.any(np.diff(r) <= 0):
            raise ValueError("user table radii must be strictly increasing")
        if np.any(om <= 0) or not np.all(np.isfinite(om)):
            raise ValueError("user table Rabi frequencies must be finite and strictly positive")
        if not math.isclose(om[0], self.omega0, rel_tol=1e-12):
            raise ValueError(f"table value at r=0 ({om[0]:g}) differs from omega0 ({self.omega0:g})")
        object.__setattr__(self, "table_r", r)
        object.__setattr__(self, "table_omega", om)
        object.__setattr__(self, "_interp", PchipInterpolator(r, om, extrapolate=False))

    @classmethod
    def gaussian(cls, omega0: float, beam_radius: float) -> ControlProfile:
        return cls("gaussian", float(omega0), beam_radius=float(beam_radius))

    @classmethod
    def from_table(cls, r, omega) -> ControlProfile:
        om = np.asarray(omega, dtype=float)
        return cls("user-table", float(om[0]), table_r=np.asarray(r, dtype=float), table_omega=om)

    @classmethod
    def uniform(cls, omega0: float, r_max: float) -> ControlProfile:
        """Spatially constant control beam (plane-wave limit) as a two-point table."""
        return cls.from_table([0.0, r_max], [omega0, omega0])

    @property
    def r_max(self) -> float:
        return math.inf if self.kind == "gaussian" else float(self.table_r[-1])

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        if self.kind == "gaussian":
            return self.omega0 * np.exp(-(r**2) / (2.0 * self.beam_radius**2))
        clamped = np.minimum(r, self.table_r[-1])
        return self._interp(clamped)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "omega0_s": self.omega0, "beam_radius_m": self.beam_radius}
        return {
            "kind": "user-table",
            "r_m": self.table_r.tolist(),
            "omega_s": self.table_omega.tolist(),
        }


@dataclass(frozen=True, eq=False)
class MediumBeamConfig:
    """EIT medium constants and the control-beam profile.

    Parameters
    ----------
    omega0 : float
        Peak control Rabi frequency Omega_0 (s^-1).
    beam_radius : float
        Control-beam width ``a`` (m).  Also used as the length scale for domain
        truncation when a user-table profile is supplied.
    g2N : float
        Atom-field coupling density product g^2 N (s^-2).
    lambda0 : float
        Probe transition wavelength (m).
    profile : ControlProfile, optional
        Defaults to the Gaussian built from ``omega0`` and ``beam_radius``.
    omega_floor : float
        Fraction of ``omega0`` below which Omega(r) is treated as zero.
    """

    omega0: float = DEFAULT_OMEGA0
    beam_radius: float = DEFAULT_BEAM_RADIUS
    g2N: float = DEFAULT_G2N
    lambda0: float = DEFAULT_LAMBDA0
    profile: ControlProfile | None = None
    omega_floor: float = 1e-12

    c: ClassVar[float] = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("omega0", "beam_radius", "lambda0"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        # g2N = 0 is allowed as the empty-medium limit
        if not (np.isfinite(self.g2N) and self.g2N >= 0):
            raise ValueError(f"g2N must be finite and >= 0, got {self.g2N!r}")
        if self.profile is None:
            object.__setattr__(self, "profile", ControlProfile.gaussian(self.omega0, self.beam_radius))
        elif not math.isclose(float(self.profile(0.0)), self.omega0, rel_tol=1e-12):
            raise ValueError("profile(0) must equal omega0")

    @classmethod
    def reference(cls) -> MediumBeamConfig:
        return cls()

    def replace(self, **changes) -> MediumBeamConfig:
        """Copy with fields changed; a Gaussian profile follows omega0/beam_radius."""
        if self.profile.kind == "gaussian" and "profile" not in changes:
            changes["profile"] = None
        return dataclasses.replace(self, **changes)

    def with_beam_radius(self, beam_radius: float) -> MediumBeamConfig:
        return self.replace(beam_radius=beam_radius)

    @property
    def k0(self) -> float:
        return wavenumber(self)

    def to_dict(self) -> dict:
        return {
            "omega0_s": self.omega0,
            "beam_radius_m": self.beam_radius,
            "g2N_s2": self.g2N,
            "lambda0_m": self.lambda0,
            "c_mps": self.c,
            "omega_floor": self.omega_floor,
            "profile": self.profile.to_dict(),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def wavenumber(config: MediumBeamConfig) -> float:
    """Probe carrier wavenumber k0 = 2 pi / lambda0 (m^-1)."""
    return 2.0 * math.pi / config.lambda0


def control_rabi(config: MediumBeamConfig, r):
    """Omega(r) with the zero-floor check applied."""
    om = config.profile(r)
    floor = config.omega_floor * config.omega0
    if np.any(om < floor):
        bad = np.asarray(r, dtype=float)[np.asarray(om < floor)] if np.ndim(om) else r
        raise ProfileZero(
            f"control Rabi frequency below {floor:.3g} s^-1 at r = {np.min(bad):.6g} m; "
            "shrink the truncation radius or raise the profile tail"
        )
    return om


def potential(config: MediumBeamConfig, delta: float, r):
    """Effective transverse potential -2 k0 g^2N delta / (c Omega(r)^2), in m^-2.

    Positive and confining for delta < 0.
    """
    om = control_rabi(config, r)
    return -2.0 * wavenumber(config) * config.g2N * delta / (config.c * om**2)


def potential_slope(config: MediumBeamConfig, r):
    """d V / d delta at fixed r (m^-2 s); V is linear in delta."""
    om = control_rabi(config, r)
    return -2.0 * wavenumber(config) * config.g2N / (config.c * om**2)


def well_floor(config: MediumBeamConfig, delta: float) -> float:
    """V0: the potential with Omega = Omega_0, i.e. the bottom of the well (m^-2)."""
    return -2.0 * wavenumber(config) * config.g2N * delta / (config.c * config.omega0**2)


def transverse_free_vg(config: MediumBeamConfig) -> float:
    """Group velocity of an infinitely wide control beam, c / (1 + g^2N / Omega_0^2)."""
    return config.c / (1.0 + config.g2N / config.omega0**2)


def control_rayleigh_length(config: MediumBeamConfig, convention: str = "intensity-1/e2") -> float:
    """Rayleigh length of the Gaussian control beam.

    The control amplitude ``exp(-r^2/(2a^2))`` has its 1/e^2 intensity radius at
    ``w = sqrt(2) a``, giving ``pi w^2 / lambda = 2 pi a^2 / lambda``
    (``"intensity-1/e2"``).  Taking ``a`` itself as the waist gives
    ``pi a^2 / lambda`` (``"waist-a"``).  For a = 50 um at 780 nm these are
    about 2 cm and 1 cm.  The propagation oracle keeps Omega(r) fixed in z
    regardless; this number only documents where that assumption holds.
    """
    a = config.beam_radius
    if convention == "intensity-1/e2":
        return 2.0 * math.pi * a**2 / config.lambda0
    if convention == "waist-a":
        return math.pi * a**2 / config.lambda0
    raise ValueError(f"unknown convention {convention!r}")
