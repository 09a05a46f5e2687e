"""Dispersion relations beta_mn(delta) and per-mode group velocities.

The detuning enters the radial operator only through the potential, linearly,
so d(beta)/d(delta) is the mode expectation of dV/d(delta) (Hellmann-Feynman).
A central finite difference of the eigenvalue on the same radial grid is kept
alongside it as an independent check.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import physics
from ._validation import check_channels, check_detuning_grid, check_negative_detuning
from .errors import ConvergenceFailed, EITModeError, NonNegativeSlope
from .physics import MediumBeamConfig
from .radial import RadialGrid, TransverseMode, default_grid, solve_channel

logger = logging.getLogger(__name__)

FD_RELATIVE_STEP = 1e-3
DEFAULT_SWEEP_RANGE = (-1e7, -1e5)


def hellmann_feynman_slope(mode: TransverseMode, config: MediumBeamConfig) -> float:
    """d(beta_mn)/d(delta) = -<2 k0 g^2N / (c Omega(r)^2)>_psi, in m^-2 s.  Always negative."""
    return mode.expectation(physics.potential_slope(config, mode.r))


def group_velocity(slope: float, config: MediumBeamConfig) -> float:
    """V_g = c / (1 - (c / 2k0) d(beta)/d(delta)).

    A zero slope (no medium) returns c; a positive slope cannot occur for this
    medium and raises :class:`NonNegativeSlope`.
    """
    if not np.isfinite(slope):
        raise NonNegativeSlope(f"non-finite slope {slope!r}")
    if slope > 0:
        raise NonNegativeSlope(f"d(beta)/d(delta) = {slope:.6g} > 0: eigensolver defect")
    return config.c / (1.0 - config.c / (2.0 * physics.wavenumber(config)) * slope)


@dataclass
class DispersionTable:
    """beta, slopes and group velocities on a detuning grid; rows are deltas, columns channels."""

    channels: list[tuple[int, int]]
    deltas: np.ndarray
    beta: np.ndarray
    dbeta_ddelta: np.ndarray
    slope_fd: np.ndarray
    vg: np.ndarray
    c: float = physics.SPEED_OF_LIGHT
    meta: dict = field(default_factory=dict)

    CSV_COLUMNS = ("delta_s", "m", "n", "beta_m2", "slope_hf", "slope_fd", "vg_mps", "vg_over_c")

    @property
    def vg_over_c(self) -> np.ndarray:
        return self.vg / self.c

    def column(self, channel: tuple[int, int]) -> int:
        return self.channels.index(tuple(channel))

    def slope_discrepancy(self) -> np.ndarray:
        """|HF - FD| / |HF| per entry."""
        return np.abs(self.dbeta_ddelta - self.slope_fd) / np.abs(self.dbeta_ddelta)

    def rows(self) -> Iterable[tuple]:
        for i, d in enumerate(self.deltas):
            for j, (m, n) in enumerate(self.channels):
                yield (
                    float(d),
                    m,
                    n,
                    float(self.beta[i, j]),
                    float(self.dbeta_ddelta[i, j]),
                    float(self.slope_fd[i, j]),
                    float(self.vg[i, j]),
                    float(self.vg[i, j] / self.c),
                )


def _pick(modes: Sequence[TransverseMode], n: int, where: str) -> TransverseMode:
    # continuation by node count, not by list position
    for md in modes:
        if md.nodes == n - 1:
            return md
    raise ConvergenceFailed(f"no bound mode with {n - 1} nodes {where}")


def _sweep_point(
    config: MediumBeamConfig,
    delta: float,
    channels: list[tuple[int, int]],
    n_points: int | None,
    R: float | None,
    fd_step: float,
):
    n_need: dict[int, int] = {}
    for m, n in channels:
        n_need[m] = max(n_need.get(m, 0), n)
    m_max = max(abs(m) for m in n_need)
    base = default_grid(config, delta, n_max=max(n_need.values()), m_max=m_max, n_points=n_points, R=R)
    h = fd_step * abs(delta)

    by_m: dict[int, tuple] = {}
    for m, n_max in n_need.items():
        grid = base.with_m(m)
        try:
            by_m[m] = (
                solve_channel(config, delta, grid, n_max),
                solve_channel(config, delta + h, grid, n_max),
                solve_channel(config, delta - h, grid, n_max),
            )
        except EITModeError as exc:
            raise type(exc)(f"{exc} [m={m}, delta={delta:g} s^-1]") from exc

    out = []
    for m, n in channels:
        where = f"[m={m}, n={n}, delta={delta:g} s^-1]"
        centre, plus, minus = by_m[m]
        mode = _pick(centre, n, where)
        slope = hellmann_feynman_slope(mode, config)
        fd = (_pick(plus, n, where).beta - _pick(minus, n, where).beta) / (2.0 * h)
        try:
            vg = group_velocity(slope, config)
        except NonNegativeSlope as exc:
            raise NonNegativeSlope(f"{exc} {where}") from exc
        out.append((mode.beta, slope, fd, vg))
    return out, base


def sweep(
    channels,
    delta_grid,
    config: MediumBeamConfig,
    *,
    n_points: int | None = None,
    R: float | None = None,
    fd_step: float = FD_RELATIVE_STEP,
    max_workers: int = 1,
) -> DispersionTable:
    """Tabulate beta, d(beta)/d(delta) and V_g for each (m, n) over ``delta_grid``.

    Each detuning gets its own truncation radius (unless ``R`` is fixed); the
    finite-difference neighbours ``delta +- fd_step |delta|`` reuse that grid so
    the two slope estimates are comparable.  Points are independent and may run
    on ``max_workers`` threads; results are gathered in input order.
    """
    channels = check_channels(channels)
    deltas = check_detuning_grid(delta_grid)

    def task(d):
        return _sweep_point(config, float(d), channels, n_points, R, fd_step)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(task, deltas))
    else:
        results = [task(d) for d in deltas]

    arr = np.array([[row for row in res] for res, _ in results], dtype=float)  # (n_delta, n_ch, 4)
    grids: list[RadialGrid] = [g for _, g in results]
    return DispersionTable(
        channels=channels,
        deltas=deltas.copy(),
        beta=arr[:, :, 0],
        dbeta_ddelta=arr[:, :, 1],
        slope_fd=arr[:, :, 2],
        vg=arr[:, :, 3],
        c=config.c,
        meta={
            "fd_relative_step": fd_step,
            "grid_n_points": [g.n_points for g in grids],
            "grid_R_m": [g.R for g in grids],
        },
    )


def default_delta_grid(n_steps: int = 20, delta_range=DEFAULT_SWEEP_RANGE) -> np.ndarray:
    """Log-spaced negative detunings; the default [-1e7, -1e5] s^-1 range is a choice, not a measured one."""
    lo, hi = sorted(abs(d) for d in delta_range)
    return -np.geomspace(lo, hi, n_steps)


def beam_size_asymptotics(
    channel: tuple[int, int],
    delta: float,
    a_grid,
    config: MediumBeamConfig,
    *,
    n_points: int | None = None,
) -> list[tuple[float, float]]:
    """Group velocity of one mode as the Gaussian control-beam width grows.

    Returns ``[(a, vg), ...]`` in the order of ``a_grid`` (which must ascend).
    Wider beams approach :func:`physics.transverse_free_vg` from below.
    """
    delta = check_negative_detuning(delta)
    (m, n), = check_channels([channel])
    a_grid = np.asarray(a_grid, dtype=float)
    if a_grid.ndim != 1 or a_grid.size == 0 or np.any(a_grid <= 0):
        raise ValueError("a_grid must be a non-empty 1-D array of positive widths")
    if np.any(np.diff(a_grid) <= 0):
        raise ValueError("a_grid must be strictly ascending")
    if config.profile.kind != "gaussian":
        raise ValueError("beam-size scan rescales a Gaussian control profile")
    out = []
    for a in a_grid:
        cfg = config.with_beam_radius(float(a))
        grid = default_grid(cfg, delta, n_max=n, m_max=abs(m), n_points=n_points).with_m(m)
        mode = _pick(solve_channel(cfg, delta, grid, n), n, f"[m={m}, n={n}, a={a:g} m]")
        out.append((float(a), group_velocity(hellmann_feynman_slope(mode, cfg), cfg)))
    return out
