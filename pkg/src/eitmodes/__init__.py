"""Localized transverse modes and group velocities of slow light under a finite EIT control beam."""

from .bpm import PropagationPlan, Trajectory, build_plan, propagate, step_equation
from .decomposition import (
    Field2D,
    ModeDecomposer,
    ModeExpansion,
    azimuthal_split,
    decompose,
    project,
    synthesize,
)
from .dispersion import DispersionTable, beam_size_asymptotics, group_velocity, hellmann_feynman_slope, sweep
from .errors import (
    BasisMismatch,
    ConvergenceFailed,
    EITModeError,
    NonNegativeSlope,
    NotNegativeDetuning,
    OffAxisField,
    PowerLoss,
    ProfileZero,
    TruncationFailed,
    UnstableStep,
)
from .physics import ControlProfile, MediumBeamConfig, potential, transverse_free_vg, wavenumber
from .radial import (
    RadialGrid,
    SpectrumRequest,
    TransverseMode,
    TransverseModeSolver,
    assemble_operator,
    auto_truncation_radius,
    count_nodes,
    solve_spectrum,
)

__all__ = [name for name in dir() if not name.startswith("_")]
