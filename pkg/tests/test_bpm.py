import numpy as np
import pytest

from eitmodes import (
    ControlProfile,
    Field2D,
    MediumBeamConfig,
    PowerLoss,
    PropagationPlan,
    UnstableStep,
    build_plan,
    propagate,
    step_equation,
)
from eitmodes.bpm import MAX_KINETIC_PHASE, spectral_support
from eitmodes.decomposition import mode_field

from conftest import REF_DELTA, rel


def gaussian_amp(s, N, L):
    return Field2D.from_function(lambda rho, phi: np.exp(-(rho**2) / (2 * s**2)), N, L)


def test_potential_rate_on_axis(config):
    eq = step_equation(config, REF_DELTA)
    expected = REF_DELTA / config.c * (1 + config.g2N / config.omega0**2)
    assert eq.potential_rate(0.0) == pytest.approx(expected, rel=1e-15)
    assert eq.kinetic_rate(4.0) == pytest.approx(-2.0 / config.k0)
    assert "Strang" in eq.describe()


def test_free_space_potential_vanishes(config):
    eq = step_equation(config, 0.0)
    assert np.all(eq.potential_rate(np.linspace(0, 1e-3, 5)) == 0)


def test_free_gaussian_spreading(config):
    s = 5e-6
    fld = gaussian_amp(s, 256, 80e-6)
    plan = build_plan(fld, config, 1e-6, 4e-4, record_every=50, absorber_strength=0.0)
    traj = propagate(fld, plan, config, 0.0, keep_records=False)
    zr = config.k0 * s**2
    expected = s * np.sqrt(1 + (traj.z / zr) ** 2)
    np.testing.assert_allclose(traj.rms_radius, expected, rtol=1e-3)


def test_uniform_control_plane_wave_phase():
    cfg = MediumBeamConfig(profile=ControlProfile.uniform(1e8, 1.0))
    fld = Field2D(np.ones((32, 32), complex), 50e-6)
    plan = PropagationPlan(1e-5, 2e-3, absorber_fraction=0.0, record_every=20)
    traj = propagate(fld, plan, cfg, REF_DELTA)
    rate = REF_DELTA / cfg.c * (1 + cfg.g2N / cfg.omega0**2)
    assert traj.phase_slope() == pytest.approx(rate, rel=1e-10)
    np.testing.assert_allclose(traj.phase, rate * traj.z, atol=1e-9)
    np.testing.assert_allclose(traj.overlap, 1.0, atol=1e-12)


def test_power_conserved_without_absorber(config, modes_m0):
    md = modes_m0[1]
    fld = mode_field(md, 128, 8 * modes_m0[0].rms_radius())
    plan = build_plan(fld, config, 1e-5, 1e-2, absorber_strength=0.0, record_every=100)
    traj = propagate(fld, plan, config, REF_DELTA, keep_records=False)
    assert plan.n_steps == 1000
    assert np.max(np.abs(traj.power / traj.power[0] - 1)) < 1e-8
    assert traj.absorbed_fraction == 0.0


@pytest.fixture(scope="module")
def mismatched(config, modes_m0):
    L = 8 * modes_m0[0].rms_radius()
    return gaussian_amp(1.3 * modes_m0[0].rms_radius() / np.sqrt(1.0), 128, L)


def _final(fld, config, dz, z):
    plan = PropagationPlan(dz, z, absorber_strength=0.0, record_every=10**9)
    return propagate(fld, plan, config, REF_DELTA).records[-1].values


def test_strang_second_order(config, mismatched):
    z = 1e-3
    ref = _final(mismatched, config, 3.125e-7, z)
    errs = [np.linalg.norm(_final(mismatched, config, dz, z) - ref) for dz in (1e-5, 5e-6, 2.5e-6)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.0 < q < 5.0 for q in ratios), ratios


def test_bound_mode_stationary(config, modes_m0):
    md = modes_m0[0]
    fld = mode_field(md, 256, 8 * md.rms_radius())
    plan = build_plan(fld, config, 1e-5, 2e-3, record_every=20)
    traj = propagate(fld, plan, config, REF_DELTA, keep_records=False)
    assert traj.overlap.min() > 1 - 1e-6
    assert traj.rms_drift() < 1e-3
    assert rel(traj.phase_slope(), md.wavevector_mismatch(config)) < 1e-4
    assert traj.absorbed_fraction < 1e-10


def test_step_guard_rejects_large_dz(config, modes_m0):
    fld = mode_field(modes_m0[0], 128, 8 * modes_m0[0].rms_radius())
    k = spectral_support(fld.values, fld.dx)
    dz = 2 * MAX_KINETIC_PHASE * 2 * config.k0 / k**2
    with pytest.raises(UnstableStep):
        build_plan(fld, config, dz, 1e-2)
    with pytest.raises(UnstableStep):
        propagate(fld, PropagationPlan(dz, 1e-2), config, REF_DELTA)


def test_guard_catches_growing_spectrum(config):
    # a wide beam in a deep well picks up fast transverse phase in its tails
    fld = gaussian_amp(40e-6, 256, 160e-6)
    plan = PropagationPlan(2e-5, 1e-3, absorber_strength=0.0, record_every=2)
    assert plan.kinetic_phase(fld, config.k0) < MAX_KINETIC_PHASE
    with pytest.raises(UnstableStep, match="grew past"):
        propagate(fld, plan, config, -1e7, keep_records=False)


def test_unbound_input_raises_power_loss(config):
    fld = gaussian_amp(4e-6, 128, 40e-6)
    plan = build_plan(fld, config, 1e-6, 6e-4, absorber_fraction=0.3)
    with pytest.raises(PowerLoss):
        propagate(fld, plan, config, 0.0, keep_records=False)
    relaxed = build_plan(fld, config, 1e-6, 6e-4, absorber_fraction=0.3, expect_bound=False, record_every=100)
    traj = propagate(fld, relaxed, config, 0.0, keep_records=False)
    assert traj.absorbed_fraction > 0.01
    assert traj.power[-1] == pytest.approx(traj.power[0] * (1 - traj.absorbed_fraction), rel=1e-6)


def test_input_inside_absorber_rejected(config):
    fld = gaussian_amp(20e-6, 64, 30e-6)
    with pytest.raises(ValueError):
        propagate(fld, PropagationPlan(2e-6, 1e-4), config, REF_DELTA)


def test_records_and_rows(config, modes_m0):
    fld = mode_field(modes_m0[0], 64, 8 * modes_m0[0].rms_radius())
    traj = propagate(fld, PropagationPlan(1e-5, 1.1e-4, record_every=4), config, REF_DELTA)
    # steps 4 and 8, the last step 11, plus z = 0
    np.testing.assert_allclose(traj.z, [0, 4e-5, 8e-5, 1.1e-4])
    assert len(traj.records) == 4
    assert traj.records[2].meta["z_m"] == pytest.approx(8e-5)
    assert len(list(traj.rows())) == 4


@pytest.mark.parametrize(
    "kwargs", [{"dz": 0.0}, {"z_total": -1.0}, {"absorber_fraction": 0.5}, {"absorber_strength": -1.0}, {"record_every": 0}]
)
def test_plan_validation(kwargs):
    args = {"dz": 1e-5, "z_total": 1e-3} | kwargs
    with pytest.raises(ValueError):
        PropagationPlan(**args)
