"""Config ingestion and the on-disk formats (CSV tables, JSON sidecars, binary fields).

Binary field layout, all little-endian::

    8 bytes   magic b"EITFLD1\\0"
    uint32    N
    float64   extent_m (half-width)
    uint32    length of the JSON header in bytes
    ...       JSON header (utf-8): center_m, dtype, byte_order, meta
    N*N       complex64 samples, row-major values[iy, ix]
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .decomposition import Field2D, ModeExpansion
from .dispersion import DispersionTable
from .physics import ControlProfile, MediumBeamConfig
from .radial import TransverseMode

FIELD_MAGIC = b"EITFLD1\x00"
_FIELD_PREFIX = struct.Struct("<8sIdI")

CONFIG_KEYS = {
    "omega0_s": "omega0",
    "beam_radius_m": "beam_radius",
    "g2N_s2": "g2N",
    "lambda0_m": "lambda0",
}


def fmt(x) -> str:
    """Fixed 17-significant-digit rendering; ints pass through."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


# -- config -----------------------------------------------------------------


def load_profile_csv(path) -> ControlProfile:
    """Two-column CSV with header ``r_m,omega_s``."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header[:2] != ["r_m", "omega_s"]:
            raise ValueError(f"{path}: expected header r_m,omega_s, got {header}")
        rows = [(float(a), float(b)) for a, b, *_ in reader if a.strip()]
    r, om = np.array(rows).T
    return ControlProfile.from_table(r, om)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> MediumBeamConfig:
    """Build a config from a JSON/YAML file plus flat overrides (same key names).

    Recognized keys: omega0_s, beam_radius_m, g2N_s2, lambda0_m, profile.kind
    (gaussian | user-table) and profile.table_path (CSV, relative to the file).
    Missing values fall back to the reference parameter set.
    """
    raw: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        text = path.read_text()
        raw = json.loads(text) if path.suffix == ".json" else (yaml.safe_load(text) or {})
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a mapping")
        base = path.parent
    flat = _flatten(raw)
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = set(CONFIG_KEYS) | {"profile.kind", "profile.table_path"}
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")

    kwargs = {CONFIG_KEYS[k]: float(v) for k, v in flat.items() if k in CONFIG_KEYS}
    kind = flat.get("profile.kind", "gaussian")
    if kind == "user-table":
        table = flat.get("profile.table_path")
        if not table:
            raise ValueError("profile.kind = user-table needs profile.table_path")
        table = Path(table)
        profile = load_profile_csv(table if table.is_absolute() else base / table)
        if "omega0" in kwargs and kwargs["omega0"] != profile.omega0:
            raise ValueError("omega0_s disagrees with the table value at r = 0")
        kwargs["omega0"] = profile.omega0
        kwargs["profile"] = profile
    elif kind != "gaussian":
        raise ValueError(f"unknown profile.kind {kind!r}")
    return MediumBeamConfig(**kwargs)


# -- modes and dispersion ----------------------------------------------------


def write_modes(out_dir, modes: Sequence[TransverseMode]) -> list[Path]:
    """One CSV per channel (``r_m, psi_m1, psi_m2, ...``, psi in m^-1) plus a JSON sidecar."""
    out_dir = Path(out_dir)
    by_m: dict[int, list[TransverseMode]] = {}
    for md in modes:
        by_m.setdefault(md.m, []).append(md)
    paths = []
    for m, chan in by_m.items():
        chan = sorted(chan, key=lambda md: md.n)
        grid = chan[0].grid
        header = ["r_m"] + [f"psi_m{md.n}" for md in chan]
        cols = [grid.r] + [md.psi for md in chan]
        paths.append(write_csv(out_dir / f"modes_m{m}.csv", header, zip(*cols)))
        paths.append(
            write_json(
                out_dir / f"modes_m{m}.json",
                {
                    "m": m,
                    "delta_s": chan[0].delta,
                    "grid": {"n_points": grid.n_points, "dr_m": grid.dr, "R_m": grid.R},
                    "modes": [
                        {"m": md.m, "n": md.n, "beta_m2": md.beta, "nodes": md.nodes, "rms_radius_m": md.rms_radius()}
                        for md in chan
                    ],
                },
            )
        )
    return paths


def write_dispersion(path, table: DispersionTable) -> Path:
    return write_csv(path, table.CSV_COLUMNS, table.rows())


# -- binary fields -------------------------------------------------------------


def write_field(path, fld: Field2D) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(
        {
            "center_m": list(fld.center),
            "dtype": "complex64",
            "byte_order": "little",
            "layout": "row-major values[iy, ix]",
            "meta": fld.meta,
        },
        sort_keys=True,
    ).encode()
    with path.open("wb") as fh:
        fh.write(_FIELD_PREFIX.pack(FIELD_MAGIC, fld.N, fld.extent, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(fld.values, dtype="<c8").tobytes())
    return path


def read_field(path) -> Field2D:
    data = Path(path).read_bytes()
    if len(data) < _FIELD_PREFIX.size:
        raise ValueError(f"{path}: truncated field file")
    magic, N, extent, hlen = _FIELD_PREFIX.unpack_from(data)
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field file (bad magic)")
    start = _FIELD_PREFIX.size
    header = json.loads(data[start : start + hlen])
    body = data[start + hlen :]
    if len(body) != N * N * 8:
        raise ValueError(f"{path}: expected {N * N * 8} sample bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<c8").reshape(N, N).astype(np.complex128)
    return Field2D(values, extent, tuple(header.get("center_m", (0.0, 0.0))), header.get("meta", {}))


def write_expansion(path, expansion: ModeExpansion) -> Path:
    return write_json(path, expansion.to_dict())


def write_trajectory(out_dir, traj) -> list[Path]:
    out_dir = Path(out_dir)
    paths = [write_field(out_dir / f"record_{k:05d}.fld", rec) for k, rec in enumerate(traj.records)]
    paths.append(write_csv(out_dir / "diagnostics.csv", traj.DIAGNOSTIC_COLUMNS, traj.rows()))
    return paths


# -- manifest ---------------------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    parameters: dict
    config: dict
    config_file: str | None
    outputs: list[str] = field(default_factory=list)
    tool_version: str = ""
    wall_time_s: float = 0.0

    FILENAME = "manifest.json"

    def write(self, out_dir) -> Path:
        return write_json(Path(out_dir) / self.FILENAME, asdict(self))

    @classmethod
    def read(cls, path) -> RunManifest:
        return cls(**json.loads(Path(path).read_text()))


def config_from_dict(d: dict) -> MediumBeamConfig:
    """Inverse of :meth:`MediumBeamConfig.to_dict` (used when replaying a manifest)."""
    prof = d["profile"]
    profile = None
    if prof["kind"] == "user-table":
        profile = ControlProfile.from_table(prof["r_m"], prof["omega_s"])
    return MediumBeamConfig(
        omega0=d["omega0_s"],
        beam_radius=d["beam_radius_m"],
        g2N=d["g2N_s2"],
        lambda0=d["lambda0_m"],
        profile=profile,
        omega_floor=d.get("omega_floor", 1e-12),
    )
