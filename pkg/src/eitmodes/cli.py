"""Command-line entry point: ``eitmodes {modes,dispersion,decompose,propagate,make-field,replay}``.

Exit codes: 0 success, 2 usage/config error, 3 physics precondition violated,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import bpm, decomposition, dispersion, fileio, radial
from .errors import EITModeError, PowerLoss, UnstableStep
from .fileio import RunManifest

logger = logging.getLogger("eitmodes")

EXIT_USAGE = 2

REMEDIATION = {
    UnstableStep: "hint: lower --dz, or coarsen the grid so the field's spectrum is narrower",
    PowerLoss: "hint: enlarge the field extent, or check that the input is close to a bound mode",
}


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _int_list(text: str) -> list[int]:
    items = [t for t in text.replace(" ", "").split(",") if t]
    try:
        return [int(t) for t in items]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _channel_list(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.replace(" ", "").split(","):
        if not item:
            continue
        try:
            m, n = item.split(":")
            out.append((int(m), int(n)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"channels are m:n pairs, got {item!r}") from None
    return out


def _common(p: argparse.ArgumentParser, *, delta: bool = True) -> None:
    p.add_argument("--config", type=Path, help="JSON or YAML config file")
    p.add_argument("--a", type=float, dest="beam_radius", help="control-beam width a (m)")
    p.add_argument("--grid-points", type=int, help="radial grid points (default 4000)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    if delta:
        p.add_argument("--delta", type=float, default=-1e6, help="probe detuning (s^-1), default -1e6")


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "-1e6" as an option string; fold such values into "--flag=-1e6"
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            try:
                float(argv[i + 1])
            except ValueError:
                pass
            else:
                out.append(f"{tok}={argv[i + 1]}")
                i += 2
                continue
        out.append(tok)
        i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eitmodes", description="Transverse modes and group velocities of slow light in a finite EIT control beam."
    )
    parser.add_argument("--version", action="version", version=_version())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", help="radial eigenmodes for a set of m channels")
    _common(p)
    p.add_argument("--m", type=_int_list, default=[0], help="comma-separated m values (default 0)")
    p.add_argument("--nmax", type=int, default=3)

    p = sub.add_parser("dispersion", help="beta and group velocity versus detuning")
    _common(p, delta=False)
    p.add_argument("--delta-min", type=float, default=dispersion.DEFAULT_SWEEP_RANGE[0])
    p.add_argument("--delta-max", type=float, default=dispersion.DEFAULT_SWEEP_RANGE[1])
    p.add_argument("--delta-steps", type=int, default=20)
    p.add_argument("--m", type=_int_list, default=[0], help="m values; channels are (m, 1..nmax)")
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--channels", type=_channel_list, help="explicit m:n list, overrides --m/--nmax")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("decompose", help="expand a field file in the bound-mode basis")
    _common(p)
    p.add_argument("--field", type=Path, required=True)
    p.add_argument("--m-max", type=int, default=2)
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--z", type=float, help="also write the resynthesized field at this z (m)")

    p = sub.add_parser("propagate", help="split-step propagation of a field file")
    _common(p)
    p.add_argument("--field", type=Path, required=True)
    p.add_argument("--dz", type=float, default=1e-5)
    p.add_argument("--z-total", type=float, default=1e-2)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--absorber-fraction", type=float, default=0.1)
    p.add_argument("--absorber-strength", type=float, default=1.0)
    p.add_argument("--allow-loss", action="store_true", help="do not fail when the absorber takes >1%% of the power")
    p.add_argument("--no-records", action="store_true", help="write diagnostics only")

    p = sub.add_parser("make-field", help="write a Gaussian or eigenmode input field")
    _common(p)
    p.add_argument("--kind", choices=("gaussian", "mode"), default="mode")
    p.add_argument("--waist", type=float, help="Gaussian waist w in exp(-r^2/w^2) (m)")
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--N", type=int, default=512)
    p.add_argument("--extent", type=float, help="half-width (m); default 8x the ground-mode rms radius")
    p.add_argument("--name", default="input.fld")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    return parser


# -- commands -------------------------------------------------------------------


def cmd_modes(config, params):
    request = radial.SpectrumRequest(params["m"], params["nmax"], params["delta"], params["grid_points"])
    modes = radial.solve_spectrum(request, config)
    out = Path(params["out"])
    paths = fileio.write_modes(out, modes)
    summary = {
        "delta_s": params["delta"],
        "betas": [{"m": md.m, "n": md.n, "beta_m2": md.beta, "nodes": md.nodes} for md in modes],
        "dropped": [{"m": m, "n": n, "beta_m2": b} for m, n, b in request.dropped],
    }
    paths.append(fileio.write_json(out / "summary.json", summary))
    for md in modes:
        print(f"m={md.m:+d} n={md.n} beta={md.beta:.10g} m^-2 nodes={md.nodes}")
    return paths


def cmd_dispersion(config, params):
    channels = params.get("channels") or [(m, n) for m in params["m"] for n in range(1, params["nmax"] + 1)]
    if not channels:
        raise UsageError("empty channel list")
    lo, hi = params["delta_min"], params["delta_max"]
    if lo >= 0 or hi >= 0:
        raise UsageError("--delta-min/--delta-max must both be negative")
    deltas = dispersion.default_delta_grid(params["delta_steps"], (lo, hi))
    table = dispersion.sweep(channels, deltas, config, n_points=params["grid_points"], max_workers=params["workers"])
    out = Path(params["out"])
    path = fileio.write_dispersion(out / "dispersion.csv", table)
    print(f"{len(table.deltas)} detunings x {len(channels)} channels -> {path}")
    print(f"max |slope_hf - slope_fd| / |slope_hf| = {table.slope_discrepancy().max():.3g}")
    return [path]


def cmd_decompose(config, params):
    field = fileio.read_field(params["field"])
    dec = decomposition.ModeDecomposer(
        config=config,
        delta=params["delta"],
        m_max=params["m_max"],
        n_max=params["nmax"],
        n_points=params["grid_points"],
    )
    expansion = dec.fit().transform(field)
    out = Path(params["out"])
    paths = [fileio.write_expansion(out / "expansion.json", expansion)]
    if params.get("z") is not None:
        paths.append(fileio.write_field(out / "synthesized.fld", dec.inverse_transform(expansion, params["z"])))
    for t in expansion.terms:
        if t.power > 1e-6:
            print(f"m={t.m:+d} n={t.n} |c|^2={t.power:.6f}")
    print(f"residual power fraction = {expansion.residual_power_fraction:.3e}")
    return paths


def cmd_propagate(config, params):
    field = fileio.read_field(params["field"])
    plan = bpm.build_plan(
        field,
        config,
        params["dz"],
        params["z_total"],
        record_every=params["record_every"],
        absorber_fraction=params["absorber_fraction"],
        absorber_strength=params["absorber_strength"],
        expect_bound=not params["allow_loss"],
    )
    traj = bpm.propagate(field, plan, config, params["delta"], keep_records=not params["no_records"])
    paths = fileio.write_trajectory(params["out"], traj)
    print(
        f"min overlap {traj.overlap.min():.6f}, rms drift {traj.rms_drift():.3e}, "
        f"phase slope {traj.phase_slope():.10g} rad/m, absorbed {traj.absorbed_fraction:.3e}"
    )
    return paths


def cmd_make_field(config, params):
    delta = params["delta"]
    solver = radial.TransverseModeSolver(
        config=config, delta=delta, m_list=(params["m"],), n_max=params["n"], n_points=params["grid_points"]
    ).fit()
    extent = params.get("extent")
    if extent is None:
        ground = radial.TransverseModeSolver(config=config, delta=delta, m_list=(0,), n_max=1).fit().modes_[0]
        extent = 8.0 * ground.rms_radius()
    if params["kind"] == "mode":
        fld = decomposition.mode_field(solver.mode(params["m"], params["n"]), params["N"], extent)
    else:
        if not params.get("waist"):
            raise UsageError("--kind gaussian needs --waist")
        fld = decomposition.gaussian_field(params["waist"], params["N"], extent, m=params["m"])
    path = fileio.write_field(Path(params["out"]) / params["name"], fld)
    print(f"wrote {path} (N={fld.N}, extent={extent:.6g} m)")
    return [path]


COMMANDS = {
    "modes": cmd_modes,
    "dispersion": cmd_dispersion,
    "decompose": cmd_decompose,
    "propagate": cmd_propagate,
    "make-field": cmd_make_field,
}


def _run(command: str, params: dict, config, config_file) -> int:
    out = Path(params["out"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    paths = COMMANDS[command](config, params)
    manifest = RunManifest(
        command=command,
        parameters={k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()},
        config=config.to_dict(),
        config_file=str(config_file) if config_file else None,
        outputs=sorted(str(Path(p).relative_to(out)) for p in paths),
        tool_version=_version(),
        wall_time_s=time.perf_counter() - t0,
    )
    manifest.write(out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative_values(list(sys.argv[1:] if argv is None else argv)))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "replay":
            manifest = RunManifest.read(args.manifest)
            params = dict(manifest.parameters)
            params["out"] = str(args.out)
            if params.get("channels"):
                params["channels"] = [tuple(ch) for ch in params["channels"]]
            return _run(manifest.command, params, fileio.config_from_dict(manifest.config), manifest.config_file)

        params = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose", "beam_radius")}
        config = fileio.load_config(args.config, {"beam_radius_m": args.beam_radius})
        return _run(args.command, params, config, args.config)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"eitmodes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EITModeError as exc:
        print(f"eitmodes: {type(exc).__name__}: {exc}", file=sys.stderr)
        hint = REMEDIATION.get(type(exc))
        if hint:
            print(hint, file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError, OSError) as exc:
        print(f"eitmodes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
