"""Command-line front end.

Two commands::

    vinsim simulate --scenario 2 --runs 20 --seed 100 --mode both --out DIR
    vinsim report --in DIR

``simulate`` runs a Monte-Carlo ensemble and persists every artifact under
``--out``; ``report`` regenerates the aggregate/summary tables from the
stored per-run files.  Identical invocations produce byte-identical CSVs
(the JSON manifest carries wall-clock data and is the documented exception).

Exit codes: 0 success; 2 usage or configuration error; 3 partial failure
(some runs aborted, aggregate covers the rest); 4 nothing usable produced.

A JSON config file supplied with ``--config`` overrides the built-in
defaults.  Top-level sections and their targets:

* ``"sensor"``  -> sensor error model (``SensorConfig`` fields, SI units)
* ``"noise"``   -> filter Q/R/P0 values (``NoiseConfig`` fields)
* ``"vo"``      -> surrogate visual odometry error model (``VoConfig``)
* ``"vvs"``     -> converter knobs: ``vel_sigma_floor``, ``cal_tau``
* ``"scenario"``-> ``t_end``, ``full_length``, and ``ranges`` (draw-range
  overrides, ``{name: [lo, hi]}``; see ``sample_scenario``)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

from .filter import NoiseConfig
from .montecarlo import MODES, emit_outputs, run_monte_carlo, write_report
from .sensors import SensorConfig
from .vvs import VoConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_RUNTIME = 4

_VVS_KEYS = ("vel_sigma_floor", "cal_tau")


class ConfigError(ValueError):
    pass


def _build_parser():
    p = argparse.ArgumentParser(
        prog="vinsim",
        description="GNSS-denied visual-inertial navigation Monte-Carlo simulator",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo ensemble")
    sim.add_argument("--scenario", type=int, choices=(1, 2), required=True)
    sim.add_argument("--runs", type=int, default=20, metavar="N")
    sim.add_argument("--seed", type=int, default=0, metavar="S")
    sim.add_argument("--mode", choices=("ins", "vins", "both"), default="both")
    sim.add_argument("--duration-scale", type=float, default=1.0, metavar="F",
                     help="scale of the GNSS-denied span relative to the default")
    sim.add_argument("--out", required=True, metavar="DIR")
    sim.add_argument("--trace", choices=("none", "summary", "full"),
                     default="none",
                     help="summary: per-run lines; full: also store per-run "
                          "estimate-vs-truth trace CSVs")
    sim.add_argument("--jobs", type=int, default=1, metavar="K")
    sim.add_argument("--config", metavar="FILE",
                     help="JSON override file (see module docstring)")
    sim.add_argument("--full-length", action="store_true",
                     help="use the full-length scenario duration")

    rep = sub.add_parser("report", help="regenerate tables from stored runs")
    rep.add_argument("--in", dest="in_dir", required=True, metavar="DIR")
    return p


def _replace_from(section, defaults, name):
    if not isinstance(section, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    try:
        return dataclasses.replace(defaults, **section)
    except TypeError as exc:
        raise ConfigError(f"config section {name!r}: {exc}") from None


def _load_config(path):
    """Parse the override file into the keyword arguments of run_single."""
    out = {
        "noise": NoiseConfig(),
        "sensor_cfg": SensorConfig(),
        "vo_cfg": VoConfig(),
        "vvs_params": {},
        "t_end": None,
        "full_length": None,
        "ranges": None,
    }
    if path is None:
        return out
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a JSON object")

    known = {"sensor", "noise", "vo", "vvs", "scenario"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    if "sensor" in raw:
        out["sensor_cfg"] = _replace_from(raw["sensor"], SensorConfig(), "sensor")
    if "noise" in raw:
        out["noise"] = _replace_from(raw["noise"], NoiseConfig(), "noise")
    if "vo" in raw:
        out["vo_cfg"] = _replace_from(raw["vo"], VoConfig(), "vo")
    if "vvs" in raw:
        bad = set(raw["vvs"]) - set(_VVS_KEYS)
        if bad:
            raise ConfigError(f"config section 'vvs': unknown keys {sorted(bad)}")
        out["vvs_params"] = {k: float(v) for k, v in raw["vvs"].items()}
    if "scenario" in raw:
        scen = raw["scenario"]
        bad = set(scen) - {"t_end", "full_length", "ranges"}
        if bad:
            raise ConfigError(f"config section 'scenario': unknown keys {sorted(bad)}")
        if "t_end" in scen and scen["t_end"] is not None:
            out["t_end"] = float(scen["t_end"])
        if "full_length" in scen:
            out["full_length"] = bool(scen["full_length"])
        if "ranges" in scen:
            rng = scen["ranges"]
            if not isinstance(rng, dict):
                raise ConfigError("'scenario.ranges' must be an object")
            out["ranges"] = {
                str(k): (float(v[0]), float(v[1])) for k, v in rng.items()
            }
    return out


def _print_summary(stats, file=None):
    file = sys.stdout if file is None else file
    for st in sorted(stats.values(), key=lambda s: (s.scenario, s.mode)):
        print(
            f"scenario {st.scenario} {st.mode:>4s}: n={st.n_runs:<3d} "
            f"final horizontal {st.final_hor[0]:.1f} +/- {st.final_hor[1]:.1f} m "
            f"(max {st.final_hor[2]:.1f}) = {st.hor_pct[0]:.3f}% of "
            f"{st.denied_distance[0]:.0f} m denied, "
            f"attitude {st.final_att[0]:.3f} deg, "
            f"vertical {st.final_vert[0]:+.2f} m",
            file=file,
        )


def _simulate(args):
    try:
        overrides = _load_config(args.config)
    except ConfigError as exc:
        print(f"vinsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    modes = MODES if args.mode == "both" else (args.mode,)
    full_length = overrides.pop("full_length")
    if args.full_length:
        full_length = True
    t0 = time.monotonic()
    results, stats, failures = run_monte_carlo(
        args.scenario, args.runs, args.seed, modes=modes, jobs=args.jobs,
        duration_scale=args.duration_scale,
        full_length=bool(full_length),
        collect_trace=args.trace == "full",
        **overrides,
    )
    wall = time.monotonic() - t0

    for rep in failures:
        print(f"vinsim: run failed: {rep}", file=sys.stderr)
    if not results:
        print("vinsim: no run succeeded, nothing written", file=sys.stderr)
        return EXIT_RUNTIME

    if args.trace in ("summary", "full"):
        for r in results:
            print(
                f"run {r.run_id:3d} seed {r.seed:<6d} {r.mode:>4s}: "
                f"att {r.final_att:7.3f} deg  vert {r.final_vert:+8.2f} m  "
                f"hor {r.final_hor:9.2f} m ({r.hor_pct:6.3f}%)  "
                f"[{r.wall_time:.1f} s]"
            )
        _print_summary(stats)

    manifest_extra = {
        "command": {
            "scenario": args.scenario, "runs": args.runs, "seed": args.seed,
            "mode": args.mode, "duration_scale": args.duration_scale,
            "trace": args.trace, "jobs": args.jobs,
            "config_file": args.config, "full_length": bool(full_length),
        },
        "failures": failures,
        "wall_time_s": round(wall, 3),
    }
    emit_outputs(results, stats, args.out, manifest_extra=manifest_extra)
    print(f"vinsim: wrote {len(results)} runs to {args.out}")
    return EXIT_PARTIAL if failures else EXIT_OK


def _report(args):
    try:
        stats, written = write_report(args.in_dir)
    except (OSError, ValueError) as exc:
        print(f"vinsim: cannot rebuild report from {args.in_dir}: {exc}",
              file=sys.stderr)
        return EXIT_RUNTIME
    _print_summary(stats)
    print(f"vinsim: regenerated {', '.join(written)} in {args.in_dir}")
    return EXIT_OK


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "simulate":
        return _simulate(args)
    return _report(args)


if __name__ == "__main__":
    sys.exit(main())
