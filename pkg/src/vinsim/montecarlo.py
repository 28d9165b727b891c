"""Monte-Carlo orchestration: end-to-end runs, NSE metrics, CSV artifacts.

One run = one stochastic scenario realization flown once through the
navigation filter in a given mode ("ins" dead-reckons on the inertial/
magnetic channels alone once GNSS drops out; "vins" additionally consumes
the virtual vision sensor).  Runs are seeded ``base + k`` and are completely
determined by (scenario, seed, mode) plus the configuration objects, so the
ensemble is reproducible byte-for-byte regardless of worker count: results
are reduced in (mode, run id) order, never in completion order.

Navigation system error (NSE) series are stored at 1 Hz:

* attitude: rotation-vector angle between estimated and true attitude, deg;
* vertical: estimated minus true altitude, m (signed, so offset-freezing
  biases remain visible);
* horizontal: local-tangent-plane distance between estimated and true
  geodetic position, m, using the radii at the true position.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import earth, so3
from .filter import FILTER_RATE, NavFilter, NoiseConfig, initial_state
from .scenario import ScenarioConfig, generate_truth, sample_scenario
from .sensors import SensorConfig, generate_sensors
from .vvs import DT_IMG, SurrogateVo, VoConfig, VvsConverter

__all__ = [
    "MODES",
    "RunError",
    "RunResult",
    "AggregateStats",
    "run_single",
    "run_monte_carlo",
    "aggregate",
    "emit_outputs",
    "load_results",
    "write_report",
]

MODES = ("ins", "vins")
NSE_RATE = 1.0  # Hz, storage rate of the error series

_INIT_SALT = 6011  # initial-state draw, distinct from all other streams
_FMT = "%.17g"     # round-trips float64 exactly


class RunError(RuntimeError):
    """A single run aborted; carries a structured report of where and why."""

    def __init__(self, scenario, seed, mode, stage, cause):
        self.report = {
            "scenario": scenario,
            "seed": seed,
            "mode": mode,
            "stage": stage,
            "error": f"{type(cause).__name__}: {cause}",
        }
        super().__init__(
            f"run failed (scenario {scenario}, seed {seed}, mode {mode}, "
            f"stage {stage}): {self.report['error']}"
        )

    def __reduce__(self):
        # survives the pickle hop back from process-pool workers
        return (_run_error_from_report, (self.report, self.args))


def _run_error_from_report(report, args):
    err = RunError.__new__(RunError)
    RuntimeError.__init__(err, *args)
    err.report = report
    return err


@dataclass
class RunResult:
    """NSE time series and distance bookkeeping for one run."""

    scenario: int
    run_id: int
    seed: int
    mode: str
    t: np.ndarray          # (m,) s, 1 Hz
    att_nse: np.ndarray    # (m,) deg
    vert_nse: np.ndarray   # (m,) m, signed estimated-minus-true
    hor_nse: np.ndarray    # (m,) m
    distance: float        # m, horizontal ground distance, whole flight
    denied_distance: float  # m, flown after the GNSS loss
    wall_time: float = 0.0
    trace: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        m = self.t.size
        if not (self.att_nse.size == self.vert_nse.size == self.hor_nse.size == m):
            raise ValueError("NSE series lengths differ")
        if np.any(self.hor_nse < 0.0) or np.any(self.att_nse < 0.0):
            raise ValueError("distance-like NSE series must be nonnegative")
        if not self.distance > 0.0:
            raise ValueError("distance flown must be positive")

    @property
    def final_att(self):
        return float(self.att_nse[-1])

    @property
    def final_vert(self):
        return float(self.vert_nse[-1])

    @property
    def final_hor(self):
        return float(self.hor_nse[-1])

    @property
    def hor_pct(self):
        """Final horizontal NSE as % of the GNSS-denied distance."""
        return 100.0 * self.final_hor / self.denied_distance


@dataclass
class AggregateStats:
    """Across-run statistics for one (scenario, mode) ensemble.

    Per-timestep statistics mirror the plot convention (mean solid,
    mean +/- std dashed); final-time rows mirror the mean/std/max summary
    table layout.  ``final_vert_*`` keeps the sign for mean/std and reports
    max as the largest magnitude.
    """

    scenario: int
    mode: str
    n_runs: int
    t: np.ndarray
    att_mean: np.ndarray
    att_std: np.ndarray
    vert_mean: np.ndarray
    vert_std: np.ndarray
    hor_mean: np.ndarray
    hor_std: np.ndarray
    final_att: tuple[float, float, float]    # mean, std, max
    final_vert: tuple[float, float, float]   # mean, std, max |.|
    final_hor: tuple[float, float, float]
    hor_pct: tuple[float, float, float]      # % of denied distance
    denied_distance: tuple[float, float, float]


# ---------------------------------------------------------------------------
# single run
# ---------------------------------------------------------------------------


def run_single(scenario, seed, mode, *, noise=None, sensor_cfg=None, vo_cfg=None,
               vvs_params=None, cfg=None, t_end=None, duration_scale=1.0,
               full_length=False, ranges=None, run_id=0,
               collect_trace=False) -> RunResult:
    """Fly one realization through the filter and score it against truth.

    ``cfg`` short-circuits the stochastic scenario draw with an explicit
    :class:`ScenarioConfig` (used by the deterministic test benches); all
    other knobs default to the documented configurations.  Raises
    :class:`RunError` with a structured report if any stage fails.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    t0 = time.monotonic()
    noise = noise if noise is not None else NoiseConfig()
    sensor_cfg = sensor_cfg if sensor_cfg is not None else SensorConfig()
    vo_cfg = vo_cfg if vo_cfg is not None else VoConfig()
    vvs_params = dict(vvs_params or {})

    stage = "scenario"
    try:
        if cfg is None:
            cfg = sample_scenario(scenario, seed, t_end=t_end,
                                  duration_scale=duration_scale,
                                  full_length=full_length, ranges=ranges)
        stage = "truth"
        traj = generate_truth(cfg)
        stage = "sensors"
        stream = generate_sensors(traj, sensor_cfg, seed)
        stage = "filter"
        series = _fly(traj, stream, mode, noise, vo_cfg, vvs_params, seed,
                      collect_trace)
    except Exception as exc:  # noqa: BLE001 - repackaged with run context
        raise RunError(scenario, seed, mode, stage, exc) from exc

    t_s, att, vert, hor, trace = series
    speed = np.hypot(traj.v[:, 0], traj.v[:, 1])
    return RunResult(
        scenario=int(cfg.scenario), run_id=int(run_id), seed=int(seed),
        mode=mode, t=t_s, att_nse=att, vert_nse=vert, hor_nse=hor,
        distance=float(np.trapezoid(speed, dx=traj.dt)),
        denied_distance=traj.gnss_denied_distance(),
        wall_time=time.monotonic() - t0, trace=trace,
    )


def _fly(traj, stream, mode, noise, vo_cfg, vvs_params, seed, collect_trace):
    """The 100 Hz execution loop; returns the 1 Hz NSE series."""
    cfg = traj.cfg
    nav = NavFilter(noise, cfg.b_model)
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _INIT_SALT)))
    state = initial_state(traj.sample(0), noise, rng)

    vins = mode == "vins"
    if vins:
        converter = VvsConverter(
            gnss_pos_sigma=noise.r_gnss_pos, gnss_alt_sigma=noise.r_gnss_alt,
            **vvs_params,
        )
        vo = SurrogateVo(vo_cfg, seed)

    n_frames = stream.t.size
    stride = int(round(FILTER_RATE / NSE_RATE))
    img_stride = int(round(DT_IMG * FILTER_RATE))
    ratio = int(round(traj.dt ** -1 / FILTER_RATE))  # truth samples per frame

    n_rec = (n_frames - 1) // stride + 1
    t_s = np.empty(n_rec)
    att = np.empty(n_rec)
    vert = np.empty(n_rec)
    hor = np.empty(n_rec)
    trace = {k: np.empty((n_rec, 3)) for k in ("est_T", "true_T", "est_v", "true_v")} \
        if collect_trace else None
    if collect_trace:
        trace["dp_hat"] = np.zeros(n_rec)

    def record(j, k):
        i = ratio * k
        t_s[j] = stream.t[k]
        att[j] = np.degrees(np.linalg.norm(so3.minus(state.q, traj.q[i])))
        vert[j] = state.x[8] - traj.T[i, 2]
        m_r, n_r = earth.radii(traj.T[i, 1])
        dn = (state.x[7] - traj.T[i, 1]) * (m_r + traj.T[i, 2])
        de = (state.x[6] - traj.T[i, 0]) * (n_r + traj.T[i, 2]) * np.cos(traj.T[i, 1])
        hor[j] = np.hypot(dn, de)
        if collect_trace:
            trace["est_T"][j] = state.x[6:9]
            trace["true_T"][j] = traj.T[i]
            trace["est_v"][j] = state.x[9:12]
            trace["true_v"][j] = traj.v[i]
            trace["dp_hat"][j] = converter.dp_hat if vins else np.nan

    record(0, 0)
    for k in range(1, n_frames):
        frame = stream.frame(k)
        denied = frame.t >= cfg.t_gnss_loss
        hook = None
        if vins and denied and k % img_stride == 0:
            i = ratio * k

            def hook(pre, i=i, frame=frame):
                pose = vo.pose(frame.t, traj.q[i], traj.T[i], pre.q, pre.x[6:9])
                return converter.step(pose, pre.x[6:9], frame.baro_alt)

        state = nav.step(state, frame, vvs_hook=hook, denied=denied)
        if vins and not denied and k % img_stride == 0:
            converter.calibrate_pressure(frame.baro_alt, state.x[8], DT_IMG)
        if k % stride == 0:
            record(k // stride, k)
    return t_s, att, vert, hor, trace


# ---------------------------------------------------------------------------
# ensemble
# ---------------------------------------------------------------------------


def _run_star(kwargs):
    return run_single(**kwargs)


def run_monte_carlo(scenario, n_runs, base_seed, modes=MODES, jobs=1, **kwargs):
    """Run ``n_runs`` independent realizations per mode, seeds ``base + k``.

    Returns ``(results, stats, failures)``: successful :class:`RunResult`
    objects in deterministic (mode, run id) order, one :class:`AggregateStats`
    per mode computed over the successes, and the structured reports of any
    failed runs.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    modes = tuple(modes)
    jobs = max(1, int(jobs))
    tasks = [
        dict(scenario=scenario, seed=int(base_seed) + k, mode=mode, run_id=k,
             **kwargs)
        for mode in modes
        for k in range(n_runs)
    ]

    results, failures = [], []
    if jobs == 1:
        for task in tasks:
            try:
                results.append(_run_star(task))
            except RunError as err:
                failures.append(err.report)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_star, task) for task in tasks]
            for fut in futures:
                try:
                    results.append(fut.result())
                except RunError as err:
                    failures.append(err.report)

    results.sort(key=lambda r: (r.mode, r.run_id))
    stats = {
        mode: aggregate([r for r in results if r.mode == mode])
        for mode in modes
        if any(r.mode == mode for r in results)
    }
    return results, stats, failures


def aggregate(results) -> AggregateStats:
    """Across-run statistics; population std so a single run aggregates to
    itself with zero spread."""
    if not results:
        raise ValueError("cannot aggregate zero runs")
    scen = {r.scenario for r in results}
    mode = {r.mode for r in results}
    if len(scen) != 1 or len(mode) != 1:
        raise ValueError("aggregate expects a single (scenario, mode) ensemble")
    m = {r.t.size for r in results}
    if len(m) != 1:
        raise ValueError("runs have mismatched series lengths")

    att = np.vstack([r.att_nse for r in results])
    vert = np.vstack([r.vert_nse for r in results])
    hor = np.vstack([r.hor_nse for r in results])
    f_att = np.array([r.final_att for r in results])
    f_vert = np.array([r.final_vert for r in results])
    f_hor = np.array([r.final_hor for r in results])
    pct = np.array([r.hor_pct for r in results])
    dist = np.array([r.denied_distance for r in results])

    def mss(v, signed=False):
        peak = np.max(np.abs(v)) if signed else np.max(v)
        return float(np.mean(v)), float(np.std(v)), float(peak)

    return AggregateStats(
        scenario=results[0].scenario, mode=results[0].mode, n_runs=len(results),
        t=results[0].t.copy(),
        att_mean=att.mean(axis=0), att_std=att.std(axis=0),
        vert_mean=vert.mean(axis=0), vert_std=vert.std(axis=0),
        hor_mean=hor.mean(axis=0), hor_std=hor.std(axis=0),
        final_att=mss(f_att), final_vert=mss(f_vert, signed=True),
        final_hor=mss(f_hor), hor_pct=mss(pct), denied_distance=mss(dist),
    )


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(value):
    return _FMT % value


def _series_name(r: RunResult):
    return f"scenario{r.scenario}_{r.mode}_run{r.run_id:03d}.csv"


def write_run_series(result: RunResult, path):
    rows = (
        [_fmt(result.t[j]), _fmt(result.att_nse[j]), _fmt(result.vert_nse[j]),
         _fmt(result.hor_nse[j])]
        for j in range(result.t.size)
    )
    _write_rows(path, ["t", "att_nse_deg", "vert_nse_m", "hor_nse_m"], rows)


def emit_outputs(results, stats, out_dir, manifest_extra=None):
    """Persist an ensemble: per-run series, index, aggregate series, summary
    table, and a JSON manifest.  Returns the list of files written.

    Every value is printed at 17 significant digits so re-reading reproduces
    the in-memory numbers exactly; the manifest is the only file containing
    wall-clock information and is excluded from byte-identity comparisons.
    """
    out_dir = os.path.abspath(out_dir)
    runs_dir = os.path.join(out_dir, "runs")
    os.makedirs(runs_dir, exist_ok=True)
    written = []

    results = sorted(results, key=lambda r: (r.scenario, r.mode, r.run_id))
    for r in results:
        rel = os.path.join("runs", _series_name(r))
        write_run_series(r, os.path.join(out_dir, rel))
        written.append(rel)
        if r.trace is not None:
            rel_t = os.path.join("runs", "trace_" + _series_name(r))
            _write_trace(r, os.path.join(out_dir, rel_t))
            written.append(rel_t)

    index_rows = [
        [r.scenario, r.mode, r.run_id, r.seed, _fmt(r.distance),
         _fmt(r.denied_distance), _fmt(r.final_att), _fmt(r.final_vert),
         _fmt(r.final_hor), _fmt(r.hor_pct), _series_name(r)]
        for r in results
    ]
    _write_rows(
        os.path.join(out_dir, "runs.csv"),
        ["scenario", "mode", "run_id", "seed", "distance_m",
         "denied_distance_m", "final_att_deg", "final_vert_m", "final_hor_m",
         "hor_pct", "series_file"],
        index_rows,
    )
    written.append("runs.csv")

    written += _write_aggregates(stats, out_dir)
    written.append(_write_summary(stats, out_dir))

    manifest = {
        "format": "vinsim-ensemble-1",
        "version": _version(),
        "runs": [
            {"scenario": r.scenario, "mode": r.mode, "run_id": r.run_id,
             "seed": r.seed, "wall_time_s": round(r.wall_time, 3)}
            for r in results
        ],
        "outputs": sorted(written),
        "created_unix": time.time(),
    }
    manifest.update(manifest_extra or {})
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append("manifest.json")
    return written


def _write_trace(result, path):
    tr = result.trace
    header = ["t"]
    for name in ("est", "true"):
        header += [f"{name}_lon", f"{name}_lat", f"{name}_alt",
                   f"{name}_vn", f"{name}_ve", f"{name}_vd"]
    header.append("dp_hat")
    rows = (
        [_fmt(result.t[j])]
        + [_fmt(v) for v in tr["est_T"][j]] + [_fmt(v) for v in tr["est_v"][j]]
        + [_fmt(v) for v in tr["true_T"][j]] + [_fmt(v) for v in tr["true_v"][j]]
        + [_fmt(tr["dp_hat"][j])]
        for j in range(result.t.size)
    )
    _write_rows(path, header, rows)


_METRICS = (("att", "deg"), ("vert", "m"), ("hor", "m"))


def _write_aggregates(stats, out_dir):
    """One aggregate time-series CSV per scenario: t plus mean / mean-std /
    mean+std per metric per mode."""
    written = []
    by_scen = {}
    for st in stats.values():
        by_scen.setdefault(st.scenario, []).append(st)
    for scen, group in sorted(by_scen.items()):
        group.sort(key=lambda s: s.mode)
        header = ["t"]
        cols = [group[0].t]
        for st in group:
            for name, unit in _METRICS:
                mean = getattr(st, f"{name}_mean")
                std = getattr(st, f"{name}_std")
                header += [
                    f"{st.mode}_{name}_{unit}_mean",
                    f"{st.mode}_{name}_{unit}_lo",
                    f"{st.mode}_{name}_{unit}_hi",
                ]
                cols += [mean, mean - std, mean + std]
        data = np.column_stack(cols)
        name = f"aggregate_scenario{scen}.csv"
        _write_rows(
            os.path.join(out_dir, name), header,
            ([_fmt(v) for v in row] for row in data),
        )
        written.append(name)
    return written


def _write_summary(stats, out_dir):
    """Summary table: one mean/std/max row triple per (scenario, mode), with
    the final NSEs in natural units and the horizontal one also as % of the
    GNSS-denied distance."""
    rows = []
    for st in sorted(stats.values(), key=lambda s: (s.scenario, s.mode)):
        for i, stat in enumerate(("mean", "std", "max")):
            rows.append(
                [st.scenario, st.mode, st.n_runs, stat,
                 _fmt(st.denied_distance[i]), _fmt(st.final_att[i]),
                 _fmt(st.final_vert[i]), _fmt(st.final_hor[i]),
                 _fmt(st.hor_pct[i])]
            )
    _write_rows(
        os.path.join(out_dir, "summary.csv"),
        ["scenario", "mode", "n_runs", "stat", "denied_distance_m", "att_deg",
         "vert_m", "hor_m", "hor_pct"],
        rows,
    )
    return "summary.csv"


def load_results(out_dir):
    """Rebuild the RunResult list from ``runs.csv`` plus the series files."""
    out_dir = os.path.abspath(out_dir)
    results = []
    with open(os.path.join(out_dir, "runs.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            data = np.genfromtxt(
                os.path.join(out_dir, "runs", row["series_file"]),
                delimiter=",", skip_header=1,
            )
            results.append(
                RunResult(
                    scenario=int(row["scenario"]), mode=row["mode"],
                    run_id=int(row["run_id"]), seed=int(row["seed"]),
                    t=data[:, 0], att_nse=data[:, 1], vert_nse=data[:, 2],
                    hor_nse=data[:, 3], distance=float(row["distance_m"]),
                    denied_distance=float(row["denied_distance_m"]),
                )
            )
    results.sort(key=lambda r: (r.scenario, r.mode, r.run_id))
    return results


def write_report(out_dir):
    """Regenerate aggregate and summary CSVs from the stored per-run files.

    Used by the ``report`` command; with intact inputs the regenerated files
    are byte-identical to the originals.
    """
    results = load_results(out_dir)
    stats = {}
    for r in results:
        stats.setdefault((r.scenario, r.mode), []).append(r)
    stats = {k: aggregate(v) for k, v in sorted(stats.items())}
    written = _write_aggregates(stats, out_dir)
    written.append(_write_summary(stats, out_dir))
    return stats, written


def _version():
    try:
        from importlib.metadata import version

        base = version("vinsim")
    except Exception:  # pragma: no cover - metadata missing in odd installs
        base = "0.0.0"
    head = _git_head()
    return f"vinsim {base}+g{head}" if head else f"vinsim {base}"


def _git_head():
    import subprocess

    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=5.0,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
    except Exception:
        return None
    return out.stdout.strip() if out.returncode == 0 else None
