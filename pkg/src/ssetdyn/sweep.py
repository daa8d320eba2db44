"""Batch sweeps over (lambda, s) or (delta_e, s) grids with CSV output.

Grids are evaluated row by row: the slow axis (lambda or delta_e) indexes
rows that are dispatched to workers, while s varies fastest inside a row so
eigensolves can be warm-started from the neighbouring point.  Rows are
written incrementally and a crashed run can resume by skipping rows already
present in the output file.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import meanfield, spectral, trajectories
from .liouvillian import CountingChannel, assemble
from .model import ModelParams, PaperParams, build_basis, reduce

AXIS_NAMES = ("lambda", "s", "delta_e_over_homega")
ENGINES = ("spectral", "meanfield", "trajectory")
CHANNELS = {"photon": CountingChannel.PHOTON_EMISSION,
            "quasiparticle": CountingChannel.QUASIPARTICLE_DECAY}
OBSERVABLES = ("theta", "activity", "p_n", "n_mean", "n_mp", "limit_cycles")
WORKERS_ENV = "SSETDYN_WORKERS"

N_MAX_FLOOR = 60
N_MAX_CAP = 220
N_MAX_MARGIN = 1.5
DEFAULT_M_MAX = 30


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AxisSpec:
    name: str
    min: float
    max: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class SweepConfig:
    params: PaperParams
    grid: tuple  # of AxisSpec, 1 (cuts) or 2 (phase diagrams), slow axis first
    channel: str
    engine: str
    observables: tuple
    out_path: str
    n_max: int | str = "auto"
    m_max: int | str = "auto"
    seed: int = 0
    workers: int | None = None
    t_max: float = 1e5
    n_traj: int = 200
    burn_in: float | None = None


def load_config(path: str) -> SweepConfig:
    """Parse and validate a JSON run configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config: {err}") from err
    return parse_config(raw)


def parse_config(raw: dict) -> SweepConfig:
    try:
        p = raw["params"]
        params = PaperParams(
            ej_ratio=float(p["ej_ratio"]),
            de_ratio=float(p.get("de_ratio", 0.0)),
            omega_ratio=float(p["omega_ratio"]),
            gamma_ext_ratio=float(p["gamma_ext_ratio"]),
            lam=float(p.get("lam", 0.0)),
        )
        axes = []
        for spec in raw["grid"]:
            axis = AxisSpec(name=spec["name"], min=float(spec["min"]),
                            max=float(spec["max"]), count=int(spec["count"]))
            if axis.name not in AXIS_NAMES:
                raise ConfigError(f"unknown axis {axis.name!r}")
            if axis.count < 2:
                raise ConfigError("axis count must be at least 2")
            if not axis.min < axis.max:
                raise ConfigError("axis min must be below max")
            axes.append(axis)
        if len(axes) not in (1, 2):
            raise ConfigError("grid needs 1 axis (cut) or 2 axes (phase diagram)")
        channel = raw.get("channel", "photon")
        if channel not in CHANNELS:
            raise ConfigError(f"unknown channel {channel!r}")
        engine = raw.get("engine", "spectral")
        if engine not in ENGINES:
            raise ConfigError(f"unknown engine {engine!r}")
        observables = tuple(raw.get("observables", ["theta", "activity"]))
        for obs in observables:
            if obs not in OBSERVABLES:
                raise ConfigError(f"unknown observable {obs!r}")
        for trunc_key in ("n_max", "m_max"):
            val = raw.get(trunc_key, "auto")
            if val != "auto" and (not isinstance(val, int) or val < 1):
                raise ConfigError(f"{trunc_key} must be a positive integer or 'auto'")
        return SweepConfig(
            params=params,
            grid=tuple(axes),
            channel=channel,
            engine=engine,
            observables=observables,
            out_path=raw["out_path"],
            n_max=raw.get("n_max", "auto"),
            m_max=raw.get("m_max", "auto"),
            seed=int(raw.get("seed", 0)),
            workers=raw.get("workers"),
            t_max=float(raw.get("t_max", 1e5)),
            n_traj=int(raw.get("n_traj", 200)),
            burn_in=raw.get("burn_in"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid config: {err}") from err


def _params_at(cfg: SweepConfig, lam: float | None, de_over_omega: float | None) -> ModelParams:
    base = cfg.params
    raw = PaperParams(
        ej_ratio=base.ej_ratio,
        de_ratio=(de_over_omega * base.omega_ratio / (2 * np.pi)
                  if de_over_omega is not None else base.de_ratio),
        omega_ratio=base.omega_ratio,
        gamma_ext_ratio=base.gamma_ext_ratio,
        lam=lam if lam is not None else base.lam,
    )
    return reduce(raw)


def auto_n_max(cfg: SweepConfig) -> int:
    """Basis size from the largest mean-field cycle across the sweep window."""
    if cfg.n_max != "auto":
        return cfg.n_max
    largest = 0.0
    for point in _slow_axis_points(cfg):
        params = _params_at(cfg, point.get("lambda"), point.get("delta_e_over_homega"))
        if params.lam == 0:
            continue
        cycles = meanfield.limit_cycles(params)
        stable = [n for n, ok in cycles.roots if ok]
        if stable:
            largest = max(largest, max(stable))
    return int(min(max(N_MAX_FLOOR, np.ceil(N_MAX_MARGIN * largest)), N_MAX_CAP))


def _slow_axis_points(cfg: SweepConfig) -> list:
    axes = cfg.grid
    slow = [a for a in axes if a.name != "s"]
    if not slow:
        return [{}]
    return [{slow[0].name: v} for v in slow[0].values()]


def _s_values(cfg: SweepConfig) -> np.ndarray:
    for axis in cfg.grid:
        if axis.name == "s":
            return axis.values()
    return np.array([0.0])


def _spectral_row(cfg, n_max, m_max, slow_point):
    params = _params_at(cfg, slow_point.get("lambda"), slow_point.get("delta_e_over_homega"))
    space = build_basis(n_max, m_max)
    channel = CHANNELS[cfg.channel]
    rows = []
    guess = None
    for s in _s_values(cfg):
        row = dict(slow_point)
        row["s"] = s
        try:
            res = spectral.leading_eigenpair(assemble(params, space, s, channel), guess=guess)
            guess = res.rho_right
            row.update(residual=res.residual, iterations=res.iterations,
                       converged=res.converged)
            if "theta" in cfg.observables:
                row["theta"] = res.theta
            if "activity" in cfg.observables:
                plus = spectral.leading_eigenpair(
                    assemble(params, space, s + spectral.FD_STEP, channel), guess=guess)
                minus = spectral.leading_eigenpair(
                    assemble(params, space, s - spectral.FD_STEP, channel), guess=guess)
                row["activity"] = -(plus.theta - minus.theta) / (2 * spectral.FD_STEP)
            if {"p_n", "n_mean", "n_mp"} & set(cfg.observables):
                dist = spectral.number_distribution(res)
                if "n_mean" in cfg.observables:
                    row["n_mean"] = dist.mean_n
                if "n_mp" in cfg.observables:
                    row["n_mp"] = dist.n_mp
                if "p_n" in cfg.observables:
                    row["p_n"] = "|".join(f"{x:.6e}" for x in dist.p)
        except (spectral.NonConvergence, RuntimeError) as err:
            row.update(residual=float("nan"), iterations=-1, converged=False,
                       error=str(err))
        rows.append(row)
    return rows


def _meanfield_row(cfg, n_max, m_max, slow_point):
    params = _params_at(cfg, slow_point.get("lambda"), slow_point.get("delta_e_over_homega"))
    rows = []
    for s in _s_values(cfg):
        row = dict(slow_point)
        row["s"] = s
        result = meanfield.variational_theta(params, s)
        row.update(residual=0.0, iterations=0, converged=True)
        if "theta" in cfg.observables:
            row["theta"] = result.theta_mf
        if "activity" in cfg.observables:
            dv = spectral.FD_STEP
            up = meanfield.variational_theta(params, s + dv).theta_mf
            down = meanfield.variational_theta(params, s - dv).theta_mf
            row["activity"] = -(up - down) / (2 * dv)
        if "n_mean" in cfg.observables or "n_mp" in cfg.observables:
            row["n_mean"] = result.n_star
            row["n_mp"] = result.n_star
        if "limit_cycles" in cfg.observables:
            cycles = meanfield.limit_cycles(params)
            row["limit_cycles"] = "|".join(
                f"{n:.4f}:{int(ok)}" for n, ok in cycles.roots)
        rows.append(row)
    return rows


def _row_worker(args):
    cfg, n_max, m_max, slow_point = args
    if cfg.engine == "spectral":
        return _spectral_row(cfg, n_max, m_max, slow_point)
    return _meanfield_row(cfg, n_max, m_max, slow_point)


@dataclass
class SweepDataset:
    path: str
    fieldnames: list
    rows: list = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(str(r.get("converged")) == "True" for r in self.rows)


def _fieldnames(cfg: SweepConfig) -> list:
    slow = [a.name for a in cfg.grid if a.name != "s"]
    names = slow + ["s"]
    names += [o for o in OBSERVABLES if o in cfg.observables]
    names += ["residual", "iterations", "converged", "error"]
    return names


def run_sweep(cfg: SweepConfig, resume: bool = False) -> SweepDataset:
    """Evaluate the grid and persist one CSV row per point.

    Rows are keyed by the slow-axis value; with resume=True, slow-axis points
    whose rows are already complete in the output file are skipped.
    """
    if cfg.engine == "trajectory":
        return _run_trajectory_sweep(cfg)
    n_max = auto_n_max(cfg)
    m_max = cfg.m_max if cfg.m_max != "auto" else DEFAULT_M_MAX
    m_max = min(m_max, n_max)
    fieldnames = _fieldnames(cfg)
    slow_points = _slow_axis_points(cfg)
    s_count = len(_s_values(cfg))

    done = {}
    if resume and os.path.exists(cfg.out_path):
        with open(cfg.out_path) as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            for row in reader:
                key = _slow_key(row, cfg)
                done.setdefault(key, []).append(row)
        done = {k: v for k, v in done.items() if len(v) == s_count}

    todo = [(i, p) for i, p in enumerate(slow_points)
            if _point_key(p) not in done]
    workers = cfg.workers or int(os.environ.get(WORKERS_ENV, "1"))

    mode = "a" if done else "w"
    dataset = SweepDataset(path=cfg.out_path, fieldnames=fieldnames)
    for rows in done.values():
        dataset.rows.extend(rows)
    with open(cfg.out_path, mode, newline="") as fh:
        if mode == "w":
            fh.write(f"# config={json.dumps(_config_echo(cfg), sort_keys=True)}\n")
            fh.write(f"# params_hash={reduce(cfg.params).fingerprint()} "
                     f"n_max={n_max} m_max={m_max}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        if mode == "w":
            writer.writeheader()
        jobs = [(cfg, n_max, m_max, p) for _, p in todo]
        if workers <= 1 or len(jobs) <= 1:
            results = map(_row_worker, jobs)
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            results = pool.map(_row_worker, jobs)
        for rows in results:
            for row in rows:
                writer.writerow(row)
                dataset.rows.append({k: row.get(k) for k in fieldnames})
            fh.flush()
        if workers > 1 and len(jobs) > 1:
            pool.shutdown()
    return dataset


def _point_key(point: dict) -> tuple:
    return tuple(round(float(v), 12) for v in point.values())


def _slow_key(row: dict, cfg: SweepConfig) -> tuple:
    slow = [a.name for a in cfg.grid if a.name != "s"]
    return tuple(round(float(row[name]), 12) for name in slow)


def _config_echo(cfg: SweepConfig) -> dict:
    p = cfg.params
    return {
        "params": {"ej_ratio": p.ej_ratio, "de_ratio": p.de_ratio,
                   "omega_ratio": p.omega_ratio,
                   "gamma_ext_ratio": p.gamma_ext_ratio, "lam": p.lam},
        "grid": [{"name": a.name, "min": a.min, "max": a.max, "count": a.count}
                 for a in cfg.grid],
        "channel": cfg.channel,
        "engine": cfg.engine,
        "observables": list(cfg.observables),
        "seed": cfg.seed,
    }


def _run_trajectory_sweep(cfg: SweepConfig) -> SweepDataset:
    """Single-point trajectory ensemble; the s axis samples theta_hat."""
    params = _params_at(cfg, None, None)
    n_max = auto_n_max(cfg)
    burn_in = cfg.burn_in if cfg.burn_in is not None else 20 / params.gamma_ext
    records = trajectories.sample_ensemble(
        params, n_max, cfg.t_max, cfg.n_traj, cfg.seed, workers=cfg.workers)
    channel = trajectories.PHOTON if cfg.channel == "photon" else trajectories.QP_21
    s_grid = _s_values(cfg)
    stats = trajectories.counting_statistics(records, channel, burn_in, s_grid=s_grid)
    trajectories.export_records(records, cfg.out_path + ".jumps")
    fieldnames = ["s", "theta_hat", "theta_stderr", "ess", "converged",
                  "residual", "iterations", "error"]
    dataset = SweepDataset(path=cfg.out_path, fieldnames=fieldnames)
    with open(cfg.out_path, "w", newline="") as fh:
        fh.write(f"# config={json.dumps(_config_echo(cfg), sort_keys=True)}\n")
        fh.write(f"# params_hash={params.fingerprint()} k_hat={stats.k_hat:.6e} "
                 f"k_stderr={stats.k_stderr:.2e} fano={stats.fano:.4f}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for i, s in enumerate(s_grid):
            row = {"s": s, "theta_hat": stats.theta_hat[i],
                   "theta_stderr": stats.theta_stderr[i], "ess": stats.ess[i],
                   "converged": bool(stats.mask[i]), "residual": 0.0,
                   "iterations": 0}
            writer.writerow(row)
            dataset.rows.append(row)
    return dataset


@dataclass(frozen=True)
class EngineComparison:
    mean_abs_diff: float
    max_abs_diff: float
    boundaries: tuple  # of (s, slow_spectral, slow_meanfield)
    table_path: str


def compare_engines(cfg: SweepConfig) -> EngineComparison:
    """Activity difference between the spectral and mean-field engines.

    Phase boundaries along the slow axis are located per s value as the
    maximum of |dk/d(slow)|.
    """
    import dataclasses

    base = os.path.splitext(cfg.out_path)[0]
    datasets = {}
    for engine in ("spectral", "meanfield"):
        sub = dataclasses.replace(cfg, engine=engine,
                                  out_path=f"{base}.{engine}.csv",
                                  observables=("activity",))
        datasets[engine] = run_sweep(sub)

    def table(ds):
        out = {}
        for row in ds.rows:
            key = (_slow_of(row, cfg), round(float(row["s"]), 12))
            val = row.get("activity")
            out[key] = float(val) if val not in (None, "") else float("nan")
        return out

    spect, mf = table(datasets["spectral"]), table(datasets["meanfield"])
    keys = sorted(set(spect) & set(mf))
    diffs = np.array([spect[k] - mf[k] for k in keys])

    boundaries = []
    s_values = sorted({k[1] for k in keys})
    slow_values = sorted({k[0] for k in keys})
    if len(slow_values) >= 3:
        for s in s_values:
            locs = []
            for tab in (spect, mf):
                k_of = np.array([tab[(x, s)] for x in slow_values])
                grad = np.abs(np.gradient(k_of, slow_values))
                locs.append(slow_values[int(np.argmax(grad))])
            boundaries.append((s, locs[0], locs[1]))

    table_path = f"{base}.compare.csv"
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slow", "s", "activity_spectral", "activity_meanfield", "diff"])
        for k in keys:
            writer.writerow([k[0], k[1], spect[k], mf[k], spect[k] - mf[k]])
    finite = diffs[np.isfinite(diffs)]
    return EngineComparison(
        mean_abs_diff=float(np.mean(np.abs(finite))) if len(finite) else float("nan"),
        max_abs_diff=float(np.max(np.abs(finite))) if len(finite) else float("nan"),
        boundaries=tuple(boundaries),
        table_path=table_path,
    )


def _slow_of(row: dict, cfg: SweepConfig) -> float:
    slow = [a.name for a in cfg.grid if a.name != "s"]
    return round(float(row[slow[0]]), 12) if slow else 0.0


def emit_plots(data_path: str, style: str) -> list:
    """Write a self-contained gnuplot script plus tidy data files.

    Heatmaps use a log-scaled activity colour axis; unconverged cells become
    blank.  Returns the written paths.
    """
    if style not in ("heatmap", "cuts"):
        raise ConfigError(f"unknown plot style {style!r}")
    with open(data_path) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise ConfigError("dataset is empty")
    value_col = "activity" if "activity" in rows[0] else (
        "theta" if "theta" in rows[0] else "theta_hat")
    axis_cols = [c for c in ("lambda", "delta_e_over_homega", "s") if c in rows[0]]
    base = os.path.splitext(data_path)[0]

    dat_path = f"{base}.{style}.dat"
    gp_path = f"{base}.{style}.gp"
    with open(dat_path, "w") as fh:
        fh.write(f"# columns: {' '.join(axis_cols)} {value_col}\n")
        fh.write("# colour normalization: logarithmic, chosen here (not prescribed)\n")
        last_slow = None
        for row in rows:
            ok = str(row.get("converged")) == "True"
            val = row.get(value_col) if ok and row.get(value_col) else "NaN"
            if len(axis_cols) == 2 and row[axis_cols[0]] != last_slow:
                if last_slow is not None:
                    fh.write("\n")  # gnuplot grid separator
                last_slow = row[axis_cols[0]]
            fh.write(" ".join(row[c] for c in axis_cols) + f" {val}\n")

    with open(gp_path, "w") as fh:
        fh.write("set datafile missing 'NaN'\n")
        fh.write(f"set output '{base}.{style}.png'\nset terminal pngcairo size 900,700\n")
        if style == "heatmap" and len(axis_cols) == 2:
            fh.write(f"set xlabel '{axis_cols[1]}'\nset ylabel '{axis_cols[0]}'\n")
            fh.write("set logscale cb\nset view map\n")
            fh.write(f"splot '{dat_path}' using 2:1:3 with pm3d notitle\n")
        else:
            fh.write(f"set xlabel '{axis_cols[-1]}'\nset ylabel '{value_col}'\n")
            fh.write(f"plot '{dat_path}' using {len(axis_cols)}:{len(axis_cols)+1} "
                     "with linespoints notitle\n")
    return [dat_path, gp_path]
