"""Command-line interface.

Subcommands:
  model   evaluate the linewidth breakdown over a (T, J, f) grid -> CSV
  synth   generate a synthetic gain-spectrum dataset from a config
  fit     run the fitting pipeline on a dataset directory
  report  render the fitted-vs-reference parameter table from a report

All state comes from the config file and the seed; nothing reads the clock
or the environment, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_config
from .constants import TWO_PI
from .dataset import load_dataset, write_manifest, write_trace
from .dissipation import critical_intensity, decay_length, gamma_rel_closed, q_factor, total_linewidth
from .pipeline import render_report_table, run_fit_pipeline
from .sbs import g_b_at_linewidth
from .synth import plan_acquisitions, run_acquisition
from .tls_core import DriveState, PhononMode


class CliError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):  # includes numpy scalars, which repr differently
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows, config: RunConfig = None) -> None:
    lines = []
    if config is not None:
        # keeps every emitted number traceable to its run
        lines.append(f"# tlsphonon {__version__} config_sha256 {config.sha256}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# grid parsing for `model`
# ---------------------------------------------------------------------------

def parse_grid(spec: str) -> dict:
    """Parse 'T=0.3:4.2:25,J=1e-3:1e3:25:log,f=9.188e9' into value arrays.

    Each dimension is either a single value or lo:hi:n with an optional
    :log for logarithmic spacing. Required keys: T [K], J [W/m^2], f [Hz].
    """
    dims = {}
    if not spec:
        raise CliError("empty grid spec")
    for part in spec.split(","):
        if "=" not in part:
            raise CliError(f"grid dimension {part!r} is not name=values")
        name, values = part.split("=", 1)
        name = name.strip()
        pieces = values.split(":")
        if len(pieces) == 1:
            arr = np.array([float(pieces[0])])
        elif len(pieces) in (3, 4):
            lo, hi, n = float(pieces[0]), float(pieces[1]), int(pieces[2])
            if n < 1:
                raise CliError(f"grid dimension {name}: need at least one point")
            log = len(pieces) == 4
            if log and pieces[3] != "log":
                raise CliError(f"grid dimension {name}: unknown modifier {pieces[3]!r}")
            if n == 1:
                arr = np.array([lo])
            elif log:
                if lo <= 0 or hi <= 0:
                    raise CliError(f"grid dimension {name}: log spacing needs positive bounds")
                arr = np.geomspace(lo, hi, n)
            else:
                arr = np.linspace(lo, hi, n)
        else:
            raise CliError(f"grid dimension {name!r}: expected value or lo:hi:n[:log]")
        dims[name] = arr

    missing = {"T", "J", "f"} - set(dims)
    if missing:
        raise CliError(f"grid is missing dimensions: {sorted(missing)}")
    if np.any(dims["T"] <= 0):
        raise CliError("grid temperatures must be positive")
    if np.any(dims["f"] <= 0):
        raise CliError("grid frequencies must be positive")
    if np.any(dims["J"] < 0):
        raise CliError("grid intensities must be nonnegative")
    return dims


MODEL_COLUMNS = (
    "temperature_k", "intensity_w_m2", "frequency_hz", "j_c_w_m2",
    "gamma_res_hz", "gamma_rel_hz", "gamma_bg_hz", "gamma_total_hz",
    "freq_shift_hz", "q_factor", "decay_length_m",
)


def cmd_model(config: RunConfig, grid_spec: str, out_dir: Path) -> Path:
    dims = parse_grid(grid_spec)
    t_ref = config.fit_section().get("t0_k")
    rows = []
    for f_hz in dims["f"]:
        f_hz = float(f_hz)
        mode = PhononMode.in_material(config.material, TWO_PI * f_hz, "L")
        for t in dims["T"]:
            for j in dims["J"]:
                drive = DriveState(temperature=float(t), intensity=float(j),
                                   drive_omega=mode.omega)
                if config.j_c_explicit is not None:
                    j_c = config.j_c_explicit
                else:
                    j_c = critical_intensity(config.material, float(t),
                                             times=config.times,
                                             ensemble=config.ensemble)
                bd = total_linewidth(
                    mode, drive, config.material, config.ensemble,
                    j_c=j_c, t_ref=t_ref,
                )
                rows.append((
                    float(t), float(j), float(f_hz), j_c,
                    bd.gamma_res / TWO_PI, bd.gamma_rel / TWO_PI,
                    bd.gamma_bg / TWO_PI, bd.total / TWO_PI,
                    bd.freq_shift_res / TWO_PI,
                    q_factor(mode.omega, bd.total),
                    decay_length(bd.total, config.material, "L"),
                ))
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "model.csv"
    _write_csv(out, MODEL_COLUMNS, rows, config=config)
    return out


def cmd_synth(config: RunConfig, out_dir: Path, parallel: int = 1) -> Path:
    plan = config.sweep_plan()

    # conservative weak-signal check: the line is narrowest (gain highest)
    # at the saturation floor
    model = plan.model
    floor = (gamma_rel_closed(plan.t_start, "L", model.material, model.ensemble)
             + model.ensemble.gamma_bg)
    g_b_max = g_b_at_linewidth(model.material, floor)
    for idx, (pump, stokes) in enumerate(plan.power_settings):
        margin = g_b_max * pump * model.material.l_fut
        if margin > 0.1:
            print(f"warning: power setting {idx} has single-pass gain "
                  f"g_B*P_p*L = {margin:.3g} > 0.1; the weak-signal model "
                  "is marginal there", file=sys.stderr)

    grid, acquisitions = plan_acquisitions(plan)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            traces = list(pool.map(run_acquisition, acquisitions,
                                   [plan] * len(acquisitions),
                                   [grid] * len(acquisitions),
                                   chunksize=16))
    else:
        traces = [run_acquisition(acq, plan, grid) for acq in acquisitions]

    out_dir.mkdir(parents=True, exist_ok=True)
    entries = [write_trace(out_dir, tr) for tr in traces]
    write_manifest(out_dir, entries, config.raw, config.sha256, __version__)
    return out_dir / "manifest.json"


def cmd_fit(config: RunConfig, dataset_dir: Path, out_dir: Path) -> int:
    loaded = load_dataset(dataset_dir)
    traces = [tr for (_, tr, err) in loaded if err is None]
    load_errors = [f"trace {entry['file']}: {err}"
                   for (entry, _, err) in loaded if err is not None]

    result = run_fit_pipeline(traces, config, load_errors=load_errors)
    report = result.report

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps({**report, "config": config.raw}, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )

    binned_dir = out_dir / "binned"
    binned_dir.mkdir(exist_ok=True)
    for setting, center, averaged in result.binned:
        path = binned_dir / f"binned_s{setting:02d}_T{center:.3f}.csv"
        _write_csv(path, ("detuning_hz", "gain_w"),
                   zip(averaged.detuning_grid / TWO_PI, averaged.gain))

    def rows_of(records, columns):
        return [tuple(rec[c] for c in columns) for rec in records]

    per_bin_cols = ("bin_center_k", "temperature_k", "setting_index", "n_traces",
                    "intensity_w_m2", "omega_hat_hz", "omega_sigma_hz",
                    "gamma_hat_hz", "gamma_sigma_hz", "peak_hat_w", "residual_norm")
    _write_csv(out_dir / "per_bin.csv", per_bin_cols,
               rows_of(report["per_bin"], per_bin_cols), config=config)

    per_t_cols = ("temperature_k", "p_gamma2_j_m3", "p_gamma2_sigma_j_m3",
                  "j_c_w_m2", "j_c_sigma_w_m2", "gamma0_hz", "gamma0_sigma_hz",
                  "t1_t2_s2", "t1_s", "t2_s")
    _write_csv(out_dir / "per_temperature.csv", per_t_cols,
               rows_of(report["per_temperature"], per_t_cols), config=config)

    shift_cols = ("temperature_k", "measured_shift_hz", "predicted_shift_hz",
                  "discrepancy_hz", "uncertainty_hz")
    _write_csv(out_dir / "freq_shift.csv", shift_cols,
               rows_of(report["freq_shift"], shift_cols), config=config)

    (out_dir / "report.txt").write_text(
        render_report_table(report, config) + "\n", encoding="utf-8"
    )

    for err in report["errors"]:
        print(f"warning: {err}", file=sys.stderr)
    if result.failure_fraction > 0.5:
        print(f"error: {result.n_failures}/{result.n_fit_units} fit units failed",
              file=sys.stderr)
        return 1
    return 0


def cmd_report(out_dir: Path) -> str:
    path = Path(out_dir) / "report.json"
    if not path.exists():
        raise CliError(f"no report.json in {out_dir}; run `fit` first")
    doc = json.loads(path.read_text(encoding="utf-8"))
    config = parse_config(doc["config"])
    return render_report_table(doc, config)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsphonon",
        description="Tunneling-state phonon dissipation: model, synthesize, fit.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_model = sub.add_parser("model", help="evaluate the linewidth model on a grid")
    p_model.add_argument("--config", required=True, type=Path)
    p_model.add_argument("--out", required=True, type=Path)
    p_model.add_argument("--grid", required=True,
                         help="e.g. T=0.3:4.2:25,J=1e-3:1e3:25:log,f=9.188e9")

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--config", required=True, type=Path)
    p_synth.add_argument("--out", required=True, type=Path)
    p_synth.add_argument("--seed", type=int, default=None,
                         help="override the config seed")
    p_synth.add_argument("--parallel", type=int, default=1)

    p_fit = sub.add_parser("fit", help="fit a dataset directory")
    p_fit.add_argument("dataset", type=Path)
    p_fit.add_argument("--config", type=Path, default=None,
                       help="defaults to the config embedded in the manifest")
    p_fit.add_argument("--out", required=True, type=Path)
    p_fit.add_argument("--parallel", type=int, default=1)

    p_report = sub.add_parser("report", help="print the parameter comparison table")
    p_report.add_argument("--out", required=True, type=Path,
                          help="directory holding report.json")
    return parser


def _config_with_seed(path: Path, seed) -> RunConfig:
    config = load_config(path)
    if seed is not None:
        doc = dict(config.raw)
        doc["seed"] = int(seed)
        config = parse_config(doc)
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "model":
            out = cmd_model(load_config(args.config), args.grid, args.out)
            print(out)
            return 0
        if args.command == "synth":
            out = cmd_synth(_config_with_seed(args.config, args.seed),
                            args.out, parallel=args.parallel)
            print(out)
            return 0
        if args.command == "fit":
            if args.config is not None:
                config = load_config(args.config)
            else:
                from .dataset import read_manifest
                config = parse_config(read_manifest(args.dataset)["config"])
            return cmd_fit(config, args.dataset, args.out)
        if args.command == "report":
            print(cmd_report(args.out))
            return 0
    except (CliError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
