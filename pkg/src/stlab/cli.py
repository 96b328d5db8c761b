"""Scenario configuration, reproducible runs, and report generation.

A scenario is a plain-text TOML file.  Schema and defaults:

    [scenario]    name = "stab"                    (required)
    [grid]        nx = 64, nz = 129, height = 1.0
    [background]  type = "affine" | "poly" | "tabulated"
                  coeffs = [...]                   (poly)
                  z = [...]; values = [...]        (tabulated)
    [initial]     kind = "zero" | "bump" | "wall_trace" | "eigenfunction"
                       | "discrete_eigenmode" | "random_band"
                  eps = 0.01, m = 1, p = 3, n = 0, k = 1,
                  seed (required for random_band), kmax, nmax, trace_free
    [stepper]     mode = "nonlinear" | "linear", dt = "auto" | number,
                  cfl = 0.5, dealias = true, t_final (required),
                  diag_every = 0.25, snapshot_every = 0.0,
                  snapshot_times = [], filter_strength = 1.0,
                  exact_linear = false
    [diagnostics] lambdas = [], snapshot_fields = ["rho"]
    [output]      dir = "out/<name>"
    [[analysis]]  type = "decay_fit" | "energy_identity" | "rearrangement"
                       | "eigen_decay" | "bl_extract" | "prediction_residual"
                       | "bilap_trace"   (+ per-type parameters)

Every run writes timeseries.csv, any snapshots, report.json (when analyses
are requested) and manifest.json (content hash of every output).  Runs are
deterministic: the same scenario file produces byte-identical CSV output.

Exit codes: 0 success; 1 schema or runtime error; 2 acceptance failure
(with --accept, when any analysis expectation fails).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import analysis, blprofiles, domain, dynamics, parallel, rearrange, stokes
from .domain import ConfigurationError, Grid, RealField


class SchemaError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    grid: Grid
    background_spec: dict | None
    initial_spec: dict
    stepper: dynamics.StepperConfig
    lambdas: tuple = ()
    snapshot_fields: tuple = ("rho",)
    outdir: str = ""
    analyses: tuple = ()
    raw: dict = field(default_factory=dict)


def _require(cond, message):
    if not cond:
        raise SchemaError(message)


def parse_scenario(data: dict, source: str = "<config>") -> Scenario:
    _require(isinstance(data, dict), f"{source}: top level must be a table")
    try:
        name = data["scenario"]["name"]
    except KeyError:
        raise SchemaError(f"{source}: [scenario].name is required") from None

    gtab = data.get("grid", {})
    nx = int(gtab.get("nx", 64))
    nz = int(gtab.get("nz", 129))
    height = float(gtab.get("height", 1.0))
    _require(nx >= 8 and nx % 2 == 0, f"{source}: [grid].nx must be even and >= 8, got {nx}")
    _require(nz >= 9, f"{source}: [grid].nz must be >= 9, got {nz}")
    grid = Grid(nx, nz, height)

    itab = dict(data.get("initial", {"kind": "zero"}))
    kind = itab.get("kind", "zero")
    known = ("zero", "bump", "wall_trace", "eigenfunction",
             "discrete_eigenmode", "eigenmode_band", "random_band")
    _require(kind in known, f"{source}: [initial].kind must be one of {known}")
    if kind in ("random_band", "eigenmode_band"):
        _require("seed" in itab, f"{source}: [initial].seed is required for random data")

    stab = dict(data.get("stepper", {}))
    _require("t_final" in stab, f"{source}: [stepper].t_final is required")
    dt = stab.get("dt", "auto")
    if dt != "auto":
        dt = float(dt)
        _require(dt > 0, f"{source}: [stepper].dt must be positive or 'auto'")
    try:
        stepper = dynamics.StepperConfig(
            dt=dt,
            cfl=float(stab.get("cfl", 0.5)),
            mode=stab.get("mode", "nonlinear"),
            dealias=bool(stab.get("dealias", True)),
            t_final=float(stab["t_final"]),
            snapshot_every=float(stab.get("snapshot_every", 0.0)),
            snapshot_times=tuple(float(t) for t in stab.get("snapshot_times", ())),
            diag_every=float(stab.get("diag_every", 0.25)),
            filter_strength=float(stab.get("filter_strength", 1.0)),
            exact_linear=bool(stab.get("exact_linear", False)),
        )
    except ValueError as exc:
        raise SchemaError(f"{source}: [stepper]: {exc}") from None

    dtab = data.get("diagnostics", {})
    lambdas = tuple(float(v) for v in dtab.get("lambdas", ()))
    snapshot_fields = tuple(dtab.get("snapshot_fields", ("rho",)))
    for f in snapshot_fields:
        _require(f in ("rho", "theta", "theta_fluct", "psi"),
                 f"{source}: unknown snapshot field {f!r}")

    outdir = data.get("output", {}).get("dir", f"out/{name}")
    analyses = tuple(data.get("analysis", ()))
    for a in analyses:
        _require("type" in a, f"{source}: every [[analysis]] needs a type")
    return Scenario(name=name, grid=grid,
                    background_spec=data.get("background"),
                    initial_spec=itab, stepper=stepper, lambdas=lambdas,
                    snapshot_fields=snapshot_fields, outdir=outdir,
                    analyses=analyses, raw=data)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"{path}: no such config file") from None
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    return parse_scenario(data, str(path))


def bundled_scenario_path(name: str) -> Path:
    from importlib.resources import files
    return Path(str(files("stlab") / "scenarios" / f"{name}.toml"))


def _initial_state(scn: Scenario) -> dynamics.State:
    background = dynamics.make_background(scn.grid, scn.background_spec)
    theta0 = dynamics.make_initial_theta(scn.grid, scn.initial_spec)
    rho0 = RealField(scn.grid, theta0.values + background[None, :])
    return dynamics.State.create(rho0, background)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_snap(outdir, field_name, t):
    path = Path(outdir) / "snapshots" / f"{field_name}_t{t:012.4f}.stlb"
    f, time = domain.load_snapshot(path)
    return f


# ---------------------------------------------------------------------------
# analyses
# ---------------------------------------------------------------------------

def _flag(entry, key, ok):
    entry.setdefault("checks", {})[key] = bool(ok)
    return ok


def _series(records, name, lambdas):
    if name in dynamics.DiagnosticsRecord.FIELDS:
        idx = dynamics.DiagnosticsRecord.FIELDS.index(name)
        return np.array([r.as_row(lambdas)[idx] for r in records])
    raise SchemaError(f"unknown diagnostics field {name!r}")


def _run_analyses(scn: Scenario, records, state0, outdir):
    times = np.array([r.time for r in records])
    report = {}
    for spec in scn.analyses:
        kind = spec["type"]
        key = spec.get("label", kind)
        entry = {"type": kind}
        if kind == "decay_fit":
            vals = _series(records, spec["field"], scn.lambdas)
            fit = analysis.fit_power_law(times, vals, tuple(spec["window"]))
            entry["fit"] = fit
            if "target" in spec:
                entry["target"] = spec["target"]
            if "expect" in spec:
                lo, hi = spec["expect"]
                _flag(entry, "exponent_in_window", lo <= fit.exponent <= hi)
        elif kind == "energy_identity":
            tol = float(spec.get("tol", 1e-3))
            # floor shields the ratio once dissipation decays to round-off;
            # long runs accumulate ~sqrt(nsteps)*eps*E of noise in dE/dt
            floor = float(spec.get("floor", 1e-12))
            E = np.array([r.energy for r in records])
            D = np.array([r.dissipation for r in records])
            dEc = (E[2:] - E[:-2]) / (times[2:] - times[:-2])
            mismatch = np.abs(dEc + D[1:-1]) / np.maximum(D[1:-1], floor)
            tmid = times[1:-1]
            win = spec.get("window", (times[0], times[-1]))
            sel = (tmid >= win[0]) & (tmid <= win[1])
            entry["max_mismatch"] = float(mismatch[sel].max())
            entry["tol"] = tol
            _flag(entry, "identity", mismatch[sel].max() < tol)
            dE = np.diff(E)
            entry["max_energy_increment"] = float(dE.max())
            _flag(entry, "monotone", dE.max() <= 1e-9 * max(abs(E[0]), 1.0))
        elif kind == "rearrangement":
            profile = rearrange.vertical_rearrangement(state0.rho)
            rearrange.profile_to_csv(profile, Path(outdir) / "rearrangement.csv")
            snap_times = sorted(spec.get("ladder", times[times > 0]))
            dists, ts_used = [], []
            for t in snap_times:
                try:
                    f = _load_snap(outdir, "rho", t)
                except FileNotFoundError:
                    continue
                dists.append(rearrange.distance_to_rearrangement(f, profile))
                ts_used.append(t)
            dists = np.array(dists)
            ts_used = np.array(ts_used)
            d0 = rearrange.distance_to_rearrangement(state0.rho, profile)
            entry["initial_distance"] = d0
            entry["distances"] = {f"{t:g}": d for t, d in zip(ts_used, dists)}
            final_dec = ts_used >= ts_used[-1] / 10.0
            dd = np.diff(dists[final_dec])
            _flag(entry, "monotone_final_decade",
                  bool((dd <= 1e-12 + 1e-6 * dists.max()).all()))
            if "expect_final_ratio" in spec:
                ratio = dists[-1] / d0
                entry["final_ratio"] = float(ratio)
                _flag(entry, "final_ratio", ratio < float(spec["expect_final_ratio"]))
            if "fit_window" in spec:
                sel = (ts_used >= spec["fit_window"][0]) & (ts_used <= spec["fit_window"][1])
                fit = analysis.fit_power_law(ts_used[sel], dists[sel],
                                             tuple(spec["fit_window"]))
                entry["fit"] = fit
                if "target" in spec:
                    entry["target"] = spec["target"]
                if "expect" in spec:
                    lo, hi = spec["expect"]
                    _flag(entry, "exponent_in_window", lo <= fit.exponent <= hi)
        elif kind == "eigen_decay":
            n = int(scn.initial_spec.get("n", 0))
            k = int(scn.initial_spec.get("k", 1))
            rates, _, _ = stokes.mode_decay_eigensystem(scn.grid, k)
            lam = float(np.sort(rates.real)[-(n + 1)])
            t_end = times[-1]
            f = _load_snap(outdir, "theta_fluct", t_end)
            th0 = dynamics.make_initial_theta(scn.grid, scn.initial_spec)
            w = domain.z_quad_weights(scn.grid)
            amp = float((f.values * th0.values * w[None, :]).sum()
                        / (th0.values**2 * w[None, :]).sum())
            expected = float(np.exp(-lam * t_end))
            entry.update(rate=lam, time=t_end, amplitude=amp, expected=expected)
            rel = abs(amp - expected) / expected
            entry["relative_error"] = rel
            _flag(entry, "decay_matches", rel < float(spec.get("tol", 1e-4)))
        elif kind == "bl_extract":
            ladder = spec["ladder"]
            snaps = [(float(t), _load_snap(outdir, "theta_fluct", t)) for t in ladder]
            meas = analysis.extract_bl(snaps, spec.get("side", "bottom"))
            wfit = analysis.width_exponent(meas)
            afit = analysis.amplitude_exponent(meas)
            entry["width_fit"] = wfit
            entry["amplitude_fit"] = afit
            entry["widths"] = meas.widths
            if "expect_width" in spec:
                lo, hi = spec["expect_width"]
                _flag(entry, "width_exponent", lo <= wfit.exponent <= hi)
            if "expect_amplitude" in spec:
                lo, hi = spec["expect_amplitude"]
                _flag(entry, "amplitude_exponent", lo <= afit.exponent <= hi)
        elif kind == "prediction_residual":
            ladder = spec["ladder"]
            order = spec.get("order", "leading")
            th0 = dynamics.make_initial_theta(scn.grid, scn.initial_spec)
            mean0 = th0.values.mean(axis=0)
            reports = []
            for t in ladder:
                f = _load_snap(outdir, "theta", t)
                pred = blprofiles.assemble_bl_linear(th0, float(t), "both", order)
                reports.append(analysis.validate_prediction(f, pred, mean0))
            fit = analysis.residual_exponent(reports)
            entry["fit"] = fit
            entry["residuals"] = {f"{r['time']:g}": r["l2"] for r in reports}
            if "expect_exponent_min" in spec:
                _flag(entry, "residual_exponent",
                      fit.exponent >= float(spec["expect_exponent_min"]))
        elif kind == "bilap_trace":
            ladder = spec["ladder"]
            strips = {}
            for t in ladder:
                f = _load_snap(outdir, "theta_fluct", t)
                b = stokes.apply_bilaplacian(f)
                w = domain.z_quad_weights(scn.grid)
                z = scn.grid.z_nodes
                width = 4.0 * (1.0 + float(t)) ** -0.25
                mask = np.minimum(z, scn.grid.height - z) <= width
                strips[f"{t:g}"] = float(np.sqrt(
                    scn.grid.dx * ((b.values**2)[:, mask] * w[mask][None, :]).sum()))
            entry["wall_strip_norms"] = strips
        else:
            raise SchemaError(f"unknown analysis type {kind!r}")
        report[key] = entry
    return report


def run_scenario(config_path, out_override=None, threads=None,
                 exact_linear=False, accept=False) -> int:
    """Execute a scenario file; returns the process exit code."""
    try:
        scn = load_scenario(config_path)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if threads:
        parallel.set_threads(threads)
    if out_override:
        scn.outdir = str(out_override)
    if exact_linear:
        if scn.stepper.mode != "linear":
            print("error: --exact-linear requires a linear-mode scenario",
                  file=sys.stderr)
            return 1
        scn.stepper.exact_linear = True

    outdir = Path(scn.outdir)
    snapdir = outdir / "snapshots"
    snapdir.mkdir(parents=True, exist_ok=True)

    try:
        state0 = _initial_state(scn)
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    dzbg = domain.z_derivative_matrix(scn.grid, 1) @ state0.background
    if dzbg.max() >= 0:
        print(f"warning: background profile is not strictly decreasing "
              f"(max slope {dzbg.max():.3g}); stability is not guaranteed",
              file=sys.stderr)

    outputs = []
    records = None
    try:
        records, snap_paths = dynamics.run(
            state0, scn.stepper, lambdas=scn.lambdas,
            snapshot_dir=str(snapdir), snapshot_fields=scn.snapshot_fields)
        outputs.extend(snap_paths)
    except dynamics.BlowupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if records:
            ts_path = outdir / "timeseries.csv"
            dynamics.write_timeseries(records, scn.lambdas, ts_path)
            outputs.append(str(ts_path))

    ok = True
    if scn.analyses:
        report = _run_analyses(scn, records, state0, outdir)
        rep_path = outdir / "report.json"
        analysis.write_report(report, rep_path)
        outputs.append(str(rep_path))
        for key, entry in report.items():
            for check, passed in entry.get("checks", {}).items():
                status = "pass" if passed else "FAIL"
                print(f"[{scn.name}] {key}.{check}: {status}")
                ok = ok and passed

    manifest = {
        "scenario": scn.raw,
        "config_sha256": _sha256(config_path),
        "outputs": {str(Path(p).relative_to(outdir)): _sha256(p)
                    for p in sorted(outputs)},
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if accept and not ok:
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stlab",
        description="Run a channel-flow transport scenario from a TOML config.")
    parser.add_argument("--config", required=True,
                        help="scenario file, or the name of a bundled scenario")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for per-mode computations "
                             "(STLAB_THREADS overrides)")
    parser.add_argument("--exact-linear", action="store_true",
                        help="propagate linear scenarios exactly per mode")
    parser.add_argument("--accept", action="store_true",
                        help="exit 2 when any analysis expectation fails")
    args = parser.parse_args(argv)
    config = Path(args.config)
    if not config.exists():
        candidate = bundled_scenario_path(args.config)
        if candidate.exists():
            config = candidate
    return run_scenario(config, out_override=args.out, threads=args.threads,
                        exact_linear=args.exact_linear, accept=args.accept)


if __name__ == "__main__":
    raise SystemExit(main())
