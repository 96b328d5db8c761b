"""Rate extraction and theory-versus-simulation comparison.

Decay rates are measured by least squares of log(value) against log(1+t);
wall layers by the 1/e width and near-wall mass of the x-RMS profile; and
predictions by the norm of the residual after subtracting the frozen
horizontal mean and the assembled layer field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .domain import Grid, RealField, l2_norm, split_mean_fluct, z_quad_weights
from .blprofiles import BLFieldPrediction


@dataclass
class PowerLawFit:
    exponent: float
    prefactor: float
    window: tuple
    r_squared: float
    n_samples: int


@dataclass
class BLMeasurement:
    times: np.ndarray
    widths: np.ndarray          # NaN where no 1/e crossing exists
    amplitudes: np.ndarray
    side: str


def fit_power_law(times, values, window) -> PowerLawFit:
    """Fit value ~ prefactor * (1+t)^(-exponent) on the window by least squares."""
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    if window[0] < 0 or window[0] >= window[1]:
        raise ValueError("window must satisfy 0 <= t_min < t_max")
    sel = (times >= window[0]) & (times <= window[1])
    t, v = times[sel], values[sel]
    if t.size < 8:
        raise ValueError(f"need at least 8 samples in the window, got {t.size}")
    if np.any(v <= 0):
        raise ValueError("values must be strictly positive in the fit window")
    x = np.log1p(t)
    y = np.log(v)
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(exponent=float(-coef[1]), prefactor=float(np.exp(coef[0])),
                       window=(float(window[0]), float(window[1])),
                       r_squared=r2, n_samples=int(t.size))


def _xrms_profile(field: RealField):
    """Root-mean-square over x of the fluctuation, per z node."""
    fluct = split_mean_fluct(field).fluct
    return np.sqrt((fluct.values**2).mean(axis=0))


def _one_over_e_width(z_from_wall, prof):
    """Distance from the wall where the profile first drops to 1/e of its
    wall value, by linear interpolation; NaN when there is no crossing in
    the wall half."""
    target = prof[0] / np.e
    if prof[0] <= 0:
        return np.nan
    half = z_from_wall <= z_from_wall[-1] / 2.0 + 1e-15
    p = prof[: int(half.sum())]
    below = np.where(p <= target)[0]
    if below.size == 0 or below[0] == 0:
        return np.nan
    i = below[0]
    frac = (p[i - 1] - target) / (p[i - 1] - p[i])
    return float(z_from_wall[i - 1] + frac * (z_from_wall[i] - z_from_wall[i - 1]))


def extract_bl(snapshots, side: str = "bottom") -> BLMeasurement:
    """Wall-layer width and near-wall amplitude per snapshot.

    `snapshots` is a list of (time, RealField); times must be >= 10 and at
    least 4 snapshots are required.  The amplitude is the L2 norm of the
    fluctuation over the near-wall third of the channel.
    """
    if len(snapshots) < 4:
        raise ValueError("need at least 4 snapshots")
    times = np.array([t for t, _ in snapshots], float)
    if np.any(times < 10):
        raise ValueError("wall-layer extraction needs t >= 10")
    widths, amps = [], []
    for _, f in snapshots:
        grid = f.grid
        prof = _xrms_profile(f)
        z = grid.z_nodes
        if side == "bottom":
            dist, p = z, prof
        elif side == "top":
            dist, p = grid.height - z[::-1], prof[::-1]
        else:
            raise ValueError(f"unknown side {side!r}")
        widths.append(_one_over_e_width(dist, p))
        fluct = split_mean_fluct(f).fluct
        w = z_quad_weights(grid).copy()
        mask = dist <= grid.height / 3.0
        strip = (fluct.values**2 if side == "bottom"
                 else fluct.values[:, ::-1] ** 2)
        amps.append(np.sqrt(grid.dx * float((strip[:, mask] * w[mask][None, :]).sum())))
    return BLMeasurement(times, np.array(widths), np.array(amps), side)


def width_exponent(measurement: BLMeasurement) -> PowerLawFit:
    good = np.isfinite(measurement.widths)
    return fit_power_law(measurement.times[good], measurement.widths[good],
                         (measurement.times[good].min(), measurement.times[good].max()))


def amplitude_exponent(measurement: BLMeasurement) -> PowerLawFit:
    return fit_power_law(measurement.times, measurement.amplitudes,
                         (measurement.times.min(), measurement.times.max()))


def validate_prediction(simulated: RealField, predicted: BLFieldPrediction,
                        mean_offset) -> dict:
    """Residual norms after subtracting the frozen mean and the layer field.

    Returns global and wall-strip L2 norms of
    r = simulated - mean_offset - predicted.theta_bl.
    """
    grid = simulated.grid
    if predicted.theta_bl.grid != grid:
        raise ValueError("prediction and snapshot grids differ")
    mean_offset = np.asarray(mean_offset, float)
    r = simulated.values - mean_offset[None, :] - predicted.theta_bl.values
    rfield = RealField(grid, r)
    w = z_quad_weights(grid)
    z = grid.z_nodes
    strip_w = min(4.0 * _strip_width_guess(predicted), grid.height / 4.0)
    out = {"time": predicted.time, "l2": l2_norm(rfield)}
    for side, dist in (("bottom", z), ("top", grid.height - z)):
        mask = dist <= strip_w
        out[f"l2_strip_{side}"] = float(
            np.sqrt(grid.dx * ((r**2)[:, mask] * w[mask][None, :]).sum()))
    out["l2_sim_minus_mean"] = l2_norm(
        RealField(grid, simulated.values - mean_offset[None, :]))
    out["l2_predicted"] = l2_norm(predicted.theta_bl)
    return out


def _strip_width_guess(predicted: BLFieldPrediction) -> float:
    return (1.0 + predicted.time) ** -0.25


def residual_exponent(reports) -> PowerLawFit:
    times = [rep["time"] for rep in reports]
    vals = [rep["l2"] for rep in reports]
    return fit_power_law(times, vals, (min(times), max(times)))


def write_report(entries: dict, path):
    """JSON validation report (fits, intervals, pass flags)."""

    def default(obj):
        if isinstance(obj, PowerLawFit):
            return asdict(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        raise TypeError(f"cannot serialize {type(obj)}")

    with open(path, "w") as fh:
        json.dump(entries, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")
