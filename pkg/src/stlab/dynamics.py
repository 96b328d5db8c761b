"""Time integration of the transport-coupled flow with diagnostics.

The full density rho = background(z) + theta is advanced by transporting the
perturbation theta:

    nonlinear:  d theta/dt + u . grad theta = -background'(z) u2
    linear:     d theta/dt                  = -background'(z) u2

with u = (-dpsi/dz, dpsi/dx) and psi the clamped solve driven by the
fluctuation of theta.  Advection is pseudo-spectral in x (2/3 dealiased
products) and conservative flux form in z; a weak 6th-z-derivative filter,
applied to the fluctuation only (so mass and potential energy bookkeeping
are untouched), absorbs grid-scale pile-up of the otherwise dissipation-free
transport.  Time stepping is SSP-RK3 with an automatic step bounded by the
advective CFL and by the largest damping rate of the flow solve; the linear
dynamics can instead be propagated exactly through dense per-mode
eigendecompositions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import domain, parallel, rearrange, stokes
from .domain import (Grid, MeanFluctPair, RealField, dealias_values,
                     differentiate, integrate, l2_norm, profile_sobolev_norm,
                     sobolev_norm, split_mean_fluct, z_derivative_matrix,
                     z_quad_weights)
from .stencils import derivative_matrix

DT_FLOOR = 1e-6


class BlowupError(RuntimeError):
    def __init__(self, time):
        super().__init__(f"solution lost finiteness at t = {time:.6g}")
        self.time = time


@dataclass
class StepperConfig:
    dt: float | str = "auto"
    cfl: float = 0.5
    mode: str = "nonlinear"            # "nonlinear" or "linear"
    dealias: bool = True
    t_final: float = 10.0
    snapshot_every: float = 0.0        # 0 disables periodic snapshots
    snapshot_times: tuple = ()         # explicit extra snapshot instants
    diag_every: float = 0.25
    filter_strength: float = 1.0       # nonlinear mode only
    exact_linear: bool = False

    def __post_init__(self):
        if self.mode not in ("linear", "nonlinear"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if not (0 < self.cfl <= 1):
            raise ValueError("cfl must lie in (0, 1]")
        if self.exact_linear and self.mode != "linear":
            raise ValueError("exact propagation requires linear mode")


@dataclass
class State:
    time: float
    rho: RealField
    background: np.ndarray             # (nz,) stationary profile
    psi: RealField

    @classmethod
    def create(cls, rho: RealField, background, time: float = 0.0):
        background = np.asarray(background, float)
        theta = RealField(rho.grid, rho.values - background[None, :])
        return cls(time, rho, background, stokes.solve_stream(theta))

    @property
    def theta(self) -> RealField:
        return RealField(self.rho.grid, self.rho.values - self.background[None, :])

    @property
    def theta_pair(self) -> MeanFluctPair:
        return split_mean_fluct(self.theta)


@dataclass
class DiagnosticsRecord:
    time: float
    energy: float
    dissipation: float
    l2_theta_fluct: float
    hs_norms: tuple               # H^1..H^4 of the fluctuation
    l2_dx3_fluct: float
    h2_G: float
    mass: float
    l2_rho: float
    level_measures: dict
    min_dz_rho: float

    FIELDS = ("time", "energy", "dissipation", "l2_theta_fluct",
              "h1_theta_fluct", "h2_theta_fluct", "h3_theta_fluct",
              "h4_theta_fluct", "l2_dx3_fluct", "h2_G", "mass", "l2_rho",
              "min_dz_rho")

    def as_row(self, lambdas):
        row = [self.time, self.energy, self.dissipation, self.l2_theta_fluct,
               *self.hs_norms, self.l2_dx3_fluct, self.h2_G, self.mass,
               self.l2_rho, self.min_dz_rho]
        row += [self.level_measures[lam] for lam in lambdas]
        return row


# ---------------------------------------------------------------------------
# initial data and backgrounds
# ---------------------------------------------------------------------------

def make_background(grid: Grid, spec=None) -> np.ndarray:
    """Stationary profile on the z nodes; default is the affine 1 - z."""
    z = grid.z_nodes
    if spec is None or spec.get("type", "affine") == "affine":
        return 1.0 - z
    kind = spec["type"]
    if kind == "poly":
        return np.polynomial.polynomial.polyval(z, np.asarray(spec["coeffs"], float))
    if kind == "tabulated":
        return CubicSpline(np.asarray(spec["z"], float),
                           np.asarray(spec["values"], float))(z)
    raise ValueError(f"unknown background type {kind!r}")


def make_initial_theta(grid: Grid, spec) -> RealField:
    """Named initial-perturbation constructors (reproducible by content)."""
    kind = spec.get("kind", "zero")
    X, Z = grid.meshgrid()
    eps = float(spec.get("eps", 0.01))
    if kind == "zero":
        vals = np.zeros((grid.nx, grid.nz))
    elif kind == "bump":
        m = int(spec.get("m", 1))
        p = int(spec.get("p", 3))
        prof = (Z * (grid.height - Z)) ** p
        vals = eps * np.sin(m * X) * prof / prof.max()
    elif kind == "wall_trace":
        m = int(spec.get("m", 1))
        vals = eps * np.cos(m * X)
    elif kind == "eigenfunction":
        n, k = int(spec.get("n", 0)), int(spec.get("k", 1))
        entry = stokes.clamped_spectrum(k, n + 1, "unit", nz=grid.nz)[n]
        prof = entry.eigfun / np.abs(entry.eigfun).max()
        vals = eps * np.cos(k * X) * prof[None, :]
    elif kind == "discrete_eigenmode":
        n, k = int(spec.get("n", 0)), int(spec.get("k", 1))
        rates, V, _ = stokes.mode_decay_eigensystem(grid, k)
        order = np.argsort(-rates.real)
        v = V[:, order[n]].real
        v = v / np.abs(v).max()
        vals = eps * np.cos(k * X) * v[None, :]
    elif kind == "eigenmode_band":
        # equal-weight blend of leading eigenmodes over a wavenumber band;
        # rates then sample the fast end of the damping spectrum
        kmin, kmax = int(spec.get("kmin", 2)), int(spec.get("kmax", 8))
        rng = np.random.default_rng(int(spec["seed"]))
        vals = np.zeros((grid.nx, grid.nz))
        for k in range(kmin, kmax + 1):
            rates, V, _ = stokes.mode_decay_eigensystem(grid, k)
            v = V[:, np.argsort(-rates.real)[0]].real
            v = v / np.sqrt((v**2).mean())
            vals += np.cos(k * X + rng.uniform(0, 2 * np.pi)) * v[None, :]
        vals *= eps / l2_norm(vals, grid)
    elif kind == "random_band":
        rng = np.random.default_rng(int(spec["seed"]))
        kmax = int(spec.get("kmax", 4))
        nmax = int(spec.get("nmax", 4))
        vals = np.zeros((grid.nx, grid.nz))
        for k in range(1, kmax + 1):
            for n in range(1, nmax + 1):
                amp = rng.standard_normal()
                phase = rng.uniform(0, 2 * np.pi)
                vals += amp * np.cos(k * X + phase) * np.sin(n * np.pi * Z / grid.height)
        if spec.get("trace_free", True):
            env = (4.0 * Z * (grid.height - Z) / grid.height**2) ** 2
            vals *= env
        norm = l2_norm(vals, grid)
        if norm > 0:
            vals *= eps / norm
    else:
        raise ValueError(f"unknown initial-data kind {kind!r}")
    return RealField(grid, vals)


# ---------------------------------------------------------------------------
# right-hand side and stepping
# ---------------------------------------------------------------------------

def _filter_matrix(grid: Grid):
    """6th z-derivative with near-wall rows zeroed (trace-preserving filter)."""
    D6 = derivative_matrix(grid.z_nodes, 6, 2).tolil()
    for r in (0, 1, 2, grid.nz - 3, grid.nz - 2, grid.nz - 1):
        D6.rows[r] = []
        D6.data[r] = []
    return D6.tocsr()


_FILTER_CACHE: dict = {}


def _rhs(theta_vals, grid, dslope, cfg: StepperConfig):
    """Time derivative of theta; returns (rhs, max|u1|, max|u2|)."""
    mean = theta_vals.mean(axis=0)
    fluct = theta_vals - mean[None, :]
    psi = stokes.solve_stream(RealField(grid, fluct))
    u1 = -(z_derivative_matrix(grid, 1) @ psi.values.T).T
    u2 = domain._x_derivative_values(psi.values, grid, 1)
    forcing = dslope[None, :] * u2
    if cfg.mode == "linear":
        return forcing, np.abs(u1).max(), np.abs(u2).max()
    flux_x = u1 * theta_vals
    flux_z = u2 * theta_vals
    if cfg.dealias:
        flux_x = dealias_values(flux_x, grid)
        flux_z = dealias_values(flux_z, grid)
    adv = domain._x_derivative_values(flux_x, grid, 1) \
        + (z_derivative_matrix(grid, 1) @ flux_z.T).T
    rhs = forcing - adv
    if cfg.filter_strength > 0:
        if grid not in _FILTER_CACHE:
            _FILTER_CACHE[grid] = _filter_matrix(grid)
        nu = cfg.filter_strength * np.abs(u2).max() * grid.dz**5
        rhs = rhs + nu * (_FILTER_CACHE[grid] @ fluct.T).T
    return rhs, np.abs(u1).max(), np.abs(u2).max()


def _auto_dt(grid, u1max, u2max, cfg):
    dt_rate = 0.5 / stokes.decay_rate_bound(grid)
    dt_cfl = cfg.cfl * min(grid.dx / max(u1max, 1e-300),
                           grid.dz / max(u2max, 1e-300))
    return max(min(dt_cfl, dt_rate), DT_FLOOR)


def step(state: State, cfg: StepperConfig, dt: float | None = None,
         max_dt: float | None = None) -> State:
    """One SSP-RK3 step; dt=None uses the automatic step, capped by max_dt."""
    grid = state.rho.grid
    dslope = -(z_derivative_matrix(grid, 1) @ state.background)
    th0 = state.theta.values
    k1, u1max, u2max = _rhs(th0, grid, dslope, cfg)
    if dt is None:
        dt = _auto_dt(grid, u1max, u2max, cfg) if cfg.dt == "auto" else float(cfg.dt)
    if max_dt is not None:
        dt = min(dt, max_dt)
    s1 = th0 + dt * k1
    k2, _, _ = _rhs(s1, grid, dslope, cfg)
    s2 = 0.75 * th0 + 0.25 * (s1 + dt * k2)
    k3, _, _ = _rhs(s2, grid, dslope, cfg)
    th_new = th0 / 3.0 + 2.0 / 3.0 * (s2 + dt * k3)
    if not np.all(np.isfinite(th_new)):
        raise BlowupError(state.time + dt)
    rho_new = RealField(grid, th_new + state.background[None, :])
    return State.create(rho_new, state.background, state.time + dt)


# ---------------------------------------------------------------------------
# exact linear propagation
# ---------------------------------------------------------------------------

class ExactLinearPropagator:
    """Per-mode dense eigendecomposition of the linear damping operator.

    Supports a general strictly decreasing background through the slope
    weight sigma(z) = -background'(z); modes are built lazily.
    """

    def __init__(self, grid: Grid, background):
        self.grid = grid
        dslope = -(z_derivative_matrix(grid, 1) @ np.asarray(background, float))
        self._affine = np.allclose(dslope, 1.0, atol=1e-12)
        self._sigma = dslope
        self._modes: dict = {}

    def _eigensystem(self, k):
        if k not in self._modes:
            if self._affine:
                self._modes[k] = stokes.mode_decay_eigensystem(self.grid, k)
            else:
                import scipy.linalg as sla
                A = stokes.operator_matrix(self.grid, k).toarray()
                P = np.eye(self.grid.nz)
                for r in (0, 1, self.grid.nz - 2, self.grid.nz - 1):
                    P[r, r] = 0.0
                N = k**2 * (self._sigma[:, None] * sla.solve(A, P))
                rates, V = sla.eig(N)
                self._modes[k] = (rates, V, sla.inv(V))
        return self._modes[k]

    def advance(self, theta: RealField, elapsed: float) -> RealField:
        grid = self.grid
        th_hat = np.fft.rfft(theta.values, axis=0)
        active = [int(k) for k in grid.wavenumbers[1:] if np.any(th_hat[k])]
        nthreads = parallel.thread_count()
        missing = [k for k in active if k not in self._modes]
        if nthreads > 1 and len(missing) > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=nthreads) as pool:
                list(pool.map(self._eigensystem, missing))
        out = np.zeros_like(th_hat)
        out[0] = th_hat[0]                   # horizontal mean is frozen
        for k in active:
            rates, V, Vinv = self._eigensystem(k)
            out[k] = V @ (np.exp(-rates * elapsed) * (Vinv @ th_hat[k]))
        return RealField(grid, np.fft.irfft(out, n=grid.nx, axis=0))


# ---------------------------------------------------------------------------
# diagnostics and the run loop
# ---------------------------------------------------------------------------

def diagnose(state: State, lambdas=()) -> DiagnosticsRecord:
    grid = state.rho.grid
    pair = state.theta_pair
    fluct = pair.fluct
    z = grid.z_nodes
    energy = integrate(RealField(grid, z[None, :] * state.rho.values))
    u1, u2 = stokes.velocity(state.psi)
    grads = (differentiate(u1, "x", 1), differentiate(u1, "z", 1),
             differentiate(u2, "x", 1), differentiate(u2, "z", 1))
    dissipation = sum(l2_norm(g) ** 2 for g in grads)
    G = z_derivative_matrix(grid, 1) @ pair.mean
    dzrho = (z_derivative_matrix(grid, 1) @ state.rho.values.T).T
    return DiagnosticsRecord(
        time=state.time,
        energy=energy,
        dissipation=float(dissipation),
        l2_theta_fluct=l2_norm(fluct),
        hs_norms=tuple(sobolev_norm(fluct, s) for s in (1, 2, 3, 4)),
        l2_dx3_fluct=l2_norm(differentiate(fluct, "x", 3)),
        h2_G=profile_sobolev_norm(G, grid, 2),
        mass=integrate(state.rho),
        l2_rho=l2_norm(state.rho),
        level_measures={lam: rearrange.level_measure(state.rho, lam)
                        for lam in lambdas},
        min_dz_rho=float(dzrho.min()),
    )


def _event_times(cfg: StepperConfig):
    times = {0.0, cfg.t_final}
    for every in (cfg.diag_every, cfg.snapshot_every):
        if every and every > 0:
            times.update(np.arange(0.0, cfg.t_final + 1e-12, every).tolist())
    times.update(t for t in cfg.snapshot_times if 0.0 <= t <= cfg.t_final)
    return np.array(sorted(times))


def run(state: State, cfg: StepperConfig, lambdas=(), snapshot_dir=None,
        snapshot_fields=("rho",), on_record=None):
    """Integrate to t_final, returning (records, snapshot paths).

    Diagnostics are recorded at every multiple of diag_every, snapshots at
    multiples of snapshot_every (plus t=0 and t_final for both).  With
    exact_linear the state jumps between events through the dense per-mode
    propagator instead of stepping.
    """
    grid = state.rho.grid
    events = _event_times(cfg)
    records = [diagnose(state, lambdas)]
    paths = []
    if on_record:
        on_record(records[0])
    prop = ExactLinearPropagator(grid, state.background) if cfg.exact_linear else None

    def snap_due(t):
        if not snapshot_dir:
            return False
        if cfg.snapshot_every and cfg.snapshot_every > 0:
            q = t / cfg.snapshot_every
            if abs(q - round(q)) < 1e-9:
                return True
        if any(abs(t - ts) < 1e-9 * max(1.0, ts) for ts in cfg.snapshot_times):
            return True
        return t == 0.0 or abs(t - cfg.t_final) < 1e-9

    def take_snapshot(st):
        for name in snapshot_fields:
            if name == "rho":
                fieldv = st.rho
            elif name == "theta":
                fieldv = st.theta
            elif name == "theta_fluct":
                fieldv = st.theta_pair.fluct
            elif name == "psi":
                fieldv = st.psi
            else:
                raise ValueError(f"unknown snapshot field {name!r}")
            path = f"{snapshot_dir}/{name}_t{st.time:012.4f}.stlb"
            domain.save_snapshot(path, fieldv, st.time)
            paths.append(path)

    if snap_due(state.time):
        take_snapshot(state)

    for t_target in events[events > 1e-14]:
        if prop is not None:
            theta_new = prop.advance(state.theta, t_target - state.time)
            rho_new = RealField(grid, theta_new.values + state.background[None, :])
            state = State.create(rho_new, state.background, t_target)
        else:
            while state.time < t_target - 1e-12:
                state = step(state, cfg, max_dt=t_target - state.time)
        rec = diagnose(state, lambdas)
        records.append(rec)
        if on_record:
            on_record(rec)
        if snap_due(state.time):
            take_snapshot(state)
    return records, paths


def write_timeseries(records, lambdas, path):
    """CSV time series, one record per row (deterministic %.17g formatting)."""
    header = list(DiagnosticsRecord.FIELDS) + [f"level_{lam:g}" for lam in lambdas]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            writer.writerow([f"{v:.17g}" for v in rec.as_row(lambdas)])
