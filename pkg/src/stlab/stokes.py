"""Quasi-static flow solve: clamped bilaplacian systems per Fourier mode.

The stream function of the buoyancy-driven velocity solves
``(d^2/dz^2 - k^2)^2 psi_k = i k theta_k`` per x-mode, with psi and dpsi/dz
zero at both walls.  The four wall rows of each banded system impose the
clamped conditions; the remaining rows carry the 4th-order interior scheme.
Factorizations are cached per (grid, k) and reused across time steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg as sla
from scipy import optimize, sparse
from scipy.sparse.linalg import splu

from . import domain
from .domain import Grid, RealField, differentiate
from .stencils import boundary_derivative_row, derivative_matrix



class NumericalBreakdownError(RuntimeError):
    """Factorization of a per-mode system failed (signals a bad grid)."""


def _bc_rows(nz):
    return (0, 1, nz - 2, nz - 1)


def operator_matrix(grid: Grid, k: int, clamped: bool = True):
    """Matrix of (d^2/dz^2 - k^2)^2; clamped=True replaces the 4 wall rows."""
    z = grid.z_nodes
    D2 = derivative_matrix(z, 2)
    D4 = derivative_matrix(z, 4)
    A = (D4 - 2.0 * k**2 * D2 + k**4 * sparse.identity(grid.nz)).tolil()
    if clamped:
        r0, r1, r2, r3 = _bc_rows(grid.nz)
        for r in (r0, r1, r2, r3):
            A.rows[r] = []
            A.data[r] = []
        A[r0, r0] = 1.0
        A[r3, r3] = 1.0
        idx, w = boundary_derivative_row(z, 1, side="left")
        for j, wj in zip(idx, w):
            A[r1, j] = wj
        idx, w = boundary_derivative_row(z, 1, side="right")
        for j, wj in zip(idx, w):
            A[r2, j] = wj
    return A.tocsc()


@dataclass
class ModeOperator:
    """Factorized clamped system for one wavenumber."""

    k: int
    grid: Grid
    matrix: sparse.csc_matrix
    lu: object

    def solve(self, rhs):
        """Solve with the wall rows of rhs zeroed (homogeneous clamping)."""
        b = np.array(rhs, dtype=complex)
        for r in _bc_rows(self.grid.nz):
            b[r] = 0.0
        return self.lu.solve(b.real) + 1j * self.lu.solve(b.imag)


@lru_cache(maxsize=None)
def mode_operator(grid: Grid, k: int) -> ModeOperator:
    A = operator_matrix(grid, k)
    try:
        lu = splu(A)
    except RuntimeError as exc:  # pragma: no cover - coercive problem
        raise NumericalBreakdownError(f"LU of mode k={k} failed: {exc}") from exc
    return ModeOperator(k, grid, A, lu)


def solve_bilaplacian(rhs: RealField) -> RealField:
    """psi with (Laplacian^2) psi = rhs and clamped walls, all modes."""
    grid = rhs.grid
    rhs_hat = np.fft.rfft(rhs.values, axis=0)
    psi_hat = np.zeros_like(rhs_hat)
    for k in grid.wavenumbers:
        psi_hat[k] = mode_operator(grid, int(k)).solve(rhs_hat[k])
    return RealField(grid, np.fft.irfft(psi_hat, n=grid.nx, axis=0))


def solve_stream(theta: RealField) -> RealField:
    """Stream function driven by the x-derivative of theta; k=0 mode is zero."""
    grid = theta.grid
    th_hat = np.fft.rfft(theta.values, axis=0)
    psi_hat = np.zeros_like(th_hat)
    for k in grid.wavenumbers[1:]:
        psi_hat[k] = mode_operator(grid, int(k)).solve(1j * k * th_hat[k])
    return RealField(grid, np.fft.irfft(psi_hat, n=grid.nx, axis=0))


def velocity(psi: RealField):
    """u = (-dpsi/dz, dpsi/dx)."""
    u1 = RealField(psi.grid, -differentiate(psi, "z", 1).values)
    u2 = differentiate(psi, "x", 1)
    return u1, u2


def apply_L(theta: RealField) -> RealField:
    """The damping operator: x-derivative of the stream solve."""
    return differentiate(solve_stream(theta), "x", 1)


def apply_bilaplacian(f: RealField) -> RealField:
    """Forward action of Laplacian^2 (no boundary rows), for diagnostics."""
    grid = f.grid
    f_hat = np.fft.rfft(f.values, axis=0)
    out = np.zeros_like(f_hat)
    for k in grid.wavenumbers:
        out[k] = _forward_matrix(grid, int(k)) @ f_hat[k]
    return RealField(grid, np.fft.irfft(out, n=grid.nx, axis=0))


@lru_cache(maxsize=None)
def _forward_matrix(grid: Grid, k: int):
    return operator_matrix(grid, k, clamped=False).tocsr()


def decay_rate_bound(grid: Grid) -> float:
    """Upper estimate of the largest damping rate on this grid.

    Uses the eigenvalue asymptotics (omega^2 + k^2)^2 of the clamped
    operator with the conservative frequency floor omega >= pi/height (the
    first wall-to-wall frequency decreases toward it as k grows), so the
    estimate dominates every true rate k^2/lambda.
    """
    omega_min = np.pi / grid.height
    k = grid.wavenumbers[1:].astype(float)
    rates = k**2 / (omega_min**2 + k**2) ** 2
    return float(rates.max())


# ---------------------------------------------------------------------------
# Spectrum of the clamped operator on a symmetric strip
# ---------------------------------------------------------------------------

@dataclass
class SpectrumEntry:
    n: int
    k: int
    lam: float
    omega: float
    r: float
    parity: str              # "even" or "odd" about the channel mid-plane
    eigfun: np.ndarray       # unit-L2 samples on the requested z nodes
    residual: float          # wall-derivative residual at the root


def _even_residual(omega, k, a):
    r = np.sqrt(omega**2 + 2.0 * k**2)
    return omega * np.sin(omega * a) + r * np.cos(omega * a) * np.tanh(r * a)


def _odd_residual(omega, k, a):
    r = np.sqrt(omega**2 + 2.0 * k**2)
    return omega * np.cos(omega * a) - r * np.sin(omega * a) / np.tanh(r * a)


def _eigfun_samples(z_tilde, omega, r, a, parity):
    if parity == "even":
        b = np.cos(omega * z_tilde) - (np.cos(omega * a) / np.cosh(r * a)) * np.cosh(r * z_tilde)
    else:
        b = np.sin(omega * z_tilde) - (np.sin(omega * a) / np.sinh(r * a)) * np.sinh(r * z_tilde)
    return b


def clamped_spectrum(k: int, n_max: int, height_mode: str = "strip",
                     nz: int = 257) -> list[SpectrumEntry]:
    """First n_max eigenpairs of the clamped operator for wavenumber k.

    height_mode "strip" works on (-1, 1) (half-width 1); "unit" on (0, 1)
    (half-width 1/2, shifted).  Roots of the wall-derivative condition are
    located by scanning the oscillation parameter and refined by bisection.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    a = 1.0 if height_mode == "strip" else 0.5
    if height_mode == "strip":
        z_tilde = np.linspace(-1.0, 1.0, nz)
    elif height_mode == "unit":
        z_tilde = np.linspace(0.0, 1.0, nz) - 0.5
    else:
        raise ValueError(f"unknown height_mode {height_mode!r}")
    dz = z_tilde[1] - z_tilde[0]

    # Scan grid dense enough that consecutive roots (spaced ~pi/(2a)) cannot
    # share a cell; upper end covers n_max roots of either parity.
    omega_hi = (n_max + 6) * np.pi / a
    omegas = np.arange(0.05 / a, omega_hi, np.pi / (40.0 * a))
    found = []
    for parity, res in (("even", _even_residual), ("odd", _odd_residual)):
        vals = res(omegas, k, a)
        sign_change = np.where(np.diff(np.sign(vals)) != 0)[0]
        for i in sign_change:
            try:
                root = optimize.brentq(res, omegas[i], omegas[i + 1],
                                       args=(k, a), xtol=1e-14, rtol=1e-15)
            except ValueError:
                raise NumericalBreakdownError(
                    f"root bracketing failed near omega={omegas[i]:.3f} for "
                    f"(n~{len(found)}, k={k})")
            found.append((root, parity, abs(res(root, k, a))))
    found.sort(key=lambda t: t[0])
    if len(found) < n_max:
        raise NumericalBreakdownError(
            f"only {len(found)} roots found for k={k}, need {n_max}")

    entries = []
    w = np.full(nz, dz)
    w[0] = w[-1] = 0.5 * dz
    for n, (omega, parity, res_val) in enumerate(found[:n_max]):
        s = omega**2 + k**2
        r = np.sqrt(omega**2 + 2.0 * k**2)
        b = _eigfun_samples(z_tilde, omega, r, a, parity)
        b = b / np.sqrt(b**2 @ w)
        entries.append(SpectrumEntry(n=n, k=k, lam=s**2, omega=omega, r=r,
                                     parity=parity, eigfun=b, residual=res_val))
    return entries


def spectrum_to_csv(entries, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "k", "lambda", "omega", "r", "residual"])
        for e in entries:
            writer.writerow([e.n, e.k, f"{e.lam:.17g}", f"{e.omega:.17g}",
                             f"{e.r:.17g}", f"{e.residual:.3e}"])


# ---------------------------------------------------------------------------
# Dense oracles
# ---------------------------------------------------------------------------

def dense_clamped_eigenvalues(k: int, nz: int, width: float, n_max: int):
    """Eigenvalues of the discretized clamped operator on (0, width).

    Generalized solve with the mass matrix zeroed on the wall rows; the
    infinite eigenvalues bred by the constraint rows are discarded.
    """
    grid = Grid(8, nz, width)
    A = operator_matrix(grid, k).toarray()
    B = np.eye(nz)
    for r in _bc_rows(nz):
        B[r, r] = 0.0
    lam = sla.eig(A, B, right=False)
    lam = lam[np.isfinite(lam)]
    lam = np.sort(lam.real[np.abs(lam.imag) < 1e-6 * np.abs(lam.real)])
    return lam[:n_max]


@lru_cache(maxsize=None)
def mode_decay_eigensystem(grid: Grid, k: int):
    """Dense eigendecomposition of the per-mode damping operator.

    Returns (rates, V, Vinv) with rates >= 0 such that a fluctuation mode
    evolves as V exp(-rates t) Vinv theta_hat.  The four zero rates carry the
    wall-trace content, which the dynamics preserve.
    """
    A = operator_matrix(grid, int(k)).toarray()
    P = np.eye(grid.nz)
    for r in _bc_rows(grid.nz):
        P[r, r] = 0.0
    N = k**2 * sla.solve(A, P)
    rates, V = sla.eig(N)
    Vinv = sla.inv(V)
    return rates, V, Vinv
