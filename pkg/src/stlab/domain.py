"""Channel grid, field containers, transforms, derivatives and norms.

The domain is the periodic channel [0, 2*pi) x [0, height]: Fourier
collocation in x, a uniform node set in z that includes both walls.
Derivatives are spectral in x and 4th-order finite differences in z
(one-sided closures of the same formal order at the walls).  Quadrature is
exact in x for band-limited fields and trapezoidal in z.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .stencils import derivative_matrix

X_PERIOD = 2.0 * np.pi

SNAPSHOT_MAGIC = b"STLB"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


class ConfigurationError(ValueError):
    """Grid/shape mismatch or invalid discretization parameter."""


@dataclass(frozen=True)
class Grid:
    """Collocation grid: nx Fourier points in x, nz nodes in z (walls included)."""

    nx: int
    nz: int
    height: float = 1.0

    def __post_init__(self):
        if self.nx < 8 or self.nx % 2 != 0:
            raise ConfigurationError(f"nx must be even and >= 8, got {self.nx}")
        if self.nz < 9:
            raise ConfigurationError(f"nz must be >= 9, got {self.nz}")
        if not self.height > 0:
            raise ConfigurationError(f"height must be positive, got {self.height}")

    @property
    def dx(self):
        return X_PERIOD / self.nx

    @property
    def dz(self):
        return self.height / (self.nz - 1)

    @property
    def x_nodes(self):
        return np.arange(self.nx) * self.dx

    @property
    def z_nodes(self):
        return np.linspace(0.0, self.height, self.nz)

    @property
    def wavenumbers(self):
        """Non-negative wavenumbers of the rfft layout, 0..nx/2."""
        return np.arange(self.nx // 2 + 1)

    def meshgrid(self):
        return np.meshgrid(self.x_nodes, self.z_nodes, indexing="ij")


@dataclass
class RealField:
    """Scalar field sampled on the grid; values[i, j] = f(x_i, z_j)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nx, self.grid.nz):
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.nz})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("field contains non-finite entries")

    def copy(self):
        return RealField(self.grid, self.values.copy())


@dataclass
class SpectralField:
    """Fourier-in-x representation in the Hermitian (rfft) layout.

    modes[k, j] is the coefficient of exp(i*k*x) at z_j for k = 0..nx/2; the
    negative-wavenumber coefficients are the conjugates, so the represented
    physical field is real by construction and the Nyquist mode is kept real.
    """

    grid: Grid
    modes: np.ndarray

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=complex)
        expect = (self.grid.nx // 2 + 1, self.grid.nz)
        if self.modes.shape != expect:
            raise ConfigurationError(
                f"mode array shape {self.modes.shape} does not match grid {expect}"
            )
        # Nyquist column of a real field carries no imaginary part.
        self.modes[-1] = self.modes[-1].real

    def mode(self, k):
        """Coefficient row for signed wavenumber k (conjugate for k < 0)."""
        half = self.grid.nx // 2
        if abs(k) > half:
            raise ConfigurationError(f"wavenumber {k} not resolved (|k| <= {half})")
        return self.modes[k] if k >= 0 else np.conj(self.modes[-k])


@dataclass
class MeanFluctPair:
    """Horizontal average (per z) and the zero-mean remainder."""

    grid: Grid
    mean: np.ndarray          # (nz,), the x-average
    fluct: RealField          # zero x-average at every z

    def reconstruct(self):
        return RealField(self.grid, self.fluct.values + self.mean[None, :])


def to_spectral(f: RealField) -> SpectralField:
    return SpectralField(f.grid, np.fft.rfft(f.values, axis=0) / f.grid.nx)


def to_real(sf: SpectralField) -> RealField:
    vals = np.fft.irfft(sf.modes * sf.grid.nx, n=sf.grid.nx, axis=0)
    return RealField(sf.grid, vals)


@lru_cache(maxsize=None)
def z_derivative_matrix(grid: Grid, order: int, accuracy: int = 4):
    if not 1 <= order <= 4:
        raise ConfigurationError(f"unsupported derivative order {order}")
    return derivative_matrix(grid.z_nodes, order, accuracy)


def _x_derivative_values(values, grid, order):
    k = grid.wavenumbers.astype(float)
    fac = (1j * k) ** order
    if order % 2 == 1:
        fac[-1] = 0.0  # odd derivative of the real Nyquist mode
    return np.fft.irfft(fac[:, None] * np.fft.rfft(values, axis=0), n=grid.nx, axis=0)


def differentiate(f: RealField, axis: str, order: int = 1) -> RealField:
    """Partial derivative along "x" (spectral) or "z" (finite differences)."""
    if not 1 <= order <= 4:
        raise ConfigurationError(f"unsupported derivative order {order}")
    if axis == "x":
        return RealField(f.grid, _x_derivative_values(f.values, f.grid, order))
    if axis == "z":
        D = z_derivative_matrix(f.grid, order)
        return RealField(f.grid, (D @ f.values.T).T)
    raise ConfigurationError(f"unknown axis {axis!r}")


def split_mean_fluct(f: RealField) -> MeanFluctPair:
    mean = f.values.mean(axis=0)
    fluct = RealField(f.grid, f.values - mean[None, :])
    return MeanFluctPair(f.grid, mean, fluct)


@lru_cache(maxsize=None)
def z_quad_weights(grid: Grid):
    """Trapezoid weights on the z nodes."""
    w = np.full(grid.nz, grid.dz)
    w[0] = w[-1] = 0.5 * grid.dz
    return w


def integrate(f: RealField) -> float:
    """Integral over the channel (exact in x for band-limited data, trapezoid in z)."""
    return float(f.grid.dx * f.values.sum(axis=0) @ z_quad_weights(f.grid))


def l2_norm(values_or_field, grid: Grid | None = None) -> float:
    if isinstance(values_or_field, RealField):
        grid = values_or_field.grid
        values = values_or_field.values
    else:
        values = values_or_field
    return float(np.sqrt(grid.dx * (values**2).sum(axis=0) @ z_quad_weights(grid)))


def profile_l2_norm(profile, grid: Grid) -> float:
    """L2(0, height) norm of a z-profile with the channel quadrature."""
    return float(np.sqrt(np.asarray(profile) ** 2 @ z_quad_weights(grid)))


def profile_sobolev_norm(profile, grid: Grid, s: int) -> float:
    """H^s(0, height) norm of a z-profile (1-D, trapezoid quadrature)."""
    prof = np.asarray(profile, dtype=float)
    total = prof @ (z_quad_weights(grid) * prof)
    d = prof
    for order in range(1, s + 1):
        d = z_derivative_matrix(grid, 1) @ d
        total += d @ (z_quad_weights(grid) * d)
    return float(np.sqrt(total))


def _z_derivative_values(values, grid, order):
    """z-derivative of arbitrary order by composing order <= 4 stages."""
    out = values
    remaining = order
    while remaining > 0:
        step = min(remaining, 4)
        out = (z_derivative_matrix(grid, step) @ out.T).T
        remaining -= step
    return out


def sobolev_norm(f: RealField, s: int) -> float:
    """Discrete H^s norm including all mixed derivatives of total order <= s."""
    if s < 0 or s > 6:
        raise ConfigurationError(f"unsupported Sobolev order {s}")
    grid = f.grid
    w = z_quad_weights(grid)
    total = 0.0
    for a in range(s + 1):
        base = f.values if a == 0 else _x_derivative_values(f.values, grid, a)
        d = base
        for b in range(0, s - a + 1):
            if b > 0:
                d = (z_derivative_matrix(grid, 1) @ d.T).T
            total += grid.dx * (d**2).sum(axis=0) @ w
    return float(np.sqrt(total))


@lru_cache(maxsize=None)
def _dealias_mask(grid: Grid):
    k = grid.wavenumbers
    return (k <= grid.nx // 3).astype(float)


def dealias_values(values, grid):
    """2/3-rule truncation of the x-spectrum."""
    modes = np.fft.rfft(values, axis=0)
    modes *= _dealias_mask(grid)[:, None]
    return np.fft.irfft(modes, n=grid.nx, axis=0)


def save_snapshot(path, f: RealField, time: float = 0.0):
    """Binary snapshot: magic, version, nx, nz, height, time, then row-major f64."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, f.grid.nx,
                              f.grid.nz, f.grid.height, time))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_snapshot(path):
    """Read a snapshot file; returns (field, time)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, nx, nz, height, time = _HEADER.unpack(header)
        if magic != SNAPSHOT_MAGIC:
            raise ConfigurationError(f"{path}: not a snapshot file (magic {magic!r})")
        if version != SNAPSHOT_VERSION:
            raise ConfigurationError(f"{path}: unsupported snapshot version {version}")
        data = np.frombuffer(fh.read(nx * nz * 8), dtype="<f8").reshape(nx, nz)
    return RealField(Grid(nx, nz, height), data.copy()), time
