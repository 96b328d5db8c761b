import numpy as np
import pytest

from stlab import domain, stokes
from stlab.domain import ConfigurationError, Grid, RealField

N_RANDOM = 50


def random_smooth(grid, seed, kmax=3, nmax=3, envelope=False):
    rng = np.random.default_rng(seed)
    X, Z = grid.meshgrid()
    f = np.zeros((grid.nx, grid.nz))
    for k in range(kmax + 1):
        for n in range(1, nmax + 1):
            f += rng.standard_normal() * np.cos(k * X + rng.uniform(0, 2 * np.pi)) \
                * np.sin(n * np.pi * Z / grid.height)
    if envelope:
        f *= (4.0 * Z * (grid.height - Z) / grid.height**2) ** 2
    return RealField(grid, f)


class TestGrid:
    def test_invariants(self):
        g = Grid(32, 33)
        assert g.z_nodes[0] == 0.0 and g.z_nodes[-1] == g.height
        assert np.all(np.diff(g.z_nodes) > 0)

    @pytest.mark.parametrize("nx,nz", [(7, 33), (6, 33), (32, 8)])
    def test_rejects_bad_sizes(self, nx, nz):
        with pytest.raises(ConfigurationError):
            Grid(nx, nz)

    def test_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            RealField(Grid(16, 17), np.zeros((16, 16)))

    def test_nonfinite_rejected(self):
        vals = np.zeros((16, 17))
        vals[3, 4] = np.inf
        with pytest.raises(ConfigurationError):
            RealField(Grid(16, 17), vals)


class TestTransforms:
    def test_constant_field(self):
        g = Grid(16, 17)
        sf = domain.to_spectral(RealField(g, np.ones((16, 17))))
        assert np.allclose(sf.mode(0), 1.0)
        for k in range(1, 9):
            assert np.abs(sf.mode(k)).max() < 1e-14

    def test_single_harmonic(self):
        g = Grid(16, 17)
        X, _ = g.meshgrid()
        sf = domain.to_spectral(RealField(g, np.sin(X)))
        assert np.allclose(np.abs(sf.mode(1)), 0.5, atol=1e-14)
        assert np.allclose(sf.mode(-1), np.conj(sf.mode(1)))
        for k in (0, 2, 3, 4):
            assert np.abs(sf.mode(k)).max() < 1e-14

    def test_roundtrip_random(self):
        g = Grid(32, 21)
        rng = np.random.default_rng(0)
        for _ in range(N_RANDOM):
            f = RealField(g, rng.standard_normal((32, 21)))
            back = domain.to_real(domain.to_spectral(f))
            assert np.abs(back.values - f.values).max() < 1e-12

    def test_parseval(self):
        g = Grid(32, 65)
        for seed in range(N_RANDOM):
            f = random_smooth(g, seed)
            phys = domain.l2_norm(f) ** 2
            sf = domain.to_spectral(f)
            # sum over all signed wavenumbers of |coef|^2, z-trapezoid
            mags = np.abs(sf.modes) ** 2
            mags[1:-1] *= 2.0  # negative-k partners
            spec = 2 * np.pi * float(mags.sum(axis=0) @ domain.z_quad_weights(g))
            assert abs(phys - spec) < 1e-10 * max(phys, 1e-30)

    def test_unresolved_mode_error(self):
        g = Grid(16, 17)
        sf = domain.to_spectral(RealField(g, np.zeros((16, 17))))
        with pytest.raises(ConfigurationError):
            sf.mode(9)


class TestDifferentiate:
    def test_dx_sin(self):
        g = Grid(32, 17)
        X, _ = g.meshgrid()
        d = domain.differentiate(RealField(g, np.sin(X)), "x", 1)
        assert np.abs(d.values - np.cos(X)).max() < 1e-12

    def test_dz_quadratic(self):
        g = Grid(16, 33)
        _, Z = g.meshgrid()
        d = domain.differentiate(RealField(g, Z**2), "z", 1)
        assert np.abs(d.values - 2 * Z).max() < 1e-12

    def test_dz_convergence_order(self):
        # grid-refinement oracle: error of d/dz exp(z) sin(x) halving dz
        errs = []
        for nz in (33, 65, 129):
            g = Grid(16, nz)
            X, Z = g.meshgrid()
            d = domain.differentiate(RealField(g, np.exp(Z) * np.sin(X)), "z", 1)
            errs.append(np.abs(d.values - np.exp(Z) * np.sin(X)).max())
        orders = np.log2(np.array(errs[:-1]) / errs[1:])
        assert np.all(np.abs(orders - 4.0) < 0.2)

    def test_x_derivative_commutes_with_transform(self):
        g = Grid(32, 33)
        f = random_smooth(g, 3)
        d = domain.differentiate(f, "x", 1)
        lhs = domain.to_spectral(d).modes
        k = g.wavenumbers.astype(float)
        rhs = (1j * k)[:, None] * domain.to_spectral(f).modes
        rhs[-1] = 0.0
        assert np.abs(lhs - rhs).max() < 1e-13

    def test_unsupported_order(self):
        g = Grid(16, 33)
        f = RealField(g, np.zeros((16, 33)))
        with pytest.raises(ConfigurationError):
            domain.differentiate(f, "z", 5)
        with pytest.raises(ConfigurationError):
            domain.differentiate(f, "y", 1)


class TestSplitMeanFluct:
    def test_orthogonal_split(self):
        g = Grid(32, 33)
        X, Z = g.meshgrid()
        pair = domain.split_mean_fluct(RealField(g, (1 - Z) + 0.01 * np.sin(X)))
        assert np.abs(pair.mean - (1 - g.z_nodes)).max() < 1e-14
        assert np.abs(pair.fluct.values - 0.01 * np.sin(X)).max() < 1e-14

    def test_zero_mean_harmonic(self):
        g = Grid(32, 33)
        X, Z = g.meshgrid()
        pair = domain.split_mean_fluct(RealField(g, np.cos(X) * np.cos(np.pi * Z)))
        assert np.abs(pair.mean).max() < 1e-15

    def test_fluct_mean_free_random(self):
        g = Grid(32, 33)
        rng = np.random.default_rng(1)
        for _ in range(N_RANDOM):
            f = RealField(g, rng.standard_normal((32, 33)))
            pair = domain.split_mean_fluct(f)
            assert np.abs(pair.fluct.values.mean(axis=0)).max() < 1e-13
            assert np.abs(pair.reconstruct().values - f.values).max() < 1e-13

    def test_l2_orthogonality(self):
        g = Grid(32, 65)
        for seed in range(N_RANDOM):
            f = random_smooth(g, seed + 100)
            pair = domain.split_mean_fluct(f)
            total = domain.l2_norm(f) ** 2
            parts = (2 * np.pi * pair.mean**2 @ domain.z_quad_weights(g)
                     + domain.l2_norm(pair.fluct) ** 2)
            assert abs(total - parts) < 1e-10 * max(total, 1e-30)


class TestSobolevNorm:
    def test_l2_of_sin(self):
        g = Grid(32, 129)
        X, _ = g.meshgrid()
        f = RealField(g, np.sin(X))
        assert abs(domain.sobolev_norm(f, 0) - np.sqrt(np.pi)) < 1e-12

    def test_h1_of_sin(self):
        g = Grid(32, 129)
        X, _ = g.meshgrid()
        f = RealField(g, np.sin(X))
        assert abs(domain.sobolev_norm(f, 1) - np.sqrt(2 * np.pi)) < 1e-12

    def test_matches_direct_quadrature(self):
        # direct quadrature oracle: same derivative fields, independent
        # integration path (np.mean in x, np.trapezoid in z)
        g = Grid(32, 65)
        for seed in range(10):
            f = random_smooth(g, seed + 200)
            s = 3
            total = 0.0
            for a in range(s + 1):
                base = f if a == 0 else domain.differentiate(f, "x", a)
                for b in range(s + 1 - a):
                    d = base
                    for _ in range(b):
                        d = domain.differentiate(d, "z", 1)
                    total += 2 * np.pi * np.trapezoid((d.values**2).mean(axis=0),
                                                      g.z_nodes)
            mine = domain.sobolev_norm(f, s)
            assert abs(mine - np.sqrt(total)) < 1e-10 * max(mine, 1e-30)

    def test_unsupported_order(self):
        g = Grid(16, 33)
        with pytest.raises(ConfigurationError):
            domain.sobolev_norm(RealField(g, np.zeros((16, 33))), 7)


class TestSnapshots:
    def test_roundtrip(self, tmp_path):
        g = Grid(16, 33)
        f = random_smooth(g, 9)
        path = tmp_path / "f.stlb"
        domain.save_snapshot(path, f, time=3.25)
        back, t = domain.load_snapshot(path)
        assert t == 3.25
        assert back.grid == g
        assert np.array_equal(back.values, f.values)

    def test_header_layout(self, tmp_path):
        g = Grid(16, 33)
        path = tmp_path / "f.stlb"
        domain.save_snapshot(path, RealField(g, np.zeros((16, 33))), time=1.0)
        raw = path.read_bytes()
        assert raw[:4] == b"STLB"
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:12], "little") == 16
        assert int.from_bytes(raw[12:16], "little") == 33
        assert len(raw) == 32 + 16 * 33 * 8

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.stlb"
        path.write_bytes(b"NOPE" + bytes(60))
        with pytest.raises(ConfigurationError):
            domain.load_snapshot(path)


def test_interpolation_chain():
    # for psi solved from a fluctuation with clamped traces, the squared
    # mid norm is controlled by the product of its neighbors in the chain
    for nz in (129, 257):
        g = Grid(32, nz)
        X, Z = g.meshgrid()
        rng = np.random.default_rng(7)
        th = np.zeros((g.nx, g.nz))
        for k in range(1, 4):
            th += rng.standard_normal() * np.cos(k * X + rng.uniform(0, 6)) \
                * (Z * (1 - Z)) ** 3
        thf = RealField(g, th - th.mean(axis=0)[None, :])
        psi = stokes.solve_stream(thf)
        lap = RealField(g, domain.differentiate(psi, "x", 2).values
                        + domain.differentiate(psi, "z", 2).values)
        bilap = stokes.apply_bilaplacian(psi)
        bilap2 = stokes.apply_bilaplacian(bilap)
        mid = domain.l2_norm(bilap) ** 2
        left = domain.l2_norm(domain.differentiate(lap, "x", 1))
        hat = np.fft.rfft(bilap2.values, axis=0)
        k = g.wavenumbers.astype(float)
        k[0] = 1.0
        hat /= -(k**2)[:, None]
        hat[0] = 0.0
        right = domain.l2_norm(RealField(g, np.fft.irfft(hat, n=g.nx, axis=0)))
        assert mid <= 1.05 * left ** (4.0 / 3.0) * right ** (2.0 / 3.0)
