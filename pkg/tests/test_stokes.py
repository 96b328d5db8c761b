import numpy as np
import pytest

from stlab import analysis, blprofiles, domain, stokes
from stlab.domain import Grid, RealField

N_RANDOM = 50

# manufactured solutions psi = g(z) sin(x): feeding theta with
# dx theta = (g'''' - 2 g'' + g) sin(x) must return psi.
QUARTIC = (
    lambda z: z**2 * (1 - z) ** 2,
    lambda z: 2 - 12 * z + 12 * z**2,
    lambda z: 24.0 + 0 * z,
)
# non-polynomial variant for the convergence-order fit (symbolic derivatives)
EXPG = (
    lambda z: z**2 * (1 - z) ** 2 * np.exp(z),
    lambda z: np.exp(z) * (z**4 + 6 * z**3 + z**2 - 8 * z + 2),
    lambda z: np.exp(z) * (z**4 + 14 * z**3 + 49 * z**2 + 32 * z - 12),
)


def manufactured_error(nz, gfun, gpp, gpppp, nx=16):
    g = Grid(nx, nz)
    X, Z = g.meshgrid()
    theta = RealField(g, -(gpppp(Z) - 2 * gpp(Z) + gfun(Z)) * np.cos(X))
    psi = stokes.solve_stream(theta)
    return domain.l2_norm(RealField(g, psi.values - gfun(Z) * np.sin(X)))


def fluctuation(grid, seed, envelope_power=2):
    rng = np.random.default_rng(seed)
    X, Z = grid.meshgrid()
    th = np.zeros((grid.nx, grid.nz))
    for k in range(1, 4):
        for n in range(1, 4):
            th += rng.standard_normal() * np.cos(k * X + rng.uniform(0, 6)) \
                * np.sin(n * np.pi * Z)
    th *= (4 * Z * (1 - Z)) ** envelope_power
    return RealField(grid, th - th.mean(axis=0)[None, :])


class TestSolveStream:
    def test_stratified_theta_gives_no_flow(self):
        g = Grid(16, 33)
        _, Z = g.meshgrid()
        psi = stokes.solve_stream(RealField(g, 1.0 - Z + Z**3))
        assert np.abs(psi.values).max() < 1e-14

    def test_zero(self):
        g = Grid(16, 33)
        psi = stokes.solve_stream(RealField(g, np.zeros((16, 33))))
        assert np.abs(psi.values).max() == 0.0

    def test_manufactured_quartic_recovered(self):
        # the quartic lies in the stencils' exactness class: round-off only
        for nz in (65, 129, 257):
            assert manufactured_error(nz, *QUARTIC) < 1e-6

    def test_manufactured_convergence_order(self):
        errs = [manufactured_error(nz, *EXPG) for nz in (65, 129, 257)]
        order = np.polyfit(np.log([65 - 1, 128, 256]), np.log(errs), 1)[0]
        assert -4.3 < order < -3.7

    def test_linearity(self):
        g = Grid(16, 33)
        rng = np.random.default_rng(2)
        for i in range(N_RANDOM):
            t1 = fluctuation(g, 2 * i)
            t2 = fluctuation(g, 2 * i + 1)
            a, b = rng.standard_normal(2)
            combo = stokes.solve_stream(RealField(g, a * t1.values + b * t2.values))
            parts = a * stokes.solve_stream(t1).values + b * stokes.solve_stream(t2).values
            scale = max(np.abs(parts).max(), 1e-30)
            # round-off level for triangular solves of the stiff operator
            assert np.abs(combo.values - parts).max() < 1e-10 * scale

    def test_factorization_reproduces_matrix(self):
        # round-off amplification grows like the dz^-4 operator scale, so
        # the 1e-10 figure is checked at a moderate resolution
        g = Grid(16, 33)
        rng = np.random.default_rng(3)
        for k in (1, 3, 7):
            op = stokes.mode_operator(g, k)
            for _ in range(20):
                x = rng.standard_normal(g.nz)
                back = op.lu.solve(op.matrix @ x)
                assert np.abs(back - x).max() < 1e-10 * np.abs(x).max()


class TestVelocity:
    def test_analytic_derivatives(self):
        g = Grid(32, 129)
        X, Z = g.meshgrid()
        psi = RealField(g, Z**2 * (1 - Z) ** 2 * np.sin(X))
        u1, u2 = stokes.velocity(psi)
        u1_exact = -(2 * Z * (1 - Z) ** 2 - 2 * Z**2 * (1 - Z)) * np.sin(X)
        assert np.abs(u1.values - u1_exact).max() < 1e-10
        assert np.abs(u2.values - Z**2 * (1 - Z) ** 2 * np.cos(X)).max() < 1e-12

    def test_zero(self):
        g = Grid(16, 33)
        u1, u2 = stokes.velocity(RealField(g, np.zeros((16, 33))))
        assert np.abs(u1.values).max() == 0.0
        assert np.abs(u2.values).max() == 0.0

    def test_walls_and_divergence(self):
        g = Grid(32, 129)
        psi = stokes.solve_stream(fluctuation(g, 11))
        u1, u2 = stokes.velocity(psi)
        for u in (u1, u2):
            assert np.abs(u.values[:, 0]).max() < 1e-10
            assert np.abs(u.values[:, -1]).max() < 1e-10
        div = domain.differentiate(u1, "x", 1).values \
            + domain.differentiate(u2, "z", 1).values
        grad = np.sqrt(domain.l2_norm(u1) ** 2 + domain.l2_norm(u2) ** 2)
        assert domain.l2_norm(div, g) < 1e-8 * max(grad, 1e-30)


class TestSelfAdjointness:
    def _defect(self, nz):
        g = Grid(32, nz)
        thf = fluctuation(g, 5)
        psi = stokes.solve_stream(thf)
        lap = RealField(g, domain.differentiate(psi, "x", 2).values
                        + domain.differentiate(psi, "z", 2).values)
        lhs = domain.integrate(RealField(
            g, -domain.differentiate(psi, "x", 1).values * thf.values))
        rhs = domain.l2_norm(lap) ** 2
        return abs(lhs - rhs) / rhs

    def test_defect_converges_quadratically(self):
        defects = [self._defect(nz) for nz in (129, 257, 513)]
        assert defects[-1] < 5e-5
        rates = np.log2(np.array(defects[:-1]) / defects[1:])
        assert np.all(rates > 1.5)

    @pytest.mark.xfail(strict=True, reason=(
        "the 1e-6 figure is below the trapezoid/FD identity defect at any "
        "resolution: it decays as dz^2 to ~3.6e-6 near nz=1025 and then rises "
        "with the factorization conditioning (see decisions ledger)"))
    def test_defect_at_spec_figure(self):
        assert self._defect(513) < 1e-6


class TestSpectrum:
    def test_beam_eigenvalues_k0(self):
        # dense-operator oracle for the smallest pair, plus the classical
        # clamped-beam values on the (-1, 1) strip
        entries = stokes.clamped_spectrum(0, 4, "strip")
        dense = stokes.dense_clamped_eigenvalues(0, 257, 2.0, 4)
        assert abs(entries[0].lam - dense[0]) < 1e-6 * dense[0]
        beam = [(4.7300407449 / 2) ** 4, (7.8532046241 / 2) ** 4]
        assert abs(entries[0].lam - beam[0]) < 1e-8 * beam[0]
        assert abs(entries[1].lam - beam[1]) < 1e-8 * beam[1]

    def test_dense_block(self):
        # transcendental vs dense eigensolve at nz=257 on the strip
        for k in range(0, 5):
            trans = [e.lam for e in stokes.clamped_spectrum(k, 5, "strip")]
            dense = stokes.dense_clamped_eigenvalues(k, 257, 2.0, 5)
            rel = np.abs(np.array(trans) - dense) / dense
            assert rel.max() < 1e-5

    def test_wall_residuals(self):
        for k in (0, 3, 11):
            for e in stokes.clamped_spectrum(k, 6, "strip"):
                assert e.residual < 1e-8
                assert abs(e.eigfun[0]) < 1e-12
                assert abs(e.eigfun[-1]) < 1e-12

    def test_parameter_relation(self):
        for e in stokes.clamped_spectrum(4, 8, "strip"):
            assert e.lam > 0
            assert abs(e.r**2 - e.omega**2 - 2 * 16) < 1e-8 * e.r**2

    def test_ordering_and_unit_mode(self):
        entries = stokes.clamped_spectrum(2, 8, "unit", nz=129)
        lams = [e.lam for e in entries]
        assert np.all(np.diff(lams) > 0)
        w = np.full(129, 1 / 128)
        w[0] = w[-1] = 0.5 / 128
        for e in entries[:3]:
            assert abs(e.eigfun**2 @ w - 1.0) < 1e-10

    def test_ratio_bounded(self):
        # two-sided equivalence with (n^2+k^2)^2 over the block; the honest
        # interval spans ~2.4 decades (see ledger), but it is one fixed
        # bounded interval
        ratios = []
        for k in range(0, 21):
            for e in stokes.clamped_spectrum(k, 21, "strip"):
                if e.n == 0 and k == 0:
                    continue
                ratios.append(e.lam / (e.n**2 + k**2) ** 2)
        ratios = np.array(ratios)
        assert 0.5 < ratios.min() and ratios.max() < 300.0

    def test_csv_export(self, tmp_path):
        entries = stokes.clamped_spectrum(1, 3, "strip")
        path = tmp_path / "spec.csv"
        stokes.spectrum_to_csv(entries, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "n,k,lambda,omega,r,residual"
        assert len(lines) == 4
        row = lines[1].split(",")
        assert float(row[2]) == pytest.approx(entries[0].lam)


class TestDampingOperator:
    def test_rates_match_dense_bilaplacian(self):
        g = Grid(16, 129)
        rates, _, _ = stokes.mode_decay_eigensystem(g, 1)
        top = np.sort(rates.real)[-3:][::-1]
        dense = stokes.dense_clamped_eigenvalues(1, 129, 1.0, 3)
        assert np.allclose(top, 1.0 / dense, rtol=1e-10)

    def test_rate_bound_dominates(self):
        g = Grid(64, 129)
        bound = stokes.decay_rate_bound(g)
        for k in (1, 3, 5, 8):
            rates, _, _ = stokes.mode_decay_eigensystem(g, k)
            assert rates.real.max() <= bound

    def test_apply_L_is_dissipative(self):
        g = Grid(16, 65)
        for seed in range(10):
            thf = fluctuation(g, seed + 40)
            Lth = stokes.apply_L(thf)
            val = domain.integrate(RealField(g, -thf.values * Lth.values))
            assert val > 0


class TestLayerSourceScaling:
    """Norms of the clamped solve against wall-scaled right sides."""

    def _norms(self, profile_fn, ts, nz):
        g = Grid(32, nz)
        X, Z = g.meshgrid()
        cut = blprofiles._wall_cutoff(Z, 1.0)
        out = []
        for t in ts:
            Zv = (1.0 + t) ** 0.25 * Z
            rhs = RealField(g, np.cos(X) * profile_fn(Zv) * cut)
            out.append(domain.l2_norm(stokes.solve_bilaplacian(rhs)))
        return np.array(out)

    @staticmethod
    def _plain(Z):
        return np.exp(-Z)

    @staticmethod
    def _moment_free(Z):
        # second and third moments vanish identically
        return (1.0 - (2.0 / 3.0) * Z + (1.0 / 12.0) * Z**2) * np.exp(-Z)

    def test_upper_bounds_hold(self):
        # the compensated norms stay bounded along the whole ladder
        ts = np.logspace(1, 7, 13)
        plain = self._norms(self._plain, ts, 513)
        assert (plain * (1 + ts) ** 0.75).max() < 0.3
        mom = self._norms(self._moment_free, ts, 513)
        assert (mom * (1 + ts) ** 1.0).max() < 0.5

    def test_asymptotic_exponents(self):
        # scaling becomes measurable once the layer detaches from the cutoff
        ts = np.logspace(6, 8, 9)
        plain = self._norms(self._plain, ts, 1025)
        fit = analysis.fit_power_law(ts, plain, (ts.min(), ts.max()), )
        assert 0.70 <= fit.exponent <= 0.80
        mom = self._norms(self._moment_free, ts, 1025)
        fitm = analysis.fit_power_law(ts, mom, (ts.min(), ts.max()))
        # the t^{-1} bound is not saturated: the layer term decays like the
        # 9/8 power, which is what the fit finds
        assert fitm.exponent >= 1.0

    @pytest.mark.xfail(strict=True, reason=(
        "over t in [10, 1e4] the solve is pre-asymptotic (measured fits 0.27 "
        "and 0.56): the scaling windows need t >~ 1e6; see decisions ledger"))
    def test_spec_window(self):
        ts = np.logspace(1, 4, 10)
        plain = self._norms(self._plain, ts, 257)
        fit = analysis.fit_power_law(ts, plain, (ts.min(), ts.max()))
        assert 0.70 <= fit.exponent <= 0.80


def test_fit_power_law_needs_eight_samples():
    with pytest.raises(ValueError):
        analysis.fit_power_law([10, 20, 30], [1, 2, 3], (10, 30))
