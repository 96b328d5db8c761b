import sys, time
sys.path.insert(0, "/root/pkg/src")
import numpy as np
from stlab import domain, stokes
from stlab.domain import Grid, RealField

# roundtrip
g = Grid(32, 33)
rng = np.random.default_rng(0)
f = RealField(g, rng.standard_normal((32, 33)))
rt = domain.to_real(domain.to_spectral(f))
print("roundtrip err", np.abs(rt.values - f.values).max())

# d/dx sin x
X, Z = g.meshgrid()
fx = domain.differentiate(RealField(g, np.sin(X)), "x", 1)
print("dx sin err", np.abs(fx.values - np.cos(X)).max())

# dz z^2
fz = domain.differentiate(RealField(g, Z**2), "z", 1)
print("dz z2 err", np.abs(fz.values - 2 * Z).max())

# dz exp(z) sin(x) convergence
errs = []
for nz in (17, 33, 65, 129):
    gg = Grid(16, nz)
    X, Z = gg.meshgrid()
    d = domain.differentiate(RealField(gg, np.exp(Z) * np.sin(X)), "z", 1)
    errs.append(np.abs(d.values - np.exp(Z) * np.sin(X)).max())
errs = np.array(errs)
print("dz conv orders", np.log2(errs[:-1] / errs[1:]))

# sobolev
g2 = Grid(32, 129)
X, Z = g2.meshgrid()
sx = RealField(g2, np.sin(X))
print("L2 sinx", domain.sobolev_norm(sx, 0), np.sqrt(np.pi))
print("H1 sinx", domain.sobolev_norm(sx, 1), np.sqrt(2 * np.pi))

# manufactured quartic
def run_manufactured(nz, gfun, gpp, gpppp, nx=16):
    gg = Grid(nx, nz)
    X, Z = gg.meshgrid()
    rhs_prof = gpppp(Z) - 2 * gpp(Z) + gfun(Z)
    theta = RealField(gg, -rhs_prof * np.cos(X))
    psi = stokes.solve_stream(theta)
    exact = gfun(Z) * np.sin(X)
    return domain.l2_norm(RealField(gg, psi.values - exact))

# quartic: g = z^2(1-z)^2
q = lambda z: z**2 * (1 - z)**2
qpp = lambda z: 2 - 12*z + 12*z**2
qpppp = lambda z: 24.0 + 0*z
for nz in (65, 129, 257):
    t0 = time.time()
    e = run_manufactured(nz, q, qpp, qpppp)
    print(f"quartic nz={nz} err={e:.3e}  ({time.time()-t0:.2f}s)")

# non-polynomial: g = z^2(1-z)^2 exp(z)
import sympy as sp
zs = sp.symbols("z")
gs = zs**2 * (1 - zs)**2 * sp.exp(zs)
g2s = sp.diff(gs, zs, 2)
g4s = sp.diff(gs, zs, 4)
gf = sp.lambdify(zs, gs, "numpy")
g2f = sp.lambdify(zs, g2s, "numpy")
g4f = sp.lambdify(zs, g4s, "numpy")
errs = []
for nz in (65, 129, 257):
    e = run_manufactured(nz, gf, g2f, g4f)
    errs.append(e)
    print(f"exp nz={nz} err={e:.3e}")
errs = np.array(errs)
print("orders:", np.log2(errs[:-1] / errs[1:]))
print(sp.expand(g2s))
print(sp.expand(g4s))
