import sys, time
sys.path.insert(0, "/root/pkg/src")
import numpy as np
from stlab import domain, dynamics, stokes
from stlab.domain import Grid, RealField

# 1. stratified steadiness
g = Grid(32, 65)
bg = dynamics.make_background(g)
st = dynamics.State.create(RealField(g, np.tile(bg, (32, 1))), bg)
cfg = dynamics.StepperConfig(t_final=5.0, diag_every=1.0)
st2 = dynamics.step(st, cfg, dt=1.0)
print("stratified drift:", np.abs(st2.rho.values - st.rho.values).max())

# 2. eigen decay, exact linear
g = Grid(16, 129)
bg = dynamics.make_background(g)
th0 = dynamics.make_initial_theta(g, {"kind": "discrete_eigenmode", "n": 0, "k": 1, "eps": 0.01})
st = dynamics.State.create(RealField(g, th0.values + bg[None, :]), bg)
rates, V, Vi = stokes.mode_decay_eigensystem(g, 1)
lam = np.sort(rates.real)[-1]
t_end = 5.0 / lam
prop = dynamics.ExactLinearPropagator(g, bg)
th_t = prop.advance(st.theta, t_end)
# amplitude via projection on initial shape
w = domain.z_quad_weights(g)
num = (th_t.values * th0.values * w[None, :]).sum()
den = (th0.values**2 * w[None, :]).sum()
amp = num / den
print(f"eigen decay: lam={lam:.6e} t={t_end:.1f} amp={amp:.8f} exp(-5)={np.exp(-5):.8f} rel={(amp-np.exp(-5))/np.exp(-5):.2e}")

# also RK3 path for the same over shorter horizon
t_end2 = 0.5 / lam
cfgl = dynamics.StepperConfig(mode="linear", t_final=t_end2, diag_every=t_end2, filter_strength=0.0)
recs, _ = dynamics.run(st, cfgl)
amp_rk = None

# step-doubling order
g3 = Grid(32, 65)
bg3 = dynamics.make_background(g3)
th3 = dynamics.make_initial_theta(g3, {"kind": "random_band", "eps": 0.1, "seed": 7})
st3 = dynamics.State.create(RealField(g3, th3.values + bg3[None, :]), bg3)
cfg3 = dynamics.StepperConfig(mode="nonlinear", t_final=1.0, filter_strength=0.0)
diffs = []
for dt in (0.5, 0.25, 0.125):
    a = dynamics.step(st3, cfg3, dt=dt)
    b = dynamics.step(dynamics.step(st3, cfg3, dt=dt/2), cfg3, dt=dt/2)
    diffs.append(np.abs(a.rho.values - b.rho.values).max())
diffs = np.array(diffs)
print("step-doubling diffs:", diffs, "orders:", np.log2(diffs[:-1]/diffs[1:]))

# 3. short stab run: mass, energy monotonicity, dissipation identity
t0 = time.time()
g4 = Grid(64, 129)
bg4 = dynamics.make_background(g4)
th4 = dynamics.make_initial_theta(g4, {"kind": "bump", "eps": 0.01, "m": 1, "p": 3})
st4 = dynamics.State.create(RealField(g4, th4.values + bg4[None, :]), bg4)
cfg4 = dynamics.StepperConfig(t_final=30.0, diag_every=0.25)
recs, _ = dynamics.run(st4, cfg4, lambdas=(0.25, 0.5, 0.75))
el = time.time() - t0
ts = np.array([r.time for r in recs])
E = np.array([r.energy for r in recs])
D = np.array([r.dissipation for r in recs])
mass = np.array([r.mass for r in recs])
print(f"stab-short: {len(recs)} records in {el:.1f}s")
print("mass drift rel:", np.abs(mass - mass[0]).max() / mass[0])
dE = np.diff(E) / np.diff(ts)
print("energy monotone: max dE (should be <=0):", dE.max())
# centered identity check
dEc = (E[2:] - E[:-2]) / (ts[2:] - ts[:-2])
mism = np.abs(dEc + D[1:-1]) / np.maximum(D[1:-1], 1e-12)
print("dissipation identity rel mismatch: max", mism.max(), "median", np.median(mism))
lev = np.array([[r.level_measures[l] for l in (0.25, 0.5, 0.75)] for r in recs])
print("level measure drift:", np.abs(lev - lev[0]).max(), "cell area:", g4.dx * g4.dz)
l2f = np.array([r.l2_theta_fluct for r in recs])
print("l2 fluct decay:", l2f[0], "->", l2f[-1])
print("l2_rho drift rel:", abs(np.array([r.l2_rho for r in recs]) - recs[0].l2_rho).max()/recs[0].l2_rho)
