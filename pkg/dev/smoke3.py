import sys, time
sys.path.insert(0, "/root/pkg/src")
import numpy as np
from stlab import blprofiles as bl
from stlab.stencils import fd_weights

t0 = time.time()
p0 = bl.canonical_profile(0)
print(f"chi0 solve {time.time()-t0:.2f}s  residual={p0.residual:.2e} max={np.abs(p0.values).max():.4f} warn={p0.warn_residual}")
print("chi0(0), chi0'(0), chi0''''(0):", p0.values[0], p0.derivs[0][0], p0.derivs[3][0])
# emergent chi0''''' at 0 (one-sided stencil on d4)
c5 = fd_weights(p0.z_nodes[:7], 0.0, 1) @ p0.derivs[3][:7]
print("chi0^(5)(0) emergent:", c5)
print("decay c:", p0.decay_c, " (slow-branch theory ~0.510)")
p_exp = bl.fit_stretched_exponent(p0.z_nodes, p0.values)
print("stretched exponent:", p_exp, "(theory 0.8)")

t0 = time.time()
p1 = bl.canonical_profile(1)
print(f"chi1 solve {time.time()-t0:.2f}s  residual={p1.residual:.2e} max={np.abs(p1.values).max():.4f}")
print("chi1(0) emergent:", p1.values[0])
print("chi1'(0):", p1.derivs[0][0], "chi1''''(0):", p1.derivs[3][0])
c5 = fd_weights(p1.z_nodes[:7], 0.0, 1) @ p1.derivs[3][:7]
print("chi1^(5)(0):", c5)
print("chi1 decay c:", p1.decay_c)

# closed-form oracle: chi1 = (phi''' - Z phi'''')/4 from the aux problem
aux = bl.solve_profile_ode(bl.ProfileODEProblem(4.0, 0, "slope-aux"))
chi1_closed = (aux.derivs[2] - aux.z_nodes * aux.derivs[3]) / 4.0
print("chi1 vs closed form:", np.abs(chi1_closed - p1.values).max())

# variant (i) homogeneous -> zero
z = bl.solve_profile_ode(bl.ProfileODEProblem(4.0, 0, "i"))
print("homogeneous variant-(i) max:", np.abs(z.values).max())

# redundancy: variant-(i) solve of chi0-type via direct nonhomogeneous bc
t0 = time.time()
direct = bl.solve_profile_ode(bl.ProfileODEProblem(4.0, 0, "value-lift"))
print(f"direct chi0 {time.time()-t0:.2f}s diff vs lifting:", np.abs(direct.values - p0.values).max())

# z_max doubling invariance on [0,10]
t0 = time.time()
p0b = bl.canonical_profile(0, z_max=240.0, n_points=2001)
ev_a = p0.interpolant(0)(np.linspace(0, 10, 500))
ev_b = p0b.interpolant(0)(np.linspace(0, 10, 500))
print(f"zmax doubling delta: {np.abs(ev_a-ev_b).max():.2e}  ({time.time()-t0:.1f}s)")

# weighted norm finiteness
c = p0.decay_c / 2
Z = p0.z_nodes
w = np.exp(c * Z**0.8)
from scipy.integrate import trapezoid
for k in range(5):
    v = p0.deriv(k)
    print(f"weighted int k={k}: {trapezoid(v**2 * w, Z):.4e}")
