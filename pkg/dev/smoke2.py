import sys, time
sys.path.insert(0, "/root/pkg/src")
import numpy as np
from stlab import stokes

# k=0 strip: first eigenvalues vs clamped beam theory (length 2): beta*L = 4.7300, 7.8532, ...
t0 = time.time()
entries = stokes.clamped_spectrum(0, 4, "strip")
for e in entries:
    print(f"n={e.n} parity={e.parity} omega={e.omega:.6f} lam={e.lam:.6f} res={e.residual:.1e}")
print("beam theory lam:", [(x / 2) ** 4 for x in (4.7300407449, 7.8532046241, 10.9956078380, 14.1371654913)])
print("time", time.time() - t0)

# dense oracle comparison at nz=257 strip
for k in (0, 1, 4):
    t0 = time.time()
    dense = stokes.dense_clamped_eigenvalues(k, 257, 2.0, 5)
    trans = [e.lam for e in stokes.clamped_spectrum(k, 5, "strip")]
    rel = np.abs(np.array(trans) - dense) / dense
    print(f"k={k} rel err {rel}  ({time.time()-t0:.2f}s)")

# ratio span over n<=20 |k|<=20
t0 = time.time()
ratios = []
for k in range(0, 21):
    es = stokes.clamped_spectrum(k, 21, "strip")
    for e in es:
        n = e.n
        if n == 0 and k == 0:
            continue
        ratios.append(e.lam / (n**2 + k**2) ** 2)
ratios = np.array(ratios)
print(f"ratio span: [{ratios.min():.4g}, {ratios.max():.4g}] = {ratios.max()/ratios.min():.1f}x, "
      f"decades={np.log10(ratios.max()/ratios.min()):.2f}  ({time.time()-t0:.1f}s)")

# eigenfunction wall residual check
e = stokes.clamped_spectrum(3, 3, "strip")[2]
print("wall vals:", e.eigfun[0], e.eigfun[-1])

# decay rate bound
from stlab.domain import Grid
print("rate bound (64,129):", stokes.decay_rate_bound(Grid(64, 129)))

# dense mode decay eigensystem sanity: smallest nonzero rate for k=1 vs 1/lam_bilap
g = Grid(16, 129)
rates, V, Vi = stokes.mode_decay_eigensystem(g, 1)
rr = np.sort(rates.real[rates.real > 1e-12])
print("k=1 smallest rates:", rr[:3], "max imag:", np.abs(rates.imag).max())
dense_lam = stokes.dense_clamped_eigenvalues(1, 129, 1.0, 3)
print("1*k^2/lam_bilap:", 1.0 / dense_lam)
