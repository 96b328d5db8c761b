import sys, time
sys.path.insert(0, "/root/pkg/src")
import numpy as np
from stlab import analysis, blprofiles, domain, dynamics
from stlab.domain import Grid, RealField

t0 = time.time()
g = Grid(32, 257)
bg = dynamics.make_background(g)
th0 = dynamics.make_initial_theta(g, {"kind": "wall_trace", "eps": 0.01, "m": 1})
st = dynamics.State.create(RealField(g, th0.values + bg[None, :]), bg)
prop = dynamics.ExactLinearPropagator(g, bg)

mean0 = th0.values.mean(axis=0)  # = 0 for cos(x) data... the mean offset
print("mean0 max:", np.abs(mean0).max())

ladder = np.unique(np.round(np.logspace(2, 4, 9)))
snaps = []
for t in ladder:
    tht = prop.advance(st.theta, t)
    snaps.append((float(t), tht))
print(f"exact-linear ladder built in {time.time()-t0:.1f}s")

# theta trace preserved?
print("trace at t=1e4 vs initial:", snaps[-1][1].values[0, 0], th0.values[0, 0])

meas = analysis.extract_bl(snaps, "bottom")
wfit = analysis.width_exponent(meas)
afit = analysis.amplitude_exponent(meas)
print(f"width exponent {wfit.exponent:.4f} (r2={wfit.r_squared:.4f}) widths={meas.widths}")
print(f"amplitude exponent {afit.exponent:.4f} (r2={afit.r_squared:.4f})")

# prediction comparisons
reports_lead, reports_lp1 = [], []
for t, f in snaps:
    pred = blprofiles.assemble_bl_linear(th0, t, "both", "leading")
    rep = analysis.validate_prediction(f, pred, mean0)
    reports_lead.append(rep)
    pred1 = blprofiles.assemble_bl_linear(th0, t, "both", "leading+1")
    reports_lp1.append(analysis.validate_prediction(f, pred1, mean0))

for rep, rep1 in zip(reports_lead, reports_lp1):
    print(f"t={rep['time']:8.0f} |sim-mean|={rep['l2_sim_minus_mean']:.4e} |pred|={rep['l2_predicted']:.4e} "
          f"res_lead={rep['l2']:.4e} res_lead+1={rep1['l2']:.4e}")

rfit = analysis.residual_exponent(reports_lead)
rfit1 = analysis.residual_exponent(reports_lp1)
print(f"residual exponent leading: {rfit.exponent:.4f} (r2={rfit.r_squared:.3f})")
print(f"residual exponent leading+1: {rfit1.exponent:.4f}")

# sanity: ||theta_bl|| scaling of the prediction itself over wide ladder
ts = np.logspace(2, 6, 9)
norms = []
for t in ts:
    pred = blprofiles.assemble_bl_linear(th0, t, "both", "leading")
    norms.append(domain.l2_norm(pred.theta_bl))
fit = analysis.fit_power_law(ts, norms, (ts.min(), ts.max()))
print(f"prediction L2 exponent over [1e2,1e6]: {fit.exponent:.4f} (theory 1/8)")

# trace matching at wall: Theta0_bot(x,0) == theta0'(x, z=0)
pred = blprofiles.assemble_bl_linear(th0, 100.0, "both", "leading")
print("wall trace match:", np.abs(pred.theta_bl.values[:, 0] - th0.values[:, 0]).max())
print(f"total {time.time()-t0:.1f}s")
