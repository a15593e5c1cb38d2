"""
From a frequency table to a population size
============================================

Walk through the ratio-plot estimator on the methamphetamine treatment
data: build the log ratios, fit the weighted regression, extrapolate to
x = 0 and check the fit.
"""

import numpy as np

from ratiopop import gof_chisq, load_dataset, ratio_points, wlrm_estimate

# 3345 drug users, counted by number of treatment episodes
t = load_dataset("meth")
print(t)

# log((x+1) f_{x+1} / f_x) should be roughly linear in x for a
# negative binomial population
pts = ratio_points(t, 10)
for x, y in zip(pts.x, pts.y):
    print(f"x={x:2d}  log ratio={y:+.3f}")

# diagonal weights are the default; the intercept gives f0 = f1 exp(-gamma)
res = wlrm_estimate(t, 10)
print(f"\ngamma={res.fit.gamma_hat:.4f} delta={res.fit.delta_hat:.4f}")
print(f"f0_hat = {res.f0_hat:,.0f}   N_hat = {res.N_hat:,.0f}   SE = {res.se:,.1f}")

# fitted frequencies come from the same line, anchored at f1
g = gof_chisq(t, res.fit)
print(f"\nchi2 = {g.chisq:.1f} on {g.df} df, p = {g.p_value:.3g}")
print("x   observed   fitted   residual")
for x, obs, fit, r in g.residual_rows():
    print(f"{x:<3d} {obs:8.0f} {fit:9.1f} {r:9.2f}")

# the same residuals are what the gof subcommand writes as CSV
print("\nlargest residual at x =", max(g.residuals, key=lambda x: abs(g.residuals[x])))
print("implied NB:", res.implied_nb)
np.testing.assert_allclose(g.fitted[1], t.f(1))
