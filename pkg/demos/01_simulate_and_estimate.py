"""
Simulate a design panel and estimate it
=======================================

Design 1 has one random covariate, a time trend and a special regressor z
with unbounded support.  Identification comes from windows whose middle z
lies far in either tail.
"""
import numpy as np

from dynpanel import DeConfig, extract_windows, fit, simulate, validate
from dynpanel.dgp import design1

spec = design1("norm", n=5000, seed=7)
panel = simulate(spec)
print("individuals:", panel.n, " covariates:", panel.x_names)

# one window per individual and interior period
report = validate(panel)
print("windows:", report.n_windows, " switcher share: %.3f" % report.switcher_fraction)

windows = extract_windows(panel)
est = fit(windows, c=1.0, side="both", cfg=DeConfig(seed=1))

# estimator order is (lag, covariates..., z); labels here use the design names
for label, truth, value in zip(spec.coef_labels, spec.theta_true, est.theta.vector):
    print(f"{label:>6}  true {truth:+.3f}  estimate {value:+.3f}")

print("threshold sigma_n = %.3f" % est.trim.sigma_n)
print("untrimmed switcher windows:", est.n_active, "of", est.n_windows)
print("norm of estimate:", np.linalg.norm(est.theta.vector))
