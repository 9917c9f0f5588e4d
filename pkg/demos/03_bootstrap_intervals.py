"""
m-out-of-n bootstrap intervals with an estimated rate
=====================================================

The estimator converges slower than root-n at an unknown rate.  The rate
exponent is read off the spread of bootstrap estimates at two resample
sizes, then used to rescale the interval.
"""
from dynpanel import DeConfig, extract_windows, fit, simulate
from dynpanel.dgp import design1
from dynpanel.inference import BootstrapConfig, bootstrap_ci

spec = design1("norm", n=5000, seed=11)
windows = extract_windows(simulate(spec))
de = DeConfig(seed=3)
est = fit(windows, cfg=de)

res = bootstrap_ci(windows, est.theta, est.trim, BootstrapConfig(B=200, seed=3), de_cfg=de)
rate = res.rate
print(f"spreads: s1={rate.s1:.4f} at m1={rate.m1}, s2={rate.s2:.4f} at m2={rate.m2}")
print(f"lambda_hat = {res.lambda_hat:.3f} (raw {rate.lambda_raw:.3f})")
print()
print(res.to_csv())

lo, hi = res.intervals[0.95]
for label, truth, a, b in zip(spec.coef_labels, spec.theta_true, lo, hi):
    print(f"{label:>6}  true {truth:.3f}  95% [{a:.3f}, {b:.3f}]  covered: {a <= truth <= b}")
