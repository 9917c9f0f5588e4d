"""
A small Monte Carlo table
=========================

Bias and RMSE for both z laws at two sample sizes.  The published tables
use 500 replications; 50 keep this demo quick.
"""
from dynpanel.montecarlo import emit_table, run_mc

cells = []
for z in ("norm", "lap"):
    cells += run_mc("d1", n_list=[5000, 20000], reps=50, z_dist=z, seed=0)

print(emit_table(cells, fmt="text"))

# the rate is slower than root-n: quadrupling n does not halve the RMSE
norm_small, norm_big = cells[0], cells[1]
print("RMSE(gamma) ratio 20000/5000: %.2f" % (norm_big.rmse[0] / norm_small.rmse[0]))
