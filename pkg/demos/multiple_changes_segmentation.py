# Binary segmentation with the scan statistic as the split criterion.
#
# The recursion tests each segment for a single change; a significant
# finding splits the segment at the estimated change point and both
# halves are re-tested.  The same procedure is available from the
# command line as `rankscan --alternative segment`; here it is spelled
# out against the library API.

import numpy as np

from rankscan import (
    DegenerateVariance,
    PermPlan,
    compute_distances,
    build_graph_sequence,
    default_graph_size,
    graph_induced_ranks,
    permutation_pvalue,
)

rng = np.random.default_rng(2718)
n = 240
x = rng.standard_normal((n, 15))
x[80:160, :5] += 1.4        # mean shift in the first five coordinates
x[160:] *= 1.8              # then a variance inflation
print("true changes at 80 and 160\n")

dists = compute_distances(x)
found = []


def split(start, end, depth=0):
    length = end - start
    if length < 30:
        return
    sub = np.ascontiguousarray(dists[start:end, start:end])
    k = default_graph_size(length)
    try:
        r = graph_induced_ranks(build_graph_sequence(sub, k))
        res = permutation_pvalue(r, "M", "single",
                                 plan=PermPlan(n_perm=500, seed=start))
    except DegenerateVariance:
        return
    tau = start + res.scan.tau_hat
    verdict = "split" if res.p_value <= 0.05 else "stop"
    print(f"{'  ' * depth}[{start:>3}, {end:>3})  "
          f"p={res.p_value:.3f}  tau={tau:>3}  -> {verdict}")
    if res.p_value <= 0.05:
        found.append(tau)
        split(start, tau, depth + 1)
        split(tau, end, depth + 1)


split(0, n)
print(f"\nestimated change points: {sorted(found)}")
