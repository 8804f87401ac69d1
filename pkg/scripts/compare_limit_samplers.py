#!/usr/bin/env python3
"""
Cross-check the two limit-distribution samplers for sqrt_shift: the
pathwise route (noise on a fine grid, score integral, solve against the
information matrix) against the closed-form route (Gaussian plus stable
convolution with quadrature scalings).  Prints the two-sample KS
statistic; the samplers agree when it sits under the 1% critical value.
"""
import numpy as np

from levylse import (
    LevySpec,
    Stable,
    get_entry,
    ks_critical_value,
    ks_two_sample,
    sample_limit_closed_form_sqrt_shift,
    sample_limit_distribution,
    solve_x0,
)

COUNT = 10_000

entry = get_entry("sqrt_shift")
theta0 = np.array([1.0])
x0 = np.array([0.0])
levy = LevySpec(sigma=1.0, jump_part=Stable(alpha=1.5, beta=0.0, scale=1.0), dim=1)

x0_path = solve_x0(entry, theta0, x0)
pathwise = sample_limit_distribution(
    entry.model, x0_path, theta0, levy, count=COUNT, fine_m=10_000, seed=404
)
closed = sample_limit_closed_form_sqrt_shift(
    theta0, x0, a=1.0, sigma=1.0, alpha=1.5, beta=0.0, count=COUNT, seed=4040
)

stat = ks_two_sample(pathwise.draws[:, 0], closed.draws[:, 0])
crit = ks_critical_value(COUNT, COUNT)
for name, d in (("pathwise", pathwise.draws[:, 0]), ("closed  ", closed.draws[:, 0])):
    q = np.percentile(d, [5, 25, 50, 75, 95])
    print(f"{name} quantiles: {np.round(q, 4)}")
print(f"ks = {stat:.5f}  critical (1%) = {crit:.5f}  ->", "PASS" if stat < crit else "FAIL")
