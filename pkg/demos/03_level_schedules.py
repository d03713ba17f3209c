"""Level schedules calibrated to an expected exceedance count."""
import numpy as np

from fieldmax.levels import asymptotic_level, boundary_level, lambda_bound_report, lambda_min, level_schedule

for n in (10, 100, 1000):
    print(f"n={n:5d}  u_n={boundary_level(n, n, 1.0):.5f}  sqrt(2 log n^2)={asymptotic_level(n, n):.5f}")

# a checkerboard of +-0.1 offsets: the base level is re-solved at every k
i, j = np.indices((40, 40))
delta = np.where((i + j) % 2 == 0, 0.1, -0.1)
s = level_schedule((40, 40), 1.0, delta)
for k in [(5, 5), (20, 10), (40, 40)]:
    print(k, "base", round(s.base_level(k), 5), "mass", s.mass(k))
print("lambda_n =", lambda_min(s))
print(lambda_bound_report(s))
