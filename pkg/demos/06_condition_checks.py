"""Finite-n diagnostics for the mixing and anti-clustering conditions."""
from fieldmax.conditions import berman_sup, dprime_sum, grid_partition, rectangle_independence_gap, trend_verdict
from fieldmax.covariance import expdecay
from fieldmax.levels import level_schedule

m = expdecay(0.5)
sups, scaled, dp = [], [], []
for n in (16, 32, 64, 128):
    s = level_schedule((n, n), 1.0)
    b = berman_sup(m, s, (n, n))
    sups.append(b.sup)
    scaled.append(b.scaled)
    dp.append(dprime_sum(m, s, (n, n)))
    print(f"n={n:4d}  S_n={b.sup:.4f}  scaled={b.scaled:.2f}  D'={dp[-1]:.4f}")
print("trends:", trend_verdict(sups), trend_verdict(scaled), trend_verdict(dp))

s = level_schedule((32, 32), 1.0)
g = rectangle_independence_gap(m, s, (32, 32), grid_partition((32, 32)), reps=1000, seed=5)
print(f"gap={g.gap:.4f} +- {g.stderr:.4f}")
