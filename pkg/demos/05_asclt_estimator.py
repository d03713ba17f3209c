"""The logarithmic average on one field, and its i.i.d. expectation."""
import math

from fieldmax.asclt import expected_average_iid, trajectory
from fieldmax.fieldsim import sample_iid
from fieldmax.levels import level_schedule

n = (512, 512)
sched = level_schedule(n, 1.0)
t = trajectory(sample_iid(n, seed=3), sched)
for k in (16, 64, 256, 512):
    print(f"k={k:4d}  A_k(harmonic)={t.average((k, k), 'harmonic'):.4f}  "
          f"A_k(log)={t.average((k, k), 'paper_log'):.4f}  "
          f"E[A_k]={expected_average_iid((k, k), 1.0, 'harmonic'):.4f}")
print("limit exp(-tau) =", math.exp(-1))
