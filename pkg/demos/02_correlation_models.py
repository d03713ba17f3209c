"""Correlation models: i.i.d., exponential decay and Choi's product covariance."""
import numpy as np

from fieldmax.covariance import (ChoiModel, check_decay_condition, check_psd, choi_gamma_1d, choi_omega,
                                 correlation, expdecay, squared_sum_profile)

print("omega(1) =", choi_omega(1), " gamma_1 =", choi_gamma_1d(1))
print("gamma_n for n = 0..10:")
print(np.round([choi_gamma_1d(n) for n in range(11)], 4))

choi = ChoiModel()
print("r((2,2),(3,3)) =", correlation(choi, (2, 2), (3, 3)))
print("min eigenvalue on 6x6:", check_psd(choi, (6, 6)).min_eig)

# gamma_n log n is unbounded along n = 3^j, so the log-decay bound fails;
# the checker reports this as a growth trend up to the probe range
for name, model in (("choi", choi), ("expdecay:0.5", expdecay(0.5))):
    rep = check_decay_condition(model, epsilon=0.5, probe_max=4096)
    print(name, rep.passed, {k: round(v, 3) for k, v in rep.margins.items()})

prof = squared_sum_profile(choi, 1024)
for (n, _), s in prof.two_d:
    print(f"sum of squared correlations up to lag {n:5d}: {s:10.2f}")
