"""Normal cdf, quantile, bivariate orthant and the comparison term."""
import math

from fieldmax.kernels import (bivariate_upper_orthant, normal_comparison_term, std_normal_cdf,
                              std_normal_quantile)

print("Phi(2)            =", std_normal_cdf(2.0))
print("Phi^-1(1 - 1e-4)  =", std_normal_quantile(1 - 1e-4))

# the orthant probability interpolates between independence and comonotonicity
q = 1 - std_normal_cdf(2.0)
for r in (-0.5, 0.0, 0.5, 0.9, 1.0):
    print(f"P(X>2, Y>2 | r={r:+.1f}) = {bivariate_upper_orthant(2, 2, r):.6e}")
print("independent product  =", q * q)

# Sheppard's formula at the origin
print(bivariate_upper_orthant(0, 0, 0.3), 0.25 + math.asin(0.3) / (2 * math.pi))

# the summand of the Berman sum
print("|r| exp(-(u^2+v^2)/(2(1+|r|))) at (3, 4, 0.2):", normal_comparison_term(3, 4, 0.2))
