"""Logarithmic-average estimator for prefix-rectangle maxima.

For a field on ``R_n`` and a level schedule, the indicator at size ``k`` is

    bit(k) = 1{ X_i <= u_{k,i} for every i <= k },

and the estimator is

    A_n = (1 / norm(n)) * sum_{k in R_n} bit(k) / (k1 k2)

with ``norm = log n1 log n2`` (``paper_log``) or ``H(n1) H(n2)``
(``harmonic``).  Because offsets do not vary with ``k``, every bit is read
off the single prefix-maximum table ``max_{i <= k} (X_i - delta_i)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError
from .fieldsim import FieldRealization
from .levels import LevelSchedule, _boundary_levels

NORMALIZATIONS = ("paper_log", "harmonic")


def prefix_max(values, offsets=None) -> np.ndarray:
    """``M[k] = max_{i <= k} (X_i - delta_i)`` for every ``k`` in ``R_n``.

    ``M[k1, k2] = max(M[k1-1, k2], M[k1, k2-1], X[k1, k2] - delta[k1, k2])``;
    the two-pass running maximum below evaluates the same recurrence in
    O(n1 n2).
    """
    if isinstance(values, FieldRealization):
        values = values.values
    x = np.asarray(values, dtype=float)
    if x.ndim != 2:
        raise DomainError("field must be a 2-D array")
    if offsets is not None:
        offsets = np.asarray(offsets, float)
        if offsets.shape != x.shape:
            raise DomainError(f"offset shape {offsets.shape} does not match field {x.shape}")
        x = x - offsets
    return np.maximum.accumulate(np.maximum.accumulate(x, axis=0), axis=1)


def indicator_stream(field, schedule: LevelSchedule) -> np.ndarray:
    """Boolean ``(n1, n2)`` array, entry ``[k1-1, k2-1]`` = bit(k)."""
    values = field.values if isinstance(field, FieldRealization) else np.asarray(field, float)
    n = values.shape
    if n[0] > schedule.n[0] or n[1] > schedule.n[1]:
        raise DomainError(f"schedule covers {schedule.n} but the field is {n}")
    M = prefix_max(values, schedule.offsets_for(n))
    return M <= schedule.base[: n[0], : n[1]]


def harmonic(n: int) -> float:
    return float(np.sum(1.0 / np.arange(1, n + 1)))


def _norm(n, normalization):
    if normalization == "paper_log":
        if n[0] < 3 or n[1] < 3:
            raise DomainError(f"paper_log normalization needs n >= (3,3), got {tuple(n)}")
        return math.log(n[0]) * math.log(n[1])
    if normalization == "harmonic":
        return harmonic(n[0]) * harmonic(n[1])
    raise DomainError(f"unknown normalization {normalization!r}")


def _weights(n):
    k1 = np.arange(1, n[0] + 1, dtype=float)[:, None]
    k2 = np.arange(1, n[1] + 1, dtype=float)[None, :]
    return 1.0 / (k1 * k2)


def asclt_average(stream, n=None, normalization: str = "paper_log") -> float:
    """``A_n`` from an indicator stream (restricted to ``R_n``)."""
    bits = np.asarray(stream, dtype=bool)
    n = bits.shape if n is None else (int(n[0]), int(n[1]))
    if n[0] > bits.shape[0] or n[1] > bits.shape[1] or min(n) < 1:
        raise DomainError(f"size {n} not covered by a stream of shape {bits.shape}")
    sub = bits[: n[0], : n[1]]
    return float(np.sum(_weights(n)[sub])) / _norm(n, normalization)


@dataclass(eq=False)
class AscltTrajectory:
    """Indicators on ``R_n`` with weighted 2-D partial sums.

    ``partial[k1-1, k2-1] = sum_{k' <= k} bit(k') / (k1' k2')``, so ``A_k`` at
    any checkpoint is one lookup.
    """

    bits: np.ndarray
    partial: np.ndarray

    @classmethod
    def from_bits(cls, bits):
        bits = np.asarray(bits, dtype=bool)
        w = np.where(bits, _weights(bits.shape), 0.0)
        return cls(bits, np.cumsum(np.cumsum(w, axis=0), axis=1))

    @property
    def n(self):
        return self.bits.shape

    def average(self, k=None, normalization: str = "paper_log") -> float:
        k = self.n if k is None else (int(k[0]), int(k[1]))
        if not (1 <= k[0] <= self.n[0] and 1 <= k[1] <= self.n[1]):
            raise DomainError(f"checkpoint {k} outside trajectory {self.n}")
        return float(self.partial[k[0] - 1, k[1] - 1]) / _norm(k, normalization)

    def averages(self, normalization: str = "paper_log") -> np.ndarray:
        """``A_k`` for every ``k``; NaN where the normalization is undefined."""
        h1 = np.cumsum(1.0 / np.arange(1, self.n[0] + 1))
        h2 = np.cumsum(1.0 / np.arange(1, self.n[1] + 1))
        if normalization == "harmonic":
            norm = h1[:, None] * h2[None, :]
        elif normalization == "paper_log":
            l1 = np.log(np.arange(1, self.n[0] + 1, dtype=float))
            l2 = np.log(np.arange(1, self.n[1] + 1, dtype=float))
            norm = l1[:, None] * l2[None, :]
            norm[:2, :] = np.nan
            norm[:, :2] = np.nan
        else:
            raise DomainError(f"unknown normalization {normalization!r}")
        return self.partial / norm

    def to_csv(self, path):
        """Rows ``k1,k2,bit,weight,partial_sum`` in row-major ``k`` order."""
        w = _weights(self.n)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["k1", "k2", "bit", "weight", "partial_sum"])
            for (a, b), bit in np.ndenumerate(self.bits):
                out.writerow([a + 1, b + 1, int(bit), repr(float(w[a, b])), repr(float(self.partial[a, b]))])


def trajectory(field, schedule: LevelSchedule) -> AscltTrajectory:
    return AscltTrajectory.from_bits(indicator_stream(field, schedule))


def write_checkpoints(path, traj: AscltTrajectory, checkpoints, normalizations=NORMALIZATIONS):
    """Summary rows ``n1,n2,normalization,A_n``."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["n1", "n2", "normalization", "A_n"])
        for k in checkpoints:
            for norm in normalizations:
                out.writerow([k[0], k[1], norm, repr(traj.average(k, norm))])


# --------------------------------------------------------------------------
# i.i.d. closed forms
# --------------------------------------------------------------------------

def expected_average_iid(n, tau: float, normalization: str = "paper_log") -> float:
    """``E[A_n]`` for an i.i.d. standard normal field with constant levels:
    ``norm^{-1} sum_k Phi(u_k)^{k1 k2} / (k1 k2)`` evaluated in log space.
    """
    n = (int(n[0]), int(n[1]))
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    k1 = np.arange(1, n[0] + 1, dtype=float)[:, None]
    k2 = np.arange(1, n[1] + 1, dtype=float)[None, :]
    N = k1 * k2
    u = _boundary_levels(N, tau)
    terms = np.exp(N * special.log_ndtr(u)) / N
    return float(terms.sum()) / _norm(n, normalization)


def no_exceedance_prob_iid(n, tau: float) -> float:
    """``(1 - tau / (n1 n2))^{n1 n2}``; 0 when ``tau >= n1 n2``."""
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    N = int(n[0]) * int(n[1])
    if tau >= N:
        return 0.0
    return math.exp(N * math.log1p(-tau / N))
