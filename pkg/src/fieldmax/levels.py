"""Level arrays ``u_{k,i}`` calibrated to an expected exceedance count ``tau``.

A schedule on ``R_n`` stores one *base level* per evaluation size ``k <= n``
plus an optional site offset field ``delta`` that is fixed across ``k``:

    u_{k,i} = base(k) + delta_i .

The base level is chosen so that ``sum_{i <= k} (1 - Phi(u_{k,i})) = tau``.
Sizes with ``tau >= k1 k2`` cannot meet the target; their quantile argument
is clamped to ``[P_FLOOR, 1 - P_FLOOR]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, special

from .errors import CalibrationError, DomainError

P_FLOOR = 1e-12
MAX_OFFSET = 1.0


def _sf(x):
    return special.ndtr(-np.asarray(x, float))


def _boundary_levels(N, tau):
    p = np.clip(1.0 - tau / np.asarray(N, float), P_FLOOR, 1.0 - P_FLOOR)
    return special.ndtri(p)


def boundary_level(n1: int, n2: int, tau: float) -> float:
    """``Phi^{-1}(1 - tau / (n1 n2))`` with the argument clamped to
    ``[1e-12, 1 - 1e-12]``.  Without clamping ``n1 n2 (1 - Phi(u)) = tau``.
    """
    if tau < 0 or not math.isfinite(tau):
        raise DomainError(f"tau must be a finite nonnegative number, got {tau!r}")
    if n1 < 1 or n2 < 1:
        raise DomainError("grid sizes must be >= 1")
    return float(_boundary_levels(n1 * n2, tau))


def asymptotic_level(n1: int, n2: int) -> float:
    """First-order comparator ``sqrt(2 log(n1 n2))``."""
    if n1 * n2 < 2:
        raise DomainError("asymptotic_level needs n1 * n2 >= 2")
    return math.sqrt(2.0 * math.log(n1 * n2))


@dataclass(frozen=True, eq=False)
class LevelSchedule:
    """Levels for every ``k <= n``.

    ``base[k1-1, k2-1]`` is the base level at size ``k``; ``offsets`` is an
    ``(n1, n2)`` site field or ``None`` in constant mode.
    """

    n: tuple
    tau: float
    base: np.ndarray
    offsets: Optional[np.ndarray] = None

    @property
    def mode(self) -> str:
        return "constant" if self.offsets is None else "offset"

    def _check_k(self, k):
        k = (int(k[0]), int(k[1]))
        if not (1 <= k[0] <= self.n[0] and 1 <= k[1] <= self.n[1]):
            raise DomainError(f"size {k} is outside the schedule's range {self.n}")
        return k

    def base_level(self, k) -> float:
        k = self._check_k(k)
        return float(self.base[k[0] - 1, k[1] - 1])

    def levels(self, k) -> np.ndarray:
        """The ``(k1, k2)`` array ``u_{k,i}`` over ``R_k``."""
        k = self._check_k(k)
        b = self.base[k[0] - 1, k[1] - 1]
        if self.offsets is None:
            return np.full(k, b)
        return b + self.offsets[: k[0], : k[1]]

    def mass(self, k) -> float:
        """Expected number of exceedances ``sum_{i <= k} (1 - Phi(u_{k,i}))``."""
        k = self._check_k(k)
        if self.offsets is None:
            return float(k[0] * k[1] * _sf(self.base[k[0] - 1, k[1] - 1]))
        return float(_sf(self.levels(k)).sum())

    def offsets_for(self, shape) -> Optional[np.ndarray]:
        if self.offsets is None:
            return None
        return self.offsets[: shape[0], : shape[1]]


def _calibrate_base(deltas, tau, N):
    target = min(max(tau, N * P_FLOOR), N * (1.0 - P_FLOOR))
    # the mass is monotone in every offset, so the root lies within the
    # offset range of the constant-mode level
    u0 = float(special.ndtri(1.0 - target / N))
    lo = u0 - deltas.max() - 1e-9
    hi = u0 - deltas.min() + 1e-9

    def f(b):
        return _sf(b + deltas).sum() - target

    flo, fhi = f(lo), f(hi)
    if not (flo >= 0 >= fhi):
        raise CalibrationError(f"cannot bracket base level for tau={tau} on {N} sites")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    # a few Newton steps from the mean shift usually suffice; Brent otherwise
    b = u0 - float(deltas.mean())
    for _ in range(8):
        dens = float(np.exp(-0.5 * (b + deltas) ** 2).sum()) / math.sqrt(2 * math.pi)
        if dens <= 0:
            break
        step = f(b) / dens
        b += step
        if not (lo <= b <= hi):
            break
        if abs(step) <= 1e-13 * max(1.0, abs(b)):
            return b
    return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def level_schedule(n, tau: float, offsets=None, max_offset: float = MAX_OFFSET) -> LevelSchedule:
    """Build the schedule for all ``k <= n``.

    With offsets the base level at each ``k`` is re-solved (Brent root
    search) so that the exceedance mass over ``R_k`` equals ``tau``.  An
    all-zero offset field reduces to constant mode exactly.
    """
    n = (int(n[0]), int(n[1]))
    if n[0] < 1 or n[1] < 1:
        raise DomainError(f"grid size must be >= (1,1), got {n}")
    if tau < 0 or not math.isfinite(tau):
        raise DomainError(f"tau must be a finite nonnegative number, got {tau!r}")
    k1 = np.arange(1, n[0] + 1)[:, None]
    k2 = np.arange(1, n[1] + 1)[None, :]
    if offsets is not None:
        offsets = np.array(offsets, dtype=float)
        if offsets.shape != n:
            raise DomainError(f"offset field shape {offsets.shape} does not match grid {n}")
        if not np.all(np.isfinite(offsets)):
            raise DomainError("offsets must be finite")
        if np.abs(offsets).max() > max_offset:
            raise DomainError(f"offsets exceed the bound |delta| <= {max_offset}")
        offsets.setflags(write=False)
        if not np.any(offsets):
            base = _boundary_levels(k1 * k2, tau)
            base.setflags(write=False)
            return LevelSchedule(n, float(tau), base, offsets)
        base = np.empty(n)
        for a in range(n[0]):
            for b in range(n[1]):
                d = offsets[: a + 1, : b + 1].ravel()
                base[a, b] = _calibrate_base(d, tau, d.size)
    else:
        base = _boundary_levels(k1 * k2, tau)
    base.setflags(write=False)
    return LevelSchedule(n, float(tau), base, offsets)


def lambda_min(schedule: LevelSchedule, n=None) -> float:
    """``min_{i in R_n} u_{n,i}``; the base level itself in constant mode."""
    n = schedule.n if n is None else n
    base = schedule.base_level(n)
    if schedule.offsets is None:
        return base
    return float(base + schedule.offsets[: n[0], : n[1]].min())


@dataclass
class LambdaBound:
    scaled_tail: float   # n1 n2 (1 - Phi(lambda_n))
    bound: float         # tau (1 - Phi(lambda)) / (1 - Phi(lambda + w)), w = offset range


def lambda_bound_report(schedule: LevelSchedule, n=None) -> LambdaBound:
    """``n1 n2 (1 - Phi(lambda_n))`` together with the bound implied by the
    mass condition: every level is at most ``lambda + w`` with ``w`` the
    offset range on ``R_n``, so ``tau >= n1 n2 (1 - Phi(lambda + w))``.
    """
    n = schedule.n if n is None else n
    lam = lambda_min(schedule, n)
    N = n[0] * n[1]
    w = 0.0
    if schedule.offsets is not None:
        d = schedule.offsets[: n[0], : n[1]]
        w = float(d.max() - d.min())
    mass = schedule.mass(n)
    return LambdaBound(float(N * _sf(lam)), float(mass * _sf(lam) / _sf(lam + w)))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def load_offsets(path, shape=None) -> np.ndarray:
    """Offsets from CSV ``i1,i2,delta`` (1-based).  Unlisted sites get 0."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["i1", "i2", "delta"]:
            raise DomainError(f"{path}: expected header i1,i2,delta")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[0]), int(row[1]), float(row[2])))
            except (ValueError, IndexError) as exc:
                raise DomainError(f"{path}:{lineno}: malformed row {row!r}") from exc
    if shape is None:
        shape = (max(r[0] for r in rows), max(r[1] for r in rows))
    out = np.zeros(shape)
    seen = set()
    for i1, i2, d in rows:
        if not (1 <= i1 <= shape[0] and 1 <= i2 <= shape[1]):
            raise DomainError(f"{path}: site {(i1, i2)} outside grid {shape}")
        if (i1, i2) in seen:
            raise DomainError(f"{path}: duplicate site {(i1, i2)}")
        seen.add((i1, i2))
        out[i1 - 1, i2 - 1] = d
    return out


def save_offsets(path, offsets):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i1", "i2", "delta"])
        for (a, b), d in np.ndenumerate(offsets):
            w.writerow([a + 1, b + 1, repr(float(d))])


def export_schedule_summary(path, schedule: LevelSchedule, sizes=None):
    """Write ``k1,k2,base_level,mass`` rows (all ``k`` unless ``sizes`` given)."""
    if sizes is None:
        sizes = [(a, b) for a in range(1, schedule.n[0] + 1) for b in range(1, schedule.n[1] + 1)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k1", "k2", "base_level", "mass"])
        for k in sizes:
            w.writerow([k[0], k[1], repr(schedule.base_level(k)), repr(schedule.mass(k))])
