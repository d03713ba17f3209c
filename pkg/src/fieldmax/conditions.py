"""Numerical evaluators for the dependence conditions behind the estimator.

* block parameters ``(k_n, m_n)`` per axis;
* the Berman / normal-comparison sum ``S_n(R_k, R_n)`` that bounds the
  mixing coefficient of the strengthened coordinatewise-mixing condition;
* the anti-clustering sum over a small block;
* a Monte Carlo estimate of the independence gap for maxima over disjoint
  rectangles.

None of the asymptotic ("<<", "-> 0") statements can be decided from finite
data; evaluators return numbers and, across a size ladder, a trend verdict.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .covariance import CorrelationModel
from .errors import DomainError, SizeError
from .fieldsim import make_sampler, replication_seed
from .kernels import bivariate_upper_orthant_many, normal_comparison_term
from .levels import LevelSchedule

PAIR_CAP = 10_000_000


@dataclass(frozen=True)
class BlockParameters:
    k_n: tuple
    m_n: tuple


def block_parameters(n) -> BlockParameters:
    """``m = ceil(log n_i)``, ``k = max(1, floor(sqrt(n_i / m)))`` per axis."""
    n = (int(n[0]), int(n[1]))
    if n[0] < 3 or n[1] < 3:
        raise DomainError(f"block parameters need n >= (3,3), got {n}")
    m = tuple(math.ceil(math.log(x)) for x in n)
    # floor(sqrt(x / m)) == isqrt(x // m) for integers
    k = tuple(max(1, math.isqrt(x // mm)) for x, mm in zip(n, m))
    return BlockParameters(k, m)


@dataclass(frozen=True)
class Rect:
    """0-based half-open rectangle ``[r0, r1) x [c0, c1)``."""

    r0: int
    r1: int
    c0: int
    c1: int

    def __post_init__(self):
        if not (0 <= self.r0 < self.r1 and 0 <= self.c0 < self.c1):
            raise DomainError(f"empty or negative rectangle {self}")

    @property
    def shape(self):
        return (self.r1 - self.r0, self.c1 - self.c0)

    @property
    def slices(self):
        return (slice(self.r0, self.r1), slice(self.c0, self.c1))

    def overlaps(self, other: "Rect") -> bool:
        return self.r0 < other.r1 and other.r0 < self.r1 and self.c0 < other.c1 and other.c0 < self.c1

    def inside(self, n) -> bool:
        return self.r1 <= n[0] and self.c1 <= n[1]

    def to_list(self):
        return [self.r0, self.r1, self.c0, self.c1]


def _levels_at(schedule: LevelSchedule, k):
    if k[0] > schedule.n[0] or k[1] > schedule.n[1]:
        raise DomainError(f"schedule covers {schedule.n}, not {tuple(k)}")
    return schedule.levels(k)


# --------------------------------------------------------------------------
# Berman sum
# --------------------------------------------------------------------------

def _berman_lagged(model, uk, un, k, n):
    d1 = np.arange(n[0])[:, None]
    d2 = np.arange(n[1])[None, :]
    cnt = np.maximum(0, np.minimum(k[0], n[0] - d1)) * np.maximum(0, np.minimum(k[1], n[1] - d2))
    t = normal_comparison_term(uk, un, model.lag_corr(d1, d2) * np.ones(cnt.shape))
    t[0, 0] = 0.0
    return float(np.sum(cnt * t))


def _berman_pairs(model, Uk, Un, k, n, cap, subsample):
    k1, k2 = k
    i1, i2 = np.indices(k).reshape(2, -1)
    per_row = (n[0] - i1) * (n[1] - i2)
    total = int(per_row.sum())
    idx = np.arange(i1.size)
    scale, flagged = 1.0, False
    if total > cap:
        if not subsample:
            raise SizeError(f"Berman sum needs {total} pairs (cap {cap}); pass subsample=True "
                            "for a stratified estimate")
        stride = math.ceil(total / cap)
        idx = idx[::stride]
        scale = total / float(per_row[idx].sum())
        flagged = True
    acc = 0.0
    for s in idx:
        a, b = int(i1[s]), int(i2[s])
        j1 = np.arange(a, n[0])[:, None]
        j2 = np.arange(b, n[1])[None, :]
        r = model.corr_sites(a, b, j1, j2) * np.ones((j1.size, j2.size))
        t = normal_comparison_term(Uk[a, b], Un[a:, b:], r)
        t[0, 0] = 0.0
        acc += float(t.sum())
    return acc * scale, flagged


def berman_sum_detail(model: CorrelationModel, schedule: LevelSchedule, k, n,
                      cap: int = PAIR_CAP, subsample: bool = False):
    """``(value, subsampled)`` for :func:`berman_sum`."""
    k, n = (int(k[0]), int(k[1])), (int(n[0]), int(n[1]))
    if not (1 <= k[0] <= n[0] and 1 <= k[1] <= n[1]):
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    model.check_domain(n)
    if model.stationary and schedule.offsets is None:
        return _berman_lagged(model, schedule.base_level(k), schedule.base_level(n), k, n), False
    return _berman_pairs(model, _levels_at(schedule, k), _levels_at(schedule, n), k, n, cap, subsample)


def berman_sum(model: CorrelationModel, schedule: LevelSchedule, k, n,
               cap: int = PAIR_CAP, subsample: bool = False) -> float:
    """``sum_{i in R_k, j in R_n, i <= j, i != j} |r_ij| exp(-(u_{k,i}^2 + u_{n,j}^2) / (2(1 + |r_ij|)))``.

    Stationary models with constant levels are summed by lag with exact
    pair multiplicities; everything else walks the pairs (subject to
    ``cap``).
    """
    return berman_sum_detail(model, schedule, k, n, cap, subsample)[0]


def dyadic_probe(n):
    """``{ceil(n_i / 2^a)}`` per axis, as a list of ``k`` pairs."""
    def axis(x):
        out, a = set(), 0
        while True:
            v = -(-x // 2 ** a)
            out.add(v)
            if v == 1:
                return sorted(out)
            a += 1
    return [(a, b) for a in axis(int(n[0])) for b in axis(int(n[1]))]


@dataclass
class BermanResult:
    sup: float
    scaled: float
    argmax: tuple
    subsampled: bool


def berman_sup(model, schedule, n, probe=None, epsilon: float = 0.5,
               cap: int = PAIR_CAP, subsample: bool = False) -> BermanResult:
    """Max of :func:`berman_sum` over ``probe`` (default dyadic) and its
    scaling by ``(log n1 log n2)^{1 + eps}``.
    """
    n = (int(n[0]), int(n[1]))
    probe = dyadic_probe(n) if probe is None else [tuple(int(x) for x in k) for k in probe]
    best, arg, flagged = -1.0, None, False
    for k in probe:
        val, f = berman_sum_detail(model, schedule, k, n, cap, subsample)
        flagged = flagged or f
        if val > best:
            best, arg = val, k
    scaled = best * (math.log(n[0]) * math.log(n[1])) ** (1.0 + epsilon)
    return BermanResult(best, scaled, arg, flagged)


# --------------------------------------------------------------------------
# anti-clustering sum
# --------------------------------------------------------------------------

def default_block(n, params: BlockParameters) -> Rect:
    """``[0, floor(n1/k1)) x [0, floor(n2/k2))``."""
    return Rect(0, n[0] // params.k_n[0], 0, n[1] // params.k_n[1])


def _sf(x):
    return special.ndtr(-np.asarray(x, float))


def dprime_sum(model: CorrelationModel, schedule: LevelSchedule, n,
               params: Optional[BlockParameters] = None, block: Optional[Rect] = None,
               cap: int = PAIR_CAP) -> float:
    """``k1 k2 * sum_{i != j in block} P(X_i > u_{n,i}, X_j > u_{n,j})`` over
    ordered pairs.

    The block must satisfy the small-mass constraint
    ``sum_block P(X_i > u) <= (1/(k1 k2)) sum_{R_n} P(X_i > u)``.
    """
    n = (int(n[0]), int(n[1]))
    params = block_parameters(n) if params is None else params
    block = default_block(n, params) if block is None else block
    if not block.inside(n):
        raise DomainError(f"block {block} is not inside R_n = {n}")
    model.check_domain(n)
    U = _levels_at(schedule, n)
    kk = params.k_n[0] * params.k_n[1]
    block_mass = float(_sf(U[block.slices]).sum())
    total_mass = float(_sf(U).sum())
    if block_mass > total_mass / kk * (1.0 + 1e-12):
        raise DomainError(
            f"block {block.to_list()} violates the small-mass constraint: "
            f"{block_mass:.6g} > {total_mass:.6g} / {kk}")
    b = block.shape
    if model.stationary and schedule.offsets is None:
        u = schedule.base_level(n)
        d1 = np.arange(-(b[0] - 1), b[0])[:, None]
        d2 = np.arange(-(b[1] - 1), b[1])[None, :]
        cnt = (b[0] - np.abs(d1)) * (b[1] - np.abs(d2))
        r = model.lag_corr(d1, d2) * np.ones(cnt.shape)
        p = bivariate_upper_orthant_many(u, u, r)
        p[b[0] - 1, b[1] - 1] = 0.0
        return kk * float(np.sum(cnt * p))
    npairs = (b[0] * b[1]) ** 2
    if npairs > cap:
        raise SizeError(f"D' sum over {npairs} pairs exceeds the cap {cap}")
    c1, c2 = np.indices(b).reshape(2, -1)
    c1, c2 = c1 + block.r0, c2 + block.c0
    r = model.corr_sites(c1[:, None], c2[:, None], c1[None, :], c2[None, :]) * np.ones((c1.size, c1.size))
    ub = U[c1, c2]
    p = bivariate_upper_orthant_many(ub[:, None], ub[None, :], r)
    np.fill_diagonal(p, 0.0)
    return kk * float(p.sum())


# --------------------------------------------------------------------------
# independence gap over disjoint rectangles
# --------------------------------------------------------------------------

@dataclass
class GapEstimate:
    gap: float            # |P(all) - prod P(each)|
    signed: float
    stderr: float
    p_joint: float
    p_parts: list


def grid_partition(n, parts=(2, 2)) -> list:
    """Split ``R_n`` into ``parts[0] x parts[1]`` near-equal rectangles."""
    e1 = np.linspace(0, n[0], parts[0] + 1).round().astype(int)
    e2 = np.linspace(0, n[1], parts[1] + 1).round().astype(int)
    return [Rect(int(e1[a]), int(e1[a + 1]), int(e2[b]), int(e2[b + 1]))
            for a in range(parts[0]) for b in range(parts[1])]


def rectangle_independence_gap(model, schedule, n, partition, reps: int, seed: int,
                               method: str = "auto") -> GapEstimate:
    """Monte Carlo estimate of ``P(no exceedance on any V) - prod_V P(no exceedance on V)``.

    The standard error comes from the delta method applied to the joint and
    marginal frequencies (influence values
    ``1_J - sum_r prod_{s != r} p_s 1_r``).
    """
    n = (int(n[0]), int(n[1]))
    if reps < 100:
        raise DomainError("the gap estimator needs reps >= 100")
    partition = list(partition)
    if not partition:
        raise DomainError("partition is empty")
    for i, a in enumerate(partition):
        if not a.inside(n):
            raise DomainError(f"rectangle {a.to_list()} is not inside R_n = {n}")
        for b in partition[i + 1:]:
            if a.overlaps(b):
                raise DomainError(f"rectangles {a.to_list()} and {b.to_list()} overlap")
    U = _levels_at(schedule, n)
    sampler = make_sampler(model, n, method)
    ind = np.empty((reps, len(partition)), dtype=bool)
    for r in range(reps):
        ok = sampler.sample_values(replication_seed(seed, r)) <= U
        ind[r] = [ok[v.slices].all() for v in partition]
    joint = ind.all(axis=1).astype(float)
    parts = ind.mean(axis=0)
    pj = joint.mean()
    prod = float(np.prod(parts))
    infl = joint.copy()
    for i in range(len(partition)):
        others = float(np.prod(np.delete(parts, i)))
        infl -= others * ind[:, i]
    stderr = float(np.std(infl, ddof=1) / math.sqrt(reps))
    signed = float(pj - prod)
    return GapEstimate(abs(signed), signed, stderr, float(pj), [float(p) for p in parts])


# --------------------------------------------------------------------------
# closed-form check on prefix-set removal (i.i.d.)
# --------------------------------------------------------------------------

def prefix_removal_gap_iid(k, l, tau: float):
    """For an i.i.d. field with constant levels at size ``l``:
    returns ``(P(no exceedance on R_l - R_k) - P(no exceedance on R_l), bound)``
    where ``bound = (l1 l2 - #(R_l - R_k)) * max_i P(X_i > u_l)``.
    """
    from .levels import boundary_level

    u = boundary_level(l[0], l[1], tau)
    logp = float(special.log_ndtr(u))
    N = l[0] * l[1]
    overlap = min(k[0], l[0]) * min(k[1], l[1])
    diff = N - overlap
    lhs = math.exp(diff * logp) - math.exp(N * logp)
    bound = overlap * float(_sf(u))
    return lhs, bound


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass
class ConditionReport:
    n: tuple
    epsilon: float
    params: BlockParameters
    berman_sup: Optional[float] = None
    berman_scaled: Optional[float] = None
    dprime_value: Optional[float] = None
    dprime_block: Optional[Rect] = None
    gap_estimate: Optional[float] = None
    gap_stderr: Optional[float] = None
    subsampled: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n1": self.n[0],
            "n2": self.n[1],
            "berman_sup": self.berman_sup,
            "berman_scaled": self.berman_scaled,
            "epsilon": self.epsilon,
            "dprime_value": self.dprime_value,
            "block": self.dprime_block.to_list() if self.dprime_block is not None else None,
            "k_n": list(self.params.k_n),
            "m_n": list(self.params.m_n),
            "gap": self.gap_estimate,
            "gap_stderr": self.gap_stderr,
            "subsampled": self.subsampled,
        }


def evaluate_conditions(model, schedule, n, epsilon: float = 0.5, berman: bool = True,
                        dprime: bool = True, gap: bool = False, gap_reps: int = 200,
                        seed: int = 0, method: str = "auto", subsample: bool = False) -> ConditionReport:
    n = (int(n[0]), int(n[1]))
    params = block_parameters(n)
    rep = ConditionReport(n, epsilon, params)
    if berman:
        res = berman_sup(model, schedule, n, epsilon=epsilon, subsample=subsample)
        rep.berman_sup, rep.berman_scaled, rep.subsampled = res.sup, res.scaled, res.subsampled
    if dprime:
        rep.dprime_block = default_block(n, params)
        rep.dprime_value = dprime_sum(model, schedule, n, params, rep.dprime_block)
    if gap:
        g = rectangle_independence_gap(model, schedule, n, grid_partition(n), gap_reps, seed, method)
        rep.gap_estimate, rep.gap_stderr = g.gap, g.stderr
    return rep


def trend_verdict(values) -> str:
    """``"increasing"`` when strictly increasing across >= 3 points,
    ``"non-increasing"`` when never increasing, else ``"mixed"``.
    """
    v = [float(x) for x in values]
    if len(v) >= 3 and all(b > a for a, b in zip(v, v[1:])):
        return "increasing"
    if all(b <= a for a, b in zip(v, v[1:])):
        return "non-increasing"
    return "mixed"
