"""Correlation models for standardized random fields on the positive lattice.

Sites are addressed by 0-based array coordinates ``(i1, i2)``; a field on
the rectangle ``R_n`` is an ``(n1, n2)`` array.  CSV files use 1-based
coordinates.

Stationary models expose ``lag_corr(l1, l2)`` for signed integer lags.  A
model may declare a *dominating sequence* ``rho(l1, l2)`` (absolute lags)
with ``|r_ij| <= rho_{|i-j|}``; the decay checker works on that sequence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError, ModelError, SizeError

PSD_CAP = 1024
PSD_TOL = -1e-8

E2 = math.e ** 2


# --------------------------------------------------------------------------
# Choi's covariance ingredients
# --------------------------------------------------------------------------

def _omega_terms(nmax: float, tol: float) -> int:
    if nmax <= 0:
        return 20
    return max(20, math.ceil(math.log(nmax / math.sqrt(tol), 3)) + 5)


def choi_omega(n: int, tol: float = 1e-12) -> float:
    """Truncated infinite product ``prod_{j>=1} cos(n / 3^j)``.

    The number of factors is ``J = max(20, ceil(log_3(n / sqrt(tol))) + 5)``.
    Beyond ``J`` every factor is ``1 - O((n/3^j)^2)`` and the log of the
    dropped tail is bounded by ``sum_j (n/3^j)^2 / 2 < tol``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    n = abs(int(n))
    if n == 0:
        return 1.0
    J = _omega_terms(n, tol)
    out = 1.0
    for j in range(1, J + 1):
        out *= math.cos(n / 3.0 ** j)
    return out


def choi_omega_array(n, tol: float = 1e-12) -> np.ndarray:
    """Vectorised :func:`choi_omega` over integer lags (same truncation rule)."""
    n = np.abs(np.asarray(n, dtype=np.int64))
    if n.size == 0:
        return np.ones(n.shape)
    J = _omega_terms(float(n.max()), tol)
    out = np.ones(n.shape)
    nf = n.astype(float)
    for j in range(1, J + 1):
        out *= np.cos(nf / 3.0 ** j)
    out[n == 0] = 1.0
    return out


def _choi_gamma_from_omega(n, w):
    n = np.asarray(n)
    small = n <= 7  # |n| <= e^2 ~ 7.389 on integer lags
    with np.errstate(divide="ignore", invalid="ignore"):
        near = np.sqrt(np.clip(1.0 - n / (2.0 * E2), 0.0, None))
        far = np.sqrt(1.0 / np.log(np.where(small, 2, n)))
    return np.where(small, near, far) * w


def choi_gamma_1d(n: int, tol: float = 1e-12) -> float:
    """One-axis Choi covariance ``gamma_n``.

    For ``n <= 7`` the factor is ``(1 - n/(2e^2))^{1/2} omega(n)``, above it
    ``(log n)^{-1/2} omega(n)``.
    """
    n = abs(int(n))
    return float(_choi_gamma_from_omega(np.array(n), choi_omega(n, tol)))


def choi_gamma_2d(n1: int, n2: int, tol: float = 1e-12) -> float:
    """Separable product ``gamma_{n1} gamma_{n2}``."""
    return choi_gamma_1d(n1, tol) * choi_gamma_1d(n2, tol)


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------

class CorrelationModel:
    """Base class.  Subclasses override :meth:`corr_sites`."""

    name = "model"
    stationary = False

    def __init__(self, dominating: Optional[Callable] = None):
        self._dominating = dominating

    def corr_sites(self, a1, a2, b1, b2) -> np.ndarray:
        raise NotImplementedError

    def lag_corr(self, l1, l2) -> np.ndarray:
        raise ModelError(f"model {self.name!r} is not stationary")

    @property
    def has_dominating(self) -> bool:
        return self._dominating is not None

    def dominating(self, l1, l2) -> np.ndarray:
        """Dominating sequence at absolute lags, broadcast over inputs."""
        if self._dominating is None:
            raise ConfigError(f"model {self.name!r} declares no dominating sequence")
        l1, l2 = np.abs(np.asarray(l1)), np.abs(np.asarray(l2))
        return np.abs(np.asarray(self._dominating(l1, l2), dtype=float)) * np.ones(np.broadcast(l1, l2).shape)

    def check_domain(self, n):
        pass

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class _Stationary(CorrelationModel):
    stationary = True

    def corr_sites(self, a1, a2, b1, b2):
        return self.lag_corr(np.asarray(b1) - np.asarray(a1), np.asarray(b2) - np.asarray(a2))


class IIDModel(_Stationary):
    """Independent sites; the dominating sequence defaults to ``rho == 0``."""

    name = "iid"

    def __init__(self, dominating=None):
        super().__init__(dominating if dominating is not None else (lambda l1, l2: np.zeros(np.broadcast(l1, l2).shape)))

    def lag_corr(self, l1, l2):
        l1, l2 = np.asarray(l1), np.asarray(l2)
        return ((l1 == 0) & (l2 == 0)).astype(float)


class SeparableModel(_Stationary):
    """``r(l1, l2) = c1(|l1|) c2(|l2|)`` with ``c1(0) = c2(0) = 1``.

    ``axis1``/``axis2`` take arrays of nonnegative integer lags.  When no
    dominating sequence is given, ``|r|`` itself is used.
    """

    def __init__(self, axis1, axis2=None, name="separable", dominating=None):
        self.axis1 = axis1
        self.axis2 = axis2 if axis2 is not None else axis1
        self.name = name
        if dominating is None:
            dominating = lambda l1, l2: np.abs(self.lag_corr(l1, l2))  # noqa: E731
        super().__init__(dominating)

    def lag_corr(self, l1, l2):
        l1, l2 = np.abs(np.asarray(l1)), np.abs(np.asarray(l2))
        out = np.asarray(self.axis1(l1), float) * np.asarray(self.axis2(l2), float)
        return np.where((l1 == 0) & (l2 == 0), 1.0, out)


def expdecay(q: float) -> SeparableModel:
    """Separable exponential decay ``q^{|l1| + |l2|}``, ``0 <= q < 1``."""
    q = float(q)
    if not (0.0 <= q < 1.0):
        raise DomainError(f"expdecay parameter must lie in [0, 1), got {q}")
    ax = lambda l: q ** np.asarray(l, float)  # noqa: E731
    return SeparableModel(ax, ax, name=f"expdecay:{q:g}")


class ChoiModel(SeparableModel):
    """Product covariance ``gamma_{l1} gamma_{l2}`` built from Choi's sequence.

    One-axis values are tabulated and the table grows on demand.
    """

    def __init__(self, tol: float = 1e-12):
        self.tol = tol
        self._table = np.ones(1)
        super().__init__(self.gamma, self.gamma, name="choi")

    def _ensure(self, nmax):
        if nmax < self._table.size:
            return
        size = max(2 * self._table.size, int(nmax) + 1, 64)
        lags = np.arange(size)
        # omega evaluated per lag so the truncation rule is per-n, as in choi_omega
        w = np.array([choi_omega(m, self.tol) for m in lags]) if size <= 4096 else choi_omega_array(lags, self.tol)
        self._table = _choi_gamma_from_omega(lags, w)

    def gamma(self, lags) -> np.ndarray:
        lags = np.abs(np.asarray(lags, dtype=np.int64))
        if lags.size:
            self._ensure(int(lags.max()))
        return self._table[lags]


class ExplicitGridModel(CorrelationModel):
    """Arbitrary (possibly nonstationary) correlation matrix on a fixed grid.

    ``matrix`` is ``(N, N)`` with ``N = n1 * n2`` in row-major site order.
    """

    def __init__(self, shape, matrix, name="explicit", dominating=None):
        super().__init__(dominating)
        self.shape = (int(shape[0]), int(shape[1]))
        self.name = name
        m = np.array(matrix, dtype=float)
        N = self.shape[0] * self.shape[1]
        if m.shape != (N, N):
            raise ModelError(f"matrix shape {m.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(m)):
            raise ModelError("matrix has non-finite entries")
        if np.any(np.abs(m) > 1.0):
            raise ModelError("correlations must satisfy |r| <= 1")
        if np.any(np.abs(m - m.T) > 1e-12):
            raise ModelError("matrix is not symmetric")
        if np.any(np.diag(m) != 1.0):
            raise ModelError("diagonal must be exactly 1")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        self.matrix = m

    def check_domain(self, n):
        if n[0] > self.shape[0] or n[1] > self.shape[1]:
            raise DomainError(f"grid {tuple(n)} exceeds the explicit model's domain {self.shape}")

    def corr_sites(self, a1, a2, b1, b2):
        a1, a2, b1, b2 = (np.asarray(x) for x in (a1, a2, b1, b2))
        n1, n2 = self.shape
        for x, lim in ((a1, n1), (b1, n1), (a2, n2), (b2, n2)):
            if np.any(x < 0) or np.any(x >= lim):
                raise DomainError(f"site outside explicit grid {self.shape}")
        return self.matrix[a1 * n2 + a2, b1 * n2 + b2]


def load_explicit_grid(path, shape=None) -> ExplicitGridModel:
    """Read a CSV with header ``i1,i2,j1,j2,r`` (1-based sites).

    Pairs not listed are uncorrelated.  A pair may be listed in both
    orders provided the values agree within 1e-12; listing the same ordered
    pair twice is an error.
    """
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["i1", "i2", "j1", "j2", "r"]:
            raise ModelError(f"{path}: expected header i1,i2,j1,j2,r, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                i1, i2, j1, j2 = (int(x) for x in row[:4])
                r = float(row[4])
            except (ValueError, IndexError) as exc:
                raise ModelError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if min(i1, i2, j1, j2) < 1:
                raise ModelError(f"{path}:{lineno}: sites are 1-based")
            key = (i1, i2, j1, j2)
            if key in entries:
                raise ModelError(f"{path}:{lineno}: duplicate entry for pair {key}")
            entries[key] = r
    if shape is None:
        n1 = max([max(k[0], k[2]) for k in entries] or [1])
        n2 = max([max(k[1], k[3]) for k in entries] or [1])
        shape = (n1, n2)
    n1, n2 = shape
    N = n1 * n2
    m = np.eye(N)
    for (i1, i2, j1, j2), r in entries.items():
        if i1 > n1 or j1 > n1 or i2 > n2 or j2 > n2:
            raise ModelError(f"pair {(i1, i2, j1, j2)} outside grid {shape}")
        a = (i1 - 1) * n2 + (i2 - 1)
        b = (j1 - 1) * n2 + (j2 - 1)
        if a == b:
            if r != 1.0:
                raise ModelError(f"diagonal entry at {(i1, i2)} must be 1")
            continue
        rev = entries.get((j1, j2, i1, i2))
        if rev is not None and abs(rev - r) > 1e-12:
            raise ModelError(f"asymmetric entries for pair {(i1, i2)} <-> {(j1, j2)}")
        m[a, b] = m[b, a] = r
    return ExplicitGridModel(shape, m, name=f"csv:{path}")


def model_from_spec(spec: str) -> CorrelationModel:
    """Catalog lookup: ``iid``, ``choi``, ``expdecay:<q>`` or ``csv:<path>``."""
    spec = spec.strip()
    if spec == "iid":
        return IIDModel()
    if spec == "choi":
        return ChoiModel()
    if spec.startswith("expdecay:"):
        try:
            q = float(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad expdecay parameter in {spec!r}") from exc
        return expdecay(q)
    if spec.startswith("csv:"):
        return load_explicit_grid(spec[4:])
    raise ConfigError(f"unknown model {spec!r} (expected iid, choi, expdecay:<q>, csv:<path>)")


# --------------------------------------------------------------------------
# evaluation helpers
# --------------------------------------------------------------------------

def correlation(model: CorrelationModel, i, j) -> float:
    """Correlation between sites ``i`` and ``j`` (0-based coordinate pairs)."""
    return float(model.corr_sites(i[0], i[1], j[0], j[1]))


def site_coords(n):
    """Row-major 0-based coordinates of every site in ``R_n``."""
    idx = np.indices(tuple(n)).reshape(2, -1)
    return idx[0], idx[1]


def correlation_matrix(model: CorrelationModel, n) -> np.ndarray:
    """Dense ``(n1 n2, n1 n2)`` matrix of ``r_ij`` in row-major site order."""
    model.check_domain(n)
    c1, c2 = site_coords(n)
    return model.corr_sites(c1[:, None], c2[:, None], c1[None, :], c2[None, :]).astype(float)


@dataclass
class PsdReport:
    n: tuple
    min_eig: float
    passed: bool


def check_psd(model: CorrelationModel, n, cap: int = PSD_CAP) -> PsdReport:
    """Minimum eigenvalue of the grid correlation matrix; pass iff >= -1e-8."""
    n = (int(n[0]), int(n[1]))
    if n[0] * n[1] > cap:
        raise SizeError(f"PSD check on {n[0]}x{n[1]} exceeds the cap of {cap} sites")
    m = correlation_matrix(model, n)
    lo = float(np.linalg.eigvalsh(m)[0])
    return PsdReport(n, lo, lo >= PSD_TOL)


def check_dominating(model: CorrelationModel, n, atol: float = 1e-12) -> bool:
    """True iff ``|r_ij| <= rho_{|i-j|} + atol`` for every site pair of ``R_n``."""
    if model.stationary:
        l1 = np.arange(-(n[0] - 1), n[0])[:, None]
        l2 = np.arange(-(n[1] - 1), n[1])[None, :]
        r = np.abs(model.lag_corr(l1, l2))
        rho = model.dominating(l1, l2)
        off = ~((l1 == 0) & (l2 == 0))
        return bool(np.all((r <= rho + atol) | ~off))
    c1, c2 = site_coords(n)
    r = np.abs(correlation_matrix(model, n))
    rho = model.dominating(c1[:, None] - c1[None, :], c2[:, None] - c2[None, :])
    np.fill_diagonal(r, 0.0)
    return bool(np.all(r <= rho + atol))


# --------------------------------------------------------------------------
# decay condition
# --------------------------------------------------------------------------

@dataclass
class DecayReport:
    """Finite-range diagnostic for the three log-decay bounds.

    ``margins[name]`` is the largest value of ``rho * (log .)^{1+eps}`` seen
    up to ``probe_max``; ``trace[name]`` holds ``(N, running max)`` at dyadic
    probe points.  A bound *fails* when the running maximum at the last
    probe exceeds the one at the middle probe by more than ``growth_tol``
    (relative).  This is a trend flag, not a proof.
    """

    epsilon: float
    probe_max: int
    margins: dict
    sup_abs: float
    passed: dict
    trace: dict = field(default_factory=dict)

    @property
    def passed_all(self) -> bool:
        return all(self.passed.values()) and self.sup_abs < 1.0

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "probe_max": self.probe_max,
            "margins": dict(self.margins),
            "sup_abs": self.sup_abs,
            "passed": dict(self.passed),
            "trace": {k: [[int(a), float(b)] for a, b in v] for k, v in self.trace.items()},
        }


def _dyadic_points(probe_max):
    pts, N = [], 2
    while N < probe_max:
        pts.append(N)
        N *= 2
    pts.append(probe_max)
    return pts


def _growth_verdict(trace, growth_tol):
    vals = [v for _, v in trace]
    mid = vals[len(vals) // 2]
    return not (vals[-1] > (1.0 + growth_tol) * mid)


def check_decay_condition(model: CorrelationModel, epsilon: float = 0.5, probe_max: int = 1024,
                          growth_tol: float = 0.05) -> DecayReport:
    """Evaluate ``rho_(m,0) (log m)^{1+eps}``, ``rho_(0,m) (log m)^{1+eps}`` and
    ``rho_(m1,m2) (log m1 m2)^{1+eps}`` over lags up to ``probe_max``.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if probe_max < 4:
        raise DomainError("probe_max must be at least 4")
    if not model.has_dominating:
        raise ConfigError(f"model {model.name!r} declares no dominating sequence")
    p = 1.0 + epsilon
    m = np.arange(2, probe_max + 1)
    logm = np.log(m) ** p
    ax1 = model.dominating(m, 0) * logm
    ax2 = model.dominating(0, m) * logm
    sup_abs = float(max(model.dominating(np.arange(1, probe_max + 1), 0).max(),
                        model.dominating(0, np.arange(1, probe_max + 1)).max()))

    points = _dyadic_points(probe_max)
    trace = {"axis1": [], "axis2": [], "joint": []}
    for N in points:
        trace["axis1"].append((N, float(ax1[: N - 1].max())))
        trace["axis2"].append((N, float(ax2[: N - 1].max())))

    # joint bound over square annuli [1..N]^2 \ [1..N/2]^2 (both lags >= 1)
    running, prev = 0.0, 0
    for N in points:
        blocks = [(np.arange(1, N + 1), np.arange(prev + 1, N + 1)),
                  (np.arange(prev + 1, N + 1), np.arange(1, prev + 1))]
        for a, b in blocks:
            if a.size == 0 or b.size == 0:
                continue
            rho = model.dominating(a[:, None], b[None, :])
            sup_abs = max(sup_abs, float(rho.max()))
            prod = a[:, None] * b[None, :]
            with np.errstate(divide="ignore"):
                lg = np.where(prod >= 2, np.log(np.maximum(prod, 2)), 0.0) ** p
            running = max(running, float((rho * lg).max()))
        trace["joint"].append((N, running))
        prev = N

    margins = {k: v[-1][1] for k, v in trace.items()}
    passed = {k: _growth_verdict(v, growth_tol) for k, v in trace.items()}
    return DecayReport(epsilon, probe_max, margins, sup_abs, passed, trace)


# --------------------------------------------------------------------------
# squared-sum diagnostic
# --------------------------------------------------------------------------

@dataclass
class SquaredSumProfile:
    one_d: np.ndarray          # one_d[n] = sum_{m=0}^{n} gamma_m^2
    two_d: list                # [((N, N), sum over lags 0..N per axis of gamma_m^2)]


def squared_sum_profile(model: SeparableModel, n_max: int) -> SquaredSumProfile:
    """Partial sums of squared one-axis correlations, and their 2-D products
    on dyadic square grids.  Raw sums only; no growth exponent is asserted.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    if not isinstance(model, SeparableModel):
        raise ModelError("squared_sum_profile needs a separable model")
    g1 = np.asarray(model.axis1(np.arange(n_max + 1)), float)
    g2 = np.asarray(model.axis2(np.arange(n_max + 1)), float)
    s1, s2 = np.cumsum(g1 ** 2), np.cumsum(g2 ** 2)
    two = []
    N = 1
    while N <= n_max:
        two.append(((N, N), float(s1[N] * s2[N])))
        N *= 2
    return SquaredSumProfile(s1, two)
