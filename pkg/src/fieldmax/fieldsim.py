"""Seeded samplers for standardized Gaussian fields on ``R_n``.

Three methods:

* ``iid``       -- independent N(0, 1) draws;
* ``cholesky``  -- exact law for any model, ``X = L z`` with ``L L^T = C``;
* ``circulant`` -- exact law for stationary models via 2-D circulant
  embedding and FFT (Dietrich & Newsam / Wood & Chan construction).

Every realization is a deterministic function of ``(model, n, seed,
method)``.  Replication ``r`` of a run seeded with ``s`` uses the seed
``s XOR splitmix64(r)``.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .covariance import CorrelationModel, IIDModel, correlation_matrix
from .errors import DomainError, EmbeddingError, ModelError, SizeError

CHOLESKY_CAP = 4096
CHOLESKY_JITTER = 1e-10
EMBED_TOL = -1e-8
MAX_PAD = 16

MASK64 = (1 << 64) - 1

_MAGIC = b"GRF1"
_HEADER = struct.Struct("<4sIIQB3x")   # 24 bytes
METHOD_TAGS = {"iid": 0, "cholesky": 1, "circulant": 2}
_TAG_METHODS = {v: k for k, v in METHOD_TAGS.items()}


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function (bijective on 64 bits)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replication_seed(seed: int, rep: int) -> int:
    return (int(seed) ^ splitmix64(int(rep))) & MASK64


def _rng(seed):
    seed = int(seed)
    if not (0 <= seed <= MASK64):
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(seed)


def _check_n(n):
    n = (int(n[0]), int(n[1]))
    if n[0] < 1 or n[1] < 1:
        raise DomainError(f"grid size must be >= (1,1), got {n}")
    return n


@dataclass(eq=False)
class FieldRealization:
    values: np.ndarray
    seed: int
    model_id: str
    method: str

    @property
    def n(self):
        return self.values.shape


# --------------------------------------------------------------------------
# samplers
# --------------------------------------------------------------------------

class CholeskySampler:
    """Factorises the grid correlation matrix once; ``sample(seed)`` is cheap."""

    method = "cholesky"

    def __init__(self, model: CorrelationModel, n, cap: int = CHOLESKY_CAP):
        self.model, self.n = model, _check_n(n)
        N = self.n[0] * self.n[1]
        if N > cap:
            raise SizeError(f"Cholesky sampler on {N} sites exceeds the cap of {cap}")
        C = correlation_matrix(model, self.n)
        try:
            L = linalg.cholesky(C, lower=True)
        except linalg.LinAlgError:
            try:
                L = linalg.cholesky(C + CHOLESKY_JITTER * np.eye(N), lower=True)
            except linalg.LinAlgError as exc:
                raise ModelError(f"correlation matrix of {model.name!r} on {self.n} is not PSD") from exc
        self.L = L

    def sample_values(self, seed):
        z = _rng(seed).standard_normal(self.n[0] * self.n[1])
        return (self.L @ z).reshape(self.n)

    def sample(self, seed) -> FieldRealization:
        return FieldRealization(self.sample_values(seed), int(seed), self.model.name, self.method)


def _next_pow2(x):
    return 1 if x <= 1 else 1 << (int(x) - 1).bit_length()


class CirculantSampler:
    """Stationary sampler on an ``M1 x M2`` torus with ``M_i = pad * 2^ceil(log2(2(n_i - 1)))``.

    The pad factor is doubled until the embedding spectrum is nonnegative
    (down to ``-1e-8``, which is clipped) or ``max_pad`` is exceeded.
    """

    method = "circulant"

    def __init__(self, model: CorrelationModel, n, pad: int = 1, max_pad: int = MAX_PAD):
        if not model.stationary:
            raise ModelError(f"circulant embedding needs a stationary model, got {model.name!r}")
        if pad < 1:
            raise DomainError("pad must be >= 1")
        self.model, self.n = model, _check_n(n)
        while True:
            M = tuple(max(1, pad * _next_pow2(2 * (k - 1))) for k in self.n)
            lam = self._spectrum(M)
            if lam.min() >= EMBED_TOL:
                break
            if pad * 2 > max_pad:
                raise EmbeddingError(
                    f"negative embedding eigenvalue {lam.min():.3g} for {model.name!r} on {self.n} "
                    f"up to pad={pad}; fall back to the Cholesky sampler")
            pad *= 2
        self.pad, self.M = pad, M
        self._scale = np.sqrt(np.clip(lam, 0.0, None) / (M[0] * M[1]))

    def _spectrum(self, M):
        j1 = np.arange(M[0])
        j2 = np.arange(M[1])
        l1 = np.minimum(j1, M[0] - j1)[:, None]
        l2 = np.minimum(j2, M[1] - j2)[None, :]
        # wrapped lags; valid for models even in each coordinate
        base = self.model.lag_corr(l1, l2) * np.ones((M[0], M[1]))
        return np.fft.fft2(base).real

    def sample_values(self, seed):
        xi = _rng(seed).standard_normal((2,) + self.M)
        w = np.fft.fft2(self._scale * (xi[0] + 1j * xi[1]))
        return np.ascontiguousarray(w.real[: self.n[0], : self.n[1]])

    def sample(self, seed) -> FieldRealization:
        return FieldRealization(self.sample_values(seed), int(seed), self.model.name, self.method)


class IIDSampler:
    method = "iid"

    def __init__(self, n, model: CorrelationModel | None = None):
        self.n = _check_n(n)
        self.model = model if model is not None else IIDModel()

    def sample_values(self, seed):
        return _rng(seed).standard_normal(self.n)

    def sample(self, seed) -> FieldRealization:
        return FieldRealization(self.sample_values(seed), int(seed), self.model.name, self.method)


def default_method(model: CorrelationModel) -> str:
    if isinstance(model, IIDModel):
        return "iid"
    return "circulant" if model.stationary else "cholesky"


def make_sampler(model: CorrelationModel, n, method: str = "auto", pad: int = 1):
    """Sampler object with ``sample(seed)`` / ``sample_values(seed)``."""
    if method == "auto":
        method = default_method(model)
    if method == "iid":
        if not isinstance(model, IIDModel):
            raise ModelError(f"method 'iid' requires the iid model, got {model.name!r}")
        return IIDSampler(n, model)
    if method == "cholesky":
        return CholeskySampler(model, n)
    if method == "circulant":
        return CirculantSampler(model, n, pad=pad)
    raise DomainError(f"unknown sampling method {method!r}")


def sample_iid(n, seed: int) -> FieldRealization:
    return IIDSampler(n).sample(seed)


def sample_cholesky(model: CorrelationModel, n, seed: int) -> FieldRealization:
    return CholeskySampler(model, n).sample(seed)


def sample_circulant(model: CorrelationModel, n, seed: int, pad: int = 1) -> FieldRealization:
    return CirculantSampler(model, n, pad=pad).sample(seed)


def sample_covariance(model: CorrelationModel, n, method: str, reps: int, seed: int,
                      sites=None) -> np.ndarray:
    """Unbiased sample covariance across ``reps`` replications.

    For standardized fields this estimates the correlation matrix.  Rows and
    columns follow row-major site order, or the 0-based ``sites`` list.
    """
    if reps < 2:
        raise DomainError("reps must be >= 2")
    sampler = make_sampler(model, n, method)
    if sites is None:
        idx = np.arange(sampler.n[0] * sampler.n[1])
    else:
        idx = np.array([a * sampler.n[1] + b for a, b in sites])
    data = np.empty((reps, idx.size))
    for r in range(reps):
        data[r] = sampler.sample_values(replication_seed(seed, r)).ravel()[idx]
    return np.atleast_2d(np.cov(data, rowvar=False, ddof=1))


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def save_field(path, field: FieldRealization):
    """``.csv`` -> ``i1,i2,value`` rows (1-based); otherwise the binary
    format: 24-byte header (magic, n1, n2, seed, method tag) followed by
    row-major little-endian float64 values.
    """
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i1", "i2", "value"])
            for (a, b), v in np.ndenumerate(field.values):
                w.writerow([a + 1, b + 1, repr(float(v))])
        return
    n1, n2 = field.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n1, n2, int(field.seed) & MASK64, METHOD_TAGS[field.method]))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(path) -> FieldRealization:
    path = str(path)
    if path.endswith(".csv"):
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader, [])]
            if header != ["i1", "i2", "value"]:
                raise DomainError(f"{path}: expected header i1,i2,value")
            for row in reader:
                if row:
                    rows.append((int(row[0]), int(row[1]), float(row[2])))
        n1 = max(r[0] for r in rows)
        n2 = max(r[1] for r in rows)
        vals = np.full((n1, n2), np.nan)
        for a, b, v in rows:
            vals[a - 1, b - 1] = v
        if np.isnan(vals).any():
            raise DomainError(f"{path}: incomplete field")
        return FieldRealization(vals, 0, "csv", "iid")
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise DomainError(f"{path}: truncated header")
        magic, n1, n2, seed, tag = _HEADER.unpack(head)
        if magic != _MAGIC or tag not in _TAG_METHODS:
            raise DomainError(f"{path}: not a field file")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n1 * n2:
        raise DomainError(f"{path}: expected {n1 * n2} values, found {data.size}")
    return FieldRealization(data.reshape(n1, n2).astype(float), seed, "file", _TAG_METHODS[tag])
