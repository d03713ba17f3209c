"""Config-driven replication runner.

A config is a TOML file::

    seed = 20240101
    tau = 1.0
    reps = 50
    n_ladder = ["64x64", "128x128", "256x256"]
    normalization = "harmonic"     # paper_log | harmonic | both
    method = "auto"                # auto | iid | cholesky | circulant
    epsilon = 0.5

    [model]
    spec = "iid"                   # iid | choi | expdecay:<q> | csv:<path>

    [levels]
    offsets = "offsets.csv"        # optional, i1,i2,delta on the largest grid

    [conditions]
    berman = true
    dprime = true
    gap = false
    gap_reps = 200
    decay = true
    probe_max = 1024

    [outputs]
    dir = "results"

Unknown keys are rejected.  Each replication samples one field on the
largest ladder grid with seed ``seed XOR splitmix64(rep)`` and reads every
ladder point off the same trajectory (levels depend on ``k`` only, so the
indicator at ``k`` is shared by all ``n >= k``).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .asclt import NORMALIZATIONS, AscltTrajectory, expected_average_iid, indicator_stream, no_exceedance_prob_iid
from .conditions import evaluate_conditions
from .covariance import IIDModel, check_decay_condition, model_from_spec
from .errors import ConfigError, FieldmaxError
from .fieldsim import make_sampler, replication_seed
from .levels import level_schedule, load_offsets

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger(__name__)

THREADS_ENV = "FIELDMAX_THREADS"
OUTPUT_ENV = "FIELDMAX_OUTPUT_DIR"
DEFAULT_BUDGET = 5_000_000_000   # sites x reps

SCHEMA = {
    "seed": int, "tau": (int, float), "reps": int, "n_ladder": list,
    "normalization": str, "method": str, "epsilon": (int, float), "budget": int,
    "model": {"spec": str},
    "levels": {"offsets": str},
    "conditions": {"berman": bool, "dprime": bool, "gap": bool, "gap_reps": int,
                   "decay": bool, "probe_max": int},
    "outputs": {"dir": str},
}
REQUIRED = ("seed", "tau", "reps", "n_ladder", "model.spec")


def parse_grid(text, what="grid size"):
    """``"64x32"`` -> ``(64, 32)``; ``"64"`` -> ``(64, 64)``."""
    try:
        parts = [int(p) for p in str(text).lower().split("x")]
    except ValueError:
        raise ConfigError(f"{what}: cannot parse {text!r} (expected N1xN2)") from None
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2 or min(parts) < 1:
        raise ConfigError(f"{what}: {text!r} must be N1xN2 with N1, N2 >= 1")
    return tuple(parts)


def _validate(raw, schema, path=""):
    for key, val in raw.items():
        where = f"{path}{key}"
        if key not in schema:
            raise ConfigError(f"unknown config key {where!r}")
        expect = schema[key]
        if isinstance(expect, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where!r} must be a table")
            _validate(val, expect, where + ".")
        elif isinstance(val, bool) and expect is not bool:
            raise ConfigError(f"config key {where!r} has the wrong type")
        elif not isinstance(val, expect):
            raise ConfigError(f"config key {where!r} has the wrong type ({type(val).__name__})")


@dataclass
class ExperimentConfig:
    model_spec: str
    tau: float
    n_ladder: list
    reps: int
    seed: int
    normalization: str = "harmonic"
    method: str = "auto"
    epsilon: float = 0.5
    offsets_path: Optional[str] = None
    berman: bool = False
    dprime: bool = False
    gap: bool = False
    gap_reps: int = 200
    decay: bool = False
    probe_max: int = 1024
    output_dir: str = "results"
    budget: int = DEFAULT_BUDGET
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        _validate(raw, SCHEMA)
        for key in REQUIRED:
            node = raw
            for part in key.split("."):
                if not isinstance(node, dict) or part not in node:
                    raise ConfigError(f"missing required config key {key!r}")
                node = node[part]
        cond = raw.get("conditions", {})
        ladder = [parse_grid(x, "n_ladder") for x in raw["n_ladder"]]
        if not ladder:
            raise ConfigError("n_ladder must not be empty")
        for a, b in zip(ladder, ladder[1:]):
            if not (b[0] > a[0] and b[1] > a[1]):
                raise ConfigError("n_ladder must be strictly increasing in both coordinates")
        if raw["reps"] < 1:
            raise ConfigError("reps must be >= 1")
        if raw["tau"] < 0:
            raise ConfigError("tau must be >= 0")
        if raw["seed"] < 0 or raw["seed"] >= 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        norm = raw.get("normalization", "harmonic")
        if norm not in NORMALIZATIONS + ("both",):
            raise ConfigError(f"normalization must be paper_log, harmonic or both, got {norm!r}")
        if norm in ("paper_log", "both") and min(min(n) for n in ladder) < 3:
            raise ConfigError("paper_log normalization needs every ladder size >= 3x3")
        method = raw.get("method", "auto")
        if method not in ("auto", "iid", "cholesky", "circulant"):
            raise ConfigError(f"unknown method {method!r}")
        eps = float(raw.get("epsilon", 0.5))
        if eps <= 0:
            raise ConfigError("epsilon must be > 0")
        spec = raw["model"]["spec"]
        offsets = raw.get("levels", {}).get("offsets")
        if base_dir is not None:
            if spec.startswith("csv:") and not os.path.isabs(spec[4:]):
                spec = "csv:" + str(base_dir / spec[4:])
            if offsets is not None and not os.path.isabs(offsets):
                offsets = str(base_dir / offsets)
        return cls(
            model_spec=spec, tau=float(raw["tau"]), n_ladder=ladder, reps=int(raw["reps"]),
            seed=int(raw["seed"]), normalization=norm, method=method, epsilon=eps,
            offsets_path=offsets,
            berman=cond.get("berman", False), dprime=cond.get("dprime", False),
            gap=cond.get("gap", False), gap_reps=cond.get("gap_reps", 200),
            decay=cond.get("decay", False), probe_max=cond.get("probe_max", 1024),
            output_dir=raw.get("outputs", {}).get("dir", "results"),
            budget=raw.get("budget", DEFAULT_BUDGET), raw=raw,
        )

    @property
    def normalizations(self):
        return NORMALIZATIONS if self.normalization == "both" else (self.normalization,)


def load_config(path):
    """Returns ``(config, raw_bytes)``; relative paths resolve against the file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw, base_dir=path.parent), data


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    averages: dict            # normalization -> (reps, len(ladder)) array
    indicator: np.ndarray     # (reps, len(ladder)) bool, 1{M_n <= u_n}
    summary: list
    conditions: list
    decay: Optional[dict] = None


def _resolve_workers(workers):
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(workers))


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run every replication and summarise per ladder point.

    Output is a deterministic function of the config; ``workers`` only
    changes scheduling.
    """
    try:
        model = model_from_spec(config.model_spec)
    except FieldmaxError as exc:
        raise ConfigError(f"model.spec: {exc}") from exc
    ladder = config.n_ladder
    nmax = ladder[-1]
    if config.reps * nmax[0] * nmax[1] > config.budget:
        raise ConfigError(f"budget: {config.reps} reps on {nmax} exceed {config.budget} site draws")
    offsets = None
    if config.offsets_path is not None:
        try:
            offsets = load_offsets(config.offsets_path, shape=nmax)
        except (FieldmaxError, OSError) as exc:
            raise ConfigError(f"levels.offsets: {exc}") from exc
    schedule = level_schedule(nmax, config.tau, offsets)
    try:
        sampler = make_sampler(model, nmax, config.method)
    except FieldmaxError as exc:
        raise ConfigError(f"method/model.spec: {exc}") from exc

    def one(rep):
        vals = sampler.sample_values(replication_seed(config.seed, rep))
        traj = AscltTrajectory.from_bits(indicator_stream(vals, schedule))
        row = {}
        for norm in NORMALIZATIONS:
            row[norm] = [traj.average(n, norm) if (norm == "harmonic" or min(n) >= 3) else math.nan
                         for n in ladder]
        row["ind"] = [bool(traj.bits[n[0] - 1, n[1] - 1]) for n in ladder]
        return row

    nw = _resolve_workers(workers)
    log.info("running %d reps on %s with %d worker(s)", config.reps, nmax, nw)
    if nw == 1:
        rows = [one(r) for r in range(config.reps)]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            rows = list(pool.map(one, range(config.reps)))

    averages = {norm: np.array([r[norm] for r in rows]) for norm in NORMALIZATIONS}
    indicator = np.array([r["ind"] for r in rows], dtype=bool)

    iid_const = isinstance(model, IIDModel) and offsets is None
    limit = math.exp(-config.tau)
    summary = []
    for j, n in enumerate(ladder):
        p_hat = float(indicator[:, j].mean())
        p_se = math.sqrt(p_hat * (1 - p_hat) / config.reps)
        exact_p = no_exceedance_prob_iid(n, config.tau) if iid_const else None
        for norm in config.normalizations:
            a = averages[norm][:, j]
            mean = float(a.mean())
            sd = float(a.std(ddof=1)) if config.reps > 1 else 0.0
            analytic = expected_average_iid(n, config.tau, norm) if iid_const else None
            summary.append({
                "n1": n[0], "n2": n[1], "normalization": norm, "reps": config.reps,
                "mean_A": mean, "sd_A": sd, "stderr_A": sd / math.sqrt(config.reps),
                "analytic_E": analytic, "exp_neg_tau": limit,
                "abs_mean_minus_limit": abs(mean - limit),
                "abs_mean_minus_analytic": abs(mean - analytic) if analytic is not None else None,
                "p_hat_Mn": p_hat, "p_hat_stderr": p_se, "exact_p_Mn": exact_p,
            })
    summary.sort(key=lambda r: (r["n1"] * r["n2"], r["n1"], r["normalization"]))

    conditions = []
    if config.berman or config.dprime or config.gap:
        for j, n in enumerate(ladder):
            if min(n) < 3:
                continue
            rep = evaluate_conditions(model, schedule, n, config.epsilon, config.berman, config.dprime,
                                      config.gap, config.gap_reps,
                                      replication_seed(config.seed, (1 << 32) + j), config.method)
            conditions.append(rep)
    decay = None
    if config.decay and model.has_dominating:
        decay = check_decay_condition(model, config.epsilon, config.probe_max).to_dict()
    return ExperimentResult(config, averages, indicator, summary, conditions, decay)


def convergence_table(config_or_result) -> list:
    """Summary rows sorted by ``n1 n2``; runs the experiment if given a config."""
    res = config_or_result
    if isinstance(res, ExperimentConfig):
        res = run_experiment(res)
    return res.summary


SUMMARY_COLUMNS = ["n1", "n2", "normalization", "reps", "mean_A", "sd_A", "stderr_A", "analytic_E",
                   "exp_neg_tau", "abs_mean_minus_limit", "abs_mean_minus_analytic", "p_hat_Mn",
                   "p_hat_stderr", "exact_p_Mn"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_outputs(result: ExperimentResult, outdir, config_bytes: bytes | None = None) -> dict:
    """Write ``trajectories.csv``, ``summary.csv``, ``conditions.json`` and
    ``manifest.json``; returns their paths.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    paths = {k: outdir / f for k, f in (("trajectories", "trajectories.csv"), ("summary", "summary.csv"),
                                        ("conditions", "conditions.json"), ("manifest", "manifest.json"))}
    with open(paths["trajectories"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n1", "n2", "rep", "normalization", "A_n", "indicator_Mn"])
        for j, n in enumerate(cfg.n_ladder):
            for r in range(cfg.reps):
                for norm in NORMALIZATIONS:
                    w.writerow([n[0], n[1], r, norm, _fmt(float(result.averages[norm][r, j])),
                                int(result.indicator[r, j])])
    with open(paths["summary"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in result.summary:
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
    cond = {"conditions": [c.to_dict() for c in result.conditions], "decay": result.decay}
    paths["conditions"].write_text(json.dumps(cond, indent=2, sort_keys=True) + "\n")
    if config_bytes is None:
        config_bytes = json.dumps(cfg.raw, sort_keys=True).encode()
    manifest = {
        "artifact": "fieldmax",
        "version": __version__,
        "seed": cfg.seed,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "config": cfg.raw,
        "replication_seed_rule": "seed XOR splitmix64(rep)",
        "outputs": sorted(p.name for k, p in paths.items() if k != "manifest"),
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


def format_summary(summary) -> str:
    cols = ["n1", "n2", "normalization", "mean_A", "stderr_A", "analytic_E", "exp_neg_tau", "p_hat_Mn"]
    lines = ["\t".join(cols)]
    for row in summary:
        lines.append("\t".join(f"{row[c]:.6g}" if isinstance(row[c], float) else _fmt(row[c]) for c in cols))
    return "\n".join(lines)
