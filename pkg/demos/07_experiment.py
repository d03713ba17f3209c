"""A full replication experiment from a TOML config."""
import pathlib
import tempfile

from fieldmax.experiments import format_summary, load_config, run_experiment, write_outputs

cfg_text = """
seed = 20240101
tau = 1.0
reps = 40
n_ladder = ["32x32", "64x64", "128x128", "256x256"]
normalization = "both"

[model]
spec = "iid"

[conditions]
dprime = true
"""
with tempfile.TemporaryDirectory() as d:
    path = pathlib.Path(d) / "exp.toml"
    path.write_text(cfg_text)
    cfg, raw = load_config(path)
    res = run_experiment(cfg)
    print(format_summary(res.summary))
    for p in write_outputs(res, pathlib.Path(d) / "out", raw).values():
        print(p.name, p.stat().st_size, "bytes")
