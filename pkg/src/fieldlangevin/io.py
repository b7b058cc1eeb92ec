"""Result files: kernel CSV matrices, trajectory and statistics tables,
run manifests with checksums.

All floats are written with shortest round-trip formatting so identical
runs produce byte-identical files.
"""

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import KernelGrid


def _fmt(x):
    return np.format_float_scientific(x, unique=True, trim="-")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def kernel_to_csv(grid: KernelGrid, path):
    """Row-major kernel matrix with grid metadata in comment headers."""
    path = Path(path)
    lines = [f"# kind={grid.kind}",
             f"# n={len(grid)}",
             f"# t_start={_fmt(grid.times[0])}",
             f"# dt={_fmt(grid.dt)}"]
    for key in sorted(grid.meta):
        val = grid.meta[key]
        if isinstance(val, (int, float, str)):
            lines.append(f"# {key}={val}")
    vals = grid.values
    complex_vals = np.iscomplexobj(vals)
    for i in range(vals.shape[0]):
        row = vals[i]
        if complex_vals:
            lines.append(",".join(f"{_fmt(c.real)}+{_fmt(c.imag)}j" for c in row))
        else:
            lines.append(",".join(_fmt(c) for c in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_kernel_csv(path):
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val
            continue
        if "j" in line:
            rows.append([complex(tok.replace("+-", "-")) for tok in line.split(",")])
        else:
            rows.append([float(tok) for tok in line.split(",")])
    n = int(meta["n"])
    t0 = float(meta["t_start"])
    dt = float(meta["dt"])
    times = t0 + dt * np.arange(n)
    return KernelGrid(times, np.array(rows), meta["kind"], meta)


def trajectories_to_csv(worldlines_by_realization, path):
    """Long-format trajectory table.

    Columns: realization, particle, t, q or z components, velocity
    components.  Dipole worldlines write their internal amplitude.
    """
    path = Path(path)
    lines = []
    header = None
    for r, wls in enumerate(worldlines_by_realization):
        for wl in wls:
            if wl.amplitude is not None:
                cols = ["realization", "particle", "t", "q", "qdot"]
                data = np.column_stack([wl.times, wl.amplitude, wl.amplitude_rate])
            else:
                ds = wl.ncomp
                cols = (["realization", "particle", "t"]
                        + [f"z{i + 1}" for i in range(ds)]
                        + [f"v{i + 1}" for i in range(ds)])
                data = np.column_stack([wl.times, wl.positions, wl.velocities])
            if header is None:
                header = cols
                lines.append(",".join(cols))
            for row in data:
                lines.append(f"{r},{wl.particle_id}," + ",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def statistics_to_csv(times, mean, var, cov_lags, path, particle=0):
    """Ensemble statistics table: t, mean, variance, lag covariances."""
    path = Path(path)
    lags = sorted(cov_lags)
    cols = ["particle", "t", "mean", "variance"] + [f"cov_lag{lag}" for lag in lags]
    lines = [",".join(cols)]
    n = times.size
    for k in range(n):
        row = [str(particle), _fmt(times[k]), _fmt(mean[k]), _fmt(var[k])]
        for lag in lags:
            row.append(_fmt(cov_lags[lag][k]) if k < n - lag else "")
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


@dataclass
class RunManifest:
    """Provenance record: identical (config, seed) implies identical
    output checksums, independent of thread count."""

    config_hash: str
    version: str
    seed: int
    wall_clock: float = 0.0
    stage_timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)     # [{path, sha256}]
    failure: dict = None

    def add_output(self, path):
        self.outputs.append({"path": str(Path(path).name),
                             "sha256": sha256_file(path)})

    def write(self, path):
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2,
                                         sort_keys=True) + "\n")
        return path


class StageTimer:
    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self._t0 = time.monotonic()

    def stage(self, name):
        timer = self

        class _Ctx:
            def __enter__(ctx):
                ctx.start = time.monotonic()
                return ctx

            def __exit__(ctx, *exc):
                timer.manifest.stage_timings[name] = time.monotonic() - ctx.start
                return False

        return _Ctx()

    def finish(self):
        self.manifest.wall_clock = time.monotonic() - self._t0
