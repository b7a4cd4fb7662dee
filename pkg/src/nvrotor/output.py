"""Deterministic file output: CSV/JSON writers, fingerprint embedding.

Every artifact embeds the resolved-configuration fingerprint so that
files from different configurations cannot be mixed silently.  Numeric
serialization is fixed at 17 significant digits (round-trip exact for
binary64); nothing time-dependent goes into the main files - timestamps
live in a ``.meta.json`` sidecar - so re-running with identical inputs
reproduces the bytes exactly.
"""

from __future__ import annotations

import json
import math
import os
import time
from contextlib import contextmanager

FINGERPRINT_PREFIX = "# fingerprint="


def fmt17(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


def write_csv(path, columns, rows, fingerprint: str):
    """Comma-delimited table with a mandatory header row and an embedded
    fingerprint comment line; '.' decimal separator, 17 significant digits."""
    lines = [FINGERPRINT_PREFIX + fingerprint, ",".join(columns)]
    for row in rows:
        if isinstance(row, dict):
            row = [row[c] for c in columns]
        lines.append(",".join(fmt17(v) for v in row))
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Read a table written by :func:`write_csv`.

    Returns (fingerprint, columns, rows) with numeric fields parsed.
    """
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith(FINGERPRINT_PREFIX):
        raise ValueError(f"{path}: missing fingerprint line")
    fingerprint = lines[0][len(FINGERPRINT_PREFIX):]
    columns = lines[1].split(",")
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        vals = []
        for item in line.split(","):
            try:
                vals.append(float(item))
            except ValueError:
                vals.append(item)
        rows.append(dict(zip(columns, vals)))
    return fingerprint, columns, rows


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return fmt17(obj)
    return obj


def write_json(path, payload: dict, fingerprint: str):
    doc = {"fingerprint": fingerprint}
    doc.update(_jsonable(payload))
    with open(path, "w", newline="\n") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")
    return path


def read_json(path):
    with open(path) as f:
        doc = json.load(f)
    if "fingerprint" not in doc:
        raise ValueError(f"{path}: missing fingerprint field")
    return doc


def write_sidecar(path, scenario: str, seed):
    meta = {
        "scenario": scenario,
        "seed": seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    side = str(path) + ".meta.json"
    with open(side, "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
        f.write("\n")
    return side


def artifact_fingerprint(path) -> str:
    """Fingerprint embedded in a CSV or JSON artifact."""
    with open(path) as f:
        head = f.read(4096)
    if head.startswith(FINGERPRINT_PREFIX):
        return head.splitlines()[0][len(FINGERPRINT_PREFIX):]
    doc = json.loads(head + open(path).read()[4096:] if len(head) == 4096 else head)
    return doc["fingerprint"]


def check_same_fingerprint(*paths):
    """Refuse to combine artifacts from different resolved configurations."""
    prints = {p: artifact_fingerprint(p) for p in paths}
    if len(set(prints.values())) > 1:
        raise ValueError(f"fingerprint mismatch across artifacts: {prints}")
    return next(iter(prints.values()))


@contextmanager
def output_lock(outdir, timeout: float = 20.0):
    """Exclusive lock on an output directory (lockfile, O_EXCL)."""
    os.makedirs(outdir, exist_ok=True)
    lock = os.path.join(outdir, ".nvrotor.lock")
    deadline = time.monotonic() + timeout
    while True:
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            break
        except FileExistsError:
            if time.monotonic() > deadline:
                raise OSError(f"output directory {outdir} is locked by another run")
            time.sleep(0.05)
    try:
        yield outdir
    finally:
        try:
            os.unlink(lock)
        except FileNotFoundError:
            pass


def write_spin_trajectory(path, traj, fingerprint: str):
    """CSV dump of a master-equation trajectory: t plus Re/Im of every
    independent density-matrix element (two- or three-level)."""
    three = traj.p_minus is not None
    cols = ["t_s", "rho11", "rho00", "re_rho01", "im_rho01"]
    rows = []
    for i, t in enumerate(traj.t):
        row = [t, float(traj.rho11[i]), float(traj.rho00[i] if not three
                                               else 1.0 - traj.rho11[i] - traj.p_minus[i]),
               float(traj.rho01[i].real), float(traj.rho01[i].imag)]
        rows.append(row)
    if three:
        cols += ["rho_mm", "re_rho_m0", "im_rho_m0", "re_rho_m1", "im_rho_m1"]
        for i in range(len(traj.t)):
            rows[i] += [float(traj.p_minus[i]),
                        float(traj.rho_m0[i].real), float(traj.rho_m0[i].imag),
                        float(traj.rho_m1[i].real), float(traj.rho_m1[i].imag)]
    return write_csv(path, cols, rows, fingerprint)


def write_rotor_trajectory(path, traj, fingerprint: str):
    cols = ["t_s", "alpha_rad", "beta_rad", "beta_dot_rad_per_s", "energy_J"]
    rows = [[traj.t[i], traj.alpha[i], traj.beta[i], traj.beta_dot[i],
             traj.energy[i]] for i in range(len(traj.t))]
    return write_csv(path, cols, rows, fingerprint)
