"""Snapshot files, run configuration and CSV helpers."""
import csv
import io
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from biym.algebra import dim_so
from biym.calculus import Connection
from biym.flow import FlowConfig
from biym.lattice import ConformalMetric, LatticeSpec, PForm

MAGIC = b"BIYM"
VERSION = 1


class SnapshotError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def write_atomic(path, data):
    """Write bytes or text to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- snapshots ---------------------------------------------------------------


def encode_snapshot(D, density_label):
    lat, m = D.lattice, D.m
    name = density_label.encode()
    head = MAGIC + struct.pack("<II", VERSION, lat.n)
    head += struct.pack(f"<{lat.n}I", *lat.extents)
    head += struct.pack("<dII", lat.h, m, len(name)) + name
    # (site lexicographic, axis, upper triangle row-major)
    iu = np.triu_indices(m, 1)
    tri = D.alpha.values[..., iu[0], iu[1]]
    tri = np.moveaxis(tri, 0, lat.n)
    payload = np.ascontiguousarray(tri, dtype="<f8").tobytes()
    return head + payload + struct.pack("<I", zlib.crc32(payload))


def decode_snapshot(data):
    """Return ``(connection, density_label)``."""
    try:
        if data[:4] != MAGIC:
            raise SnapshotError("not a BIYM snapshot (bad magic)")
        pos = 4
        version, n = struct.unpack_from("<II", data, pos)
        pos += 8
        if version != VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        if not 2 <= n <= 6:
            raise SnapshotError(f"invalid base dimension {n}")
        extents = struct.unpack_from(f"<{n}I", data, pos)
        pos += 4 * n
        h, m, nlen = struct.unpack_from("<dII", data, pos)
        pos += 16
        name = data[pos : pos + nlen].decode()
        pos += nlen
    except struct.error as exc:
        raise SnapshotError(f"truncated snapshot header: {exc}") from None
    lat = LatticeSpec(n, extents, h)
    count = lat.sites * n * dim_so(m)
    end = pos + 8 * count
    if len(data) != end + 4:
        raise SnapshotError(f"payload length mismatch: expected {end + 4} bytes, got {len(data)}")
    payload = data[pos:end]
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(payload) != crc:
        raise SnapshotError("checksum mismatch: snapshot is corrupted")
    tri = np.frombuffer(payload, dtype="<f8").reshape(extents + (n, dim_so(m)))
    tri = np.moveaxis(tri, n, 0)
    return Connection(PForm.from_vector(1, lat, m, tri.ravel())), name


def save_snapshot(path, D, density_label):
    write_atomic(path, encode_snapshot(D, density_label))


def load_snapshot(path):
    with open(path, "rb") as fh:
        return decode_snapshot(fh.read())


# -- CSV ---------------------------------------------------------------------


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def kv_text(items):
    return "".join(f"{k}: {v}\n" for k, v in items)


def read_site_field(path, lattice):
    """Per-site scalar from a CSV with columns ``x0..x{n-1}, value``."""
    out = np.full(lattice.extents, np.nan)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    for row in rows[1:]:
        if not row:
            continue
        idx = tuple(int(v) for v in row[: lattice.n])
        out[idx] = float(row[lattice.n])
    if np.isnan(out).any():
        raise ConfigError(f"{path}: conformal field does not cover every site")
    return out


def site_field_rows(values):
    return [tuple(idx) + (float(v),) for idx, v in np.ndenumerate(values)]


# -- configuration ------------------------------------------------------------

_SCHEMA = {
    "lattice": {"n", "extents", "h"},
    "fiber": {"m"},
    "density": {"name", "p"},
    "metric": {"kind", "file", "value"},
    "flow": {f.name for f in fields(FlowConfig)} - {"density", "p", "seed"},
    "seeds": None,
    "output": {"dir"},
    "verify": {"trials", "identities", "tolerances"},
    "spectrum": {"k", "tau"},
    "conformal": {"step1", "p"},
    "stress": {"refinement", "amplitude"},
}


@dataclass
class RunConfig:
    lattice: LatticeSpec
    m: int
    density: str = "born_infeld"
    p: float = None
    metric_kind: str = "uniform"
    metric_file: str = None
    metric_value: float = 1.0
    flow: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "out"
    verify: dict = field(default_factory=dict)
    spectrum: dict = field(default_factory=dict)
    conformal: dict = field(default_factory=dict)
    stress: dict = field(default_factory=dict)
    base_dir: str = "."

    def density_f(self):
        from biym.functional import density

        return density(self.density, self.p)

    def flow_config(self, seed=None):
        kw = dict(self.flow)
        return FlowConfig(density=self.density, p=self.p, seed=self.seeds[0] if seed is None else seed, **kw)

    def metric(self):
        if self.metric_kind == "uniform":
            return ConformalMetric.uniform(self.lattice, self.metric_value)
        path = self.metric_file
        if not os.path.isabs(path):
            path = os.path.join(self.base_dir, path)
        return ConformalMetric(self.lattice, read_site_field(path, self.lattice))


def parse_config(data, base_dir="."):
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    for key, val in data.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown configuration section {key!r}")
        allowed = _SCHEMA[key]
        if allowed is not None:
            if not isinstance(val, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            extra = set(val) - allowed
            if extra:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(extra)}")
    try:
        lat = data.get("lattice", {})
        n = int(lat.get("n", 3))
        extents = lat.get("extents", [4] * n)
        if isinstance(extents, int):
            extents = [extents] * n
        lattice = LatticeSpec(n, tuple(extents), float(lat.get("h", 1.0)))
        m = int(data.get("fiber", {}).get("m", 3))
        if not 1 <= m <= 4:
            raise ConfigError("fiber dimension m must be in 1..4")
        dens = data.get("density", {})
        metric = data.get("metric", {})
        kind = metric.get("kind", "uniform")
        if kind not in ("uniform", "conformal"):
            raise ConfigError("metric.kind must be 'uniform' or 'conformal'")
        if kind == "conformal" and "file" not in metric:
            raise ConfigError("metric.kind 'conformal' needs metric.file")
        seeds = data.get("seeds", [0])
        if isinstance(seeds, int):
            seeds = [seeds]
        cfg = RunConfig(
            lattice=lattice,
            m=m,
            density=str(dens.get("name", "born_infeld")),
            p=None if dens.get("p") is None else float(dens["p"]),
            metric_kind=kind,
            metric_file=metric.get("file"),
            metric_value=float(metric.get("value", 1.0)),
            flow=dict(data.get("flow", {})),
            seeds=[int(s) for s in seeds],
            out_dir=str(data.get("output", {}).get("dir", "out")),
            verify=dict(data.get("verify", {})),
            spectrum=dict(data.get("spectrum", {})),
            conformal=dict(data.get("conformal", {})),
            stress=dict(data.get("stress", {})),
            base_dir=base_dir,
        )
        cfg.density_f()
        cfg.flow_config()
        if cfg.metric_value <= 0:
            raise ConfigError("metric.value must be positive")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path):
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return parse_config(data, base_dir=os.path.dirname(os.path.abspath(path)))
