"""File formats: raw/WAV ping signals, CSV/JSON artifacts, configs and manifests.

All writers go through a temp-file-and-rename so an interrupted run never
leaves a half-written artifact behind.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.io import wavfile

from .classify import ClusterReport
from .errors import ParameterError, SonarBlobError
from .signalproc import PingRecord, PointCloud


class ArtifactError(SonarBlobError, OSError):
    """Unreadable, unwritable or malformed file."""


POINTS_HEADER = ("ping", "range_m", "mf_value", "entropy_bits")
CLUSTERS_HEADER = ("point_index", "ping", "range_m", "cluster_label")
RAW_DTYPE = np.dtype("<f4")


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc


# signals

def write_raw(path, samples: np.ndarray) -> None:
    """32-bit float little-endian mono, no header."""
    atomic_write_bytes(path, np.asarray(samples, dtype=RAW_DTYPE).tobytes())


def read_raw(path) -> np.ndarray:
    data = _read_bytes(path)
    if len(data) % RAW_DTYPE.itemsize:
        raise ArtifactError(f"{path}: size is not a multiple of 4 bytes")
    return np.frombuffer(data, dtype=RAW_DTYPE).astype(float)


def write_wav(path, samples: np.ndarray, sample_rate: float) -> None:
    if float(sample_rate) != int(sample_rate):
        raise ParameterError("WAV needs an integer sample rate")
    buf = io.BytesIO()
    wavfile.write(buf, int(sample_rate), np.asarray(samples, dtype=np.float32))
    atomic_write_bytes(path, buf.getvalue())


def read_wav(path) -> tuple[np.ndarray, float]:
    try:
        rate, data = wavfile.read(io.BytesIO(_read_bytes(path)))
    except ValueError as exc:
        raise ArtifactError(f"{path}: not a readable WAV file ({exc})") from exc
    if data.ndim != 1:
        raise ArtifactError(f"{path}: expected mono audio")
    if np.issubdtype(data.dtype, np.integer):
        data = data / float(np.iinfo(data.dtype).max)
    return np.asarray(data, dtype=float), float(rate)


def read_signal(path, sample_rate: float | None = None) -> tuple[np.ndarray, float]:
    """Read ``.wav`` (rate from the header) or raw float32 (rate required)."""
    if str(path).lower().endswith(".wav"):
        return read_wav(path)
    if sample_rate is None:
        raise ParameterError(f"{path}: raw input needs a declared sample rate")
    return read_raw(path), float(sample_rate)


def read_ping(path, ping_index: int, sample_rate: float | None, segment_duration: float) -> PingRecord:
    samples, rate = read_signal(path, sample_rate)
    expected = int(round(segment_duration * rate))
    if len(samples) != expected:
        raise ArtifactError(f"{path}: {len(samples)} samples, expected {expected}")
    return PingRecord(ping_index, samples, rate, segment_duration)


# point clouds, clusters, reports

def points_csv(cloud: PointCloud) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POINTS_HEADER)
    for p, r, v, h in zip(cloud.pings, cloud.ranges, cloud.mf_values, cloud.entropies):
        w.writerow([int(p), _fmt(r), _fmt(v), _fmt(h)])
    return buf.getvalue()


def write_points(path, cloud: PointCloud) -> None:
    atomic_write_text(path, points_csv(cloud))


def read_points(path) -> list[dict]:
    text = _read_bytes(path).decode("utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != POINTS_HEADER:
        raise ArtifactError(f"{path}: unexpected header {reader.fieldnames}")
    try:
        return [
            {"ping": int(row["ping"]), "range_m": float(row["range_m"]),
             "mf_value": float(row["mf_value"]), "entropy_bits": float(row["entropy_bits"])}
            for row in reader
        ]
    except (TypeError, ValueError) as exc:
        raise ArtifactError(f"{path}: malformed row ({exc})") from exc


def clusters_csv(cloud: PointCloud, labels: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CLUSTERS_HEADER)
    for i, (p, r, k) in enumerate(zip(cloud.pings, cloud.ranges, labels)):
        w.writerow([i, int(p), _fmt(r), int(k)])
    return buf.getvalue()


def write_clusters(path, cloud: PointCloud, labels: np.ndarray) -> None:
    atomic_write_text(path, clusters_csv(cloud, labels))


def read_clusters(path) -> np.ndarray:
    """Cluster labels ordered by ``point_index``."""
    text = _read_bytes(path).decode("utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CLUSTERS_HEADER:
        raise ArtifactError(f"{path}: unexpected header {reader.fieldnames}")
    rows = sorted((int(r["point_index"]), int(r["cluster_label"])) for r in reader)
    return np.array([k for _, k in rows], dtype=int)


def reports_json(reports: Sequence[ClusterReport]) -> str:
    out = []
    for r in reports:
        d = r.to_json()
        out.append({k: d[k] for k in ("cluster_id", "connectivity", "median_entropy_bits", "size", "label")})
    return json.dumps(out, indent=2) + "\n"


def write_reports(path, reports: Sequence[ClusterReport]) -> None:
    atomic_write_text(path, reports_json(reports))


def read_reports(path) -> list[dict]:
    return read_json(path)


def write_matrix(path, W: np.ndarray) -> None:
    """Dense CSV dump of a matrix for inspection."""
    buf = io.StringIO()
    np.savetxt(buf, np.asarray(W, dtype=float), delimiter=",", fmt="%.10g")
    atomic_write_text(path, buf.getvalue())


# json, configs, manifests

def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(_read_bytes(path).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: invalid JSON ({exc})") from exc


def sha256_file(path) -> str:
    return hashlib.sha256(_read_bytes(path)).hexdigest()


def write_manifest(path, config: dict, master_seed: int, artifacts: Iterable) -> dict:
    """Record the run config, seed and a content hash of every artifact."""
    root = Path(path).parent
    hashes = {}
    for a in sorted(Path(p) for p in artifacts):
        try:
            key = str(a.relative_to(root))
        except ValueError:
            key = str(a)
        hashes[key] = sha256_file(a)
    manifest = {"config": config, "master_seed": int(master_seed), "artifacts": hashes}
    write_json(path, manifest)
    return manifest
