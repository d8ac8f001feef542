"""Run records: one JSON document per (q, geometry) cell.

Each record has a deterministic ``payload`` and a ``metadata`` section with
wall-clock timestamps, so payloads can be compared byte for byte across runs.
"""
import csv
from dataclasses import dataclass, field
import json
import math
import os
from pathlib import Path
import tempfile

import numpy as np

from ..bands import BandStructure
from ..core import PotentialSpec
from ..exceptions import ConfigurationError, SchemaError

SCHEMA_VERSION = "1.0"
CSV_HEADER = ["q", "v0", "l", "w", "k", "band", "energy"]


def _clean(obj):
    """Convert numpy scalars/arrays to JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def dumps(obj):
    """Canonical encoding: sorted keys, UTF-8, shortest round-trip floats."""
    return (json.dumps(_clean(obj), sort_keys=True, indent=1, ensure_ascii=False,
                       allow_nan=False) + "\n").encode("utf-8")


@dataclass
class RunRecord:
    payload: dict
    metadata: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    @property
    def params(self):
        return self.payload["params"]

    @property
    def ok(self):
        return self.payload.get("status") == "ok"

    @property
    def geometry(self):
        p = self.params
        return (p["v0"], p["l"], p["w"])

    def to_bytes(self):
        return dumps({"schema_version": self.schema_version, "payload": self.payload,
                      "metadata": self.metadata})

    def payload_bytes(self):
        return dumps(self.payload)

    def band_structure(self):
        if not self.ok:
            raise ConfigurationError(f"record failed: {self.payload.get('error')}")
        p = self.params
        return BandStructure(q=p["q"], potential=PotentialSpec(p["v0"], p["l"], p["w"]),
                             k_grid=np.array(self.payload["k_grid"], dtype=float),
                             energies=np.array(self.payload["energies"], dtype=float),
                             n_points=p["n_points"])

    @classmethod
    def from_dict(cls, data):
        version = str(data.get("schema_version", ""))
        major = version.split(".")[0]
        if major != SCHEMA_VERSION.split(".")[0]:
            raise SchemaError(f"unsupported record schema version {version!r}", "schema_version")
        if "payload" not in data:
            raise SchemaError("missing payload", "<record>")
        return cls(payload=data["payload"], metadata=data.get("metadata", {}),
                   schema_version=version)


def write_record(record, path):
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(record.to_bytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_record(path):
    return RunRecord.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def read_records(directory):
    """All ``cell-*.json`` records in ``directory``, sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such record directory: {directory}")
    return [read_record(p) for p in sorted(directory.glob("cell-*.json"))]


def export(records, fmt, path):
    """Write records as one JSON array or as flat CSV rows per (k, band)."""
    path = Path(path)
    records = list(records)
    if fmt == "json":
        body = dumps([{"schema_version": r.schema_version, "payload": r.payload,
                       "metadata": r.metadata} for r in records])
        path.write_bytes(body)
    elif fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in records:
                if not r.ok:
                    continue
                p = r.params
                for band, row in enumerate(r.payload["energies"]):
                    for k, e in zip(r.payload["k_grid"], row):
                        writer.writerow([repr(float(p["q"])), repr(float(p["v0"])),
                                         repr(float(p["l"])), repr(float(p["w"])),
                                         repr(float(k)), band, repr(float(e))])
    else:
        raise ConfigurationError(f"unknown export format {fmt!r}; use json or csv")
    return path
