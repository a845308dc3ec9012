"""Deterministic artifact output: CSV/JSON with config-hash metadata.

Every artifact carries the canonical config hash and tool version so a run
can be reproduced; no wall-clock content enters data files.  Writes are
atomic (temp file + rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile


SCHEMA = "v1"


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float):
        return float(repr(obj))
    return obj


def canonical_json(obj):
    return json.dumps(_canonical(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def write_text_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def fmt(x):
    """Shortest round-trip decimal for floats."""
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, complex):
        return f"{x.real!r}{'+' if x.imag >= 0 else '-'}{abs(x.imag)!r}j"
    return str(x)


def write_csv(path, header, rows, meta=None):
    lines = []
    for k, v in sorted((meta or {}).items()):
        lines.append(f"# {k}: {v}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def write_json(path, payload, meta=None):
    doc = {"schema": SCHEMA}
    if meta:
        doc["meta"] = _canonical(meta)
    doc.update(_canonical(payload))
    write_text_atomic(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")
