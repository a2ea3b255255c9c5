"""Bit-stable CSV/JSON serialization with provenance.

Every artifact embeds the resolved configuration hash, seed, and tool
version so a run can be reproduced exactly.  Numbers are written with 12
significant digits, '.' separator, LF line endings; files are written
atomically (temp + rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__


def format_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def config_hash(canonical_config: Mapping) -> str:
    blob = json.dumps(canonical_config, sort_keys=True,
                      separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def provenance_block(canonical_config: Mapping, seed: int) -> dict:
    return {
        "tool": "ionmux",
        "version": __version__,
        "seed": seed,
        "config_sha256": config_hash(canonical_config),
        "config": canonical_config,
    }


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-",
                               suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, columns: Mapping[str, Sequence],
              provenance: Mapping) -> None:
    """Columnar CSV with '#'-prefixed provenance header lines."""
    path = Path(path)
    names = list(columns)
    lengths = {len(v) for v in columns.values()}
    if len(lengths) > 1:
        raise ValueError(f"ragged columns: { {k: len(v) for k, v in columns.items()} }")
    n = lengths.pop() if lengths else 0
    lines = []
    prov = json.dumps(provenance, sort_keys=True, separators=(",", ":"))
    lines.append(f"# provenance: {prov}")
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(format_number(columns[k][i]) for k in names))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, payload: Mapping, provenance: Mapping) -> None:
    path = Path(path)
    doc = {"provenance": provenance, **payload}
    _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2,
                                   default=format_number) + "\n")


def write_error(path, message: str, kind: str) -> None:
    """Machine-readable error record."""
    _atomic_write(Path(path), json.dumps(
        {"error": {"kind": kind, "message": message}},
        sort_keys=True, indent=2) + "\n")
