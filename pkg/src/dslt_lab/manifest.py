"""Run manifests: what produced a run directory, and digests of its files."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

__all__ = ["RunManifest", "file_digest", "write_manifest", "verify_manifest", "MANIFEST_NAME"]

MANIFEST_NAME = "manifest.json"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    tool_version: str
    master_seed: int
    command: str
    config_echo: dict
    outputs: list[dict] = field(default_factory=list)
    timestamp_utc: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))


def write_manifest(out_dir, command: str, config_echo: dict, master_seed: int, files) -> str:
    """Digest ``files`` (paths relative to ``out_dir``) and write the manifest last."""
    from . import __version__

    outputs = [{"path": f, "sha256": file_digest(os.path.join(out_dir, f))} for f in files]
    man = RunManifest(__version__, int(master_seed), command, config_echo, outputs)
    target = os.path.join(out_dir, MANIFEST_NAME)
    with open(target, "w") as fh:
        json.dump(asdict(man), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return target


def verify_manifest(out_dir) -> list[str]:
    """Paths whose current digest differs from the manifest (empty when intact)."""
    with open(os.path.join(out_dir, MANIFEST_NAME)) as fh:
        man = json.load(fh)
    return [o["path"] for o in man["outputs"] if file_digest(os.path.join(out_dir, o["path"])) != o["sha256"]]
