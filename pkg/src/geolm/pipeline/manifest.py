"""Run manifest: content hashes per stage, atomic writes, no-op reruns.

The manifest records input and output hashes for every completed stage.
A stage whose config hash, input hashes, and on-disk outputs all match the
recorded values is skipped on rerun. Timings live next to the hashes but are
excluded from the fingerprint, which covers only content.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path


def file_hash(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class StageRecord:
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    elapsed_s: float = 0.0
    completed_utc: str = ""

    def to_dict(self) -> dict:
        return {
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "elapsed_s": self.elapsed_s,
            "completed_utc": self.completed_utc,
        }


@dataclass
class RunManifest:
    config_hash: str
    versions: dict[str, str] = field(default_factory=dict)
    stages: dict[str, StageRecord] = field(default_factory=dict)

    def fingerprint(self) -> str:
        """Content-only digest: config hash plus every output artifact hash."""
        digest = hashlib.sha256(self.config_hash.encode("ascii"))
        for stage in sorted(self.stages):
            for rel, hashed in sorted(self.stages[stage].outputs.items()):
                digest.update(f"{stage}:{rel}:{hashed}".encode("utf-8"))
        return digest.hexdigest()

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "versions": dict(sorted(self.versions.items())),
            "fingerprint": self.fingerprint(),
            "stages": {name: record.to_dict() for name, record in sorted(self.stages.items())},
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        manifest = cls(config_hash=data["config_hash"], versions=data.get("versions", {}))
        for name, record in data.get("stages", {}).items():
            manifest.stages[name] = StageRecord(
                inputs=record.get("inputs", {}),
                outputs=record.get("outputs", {}),
                elapsed_s=record.get("elapsed_s", 0.0),
                completed_utc=record.get("completed_utc", ""),
            )
        return manifest


def hash_paths(root: Path, paths: dict[str, Path]) -> dict[str, str]:
    """Hash a label->path map; paths under ``root`` are keyed relative to it."""
    out: dict[str, str] = {}
    for label, path in paths.items():
        try:
            key = str(Path(path).relative_to(root))
        except ValueError:
            key = label
        out[key] = file_hash(path)
    return out


def stage_is_current(
    manifest: RunManifest | None,
    stage: str,
    config_hash: str,
    inputs: dict[str, str],
    output_paths: dict[str, Path],
    root: Path,
) -> bool:
    """True when the recorded stage matches config, inputs, and on-disk outputs."""
    if manifest is None or manifest.config_hash != config_hash:
        return False
    record = manifest.stages.get(stage)
    if record is None or record.inputs != dict(sorted(inputs.items())):
        return False
    for path in output_paths.values():
        if not Path(path).exists():
            return False
    return hash_paths(root, output_paths) == record.outputs


def utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
