"""Run manifest: content hashes of every stage's inputs and outputs.

Stage skipping is keyed on content hashes (never timestamps): a stage is a
no-op when its recorded input hashes, config hash, and output hashes all
still match. ``verify`` re-hashes every listed output.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path


class MissingUpstreamArtifact(Exception):
    def __init__(self, stage: str, path: str):
        super().__init__(f"stage {stage!r} needs missing artifact {path}")
        self.stage = stage
        self.path = path


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class Manifest:
    def __init__(self, path: Path):
        self.path = Path(path)
        self.stages: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                self.stages = json.load(fh).get("stages", {})

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump({"stages": self.stages}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def require_inputs(self, stage: str, paths: list[Path]) -> dict[str, str]:
        hashes = {}
        for p in paths:
            if not Path(p).exists():
                raise MissingUpstreamArtifact(stage, str(p))
            hashes[str(p)] = file_sha256(p)
        return hashes

    def can_skip(self, stage: str, input_hashes: dict[str, str], config_hash: str) -> bool:
        entry = self.stages.get(stage)
        if not entry:
            return False
        if entry.get("inputs") != input_hashes or entry.get("config_hash") != config_hash:
            return False
        for out_path, out_hash in entry.get("outputs", {}).items():
            if not Path(out_path).exists() or file_sha256(out_path) != out_hash:
                return False
        return True

    def record(
        self,
        stage: str,
        input_hashes: dict[str, str],
        config_hash: str,
        outputs: list[Path],
        duration_s: float,
        skipped: bool = False,
    ) -> None:
        if skipped:
            entry = dict(self.stages[stage])
            entry["skipped"] = True
            self.stages[stage] = entry
            return
        self.stages[stage] = {
            "inputs": input_hashes,
            "config_hash": config_hash,
            "outputs": {str(p): file_sha256(p) for p in outputs},
            "duration_s": round(duration_s, 3),
            "skipped": False,
        }

    def verify(self) -> list[str]:
        """Return a list of problems; empty means every output hash matches."""
        problems = []
        for stage, entry in sorted(self.stages.items()):
            for out_path, out_hash in entry.get("outputs", {}).items():
                if not Path(out_path).exists():
                    problems.append(f"{stage}: missing {out_path}")
                elif file_sha256(out_path) != out_hash:
                    problems.append(f"{stage}: hash mismatch {out_path}")
        return problems
