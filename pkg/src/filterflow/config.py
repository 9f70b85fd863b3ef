"""Line-oriented `key = value` configuration files and run manifests.

Every CLI flag has a config-file equivalent (the flag name with dashes as
underscores); flags override file values. A manifest records the resolved
configuration, inputs/outputs, seed, wall-clock duration, and artifact
checksums; re-running the same command reproduces identical checksums.
"""

from __future__ import annotations

import hashlib
import time
from pathlib import Path


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        out[key] = value.strip()
    return out


def read_config(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def coerce_like(value: str, template):
    """Parse a config string into the type of an argparse default."""
    if isinstance(template, bool):
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if isinstance(template, int):
        return int(value)
    if isinstance(template, float):
        return float(value)
    return value


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunManifest:
    """Collects a command's resolved settings and artifact checksums."""

    def __init__(self, command: str):
        self.command = command
        self.settings: dict[str, str] = {}
        self.inputs: list[str] = []
        self.artifacts: list[Path] = []
        self._start = time.monotonic()

    def record_settings(self, mapping: dict) -> None:
        for key, value in sorted(mapping.items()):
            self.settings[key] = str(value)

    def record_input(self, path) -> None:
        self.inputs.append(str(path))

    def record_artifact(self, path) -> None:
        self.artifacts.append(Path(path))

    def write(self, path) -> None:
        lines = [f"command = {self.command}"]
        for key, value in self.settings.items():
            lines.append(f"{key} = {value}")
        for p in self.inputs:
            lines.append(f"input = {p}")
        for p in self.artifacts:
            lines.append(f"artifact/{p.name} = {sha256_file(p)}")
        lines.append(f"duration_seconds = {time.monotonic() - self._start:.3f}")
        Path(path).write_text("\n".join(lines) + "\n")


def manifest_checksums(path) -> dict[str, str]:
    """The artifact/<name> = <sha256> entries of a manifest file."""
    entries = read_config(path)
    return {
        key.removeprefix("artifact/"): value
        for key, value in entries.items()
        if key.startswith("artifact/")
    }
