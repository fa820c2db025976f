"""Run manifests: resolved config, seeds, input hashes, artifact paths.

Every CLI command writes exactly one ``manifest.json`` into its output
directory. Artifacts produced by a command are byte-reproducible from the
manifest inputs; the manifest itself additionally records wall-clock
timings, which naturally differ between reruns.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import wiae


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def write_manifest(out_dir, command, config, seed, inputs, artifacts, timings):
    """Assemble and write manifest.json; returns the manifest dict."""
    out_dir = Path(out_dir)
    manifest = {
        "tool": "wiae",
        "version": wiae.__version__,
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "artifacts": {name: str(Path(p).name) for name, p in artifacts.items()},
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
