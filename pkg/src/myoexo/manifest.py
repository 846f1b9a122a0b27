"""Run-directory manifest: content hashes for every artifact so a finished
run can be verified for integrity later."""

from __future__ import annotations

import hashlib
import json
import os
import time

MANIFEST_NAME = "manifest.json"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(run_dir: str, code_version: str) -> dict:
    entries = {}
    for root, _, files in os.walk(run_dir):
        for name in sorted(files):
            if name == MANIFEST_NAME:
                continue
            path = os.path.join(root, name)
            rel = os.path.relpath(path, run_dir)
            entries[rel] = {"sha256": _sha256(path),
                            "bytes": os.path.getsize(path)}
    manifest = {
        "code_version": code_version,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "files": entries,
    }
    with open(os.path.join(run_dir, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def verify_manifest(run_dir: str) -> list[str]:
    """Re-hash every listed artifact; returns the mismatched/missing paths."""
    path = os.path.join(run_dir, MANIFEST_NAME)
    with open(path) as f:
        manifest = json.load(f)
    problems = []
    for rel, meta in manifest["files"].items():
        full = os.path.join(run_dir, rel)
        if not os.path.exists(full):
            problems.append(f"missing: {rel}")
        elif _sha256(full) != meta["sha256"]:
            problems.append(f"hash mismatch: {rel}")
    return problems
