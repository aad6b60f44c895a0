"""Shared helpers for the test suite."""

import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np

GOLDEN = Path(__file__).parent / "golden" / "solve_hashes.json"

FAST_SOLVE = """
grid.L = 20
grid.N = 64
params.b = 2
params.s = 2
solver.dt = 0.01
solver.T = 0.1
solver.stride = 5
initial.family = gaussian
initial.amp = 0.3
initial.width = 2
initial.center = 0
"""


def tree_digest(root: Path) -> str:
    acc = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            acc.update(path.relative_to(root).as_posix().encode())
            acc.update(path.read_bytes())
    return acc.hexdigest()


def platform_profile() -> str:
    return (
        f"py{sys.version_info.major}.{sys.version_info.minor}"
        f"-np{np.__version__}-{sys.platform}-{platform.machine()}"
    )


def check_golden(key: str, digest: str):
    """Compare against the stored hash for this platform profile.

    Unknown profiles self-seed so the regression file can be grown on a
    new machine without failing its first run.
    """
    GOLDEN.parent.mkdir(exist_ok=True)
    stored = json.loads(GOLDEN.read_text()) if GOLDEN.exists() else {}
    full_key = f"{platform_profile()}:{key}"
    if full_key in stored:
        assert stored[full_key] == digest, f"golden hash changed for {full_key}"
    else:
        stored[full_key] = digest
        GOLDEN.write_text(json.dumps(stored, sort_keys=True, indent=2) + "\n")
