"""Regenerate the golden CLI outputs.

Run from the repository root after an intentional behaviour change:

    python tests/golden/generate.py

and review the diff before committing.
"""
import shutil
import sys
from pathlib import Path

from fockscan.cli import main

HERE = Path(__file__).parent

JOBS = [
    ("validate-gates", "gates.yaml", "gates"),
    ("mc-dm", "mc.yaml", "mc"),
    ("snr-sweep", "sweep.yaml", "sweep"),
    ("simulate-cycle", "cycle.yaml", "cycle"),
    ("scan-rate", "scan.yaml", "scan"),
    ("exclusion", "exclusion.yaml", "exclusion"),
    ("reach", "reach.yaml", "reach"),
]


def regenerate():
    for command, config, outname in JOBS:
        out = HERE / "expected" / outname
        if out.exists():
            shutil.rmtree(out)
        out.mkdir(parents=True)
        code = main([
            command, "--config", str(HERE / "configs" / config),
            "--out", str(out), "--jobs", "1",
        ])
        if code != 0:
            raise SystemExit(f"{command} exited with {code}")
        print(command, "->", sorted(p.name for p in out.iterdir()))


if __name__ == "__main__":
    sys.exit(regenerate())
