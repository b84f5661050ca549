#!/usr/bin/env python3
"""Regenerate scenarios/demo.json from the bundled builder."""

import sys
from pathlib import Path

from mitsim.demo import write_demo_scenario

if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else str(
        Path(__file__).resolve().parent.parent / "scenarios" / "demo.json")
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    write_demo_scenario(target)
    print(f"wrote {target}")
