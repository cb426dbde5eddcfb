#!/usr/bin/env python3
"""
Run the checked-in experiments under experiments/ through main.py, one
subprocess per command, and stop at the first failure.
"""

import argparse
import subprocess
import sys
from pathlib import Path
from typing import List, Optional, Tuple

EXPERIMENTS_DIR = Path(__file__).resolve().parent / "experiments"

# (command, config file) in run order
EXPERIMENTS: List[Tuple[str, str]] = [
    ("gen-data", "lih_statevector.toml"),
    ("train", "lih_statevector.toml"),
    ("train", "lih_qasm.toml"),
    ("sweep", "lih_sweep.toml"),
    ("sweep", "lih_sweep_qasm.toml"),
    ("train", "h2o.toml"),
    ("train", "h2o_qasm.toml"),
    ("train", "hconh2.toml"),
    ("train", "hconh2_qasm.toml"),
    ("spectrum", "spectrum.toml"),
]


def check_requirements() -> bool:
    """Check if required packages are installed"""
    try:
        import numpy  # noqa: F401
        import pandas  # noqa: F401
        import pydantic  # noqa: F401
        import tomli_w  # noqa: F401
        from dotenv import load_dotenv  # noqa: F401
        print("[SUCCESS] All required packages are installed")
        return True
    except ImportError as e:
        print(f"[ERROR] Missing required package: {e}")
        print("Please run: pip install -r requirements.txt")
        return False


def run_experiment(command: str, config: Path, out: Optional[str]) -> int:
    args = [sys.executable, str(Path(__file__).resolve().parent / "main.py"), command, "--config", str(config)]
    if out:
        args += ["--out", out]
    print(f"[INFO] {command} {config.name}")
    return subprocess.run(args).returncode


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Run the checked-in QELM experiments")
    parser.add_argument("--out", default=None, help="Output directory for every run")
    parser.add_argument("--only", nargs="*", default=None, help="Config file names to run (default: all)")
    args = parser.parse_args(argv)

    if not check_requirements():
        return 1

    selected = [(cmd, name) for cmd, name in EXPERIMENTS if args.only is None or name in args.only]
    for command, name in selected:
        config = EXPERIMENTS_DIR / name
        if not config.exists():
            print(f"[ERROR] Missing config {config}")
            return 1
        code = run_experiment(command, config, args.out)
        if code != 0:
            print(f"[ERROR] {command} {name} exited with {code}")
            return code
    print(f"[SUCCESS] {len(selected)} experiment run(s) finished")
    return 0


if __name__ == "__main__":
    sys.exit(main())
