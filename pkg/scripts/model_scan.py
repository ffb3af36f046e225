"""Classify the three built-in Pauli models and print their summaries.

Usage: python3 scripts/model_scan.py [--out out/models]
"""
import argparse
from pathlib import Path

from ksdiv.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/models")
    args = ap.parse_args()
    for name in ("erika", "modified", "dephasing"):
        out = Path(args.out) / name
        print(f"== {name}")
        code = main(["classify", "--config", str(CONFIGS / f"{name}.ini"), "--out", str(out)])
        if code:
            raise SystemExit(code)


if __name__ == "__main__":
    run()
