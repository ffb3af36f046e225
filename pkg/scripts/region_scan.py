"""Render the P / KS / CP regions of Pauli-diagonal maps to CSV and SVG.

Usage: python3 scripts/region_scan.py [--resolution 201] [--out out/region]
"""
import argparse
import time
from pathlib import Path

from ksdiv.cli import RegionScanConfig, cmd_region_scan


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=201)
    ap.add_argument("--out", default="out/region")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    cmd_region_scan(RegionScanConfig(resolution=args.resolution), out)
    print(f"wrote {out / 'region.csv'} and {out / 'region.svg'} in {time.perf_counter() - start:.2f} s")


if __name__ == "__main__":
    run()
