#!/usr/bin/env python3
"""Run the full experiment set (ratio table, size sweep, scaling) one CLI call at a time."""

import argparse
import subprocess
import sys
from pathlib import Path

ROOT_DIR = Path(__file__).resolve().parents[2]


def run_step(arguments, description):
    """Run one tmfgkit command and report the outcome."""
    print(f"🔄 Running {description}...")
    try:
        result = subprocess.run(
            [sys.executable, "-m", "tmfgkit", *arguments],
            cwd=ROOT_DIR,
            capture_output=True,
            text=True,
            check=True,
        )
        print(f"✅ {description} completed")
        if result.stdout:
            print(f"   Output: {result.stdout.strip()}")
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ {description} failed (exit {e.returncode})")
        if e.stderr:
            print(f"   Error: {e.stderr.strip()}")
        return False


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Reproduce the ratio tables and scaling fits.")
    parser.add_argument("--output-dir", default="results", help="Where JSON and Markdown reports go")
    parser.add_argument("--samples", type=int, default=20, help="Samples per distribution (default: 20)")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--timeseries", help="Optional returns file for the real-data windows")
    parser.add_argument("--quick", action="store_true", help="Small sizes for a smoke run")
    return parser.parse_args()


def main():
    args = parse_args()
    out = Path(args.output_dir)
    p_table = "100" if args.quick else "400"
    sweep = ["50", "100"] if args.quick else ["50", "300", "1200"]
    tmfg_sizes = ["50", "100", "200"] if args.quick else ["200", "500", "1000", "2000"]
    pmfg_sizes = ["50", "100"] if args.quick else ["100", "200", "400", "800"]
    common = ["--seed", str(args.seed), "--workers", str(args.workers)]

    steps = [
        (
            ["compare", "--p", p_table, "--samples", str(args.samples), *common,
             "--output", str(out / "ratios.json"), "--html"],
            "Relative performance table",
        ),
        (
            ["compare", "--distribution", "beta(0.5,3)", "--methods", "tmfg", "pmfg",
             "--sizes", *sweep, "--samples", "10", *common, "--output", str(out / "size-sweep.json")],
            "Size sweep for beta(0.5,3)",
        ),
        (
            ["bench", "--methods", "tmfg", "--sizes", *tmfg_sizes, *common,
             "--output", str(out / "bench-tmfg.json")],
            "TMFG scaling",
        ),
        (
            ["bench", "--methods", "pmfg", "--sizes", *pmfg_sizes, *common,
             "--output", str(out / "bench-pmfg.json")],
            "PMFG scaling",
        ),
    ]
    if args.timeseries:
        steps.append(
            (
                ["compare", "--timeseries", args.timeseries, *common, "--output", str(out / "real-windows.json")],
                "Real time-series windows",
            )
        )

    print("📊 EXPERIMENTS - Running all experiment steps")
    print("=" * 50)
    completed = 0
    for arguments, description in steps:
        if run_step(arguments, description):
            completed += 1
        print()

    print("=" * 50)
    print(f"📊 EXPERIMENTS COMPLETE: {completed}/{len(steps)} steps successful")
    if completed == len(steps):
        print("✅ All experiments completed successfully!")
        return 0
    print("⚠️  Some steps failed. Check the output above.")
    return 1


if __name__ == "__main__":
    sys.exit(main())
