"""Print a one-line-per-check table for one or more run directories.

usage: python scripts/summarize.py runs/cif runs/sweep
"""

import argparse
import json
from pathlib import Path


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("runs", nargs="+", type=Path)
    args = parser.parse_args()
    for run in args.runs:
        report = json.loads((run / "report.json").read_text())
        timings = run / "timings.json"
        total = sum(json.loads(timings.read_text()).values()) if timings.exists() else float("nan")
        print(f"{report['command']} ({run}): {'passed' if report['passed'] else 'FAILED'}, {total:.1f} s")
        for c in report["checks"]:
            print(f"  {'ok  ' if c['passed'] else 'FAIL'} {c['name']:<45} {c['value']:.3e}  / {c['threshold']:.3e}")
        for name, est in report["estimates"].items():
            print(f"  estimate {name:<36} {est['limit']:.5f} +- {est['error_bar']:.5f}")


if __name__ == "__main__":
    main()
