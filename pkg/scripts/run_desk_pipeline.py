#!/usr/bin/env python3
"""Run the full desk-scale pipeline into a workdir and print the report."""

import argparse
import json
import sys
from pathlib import Path

from filagen.cli import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="runs/desk_pipeline")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rc = cli(["--workdir", args.workdir, "--desk-scale", "--seed", str(args.seed), "pipeline"])
    if rc != 0:
        sys.exit(rc)
    report = json.loads((Path(args.workdir) / "metrics_report.json").read_text())
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
