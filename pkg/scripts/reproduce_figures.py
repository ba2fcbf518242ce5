#!/usr/bin/env python3
"""Write the three figure CSVs (and optionally a validation report) into one directory.

    python3 scripts/reproduce_figures.py results/ [--config cfg.yaml] [--validate]
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from rwanon.experiments import ExperimentManifest, run_fig1, run_fig2, run_fig3, run_validate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", type=Path)
    ap.add_argument("--config")
    ap.add_argument("--validate", action="store_true", help="also run the Monte Carlo checks")
    args = ap.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    base = ExperimentManifest.load(args.config)
    for name, runner in (("fig1", run_fig1), ("fig2", run_fig2), ("fig3", run_fig3)):
        out = args.outdir / f"{name}.csv"
        runner(replace(base, experiment=name, out=str(out)))
        print(f"wrote {out}")
    if args.validate:
        rep = run_validate(replace(base, experiment="validate"))
        (args.outdir / "validate.csv").write_text(rep.to_csv())
        print(rep.to_csv(), end="")
        return 0 if rep.ok else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
