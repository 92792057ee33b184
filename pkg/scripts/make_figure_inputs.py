#!/usr/bin/env python3
"""Regenerate the CSV inputs consumed by the figure package.

Every table is produced through the roughsabr CLI so the files match exactly
what an end user would get; this script only renames the fixed-name outputs.
Defaults reproduce the committed fixtures (small Monte Carlo runs so the
files stay light); pass --paths/--steps for production-scale tables.
"""

import argparse
import shutil
import sys
import tempfile
from pathlib import Path

from roughsabr.cli import main as cli_main

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_OUT = REPO_ROOT / "figures" / "fixtures"


def run_cli(args, out_dir: Path, produced: str, dest: Path) -> None:
    code = cli_main([*args, "--out", str(out_dir)])
    if code != 0:
        sys.exit(f"CLI failed with exit {code}: {' '.join(args)}")
    dest.parent.mkdir(parents=True, exist_ok=True)
    shutil.move(out_dir / f"{produced}.csv", dest)
    shutil.move(out_dir / f"{produced}.meta.json",
                dest.with_suffix(".meta.json"))
    print(f"wrote {dest}")


def ode_jobs():
    # f for the two explicitly solvable exponents, one pair per correlation
    for rho, tag in ((-0.9, "rm09"), (0.9, "rp09")):
        for H, htag in ((0.0, "h000"), (0.5, "h050")):
            yield (f"fig1_{tag}_{htag}",
                   ["ode-solve", "--H", str(H), "--rho", str(rho),
                    "--ymax", "1.0"])
    # f across H for two correlations
    for rho, tag in ((0.0, "rp00"), (-0.9, "rm09")):
        for H, htag in ((0.05, "h005"), (0.2, "h020"), (0.5, "h050")):
            yield (f"fig2_{tag}_{htag}",
                   ["ode-solve", "--H", str(H), "--rho", str(rho),
                    "--ymax", "1.0"])
    # numerical f against the closed-form approximation
    for H, htag in ((0.05, "h005"), (0.25, "h025")):
        for source in ("ode", "approx"):
            extra = ["--approx"] if source == "approx" else []
            yield (f"fig3_{htag}_{source}",
                   ["ode-solve", "--H", str(H), "--rho", "-0.9",
                    "--ymax", "1.0", *extra])


def smile_jobs(paths: int, steps: int, paths7: int, steps7: int):
    model = ["--eta", "1.0", "--spot", "1.0", "--yrange=-1:1:21"]
    for fig, H in (("fig4", 0.05), ("fig5", 0.1), ("fig6", 0.2)):
        for rho, tag in ((-0.9, "rm09"), (0.0, "rp00")):
            yield (f"{fig}_h{H:.2f}".replace("0.", "0") + f"_{tag}",
                   ["validate", "--H", str(H), "--rho", str(rho), *model,
                    "--taus", "0.125,0.25", "--paths", str(paths),
                    "--steps", str(steps), "--seed", "42"])
    yield ("fig7_power",
           ["validate", "--H", "0.05", "--rho", "-0.9", *model,
            "--beta", "power:0.5", "--taus", "0.125",
            "--paths", str(paths7), "--steps", str(steps7), "--seed", "7"])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fixtures-dir", type=Path, default=DEFAULT_OUT)
    parser.add_argument("--paths", type=int, default=4000,
                        help="MC paths for the smile tables")
    parser.add_argument("--steps", type=int, default=32,
                        help="MC time steps for the smile tables")
    parser.add_argument("--paths7", type=int, default=8000,
                        help="MC paths for the sqrt-backbone table")
    parser.add_argument("--steps7", type=int, default=64,
                        help="MC time steps for the sqrt-backbone table")
    args = parser.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        scratch = Path(tmp)
        for i, (name, cli_args) in enumerate(ode_jobs()):
            out = scratch / f"ode{i}"
            out.mkdir()
            run_cli(cli_args, out, "ode", args.fixtures_dir / f"{name}.csv")
        for i, (name, cli_args) in enumerate(
                smile_jobs(args.paths, args.steps, args.paths7, args.steps7)):
            out = scratch / f"val{i}"
            out.mkdir()
            run_cli(cli_args, out, "validate",
                    args.fixtures_dir / f"{name}.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
