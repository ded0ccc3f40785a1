"""Run the fig1 experiment and write results/fig1.csv.

Usage: python3 scripts/fig1.py [--seed S] [--config FILE] [--out DIR] [...]
Any flag of `stackdeconv fig1` works here; the seed defaults to 7.
"""

import sys

from stackdeconv.cli import main

DEFAULT_SEED = "7"

if __name__ == "__main__":
    argv = ["fig1", *sys.argv[1:]]
    if "--seed" not in argv and "--config" not in argv:
        argv += ["--seed", DEFAULT_SEED]
    sys.exit(main(argv))
