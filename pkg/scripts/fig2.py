"""Run the fig2 experiment and write results/fig2.csv.

Usage: python3 scripts/fig2.py [--seed S] [--config FILE] [--out DIR] [...]
Any flag of `stackdeconv fig2` works here; the seed defaults to 7.
"""

import sys

from stackdeconv.cli import main

DEFAULT_SEED = "7"

if __name__ == "__main__":
    argv = ["fig2", *sys.argv[1:]]
    if "--seed" not in argv and "--config" not in argv:
        argv += ["--seed", DEFAULT_SEED]
    sys.exit(main(argv))
