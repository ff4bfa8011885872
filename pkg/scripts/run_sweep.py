"""Run the sweep fixture; extra arguments are passed on as flag overrides,
e.g. `python3 scripts/run_sweep.py --out results/sweep`."""

import sys
from pathlib import Path

from navierwall.cli import main

CONFIG = Path(__file__).with_name("configs") / "sweep_flat.cfg"

if __name__ == "__main__":
    sys.exit(main(["sweep", "--config", str(CONFIG), *sys.argv[1:]]))
