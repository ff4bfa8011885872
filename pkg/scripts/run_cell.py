"""Run the cell fixture; extra arguments are passed on as flag overrides,
e.g. `python3 scripts/run_cell.py --out results/cell`."""

import sys
from pathlib import Path

from navierwall.cli import main

CONFIG = Path(__file__).with_name("configs") / "cell_flat.cfg"

if __name__ == "__main__":
    sys.exit(main(["cell", "--config", str(CONFIG), *sys.argv[1:]]))
