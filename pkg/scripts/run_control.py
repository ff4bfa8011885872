"""Run the control fixture; extra arguments are passed on as flag overrides,
e.g. `python3 scripts/run_control.py --out results/control`."""

import sys
from pathlib import Path

from navierwall.cli import main

CONFIG = Path(__file__).with_name("configs") / "control_bump.cfg"

if __name__ == "__main__":
    sys.exit(main(["control", "--config", str(CONFIG), *sys.argv[1:]]))
