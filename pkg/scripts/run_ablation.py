#!/usr/bin/env python3
"""Run the full observation-mapping x camera-regime ablation with defaults:
six variants, fc/rc training and testing, three seeds, 200 eval episodes per
cell. Resumable; artifacts land under runs/ablation/.
"""

import sys

from stereoalign.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "runs/ablation"
    sys.exit(main(["ablate", "--out", out]))
