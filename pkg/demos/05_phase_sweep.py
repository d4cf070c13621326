"""
Phase diagram along the ground-state ray
========================================

Sweep the amplitude of Nehari-scaled ground-state data through the harness
and tabulate the outcome: below the Nehari point the energy decays, above it
the solution blows up, and blow-up happens exactly for the runs that enter
the unstable set below ``d``.
"""

# %%
import sys
import tempfile
from pathlib import Path

from conewave.harness import parse_sweep_config, sweep

config = Path(__file__).with_name("configs") / "amplitude_sweep.cfg"
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="phase_"))

# %%
# The sweep runs in worker processes but writes all files from the parent,
# so the table is byte-identical from one invocation to the next.
path = sweep(parse_sweep_config(config.read_text()), out)


def cell(text):
    try:
        return f"{float(text):.4g}"
    except ValueError:
        return text


header, *body = [line.split(",") for line in path.read_text().splitlines()]
rows = [header] + [[cell(c) for c in r] for r in body]
widths = [max(len(r[k]) for r in rows) for k in range(len(header))]
for r in rows:
    print("  ".join(c.ljust(w) for c, w in zip(r, widths)))
print("written to", path)
