"""
Driving everything from the command line
========================================

The same pipeline through the ``clfreqid`` entry point, using the bundled
benchmark configuration with a reduced run count.
"""

# %%
import tempfile
from pathlib import Path

from clfreqid import cli

out = Path(tempfile.mkdtemp())
for command in ("simulate", "estimate", "theory", "mc", "report"):
    code = cli.main([command, "--config", "paper.cfg", "--out", str(out), "--runs", "200"])
    print(command, "->", code)

# %%
# fig2.csv holds the data for the variance comparison plot.
rows = [line for line in (out / "fig2.csv").read_text().splitlines() if not line.startswith("#")]
for line in rows[:8]:
    print(line[:110])
