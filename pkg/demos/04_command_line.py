# %% [markdown]
# # The command-line pipeline on a synthetic fixture
#
# ``finineq simulate`` writes a fixture directory with a runnable config;
# each remaining stage reads and writes files in the run directory.

# %%
import json
import tempfile
from pathlib import Path

import pandas as pd

from finineq import cli

root = Path(tempfile.mkdtemp())
assert cli.run(["simulate", "--out", str(root), "--seed", "1", "--countries", "4"]) == 0
cfg = str(root / "config.json")
print(json.loads((root / "config.json").read_text()))

# %%
for stage in (["measures", "--interp", "both"], ["estimate", "--iterations", "600",
              "--burn-in", "300"], ["lp", "--interp", "both", "--horizons", "12"], ["report"]):
    assert cli.run([stage[0], "--config", cfg] + stage[1:]) == 0

# %%
print((root / "run" / "summary.txt").read_text())
pd.read_csv(root / "run" / "irf_gini_synthetic__financial__linear.csv").head()

# %%
manifest = json.loads((root / "run" / "manifest.json").read_text())
{stage: round(info["seconds"], 2) for stage, info in manifest["stages"].items()}
