"""The demand benchmark at a reduced scale.

Prices are confounded by demand shocks. The full benchmark uses 20 seeds and several
sample sizes (see tests/test_acceptance.py); this takes a couple of minutes.
"""
# %%
import numpy as np

from causalbridge.harness import ExperimentConfig, run_demand, write_report
from causalbridge.plots import emit_plots

cfg = (ExperimentConfig.default("demand", seeds=(0, 1, 2))
       .with_section("demand", n_values=(1000,))
       .with_section("train", max_epochs=300))
report = run_demand(cfg)

# %% out-of-sample MSE against the structural truth, per method and seed
mse = {}
for method, n, seed, value, *_ in report.tables["mse"].rows:
    mse.setdefault(method, []).append(value)
for method, vals in mse.items():
    print(f"{method:7s} median MSE {np.median(vals):8.1f}   {np.round(vals, 1)}")

# %% CSVs, config and SVG figures
out = write_report(report, "runs/demo_demand")
print([p.name for p in emit_plots(report, out)])
