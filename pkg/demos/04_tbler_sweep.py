"""Goodput vs TBLER for the contention-free baseline, with 95% CIs.

Writes the same tidy CSV the `emergemac sweep` subcommand emits. Checkpoints
of trained protocols can be swept the same way via harness.sweep_tbler with a
campaign's records.
"""

from emergemac import Campaign, SimConfig, TrainConfig
from emergemac.harness import sweep_tbler, write_sweep_csv

campaign = Campaign(
    sim_config=SimConfig(),
    train_config=TrainConfig(episodes_test=2000),
    repetitions=1,
    base_seed=0,
    out_dir="sweep_demo",
    sdus_grid=(2,),
    tbler_grid=(1e-1, 1e-2, 1e-3, 1e-4),
)

rows = sweep_tbler(campaign, episodes=2000, total_sdus=2)
print(f"{'tbler':>8}  {'goodput':>8}  {'ci95':>7}  {'delivery':>9}")
for row in rows:
    print(f"{row['tbler']:>8g}  {row['mean_goodput']:>8.4f}  "
          f"±{row['ci95_goodput']:.4f}  {row['mean_delivery_rate']:>9.5f}")

write_sweep_csv("baseline_sweep.csv", rows)
print("\nwrote baseline_sweep.csv")
