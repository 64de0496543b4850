import sys
import time

import numpy as np

from emergemac.env import SimConfig
from emergemac.harness import evaluate_baseline
from emergemac.marl import TrainConfig, eval_seeds, train_run

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1
sim = SimConfig(total_sdus=1, tbler=0.1)
cfg = TrainConfig(episodes_train=20000, episodes_eval=200, episodes_test=200,
                  eval_interval=1000, ablation="full")
t0 = time.perf_counter()


def prog(p):
    print(f"ep {p.train_episode}: goodput {p.mean_goodput:.3f} delivery {p.mean_delivery_rate:.3f} "
          f"dur {p.mean_duration:.1f} ({time.perf_counter() - t0:.0f}s)", flush=True)


learner, trace = train_run(sim, cfg, seed=seed, progress=prog)
for name, role in learner.roles.items():
    logits_scale = max(np.abs(w).max() for w in role.actor.weights)
    print(name, "actor max|w|", round(float(logits_scale), 3))
g, r, d = evaluate_baseline(sim, eval_seeds(seed, 200))
print(f"baseline: goodput {np.mean(g):.3f} delivery {np.mean(r):.3f} dur {np.mean(d):.1f}")
