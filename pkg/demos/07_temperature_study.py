"""Where do learned temperatures end up for different starting points?"""
from dataclasses import replace

import numpy as np

from logavgexp.trainer import TrainConfig, temperature_trajectory_study

cfg = replace(TrainConfig(), epochs=10)
finals = temperature_trajectory_study([1.0, 4.0, 16.0], repeats=5, mode="shared", cfg=cfg, n_train=1000)
for t0, ts in finals.items():
    ts = np.concatenate(ts)
    print(f"t0={t0:<4g} final t: {np.round(ts, 3)}  median {np.median(ts):.3f}")
