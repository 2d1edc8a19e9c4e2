"""When does spatial score aggregation shrink prediction sets?

Neighboring pixels in a segmentation-like problem share their class, so
their non-conformity scores carry shared structure plus independent noise.
Averaging each label's score field over a small neighborhood before
calibration suppresses that noise, which lowers the calibration threshold
and trims the sets -- without touching the coverage guarantee.

The effect needs spatial correlation to exploit: this demo uses a fixture
whose class interiors are confidently predicted while band-shaped regions
along class boundaries stay genuinely ambiguous between two labels.  The
paired runs below share splits and randomization draws, so each per-trial
delta isolates the aggregation effect.
"""

import numpy as np

from gridcp import (
    AggregationConfig,
    RunConfig,
    ScoreFunctionConfig,
    SynthConfig,
    generate_synthetic,
    run_experiment,
)

grid, labels = generate_synthetic(SynthConfig(
    smoothness=8.0, signal=180.0, ambiguity=0.4, noise_seed=11, label_seed=12))
cfg = RunConfig(
    alpha=0.05,
    score=ScoreFunctionConfig(kind="aps"),
    sacp=AggregationConfig(blend=0.5, iterations=1),
    trials=30,
    seed=101,
)
summary = run_experiment(grid, labels, cfg)

deltas = summary.size_deltas()
wins = sum(d < 0 for d in deltas)
print(f"fixture: {grid.height}x{grid.width}, {grid.num_classes} classes, "
      f"argmax accuracy {summary.mean('standard', 'oa'):.3f}")
print(f"alpha = {cfg.alpha}, {cfg.trials} paired trials\n")
print(f"standard pipeline: coverage {summary.mean('standard', 'coverage'):.4f}  "
      f"mean size {summary.mean('standard', 'mean_size'):.3f}")
print(f"spatial pipeline:  coverage {summary.mean('spatial', 'coverage'):.4f}  "
      f"mean size {summary.mean('spatial', 'mean_size'):.3f}")
print(f"\naggregation shrank the sets in {wins}/{cfg.trials} trials "
      f"(mean delta {np.mean(deltas):+.4f} labels/pixel)")
