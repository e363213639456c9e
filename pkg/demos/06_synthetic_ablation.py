"""
The staged-configuration ablation on synthetic scenes
=====================================================

Generate a corpus of moving-disc scenarios with realistic corruption
(boundary jitter, dropped frames, distractor swaps, garbled words,
hallucinated masks on absent targets), then run the four pipeline
configurations over it.  Each added stage should buy a higher final
score.
"""

import tempfile
from pathlib import Path

from refvos.synth import default_scenarios, default_variants, format_ablation, run_ablation

workdir = Path(tempfile.mkdtemp(prefix="refvos_demo_"))

# 30 scenarios keeps this quick; the shipped tests use 50+.
scenarios = default_scenarios(30, base_seed=0)
present = sum(1 for s in scenarios if s.gt_present)
print(f"{len(scenarios)} scenarios, {present} with the target present")

report = run_ablation(default_variants(), scenarios, workdir)
print()
print(format_ablation(report))
