"""Walkthrough: the 9-variant ablation harness on a small budget.

Every variant trains with the same seed and budget; the full row always
matches a standalone training run because the harness adds nothing of its
own around train().
"""

from mufnet import FusionConfig, StoreProvider, gen_synth
from mufnet.train import TrainConfig, ablate

manifest, store = gen_synth(400, seed=5, dim=8)
provider = StoreProvider(store)
cfg = FusionConfig(dim=8, heads=2, mlp_hidden=8)
tcfg = TrainConfig(epochs=3, batch_size=32, lr=5e-4, seed=5)

rows = ablate(cfg, tcfg, manifest, provider)
print(f"{'variant':15s} {'acc':>6s} {'p':>6s} {'r':>6s} {'f1':>6s}")
for row in rows:
    print(f"{row['variant']:15s} {row['acc']:6.3f} {row['precision']:6.3f} "
          f"{row['recall']:6.3f} {row['f1']:6.3f}")
