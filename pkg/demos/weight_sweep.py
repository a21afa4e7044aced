"""Walkthrough: grid-sweep one mixing weight.

gamma balances the gated multiplex branch against the CLIP-view row. At
gamma = 0 the relational pathway is disconnected, so accuracy collapses to
whatever the CLIP-view row alone supports within the budget.
"""

from mufnet import FusionConfig, StoreProvider, gen_synth
from mufnet.train import TrainConfig, sweep

manifest, store = gen_synth(600, seed=9, dim=8)
provider = StoreProvider(store)
cfg = FusionConfig(dim=8, heads=2, mlp_hidden=8)
tcfg = TrainConfig(epochs=4, batch_size=32, lr=5e-4, seed=9)

rows = sweep("gamma", [0.0, 0.25, 0.5, 0.75, 1.0], cfg, tcfg, manifest, provider)
print(f"{'gamma':>6s} {'acc':>6s} {'f1':>6s}")
for row in rows:
    print(f"{row['gamma']:6.2f} {row['acc']:6.3f} {row['f1']:6.3f}")
