"""Walkthrough: verify the autodiff core against finite differences.

Builds the d = 8 / 2-head model on stub features, backpropagates one batch
loss, then perturbs a few parameters by hand to show the analytic gradients
match central differences.
"""

import numpy as np

from mufnet import FusionConfig, GradTape, StubProvider, init_params
from mufnet.fusion import batch_loss, sample_loss

cfg = FusionConfig(dim=8, heads=2, mlp_hidden=8)
params = init_params(cfg, seed=1)
provider = StubProvider(dim=8, global_seed=2)
samples = [(provider.get_streams(f"post-{i}", f"caption {i}"), i % 2) for i in range(4)]


def loss_value():
    return float(np.mean([sample_loss(s, y, params, cfg).item() for s, y in samples]))


params.zero_grads()
with GradTape() as tape:
    loss = batch_loss([sample_loss(s, y, params, cfg) for s, y in samples])
tape.backward(loss)
print(f"batch loss: {loss.item():.6f}")

h = 1e-4
print(f"{'parameter':24s} {'analytic':>12s} {'numeric':>12s} {'rel err':>10s}")
for name in ("classifier.weight", "muffm.fc2.weight", "rclm_v.sa.wv", "sfim.proj_t.weight"):
    tensor = params.named()[name]
    idx = (0, 0)
    orig = tensor.data[idx]
    tensor.data[idx] = orig + h
    f_plus = loss_value()
    tensor.data[idx] = orig - h
    f_minus = loss_value()
    tensor.data[idx] = orig
    numeric = (f_plus - f_minus) / (2 * h)
    analytic = tensor.grad[idx]
    rel = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-12)
    print(f"{name:24s} {analytic:12.3e} {numeric:12.3e} {rel:10.2e}")
