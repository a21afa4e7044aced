"""Optimizer contract, metrics identities, train/ablate/sweep behavior."""

import numpy as np
import pytest

from mufnet.data import gen_synth
from mufnet.encoders import StoreProvider, StubProvider
from mufnet.errors import ConfigError, ContractError, DivergenceError
from mufnet.fusion import FusionConfig, init_params, model_forward
from mufnet.metrics import Metrics, confusion, evaluate, f1_score
from mufnet.optim import AdamW, ParamGroup
from mufnet.tensor import Tensor2
from mufnet.train import (
    TrainConfig,
    ablate,
    read_rows_csv,
    sweep,
    train,
    write_rows_csv,
)


def desk_cfg(**kw):
    base = dict(dim=8, heads=2, mlp_hidden=8)
    base.update(kw)
    return FusionConfig(**base)


# ---------------------------------------------------------------------------
# AdamW
# ---------------------------------------------------------------------------


def test_adamw_zero_gradient_zero_decay_is_identity():
    p = Tensor2(np.array([[1.25, -3.5], [0.0, 2.0]]), requires_grad=True)
    before = p.data.copy()
    opt = AdamW(groups=[ParamGroup("g", {"p": p}, lr=0.1)], weight_decay=0.0)
    p.grad = np.zeros_like(p.data)
    for _ in range(5):
        opt.step()
    np.testing.assert_array_equal(p.data, before)


def test_adamw_single_step_matches_hand_rolled_update():
    p = Tensor2(np.array([[1.0]]), requires_grad=True)
    p.grad = np.array([[1.0]])
    opt = AdamW(groups=[ParamGroup("g", {"p": p}, lr=0.1)], weight_decay=0.0)
    opt.step()
    # hand-rolled: m_hat = v_hat = 1 after bias correction, so the update is
    # lr * 1 / (1 + eps)
    expected = 1.0 - 0.1 * 1.0 / (np.sqrt(1.0) + 1e-8)
    np.testing.assert_allclose(p.data[0, 0], expected, rtol=0, atol=1e-15)
    assert abs(p.data[0, 0] - 0.9) < 1e-8


def test_adamw_decoupled_decay_applied_before_update():
    p = Tensor2(np.array([[2.0]]), requires_grad=True)
    p.grad = np.array([[0.0]])
    opt = AdamW(groups=[ParamGroup("g", {"p": p}, lr=0.1)], weight_decay=0.5)
    opt.step()
    # zero gradient: only the decay factor acts
    np.testing.assert_allclose(p.data[0, 0], 2.0 * (1.0 - 0.1 * 0.5), atol=1e-15)


def test_adamw_frozen_group_untouched():
    p = Tensor2(np.array([[1.0, 2.0]]), requires_grad=True)
    before = p.data.copy()
    opt = AdamW(groups=[ParamGroup("frozen", {"p": p}, lr=0.1, frozen=True)])
    for step in range(7):
        p.grad = np.full_like(p.data, 3.0)
        opt.step()
    np.testing.assert_array_equal(p.data, before)


def test_adamw_rejects_nan_gradient_naming_parameter():
    p = Tensor2(np.array([[1.0]]), requires_grad=True)
    p.grad = np.array([[np.nan]])
    opt = AdamW(groups=[ParamGroup("g", {"muffm.fc1.weight": p}, lr=0.1)])
    with pytest.raises(DivergenceError, match="muffm.fc1.weight"):
        opt.step()


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def brute_force_counts(preds, actuals):
    tp = sum(1 for p, a in zip(preds, actuals) if p == 1 and a == 1)
    fp = sum(1 for p, a in zip(preds, actuals) if p == 1 and a == 0)
    tn = sum(1 for p, a in zip(preds, actuals) if p == 0 and a == 0)
    fn = sum(1 for p, a in zip(preds, actuals) if p == 0 and a == 1)
    return tp, fp, tn, fn


def test_confusion_matches_brute_force_recount():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 50))
        preds = rng.integers(0, 2, size=n).tolist()
        actuals = rng.integers(0, 2, size=n).tolist()
        m = confusion(zip(preds, actuals))
        assert (m.tp, m.fp, m.tn, m.fn) == brute_force_counts(preds, actuals)
        assert m.acc == (m.tp + m.tn) / n
        assert m.precision == (m.tp / (m.tp + m.fp) if m.tp + m.fp else 0.0)
        assert m.recall == (m.tp / (m.tp + m.fn) if m.tp + m.fn else 0.0)
        p, r = m.precision, m.recall
        assert m.f1 == (2 * p * r / (p + r) if p + r else 0.0)


def test_f1_consistency_with_published_precision_recall():
    # P = 0.8771, R = 0.9568 must give the published F1 = 91.52 at 2 decimals
    f1 = f1_score(0.8771, 0.9568)
    assert abs(f1 - 0.91527) < 0.0005
    assert round(100 * f1, 2) == pytest.approx(91.52, abs=0.005)


def test_perfect_classifier_metrics():
    cfg = desk_cfg()
    params = init_params(cfg, seed=1)
    prov = StubProvider(dim=8, global_seed=2)
    from mufnet.data import Manifest, Sample

    samples = []
    for i in range(12):
        streams = prov.get_streams(f"id-{i}", f"text {i}")
        label = model_forward(streams, params, cfg).label
        samples.append(Sample(f"id-{i}", f"text {i}", label, "test"))
    m = evaluate(params, cfg, Manifest(samples), "test", prov)
    assert (m.acc, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_evaluate_parallel_matches_serial(tiny_task, monkeypatch):
    manifest, prov = tiny_task
    cfg = desk_cfg()
    params = init_params(cfg, seed=2)
    serial = evaluate(params, cfg, manifest, "test", prov)
    monkeypatch.setenv("MUFNET_THREADS", "4")
    parallel = evaluate(params, cfg, manifest, "test", prov)
    assert (serial.tp, serial.fp, serial.tn, serial.fn) == \
        (parallel.tp, parallel.fp, parallel.tn, parallel.fn)


def test_optimizer_state_covers_only_model_parameters(tiny_task):
    # provider outputs are non-trainable inputs: no optimizer state may
    # ever be allocated beyond the named model parameters
    manifest, prov = tiny_task
    cfg = desk_cfg()
    tcfg = TrainConfig(epochs=1, batch_size=16, seed=3)
    from mufnet.train import make_optimizer

    params = init_params(cfg, tcfg.seed)
    opt = make_optimizer(params, tcfg)
    clip_group = [g for g in opt.groups if g.name == "clip"][0]
    assert clip_group.params == {}
    result = train(cfg, tcfg, manifest, prov)
    opt2 = make_optimizer(result.params, tcfg)
    allowed = {("fusion", name) for name in result.params.named()}
    for _ in range(2):
        result.params.zero_grads()
        opt2.step()
    assert set(opt2._m) <= allowed


def test_evaluate_rejects_empty_split():
    from mufnet.data import Manifest, Sample

    manifest = Manifest([Sample("a", "t", 0, "train")])
    with pytest.raises(ContractError, match="empty"):
        evaluate(init_params(desk_cfg(), 0), desk_cfg(), manifest, "test",
                 StubProvider(dim=8))


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_task():
    manifest, store = gen_synth(80, seed=13, dim=8)
    return manifest, StoreProvider(store)


def test_train_lr_zero_keeps_parameters_and_flat_loss(tiny_task):
    manifest, prov = tiny_task
    cfg = desk_cfg()
    tcfg = TrainConfig(epochs=3, batch_size=16, lr=0.0, weight_decay=0.01, seed=4)
    init = {k: t.data.copy() for k, t in init_params(cfg, 4).named().items()}
    result = train(cfg, tcfg, manifest, prov)
    for name, t in result.params.named().items():
        np.testing.assert_array_equal(t.data, init[name])
    losses = [rec.train_loss for rec in result.log]
    np.testing.assert_allclose(losses, losses[0], rtol=1e-12)


def test_train_is_deterministic(tiny_task):
    manifest, prov = tiny_task
    cfg = desk_cfg()
    tcfg = TrainConfig(epochs=2, batch_size=16, lr=5e-4, seed=21)
    r1 = train(cfg, tcfg, manifest, prov)
    r2 = train(cfg, tcfg, manifest, prov)
    assert [rec.train_loss for rec in r1.log] == [rec.train_loss for rec in r2.log]
    assert [rec.val_acc for rec in r1.log] == [rec.val_acc for rec in r2.log]
    for name, t in r1.params.named().items():
        np.testing.assert_array_equal(t.data, r2.params.named()[name].data)


def test_train_epochs_zero_returns_initialization(tiny_task):
    manifest, prov = tiny_task
    cfg = desk_cfg()
    tcfg = TrainConfig(epochs=0, batch_size=16, seed=30)
    result = train(cfg, tcfg, manifest, prov)
    init = init_params(cfg, 30).named()
    for name, t in result.params.named().items():
        np.testing.assert_array_equal(t.data, init[name].data)
    assert result.log == []
    assert result.best_epoch == -1


def test_train_selects_best_validation_epoch(tiny_task):
    manifest, prov = tiny_task
    cfg = desk_cfg()
    tcfg = TrainConfig(epochs=3, batch_size=16, lr=5e-3, seed=8)
    result = train(cfg, tcfg, manifest, prov)
    best = max(range(len(result.log)), key=lambda i: (result.log[i].val_acc, -i))
    assert result.best_epoch == result.log[best].epoch
    final = evaluate(result.params, cfg, manifest, "validation", prov)
    assert final.acc == result.log[best].val_acc


# ---------------------------------------------------------------------------
# ablation + sweep harnesses
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def harness_rows(tiny_task):
    manifest, prov = tiny_task
    cfg = desk_cfg()
    tcfg = TrainConfig(epochs=1, batch_size=16, seed=5)
    return ablate(cfg, tcfg, manifest, prov), (cfg, tcfg, manifest, prov)


def test_ablate_emits_all_nine_variants(harness_rows):
    rows, _ = harness_rows
    assert [row["variant"] for row in rows] == [
        "full", "no_rclm", "no_muffm", "no_sfim", "no_clip_vffm",
        "no_rclm_image", "no_rclm_text", "no_sfim_image", "no_sfim_text",
    ]
    for row in rows:
        for key in ("acc", "precision", "recall", "f1"):
            assert 0.0 <= row[key] <= 1.0


def test_ablate_full_row_equals_standalone_run(harness_rows):
    rows, (cfg, tcfg, manifest, prov) = harness_rows
    result = train(cfg, tcfg, manifest, prov)
    m = evaluate(result.params, cfg, manifest, "test", prov)
    full = rows[0]
    assert (full["acc"], full["precision"], full["recall"], full["f1"]) == \
        (m.acc, m.precision, m.recall, m.f1)
    assert (full["tp"], full["fp"], full["tn"], full["fn"]) == (m.tp, m.fp, m.tn, m.fn)


def test_sweep_grid_row_count_and_csv_round_trip(tiny_task, tmp_path):
    manifest, prov = tiny_task
    cfg = desk_cfg()
    tcfg = TrainConfig(epochs=1, batch_size=16, seed=6)
    grid = [round(0.1 * i, 1) for i in range(11)]
    rows = sweep("alpha", grid, cfg, tcfg, manifest, prov)
    assert len(rows) == 11
    path = tmp_path / "sweep.csv"
    write_rows_csv(path, rows, "alpha")
    parsed = read_rows_csv(path, "alpha")
    assert len(parsed) == 11
    for orig, back in zip(rows, parsed):
        assert float(back["alpha"]) == orig["alpha"]
        for key in ("acc", "precision", "recall", "f1"):
            assert back[key] == orig[key]
        for key in ("tp", "fp", "tn", "fn"):
            assert back[key] == orig[key]


def test_sweep_gamma_zero_equals_detached_pathways(tiny_task):
    # at gamma = 0 the multiplex output is the CLIP row, so training the
    # full variant must match training with the relational pathway removed
    manifest, prov = tiny_task
    tcfg = TrainConfig(epochs=2, batch_size=16, seed=9)
    rows = sweep("gamma", [0.0], desk_cfg(), tcfg, manifest, prov)
    detached = train(desk_cfg(variant="no_rclm", gamma=0.0), tcfg, manifest, prov)
    m = evaluate(detached.params, detached.cfg, manifest, "test", prov)
    assert rows[0]["acc"] == m.acc
    assert rows[0]["f1"] == m.f1


def test_sweep_rejects_bad_parameter_and_grid(tiny_task):
    manifest, prov = tiny_task
    with pytest.raises(ConfigError):
        sweep("delta", [0.5], desk_cfg(), TrainConfig(epochs=0), manifest, prov)
    with pytest.raises(ConfigError):
        sweep("alpha", [1.5], desk_cfg(), TrainConfig(epochs=0), manifest, prov)
