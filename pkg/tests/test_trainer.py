import logging
import math

import numpy as np
import pytest

from dicot.exceptions import ContractError, InvalidPartition, NumericsError, ShapeError
from dicot.schemas import (
    EncoderConfig,
    LossConfig,
    OptimizerConfig,
    OptimizerState,
    PartitionParams,
    PositiveMode,
    SplitMode,
    SyntheticSpec,
    TimeSeriesBatch,
)
from dicot.services import data_service, encoder_service, eval_service, partition_service, trainer_service


def _quick_run(dataset, encoder, iters=4, seed=1, mode=PositiveMode.preceding):
    return trainer_service.pretrain(
        dataset,
        encoder,
        PartitionParams(k_min=2, k_max=4),
        LossConfig(tau=0.5, positive_mode=mode),
        OptimizerConfig(total_iters=iters, batch_size=6, seed=seed, base_lr=1e-3),
    )


def test_lr_schedule_landmarks():
    cfg = OptimizerConfig()
    W = trainer_service.warmup_iters(cfg)
    assert W == 150
    assert trainer_service.lr_at(0, cfg) == 0.0
    assert trainer_service.lr_at(W, cfg) == pytest.approx(3e-4, rel=1e-15)
    assert trainer_service.lr_at(cfg.total_iters, cfg) == pytest.approx(0.0, abs=1e-20)
    assert trainer_service.lr_at(W // 2, cfg) == pytest.approx(1.5e-4)


def test_lr_is_monotone_after_warmup():
    cfg = OptimizerConfig(total_iters=200)
    lrs = [trainer_service.lr_at(t, cfg) for t in range(20, 201)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_adamw_pure_decay():
    cfg = OptimizerConfig(base_lr=0.1, weight_decay=0.01)
    params, _ = trainer_service.adamw_step({"p": np.array([1.0])}, {"p": np.array([0.0])}, OptimizerState(), 0.1, cfg)
    assert params["p"][0] == pytest.approx(0.999, rel=1e-12)


def test_adamw_first_step_is_bias_corrected():
    cfg = OptimizerConfig(base_lr=0.1, weight_decay=0.0, eps=1e-12)
    params, state = trainer_service.adamw_step({"p": np.zeros(2)}, {"p": np.ones(2)}, OptimizerState(), 0.1, cfg)
    np.testing.assert_allclose(params["p"], [-0.1, -0.1], rtol=1e-9)
    assert state.t == 1


def test_adamw_is_pure_and_deterministic():
    cfg = OptimizerConfig()
    p = {"w": np.array([0.5, -0.5])}
    g = {"w": np.array([0.1, 0.2])}
    state = OptimizerState()
    first = trainer_service.adamw_step(p, g, state, 1e-3, cfg)
    second = trainer_service.adamw_step(p, g, state, 1e-3, cfg)
    np.testing.assert_array_equal(first[0]["w"], second[0]["w"])
    np.testing.assert_array_equal(p["w"], [0.5, -0.5])
    assert state.t == 0


def test_adamw_rejects_bad_gradients():
    cfg = OptimizerConfig()
    with pytest.raises(NumericsError):
        trainer_service.adamw_step({"w": np.zeros(2)}, {"w": np.array([np.nan, 0.0])}, OptimizerState(), 1e-3, cfg)
    with pytest.raises(ShapeError):
        trainer_service.adamw_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, OptimizerState(), 1e-3, cfg)


def test_zero_iterations_returns_initial(small_synthetic, tiny_encoder):
    initial = encoder_service.init_params(tiny_encoder, 9)
    params, log = trainer_service.pretrain(
        small_synthetic, tiny_encoder, PartitionParams(), LossConfig(),
        OptimizerConfig(total_iters=0), initial=initial,
    )
    assert params.equals(initial)
    assert log.records == []


def test_pretrain_is_deterministic(small_synthetic, tiny_encoder):
    a, log_a = _quick_run(small_synthetic, tiny_encoder)
    b, log_b = _quick_run(small_synthetic, tiny_encoder)
    assert a.equals(b)
    assert log_a.losses() == log_b.losses()
    c, _ = _quick_run(small_synthetic, tiny_encoder, seed=2)
    assert not a.equals(c)


def test_pretrain_log_records(small_synthetic, tiny_encoder):
    _, log = _quick_run(small_synthetic, tiny_encoder, iters=5)
    assert [r.iter for r in log.records] == list(range(5))
    assert all(2 <= r.k <= 4 and r.k_eff >= 2 for r in log.records)
    assert all(math.isfinite(r.loss) for r in log.records)
    assert log.records[0].lr == 0.0  # warmup starts at zero


def test_pretrain_with_projection_head_updates_head(small_synthetic, tiny_encoder):
    config = tiny_encoder.model_copy(update={"projection_hidden": 5})
    initial = encoder_service.init_params(config, 1)
    params, _ = trainer_service.pretrain(
        small_synthetic, config, PartitionParams(split_mode=SplitMode.fixed, k=3), LossConfig(),
        OptimizerConfig(total_iters=3, batch_size=4, warmup_frac=0.0, base_lr=1e-2), initial=initial,
    )
    assert not np.array_equal(params.tensors["head.1.weight"], initial.tensors["head.1.weight"])


def test_pretrain_rejects_channel_mismatch(small_synthetic):
    with pytest.raises(ShapeError):
        _quick_run(small_synthetic, EncoderConfig(in_channels=3, channels=[4], kernel_sizes=[3], embed_dim=2))


def test_pretrain_rejects_empty_dataset(tiny_encoder):
    with pytest.raises(ContractError):
        _quick_run(TimeSeriesBatch(values=np.zeros((0, 16, 2))), tiny_encoder)


def test_invalid_partitions_are_resampled(monkeypatch, caplog):
    draws = iter([10, 10, 2])
    monkeypatch.setattr(partition_service, "sample_k", lambda params, rng: next(draws))
    with caplog.at_level(logging.WARNING, logger="dicot.services.trainer_service"):
        k, plan, retries = trainer_service._draw_plan(4, PartitionParams(rho=0.0), np.random.default_rng(0))
    assert (k, plan.k, retries) == (2, 2, 2)
    assert "resampling" in caplog.text


def test_partition_retries_are_bounded(monkeypatch):
    monkeypatch.setattr(partition_service, "sample_k", lambda params, rng: 10)
    with pytest.raises(InvalidPartition):
        trainer_service._draw_plan(4, PartitionParams(rho=0.0), np.random.default_rng(0))


@pytest.mark.parametrize("mode", [PositiveMode.preceding, PositiveMode.bidirectional])
@pytest.mark.parametrize("k", [3, 5, 9])
def test_initial_loss_is_near_ln_k(k, mode):
    dataset = data_service.gen_synthetic(SyntheticSpec(n_per_class=8, T=128, D=3, C=4, noise_sigma=0.3))
    encoder = EncoderConfig(in_channels=3)
    plan = partition_service.plan_partition(dataset.T, k, 0.5)
    loss, _ = trainer_service.loss_and_grads(
        dataset.values, encoder_service.init_params(encoder, 1), encoder, plan,
        LossConfig(positive_mode=mode), np.random.default_rng(0),
    )
    assert abs(loss - math.log(plan.k)) < trainer_service.INITIAL_LOSS_TOLERANCE


def test_far_initial_loss_is_reported(small_synthetic, tiny_encoder, caplog):
    initial = encoder_service.init_params(tiny_encoder, 1)
    initial.tensors["dense.weight"] *= 1e3
    with caplog.at_level(logging.WARNING, logger="dicot.services.trainer_service"):
        trainer_service.pretrain(
            small_synthetic, tiny_encoder, PartitionParams(split_mode=SplitMode.fixed, k=3),
            LossConfig(tau=0.07), OptimizerConfig(total_iters=1, batch_size=8), initial=initial,
        )
    assert "far from ln k" in caplog.text


# ---------------------------------------------------------------- desk-scale trend

# short strides: adjacent sub-blocks stay within a quarter period of the fastest class
DESK_PARTITION = PartitionParams(rho=0.75, k_min=13, k_max=20)


def _knn_at_10(dataset, params):
    emb = eval_service.embed_windows(dataset, params)
    report = eval_service.knn_report(emb, None, [10], [1, 2, 3, 4, 5])
    return next(r.value for r in report.rows if r.seed == "mean")


def _pretrain_desk(dataset, mode):
    return trainer_service.pretrain(
        dataset, EncoderConfig(in_channels=3), DESK_PARTITION, LossConfig(positive_mode=mode),
        OptimizerConfig(total_iters=300, batch_size=32, seed=1),
    )


@pytest.fixture(scope="module")
def desk_corpus():
    return data_service.gen_synthetic(SyntheticSpec(n_per_class=500, T=128, D=3, C=4, noise_sigma=0.3))


@pytest.fixture(scope="module")
def preceding_run(desk_corpus):
    return _pretrain_desk(desk_corpus, PositiveMode.preceding)


def _excess_over_chance(records):
    return float(np.mean([r.loss - math.log(r.k_eff) for r in records]))


@pytest.mark.slow
def test_pretraining_drops_below_chance_and_beats_random_init(desk_corpus, preceding_run):
    params, log = preceding_run
    assert abs(_excess_over_chance(log.records[:1])) < trainer_service.INITIAL_LOSS_TOLERANCE
    assert _excess_over_chance(log.records[-50:]) < -0.1
    assert np.mean(log.losses()[-50:]) < np.mean(log.losses()[:50])

    trained = _knn_at_10(desk_corpus, params)
    random_init = _knn_at_10(desk_corpus, encoder_service.init_params(EncoderConfig(in_channels=3), 1))
    assert trained >= random_init + 0.05


@pytest.mark.slow
def test_shuffled_targets_learn_less(desk_corpus, preceding_run):
    shuffled, _ = _pretrain_desk(desk_corpus, PositiveMode.shuffled)
    assert _knn_at_10(desk_corpus, preceding_run[0]) > _knn_at_10(desk_corpus, shuffled)


@pytest.mark.slow
def test_trained_encoder_is_robust_to_one_step_shift(desk_corpus, preceding_run):
    params, _ = preceding_run
    encoder = EncoderConfig(in_channels=3)
    x = desk_corpus.values[::100]
    noise = np.random.default_rng(5).standard_normal(x.shape)

    def cosine(a, b):
        return np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))

    z = encoder_service.encode(x, params, encoder)
    shifted = cosine(z, encoder_service.encode(np.roll(x, 1, axis=1), params, encoder))
    unrelated = cosine(z, encoder_service.encode(noise, params, encoder))
    assert np.all(shifted > unrelated)
