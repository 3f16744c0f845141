from __future__ import annotations

import math

import pytest
import torch

from erdetect.encoding import SimpleSubwordTokenizer, collate_pairs, encode_pair
from erdetect.errors import ConfigurationError, NumericError, SplitError
from erdetect.model import (
    EncoderConfig,
    ERRepresentations,
    HeadConfig,
    InteractionHead,
    TransformerEncoder,
    clone_frozen,
    ERNetwork,
    probabilities,
)
from erdetect.training import (
    LossConfig,
    ScheduleConfig,
    compute_loss,
    cosine_similarity,
    lr_at_step,
    train_run,
    tune_hyperparameters,
)

from .conftest import make_instance, random_corpus, tiny_encoder


def anchored_reps(d: int = 8, seed: int = 0) -> ERRepresentations:
    """Representations whose anchors equal the fine-tuned vectors bitwise."""
    torch.manual_seed(seed)
    target = torch.randn(2, d)
    sentence = torch.randn(2, d)
    return ERRepresentations(
        target_realization=torch.randn(2, d),
        target_expectation=target,
        sentence_realization=torch.randn(2, d),
        sentence_expectation=sentence,
        anchor_target_expectation=target.clone(),
        anchor_sentence_expectation=sentence.clone(),
    )


class TestComputeLoss:
    def test_half_probability_perfect_anchor_closed_form(self):
        # hand evaluation: ce = ln 2, both similarities 1 -> total = ln 2 - 2
        terms = compute_loss(1, 0.5, anchored_reps(), LossConfig(1.0, 1.0))
        assert float(terms.local_similarity) == 1.0
        assert float(terms.global_similarity) == 1.0
        assert math.isclose(float(terms.total), math.log(2) - 2.0, abs_tol=1e-6)
        assert math.isclose(float(terms.total), -1.30685281944, abs_tol=1e-6)

    def test_perfect_prediction_limit(self):
        terms = compute_loss(1, 1.0 - 1e-9, anchored_reps(), LossConfig(1.0, 1.0))
        assert math.isclose(float(terms.total), -2.0, abs_tol=1e-5)

    def test_zero_weights_total_equals_ce_bitwise(self):
        terms = compute_loss(1, 0.37, anchored_reps(), LossConfig(0.0, 0.0))
        assert float(terms.total) == float(terms.cross_entropy)

    def test_none_reps_zero_similarities(self):
        terms = compute_loss(0, 0.2, None, LossConfig(1.0, 1.0))
        assert float(terms.local_similarity) == 0.0
        assert float(terms.total) == float(terms.cross_entropy)

    def test_decomposition_identity_on_tensors(self):
        torch.manual_seed(1)
        cfg = LossConfig(0.5, 2.0)
        reps = anchored_reps(seed=2)
        reps.target_expectation = torch.randn(2, 8)  # break the anchoring
        probs = torch.rand(2)
        labels = torch.tensor([1.0, 0.0])
        terms = compute_loss(labels, probs, reps, cfg)
        recomputed = (
            terms.cross_entropy
            - cfg.alpha_local * terms.local_similarity
            - cfg.alpha_global * terms.global_similarity
        )
        assert torch.equal(terms.total, recomputed)

    def test_clamping_keeps_ce_finite(self):
        terms = compute_loss(1, 0.0, None, LossConfig(0.0, 0.0))
        assert math.isfinite(float(terms.cross_entropy))
        assert math.isclose(float(terms.cross_entropy), -math.log(1e-7), rel_tol=1e-3)

    def test_nonfinite_component_named(self):
        reps = anchored_reps()
        reps.target_expectation = torch.full((2, 8), float("nan"))
        with pytest.raises(NumericError, match="local similarity"):
            compute_loss(1, 0.5, reps, LossConfig(1.0, 1.0))

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigurationError):
            LossConfig(-0.1, 1.0)


class TestCosine:
    def test_identical_vectors_exactly_one(self):
        for seed in range(20):
            torch.manual_seed(seed)
            x = torch.randn(5, 33) * 10 ** (seed % 7 - 3)
            assert (cosine_similarity(x, x.clone()) == 1.0).all()

    def test_orthogonal_vectors(self):
        x = torch.tensor([[1.0, 0.0]])
        y = torch.tensor([[0.0, 1.0]])
        assert float(cosine_similarity(x, y)) == 0.0
        assert float(cosine_similarity(x, -x)) == -1.0


class TestSchedule:
    CFG = ScheduleConfig()

    def test_starts_at_zero(self):
        assert lr_at_step(0, 100, self.CFG) == 0.0

    def test_peak_at_end_of_warmup(self):
        assert lr_at_step(200, 100, self.CFG) == 5e-5

    def test_decay_midpoint(self):
        # halfway through epochs 3..12: step = (2 + 5) * 100
        assert math.isclose(lr_at_step(700, 100, self.CFG), 2.5e-5, rel_tol=1e-12)

    def test_ends_at_zero(self):
        assert lr_at_step(1200, 100, self.CFG) == 0.0

    def test_beyond_schedule_is_error(self):
        with pytest.raises(ConfigurationError, match="outside"):
            lr_at_step(1201, 100, self.CFG)
        with pytest.raises(ConfigurationError, match="outside"):
            lr_at_step(-1, 100, self.CFG)

    def test_continuous_single_peak_shape(self):
        cfg = ScheduleConfig(peak_lr=1e-3, warmup_epochs=2, total_epochs=7,
                             batch_size=4)
        values = [lr_at_step(s, 10, cfg) for s in range(0, 71)]
        peak = max(values)
        peak_index = values.index(peak)
        assert values[:peak_index] == sorted(values[:peak_index])
        assert values[peak_index:] == sorted(values[peak_index:], reverse=True)
        assert values.count(peak) == 1
        assert values[-1] == 0.0

    def test_invalid_configs_rejected(self):
        with pytest.raises(ConfigurationError):
            ScheduleConfig(warmup_epochs=12, total_epochs=12)
        with pytest.raises(ConfigurationError):
            ScheduleConfig(peak_lr=0.0)


def small_setup(n=24, seed=0):
    instances = random_corpus(n, seed=seed)
    tokenizer = SimpleSubwordTokenizer.from_instances(instances)
    config = EncoderConfig(
        vocab_size=tokenizer.vocab_size, hidden_size=16, num_layers=1,
        num_heads=4, max_positions=32, pad_id=tokenizer.pad_id,
    )
    return instances, tokenizer, (lambda: TransformerEncoder(config))


SMALL_SCHEDULE = ScheduleConfig(peak_lr=1e-3, warmup_epochs=1, total_epochs=2,
                                batch_size=8, max_len=32)


class TestTrainRun:
    def run(self, seed=0, architecture="er", loss_cfg=LossConfig(1.0, 1.0)):
        instances, tokenizer, factory = small_setup()
        train, dev = instances[:18], instances[18:]
        return train_run(
            train, dev, architecture, tokenizer, factory,
            HeadConfig(hidden_size=16), SMALL_SCHEDULE, loss_cfg, seed,
        )

    def test_same_seed_identical_logs(self):
        assert self.run(seed=5).log == self.run(seed=5).log

    def test_different_seed_differs(self):
        assert self.run(seed=5).log != self.run(seed=6).log

    def test_step_zero_anchoring_exact(self):
        result = self.run()
        first = result.log[0]
        assert first["kind"] == "step" and first["step"] == 0
        assert first["sim_local"] == 1.0
        assert first["sim_global"] == 1.0

    def test_logged_decomposition_identity(self):
        cfg = LossConfig(1.0, 1.0)
        result = self.run(loss_cfg=cfg)
        for record in result.log:
            if record["kind"] != "step":
                continue
            ce = torch.tensor(record["ce"], dtype=torch.float32)
            sl = torch.tensor(record["sim_local"], dtype=torch.float32)
            sg = torch.tensor(record["sim_global"], dtype=torch.float32)
            recomputed = ce - cfg.alpha_local * sl - cfg.alpha_global * sg
            assert record["total"] == float(recomputed)

    def test_epoch_records_carry_dev_f1(self):
        result = self.run()
        epochs = [r for r in result.log if r["kind"] == "epoch"]
        assert len(epochs) == SMALL_SCHEDULE.total_epochs
        assert all(r["dev_f1"] is not None for r in epochs)
        assert 1 <= result.dev_best_epoch <= SMALL_SCHEDULE.total_epochs

    def test_rspv_runs_with_zero_similarities(self):
        result = self.run(architecture="rspv", loss_cfg=LossConfig(0.0, 0.0))
        steps = [r for r in result.log if r["kind"] == "step"]
        assert all(r["sim_local"] == 0.0 and r["sim_global"] == 0.0 for r in steps)
        assert all(r["total"] == r["ce"] for r in steps)

    def test_overlapping_dev_rejected(self):
        instances, tokenizer, factory = small_setup()
        with pytest.raises(SplitError, match="overlap"):
            train_run(
                instances, instances[:4], "er", tokenizer, factory,
                HeadConfig(hidden_size=16), SMALL_SCHEDULE, LossConfig(), 0,
            )

    def test_lr_trace_matches_schedule(self):
        result = self.run()
        steps = [r for r in result.log if r["kind"] == "step"]
        steps_per_epoch = math.ceil(18 / SMALL_SCHEDULE.batch_size)
        for record in steps:
            assert record["lr"] == lr_at_step(
                record["step"], steps_per_epoch, SMALL_SCHEDULE
            )


class TestGradientCheck:
    def test_head_gradients_match_central_differences(self):
        """Finite-difference oracle over every interaction-head parameter."""
        torch.manual_seed(3)
        default = torch.get_default_dtype()
        torch.set_default_dtype(torch.float64)
        try:
            tokenizer = SimpleSubwordTokenizer(["a", "b", "c", "dd", "ee"])
            encoder = TransformerEncoder(EncoderConfig(
                vocab_size=tokenizer.vocab_size, hidden_size=8, num_layers=1,
                num_heads=2, max_positions=16, pad_id=tokenizer.pad_id,
            ))
            net = ERNetwork(encoder, clone_frozen(encoder),
                            InteractionHead(HeadConfig(hidden_size=8)))
            net.train()
            insts = [
                make_instance("g1", "a dd b", target_index=1, label=1),
                make_instance("g2", "c ee a b", target_index=1, label=0),
            ]
            pairs = [encode_pair(i, tokenizer, 16) for i in insts]
            batch = collate_pairs(pairs, tokenizer.pad_id)
            labels = torch.tensor([1.0, 0.0])
            cfg = LossConfig(1.0, 0.5)

            def loss_value() -> torch.Tensor:
                reps, logits = net(batch)
                return compute_loss(labels, probabilities(logits), reps, cfg).total

            loss = loss_value()
            head_params = list(net.head.parameters())
            analytic = torch.autograd.grad(loss, head_params)
            eps = 1e-6
            for param, grad in zip(head_params, analytic):
                flat = param.data.view(-1)
                fd = torch.zeros_like(flat)
                for i in range(flat.numel()):
                    original = flat[i].item()
                    flat[i] = original + eps
                    up = loss_value().item()
                    flat[i] = original - eps
                    down = loss_value().item()
                    flat[i] = original
                    fd[i] = (up - down) / (2 * eps)
                fd = fd.view_as(param)
                denom = max(grad.norm().item(), fd.norm().item(), 1e-12)
                assert (grad - fd).norm().item() / denom < 1e-4
        finally:
            torch.set_default_dtype(default)


class TestTuner:
    @staticmethod
    def fake_runner(scores):
        def runner(schedule, loss_cfg, head_config):
            key = (
                schedule.peak_lr,
                loss_cfg.alpha_local,
                head_config.resolved_dims(),
            )
            return scores.get(key, 0.0)
        return runner

    def kwargs(self):
        instances, tokenizer, factory = small_setup(12)
        return dict(
            train_instances=instances[:8], dev_instances=instances[8:],
            architecture="er", tokenizer=tokenizer, encoder_factory=factory,
            hidden_size=16, base_schedule=SMALL_SCHEDULE,
        )

    def test_selects_highest_dev_f1(self):
        base_lr = SMALL_SCHEDULE.peak_lr
        scores = {(base_lr, 0.0, (16,)): 0.4, (base_lr, 1.0, (16,)): 0.9}
        result = tune_hyperparameters(
            {"similarity_weight": [0.0, 1.0]}, runner=self.fake_runner(scores),
            **self.kwargs(),
        )
        assert result.loss_config.alpha_local == 1.0
        assert result.loss_config.alpha_global == 1.0
        assert result.dev_f1 == 0.9

    def test_tie_breaks_toward_smaller_model_then_lower_lr(self):
        scores = {
            (1e-5, 1.0, (16, 16)): 0.8,
            (1e-5, 1.0, (16,)): 0.8,
            (2e-5, 1.0, (16,)): 0.8,
        }
        result = tune_hyperparameters(
            {"learning_rate": [2e-5, 1e-5], "hidden_dims": [(16, 16), (16,)]},
            runner=self.fake_runner(scores), **self.kwargs(),
        )
        assert result.head_config.resolved_dims() == (16,)
        assert result.schedule.peak_lr == 1e-5

    def test_singleton_grid_returns_sole_config(self):
        result = tune_hyperparameters(
            {"learning_rate": [3e-5]},
            runner=lambda s, l, h: 0.5, **self.kwargs(),
        )
        assert result.schedule.peak_lr == 3e-5

    def test_empty_grid_is_error(self):
        with pytest.raises(ConfigurationError, match="empty"):
            tune_hyperparameters({}, runner=lambda s, l, h: 0.0, **self.kwargs())

    def test_unknown_key_is_error(self):
        with pytest.raises(ConfigurationError, match="unknown grid keys"):
            tune_hyperparameters(
                {"momentum": [0.9]}, runner=lambda s, l, h: 0.0, **self.kwargs()
            )

    def test_real_training_smoke(self):
        result = tune_hyperparameters(
            {"similarity_weight": [0.0, 1.0]}, **self.kwargs()
        )
        assert result.loss_config.alpha_local in (0.0, 1.0)
        assert len(result.trials) == 2
