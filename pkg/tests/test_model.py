from __future__ import annotations

import torch
import pytest

from erdetect.encoding import SimpleSubwordTokenizer, collate_pairs, encode_pair
from erdetect.errors import CheckpointError, ConfigurationError, NumericError
from erdetect.model import (
    ERNetwork,
    HeadConfig,
    InteractionHead,
    Prediction,
    RealizationHead,
    RSPVNetwork,
    clone_frozen,
    forward_er,
    forward_rspv,
    load_checkpoint,
    predict_batch,
    probabilities,
    save_checkpoint,
    span_mean,
)

from .conftest import make_instance, tiny_encoder

D = 32


@pytest.fixture
def tok():
    return SimpleSubwordTokenizer(
        ["a", "b", "c", "walked", "jumped", "under", "ground", "the", "sun"]
    )


def make_er(tok, seed=0, head_seed=1):
    encoder = tiny_encoder(tok, hidden_size=D, seed=seed)
    frozen = clone_frozen(encoder)
    torch.manual_seed(head_seed)
    head = InteractionHead(HeadConfig(hidden_size=D))
    return ERNetwork(encoder, frozen, head)


def make_rspv(tok, seed=0, head_seed=1):
    encoder = tiny_encoder(tok, hidden_size=D, seed=seed)
    torch.manual_seed(head_seed)
    return RSPVNetwork(encoder, RealizationHead(HeadConfig(hidden_size=D)))


def batch_for(tok, *insts):
    pairs = [encode_pair(i, tok, 150) for i in insts]
    return pairs, collate_pairs(pairs, tok.pad_id)


class TestForwardER:
    def test_zero_classifier_gives_half(self, tok):
        net = make_er(tok)
        with torch.no_grad():
            net.head.classifier.weight.zero_()
            net.head.classifier.bias.zero_()
        inst = make_instance("x", "the sun walked", target_index=2)
        _, pred = forward_er(inst_pair(tok, inst), net.encoder, net.frozen_encoder,
                             net.head, tok.pad_id)
        assert pred.probability == 0.5

    def test_eval_determinism_bitwise(self, tok):
        net = make_er(tok)
        net.eval()
        inst = make_instance("x", "the sun walked", target_index=2)
        _, batch = batch_for(tok, inst)
        with torch.no_grad():
            _, logits_a = net(batch)
            _, logits_b = net(batch)
        assert torch.equal(logits_a, logits_b)

    def test_single_subword_pooling_equals_direct_indexing(self, tok):
        net = make_er(tok)
        net.eval()
        inst = make_instance("x", "the sun walked", target_index=2)
        pairs, batch = batch_for(tok, inst)
        with torch.no_grad():
            reps, _ = net(batch)
            hidden = net.encoder(batch["realization_ids"], batch["realization_attn"])
        position = pairs[0].realization_span[0]
        assert torch.equal(reps.target_realization[0], hidden[0, position])

    def test_anchor_vectors_equal_fine_tuned_at_initialization(self, tok):
        net = make_er(tok)
        net.eval()
        inst = make_instance("x", "the sun walked", target_index=2)
        _, batch = batch_for(tok, inst)
        with torch.no_grad():
            reps, _ = net(batch)
        assert torch.equal(reps.target_expectation, reps.anchor_target_expectation)
        assert torch.equal(reps.sentence_expectation, reps.anchor_sentence_expectation)

    def test_branch_sensitivity_to_target_identity(self, tok):
        net = make_er(tok)
        net.eval()
        walked = make_instance("x", "a walked b", target_index=1)
        jumped = make_instance("y", "a jumped b", target_index=1)
        _, batch_w = batch_for(tok, walked)
        _, batch_j = batch_for(tok, jumped)
        with torch.no_grad():
            reps_w, _ = net(batch_w)
            reps_j, _ = net(batch_j)
        # the masked input is identical, so expectation vectors match bitwise
        assert torch.equal(reps_w.target_expectation, reps_j.target_expectation)
        assert torch.equal(reps_w.anchor_target_expectation,
                           reps_j.anchor_target_expectation)
        assert not torch.equal(reps_w.target_realization, reps_j.target_realization)

    def test_branch_sensitivity_to_context(self, tok):
        net = make_er(tok)
        net.eval()
        one = make_instance("x", "a walked b", target_index=1)
        other = make_instance("y", "c walked b", target_index=1)
        _, batch_a = batch_for(tok, one)
        _, batch_b = batch_for(tok, other)
        with torch.no_grad():
            reps_a, _ = net(batch_a)
            reps_b, _ = net(batch_b)
        assert not torch.equal(reps_a.target_expectation, reps_b.target_expectation)
        assert not torch.equal(reps_a.target_realization, reps_b.target_realization)

    def test_sigmoid_monotone_in_bias(self, tok):
        net = make_er(tok)
        inst = make_instance("x", "the sun walked", target_index=2)
        _, batch = batch_for(tok, inst)
        probs = []
        for bump in (0.0, 0.5, 1.0):
            with torch.no_grad():
                net.head.classifier.bias.fill_(bump)
                _, logits = net(batch)
                probs.append(float(probabilities(logits)[0]))
        assert probs[0] < probs[1] < probs[2]

    def test_gradients_flow_to_v_but_never_u(self, tok):
        net = make_er(tok)
        net.train()
        inst = make_instance("x", "the sun walked", target_index=2, label=1)
        _, batch = batch_for(tok, inst)
        reps, logits = net(batch)
        assert reps.target_expectation.requires_grad
        assert reps.sentence_expectation.requires_grad
        assert not reps.anchor_target_expectation.requires_grad
        assert not reps.anchor_sentence_expectation.requires_grad

    def test_frozen_encoder_untouched_by_training_step(self, tok):
        net = make_er(tok)
        before = [p.clone() for p in net.frozen_encoder.parameters()]
        inst = make_instance("x", "the sun walked", target_index=2, label=1)
        _, batch = batch_for(tok, inst)
        optimizer = torch.optim.Adam(
            [p for p in net.parameters() if p.requires_grad], lr=1e-3
        )
        net.train()
        _, logits = net(batch)
        loss = torch.sigmoid(logits).sum()
        loss.backward()
        optimizer.step()
        after = list(net.frozen_encoder.parameters())
        assert all(torch.equal(a, b) for a, b in zip(before, after))
        # and the fine-tuned encoder did move
        assert any(
            not torch.equal(a, b)
            for a, b in zip(before, net.encoder.parameters())
        )

    def test_dimension_mismatch_is_configuration_error(self, tok):
        encoder = tiny_encoder(tok, hidden_size=D)
        frozen = clone_frozen(encoder)
        with pytest.raises(ConfigurationError, match="head hidden_size"):
            ERNetwork(encoder, frozen, InteractionHead(HeadConfig(hidden_size=D * 2)))

    def test_nonfinite_logit_is_numeric_error(self, tok):
        net = make_er(tok)
        with torch.no_grad():
            net.head.classifier.bias.fill_(float("inf"))
        inst = make_instance("x", "the sun walked", target_index=2)
        _, batch = batch_for(tok, inst)
        with torch.no_grad():
            _, logits = net(batch)
        with pytest.raises(NumericError):
            probabilities(logits)


def inst_pair(tok, inst):
    return encode_pair(inst, tok, 150)


class TestForwardRSPV:
    def test_zero_classifier_gives_half(self, tok):
        net = make_rspv(tok)
        with torch.no_grad():
            net.head.classifier.weight.zero_()
            net.head.classifier.bias.zero_()
        inst = make_instance("x", "the sun walked", target_index=2)
        pred = forward_rspv(inst_pair(tok, inst), net.encoder, net.head, tok.pad_id)
        assert pred.probability == 0.5

    def test_deterministic_repeat(self, tok):
        net = make_rspv(tok)
        inst = make_instance("x", "the sun walked", target_index=2)
        pred_a = forward_rspv(inst_pair(tok, inst), net.encoder, net.head, tok.pad_id)
        pred_b = forward_rspv(inst_pair(tok, inst), net.encoder, net.head, tok.pad_id)
        assert pred_a.probability == pred_b.probability

    def test_ablated_er_matches_realization_only_model(self, tok):
        """Zeroing every expectation contribution in an ER head reproduces a
        realization-only model that ignores its target block."""
        torch.manual_seed(7)
        shared_encoder = tiny_encoder(tok, hidden_size=D, seed=3)
        er = ERNetwork(
            shared_encoder, clone_frozen(shared_encoder),
            InteractionHead(HeadConfig(hidden_size=D)),
        )
        rspv = RSPVNetwork(shared_encoder, RealizationHead(HeadConfig(hidden_size=D)))
        A = torch.randn(D, D)
        c = torch.randn(D)
        w = torch.randn(1, D)
        b = torch.randn(1)
        with torch.no_grad():
            # expectation inputs are the first block of each concатenation
            er.head.global_interaction[0].weight[:, :D] = 0.0
            er.head.global_interaction[0].weight[:, D:] = A
            er.head.global_interaction[0].bias.copy_(c)
            er.head.classifier.weight[:, :D] = 0.0  # local path contributes nothing
            er.head.classifier.weight[:, D:] = w
            er.head.classifier.bias.copy_(b)
            rspv.head.interaction[0].weight[:, :D] = A
            rspv.head.interaction[0].weight[:, D:] = 0.0  # ignore target block
            rspv.head.interaction[0].bias.copy_(c)
            rspv.head.classifier.weight.copy_(w)
            rspv.head.classifier.bias.copy_(b)
        er.double().eval()
        rspv.double().eval()
        insts = [
            make_instance("x", "the sun walked", target_index=2),
            make_instance("y", "a under ground jumped b", target_index=3, label=1),
        ]
        _, batch = batch_for(tok, *insts)
        with torch.no_grad():
            _, er_logits = er(batch)
            _, rspv_logits = rspv(batch)
        # zero blocks land in different accumulation lanes, so equality holds
        # up to float reassociation; double precision pins it to ~1e-15
        assert torch.allclose(er_logits, rspv_logits, rtol=0.0, atol=1e-12)


class TestPrediction:
    def test_threshold_consistency_enforced(self):
        with pytest.raises(ConfigurationError):
            Prediction("x", probability=0.7, predicted_label=0, model_tag="t")

    def test_from_probability(self):
        assert Prediction.from_probability("x", 0.5, "t").predicted_label == 1
        assert Prediction.from_probability("x", 0.49, "t").predicted_label == 0

    def test_out_of_range_probability(self):
        with pytest.raises(NumericError):
            Prediction("x", probability=1.5, predicted_label=1, model_tag="t")


class TestSpanMean:
    def test_matches_loop_oracle(self):
        torch.manual_seed(0)
        hidden = torch.randn(3, 5, 4)
        mask = torch.zeros(3, 5)
        mask[0, 1] = 1
        mask[1, 2:4] = 1
        mask[2, 0:5] = 1
        pooled = span_mean(hidden, mask)
        for row in range(3):
            positions = mask[row].nonzero().flatten().tolist()
            oracle = hidden[row, positions].mean(dim=0)
            assert torch.allclose(pooled[row], oracle, atol=1e-6)


class TestCheckpoints:
    def test_round_trip_bitwise(self, tok, tmp_path):
        net = make_er(tok)
        meta = {"seed": 3, "fold": 7, "alpha_local": 1.0, "alpha_global": 1.0,
                "vocab_hash": tok.vocabulary_hash()}
        path = tmp_path / "model.pt"
        save_checkpoint(net, path, meta)
        loaded, loaded_meta = load_checkpoint(path, expected_architecture="er")
        assert loaded_meta == meta
        for (name_a, a), (name_b, b) in zip(
            net.state_dict().items(), loaded.state_dict().items()
        ):
            assert name_a == name_b
            assert torch.equal(a, b)

    def test_architecture_mismatch_refused(self, tok, tmp_path):
        net = make_rspv(tok)
        path = tmp_path / "rspv.pt"
        save_checkpoint(net, path, {"seed": 0, "fold": 0})
        with pytest.raises(CheckpointError, match="rspv"):
            load_checkpoint(path, expected_architecture="er")

    def test_version_mismatch_refused(self, tmp_path):
        path = tmp_path / "weird.pt"
        torch.save({"format_version": 99}, path)
        with pytest.raises(CheckpointError, match="format"):
            load_checkpoint(path)

    def test_loaded_model_predicts_identically(self, tok, tmp_path):
        net = make_er(tok)
        inst = make_instance("x", "the sun walked", target_index=2)
        pairs, _ = batch_for(tok, inst)
        before = predict_batch(net, pairs, tok.pad_id, "tag")[0]
        path = tmp_path / "model.pt"
        save_checkpoint(net, path, {"seed": 0, "fold": 0})
        loaded, _ = load_checkpoint(path)
        after = predict_batch(loaded, pairs, tok.pad_id, "tag")[0]
        assert before.probability == after.probability
