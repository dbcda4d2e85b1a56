import json
import math

import numpy as np
import pytest
import torch

from cirlab.compose.composer import ComposerConfig
from cirlab.compose.encoders import EncoderDims, ToyEncoderBackend
from cirlab.sgparse.rule_parser import RuleParserBackend
from cirlab.synthetic import SyntheticSpec, build_synthetic_dataset
from cirlab.train import (
    TrainConfig,
    bbc_loss,
    init_state,
    kl_loss,
    prepare_split,
    run_training,
    train_step,
)

SMALL_COMPOSER = ComposerConfig(queries=2, dim=16, text_dim=16, image_dim=16,
                                heads=2, layers=1, max_entities=4)
SMALL_DIMS = EncoderDims(channels=2, image_dim=16, seq_len=8, text_dim=16, vector_dim=24)


def unit_rows(b, d, seed=0):
    g = torch.Generator().manual_seed(seed)
    m = torch.randn(b, d, generator=g, dtype=torch.float64)
    return m / torch.linalg.vector_norm(m, dim=1, keepdim=True)


def brute_force_bbc(composed, targets, tau):
    """Independent oracle: plain python/math evaluation of the batch
    classification formula."""
    c = composed.detach().numpy()
    t = targets.detach().numpy()
    b = c.shape[0]
    total = 0.0
    for i in range(b):
        sims = [float(np.dot(c[i], t[j])) / tau for j in range(b)]
        denom = sum(math.exp(s) for s in sims)
        total += -math.log(math.exp(sims[i]) / denom)
    return total / b


class TestBbcLoss:
    def test_singleton_batch_exact_zero(self):
        x = unit_rows(1, 8)
        assert float(bbc_loss(x, x, 0.07)) == 0.0

    def test_uniform_similarity_is_log_b(self):
        row = unit_rows(1, 8)
        composed = row.repeat(4, 1)
        targets = row.repeat(4, 1)
        assert abs(float(bbc_loss(composed, targets, 0.5)) - math.log(4)) < 1e-9

    def test_identity_similarity_b2(self):
        eye = torch.eye(2, dtype=torch.float64)
        expected = math.log(1 + math.exp(-1.0))  # 0.313262...
        assert float(bbc_loss(eye, eye, 1.0)) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.313262, abs=1e-6)

    def test_oracle_equivalence_100_random(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            b = int(rng.integers(1, 9))
            d = int(rng.integers(2, 17))
            tau = float(rng.uniform(0.05, 2.0))
            composed = unit_rows(b, d, seed=trial)
            targets = unit_rows(b, d, seed=1000 + trial)
            ours = float(bbc_loss(composed, targets, tau))
            assert abs(ours - brute_force_bbc(composed, targets, tau)) < 1e-6

    def test_permutation_equivariance(self):
        composed, targets = unit_rows(6, 8, 1), unit_rows(6, 8, 2)
        base = float(bbc_loss(composed, targets, 0.1))
        perm = torch.randperm(6, generator=torch.Generator().manual_seed(3))
        permuted = float(bbc_loss(composed[perm], targets[perm], 0.1))
        assert abs(base - permuted) < 1e-6

    def test_nonnegative(self):
        for seed in range(10):
            composed, targets = unit_rows(5, 8, seed), unit_rows(5, 8, 100 + seed)
            assert float(bbc_loss(composed, targets, 0.07)) >= 0.0

    def test_temperature_monotonicity(self):
        eye = torch.eye(4, dtype=torch.float64)
        losses = [float(bbc_loss(eye, eye, tau)) for tau in (1.0, 0.5, 0.1, 0.05)]
        assert losses == sorted(losses, reverse=True)

    def test_gradient_matches_finite_differences(self):
        composed = unit_rows(4, 8, 5).requires_grad_(True)
        targets = unit_rows(4, 8, 6)
        loss = bbc_loss(composed, targets, 0.2)
        loss.backward()
        eps = 1e-6
        with torch.no_grad():
            for idx in [(0, 0), (1, 3), (3, 7)]:
                orig = float(composed[idx])
                composed[idx] = orig + eps
                up = float(bbc_loss(composed, targets, 0.2))
                composed[idx] = orig - eps
                down = float(bbc_loss(composed, targets, 0.2))
                composed[idx] = orig
                fd = (up - down) / (2 * eps)
                assert abs(float(composed.grad[idx]) - fd) / max(abs(fd), 1e-8) < 1e-3

    def test_bad_inputs(self):
        x = unit_rows(2, 4)
        with pytest.raises(ValueError, match="temperature"):
            bbc_loss(x, x, 0.0)
        with pytest.raises(ValueError, match="equal"):
            bbc_loss(x, unit_rows(3, 4), 1.0)


class TestKlLoss:
    def test_singleton_zero(self):
        x = unit_rows(1, 4)
        assert float(kl_loss(x, x, 1.0)) == 0.0

    def test_uniform_log4(self):
        row = unit_rows(1, 8)
        assert abs(float(kl_loss(row.repeat(4, 1), row.repeat(4, 1), 1.0)) - math.log(4)) < 1e-9

    def test_random_3x3_matches_brute_force(self):
        composed, targets = unit_rows(3, 5, 7), unit_rows(3, 5, 8)
        ours = float(kl_loss(composed, targets, 0.3))
        assert abs(ours - brute_force_bbc(composed, targets, 0.3)) < 1e-9


@pytest.fixture(scope="module")
def small_setup():
    spec = SyntheticSpec(n_images=60, n_train=48, n_test=12, seed=3)
    manifest = build_synthetic_dataset(spec)
    backend = ToyEncoderBackend(dims=SMALL_DIMS, seed=3)
    parser = RuleParserBackend()
    examples = prepare_split(manifest, "train", parser, backend)
    return manifest, backend, parser, examples


def small_config(**kw):
    base = dict(batch_size=8, steps=5, seed=0, composer=SMALL_COMPOSER,
                gat_heads=2, record_wall_time=False)
    base.update(kw)
    return TrainConfig(**base)


class TestTrainStep:
    def test_zero_learning_rate_keeps_parameters(self, small_setup):
        _, _, _, examples = small_setup
        config = small_config(learning_rate=0.0)
        state = init_state(config)
        before = {k: v.clone() for k, v in state.model.state_dict().items()}
        loss = train_step(examples[:4], state, config)
        assert math.isfinite(loss)
        after = state.model.state_dict()
        assert all(torch.equal(before[k], after[k]) for k in before)

    def test_step_determinism(self, small_setup):
        _, _, _, examples = small_setup
        config = small_config(learning_rate=1e-3)
        results = []
        for _ in range(2):
            state = init_state(config)
            losses = [train_step(examples[:8], state, config) for _ in range(2)]
            results.append((losses, {k: v.clone() for k, v in state.model.state_dict().items()}))
        assert results[0][0] == results[1][0]
        assert all(torch.equal(results[0][1][k], results[1][1][k]) for k in results[0][1])

    def test_loss_decreases_over_training(self, small_setup):
        _, _, _, examples = small_setup
        config = small_config(steps=50, learning_rate=3e-3, batch_size=16)
        state = init_state(config)
        losses = [train_step(examples[:16], state, config) for _ in range(50)]
        assert losses[-1] < losses[0]

    def test_learnable_tau_updates(self, small_setup):
        _, _, _, examples = small_setup
        config = small_config(learnable_tau=True, learning_rate=1e-2)
        state = init_state(config)
        before = float(state.log_tau.detach())
        train_step(examples[:4], state, config)
        assert float(state.log_tau.detach()) != before

    def test_kl_ablation_arm_runs(self, small_setup):
        _, _, _, examples = small_setup
        config = small_config(loss="kl")
        state = init_state(config)
        assert math.isfinite(train_step(examples[:4], state, config))


class TestRunTraining:
    def test_zero_steps_checkpoint_equals_init(self, small_setup, tmp_path):
        manifest, backend, parser, _ = small_setup
        config = small_config(steps=0)
        result = run_training(manifest, config, parser, backend, tmp_path)
        from cirlab.compose.model import load_checkpoint

        loaded = load_checkpoint(result.checkpoint_path)
        fresh = init_state(config).model
        state_a, state_b = loaded.state_dict(), fresh.state_dict()
        assert all(torch.equal(state_a[k], state_b[k]) for k in state_a)

    def test_rerun_metrics_log_byte_identical(self, small_setup, tmp_path):
        manifest, backend, parser, _ = small_setup
        config = small_config(steps=6, eval_every=3)
        r1 = run_training(manifest, config, parser, backend, tmp_path / "a")
        r2 = run_training(manifest, config, parser, backend, tmp_path / "b")
        assert r1.metrics_path.read_bytes() == r2.metrics_path.read_bytes()
        assert (tmp_path / "a" / "checkpoint.pt").read_bytes() == (
            tmp_path / "b" / "checkpoint.pt"
        ).read_bytes()

    def test_no_sg_signature_records_reduced_sequence(self, small_setup, tmp_path):
        manifest, backend, parser, _ = small_setup
        config = small_config(steps=1, no_sg=True)
        result = run_training(manifest, config, parser, backend, tmp_path)
        sig = result.signature
        assert sig["variant"] == "no_sg"
        assert sig["entity_slots"] == 0
        assert sig["sequence_capacity"] == SMALL_COMPOSER.queries + SMALL_DIMS.seq_len
        head = json.loads(result.metrics_path.read_text().splitlines()[0])
        assert head["record"] == "signature" and head["entity_slots"] == 0

    def test_non_finite_loss_aborts_with_diagnostics(self, small_setup):
        _, _, _, examples = small_setup
        config = small_config()
        state = init_state(config)
        with torch.no_grad():
            state.model.composer.queries.fill_(float("nan"))
        with pytest.raises(FloatingPointError, match="non-finite"):
            train_step(examples[:4], state, config)
