"""Acceptance suite: each criterion runs at its stated tolerance and prints
one pass/fail line.  Run with `pytest tests/test_acceptance.py -v -s`."""

import contextlib
import json
import math
import time

import numpy as np
import pytest
import torch

from cirlab.aggregate import GraphAttentionAggregator, aggregate
from cirlab.compose.composer import Composer, ComposerConfig
from cirlab.compose.encoders import EncoderDims, ToyEncoderBackend, normalize
from cirlab.compose.model import CompositionModel, load_checkpoint, save_checkpoint
from cirlab.core.manifest import save_manifest
from cirlab.evaluate.baselines import (
    baseline_image_only,
    baseline_text_only,
    gallery_from_images,
)
from cirlab.evaluate.harness import evaluate_model, gallery_images, model_gallery_index
from cirlab.evaluate.metrics import (
    GalleryIndex,
    category_avg_fashioniq,
    composite_avg_cirr,
    rank,
    rank_of_target,
    recall_at_k,
    round2,
    subset_rank,
)
from cirlab.fixtures import build_pipeline_fixture
from cirlab.pipeline.clients import mock_clients
from cirlab.pipeline.runner import run_pipeline
from cirlab.pipeline.stages import PipelineConfig
from cirlab.review.store import LogicalClock, ReviewStore
from cirlab.sgparse.rule_parser import RuleParserBackend
from cirlab.synthetic import SyntheticSpec, build_synthetic_dataset
from cirlab.train.data import prepare_split
from cirlab.train.loop import TrainConfig, run_training
from cirlab.train.losses import bbc_loss

from .test_aggregate import assert_grads_close, central_fd_grads, multi_star, star
from .test_train import brute_force_bbc, unit_rows


@contextlib.contextmanager
def criterion(name: str):
    """Prints the per-criterion verdict (visible with `pytest -s`)."""
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def test_loss_oracle():
    with criterion("loss-oracle"):
        start = time.perf_counter()
        rng = np.random.default_rng(123)
        for trial in range(100):
            b = int(rng.integers(1, 9))
            d = int(rng.integers(2, 17))
            tau = float(rng.uniform(0.05, 2.0))
            composed = unit_rows(b, d, seed=trial)
            targets = unit_rows(b, d, seed=5000 + trial)
            ours = float(bbc_loss(composed, targets, tau))
            assert abs(ours - brute_force_bbc(composed, targets, tau)) < 1e-6

        single = unit_rows(1, 8, seed=0)
        assert float(bbc_loss(single, single, 0.07)) == 0.0

        row = unit_rows(1, 8, seed=1)
        for b in (2, 4, 8):
            uniform = row.repeat(b, 1)
            assert abs(float(bbc_loss(uniform, uniform, 0.3)) - math.log(b)) < 1e-9

        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"loss oracle took {elapsed:.2f}s"


def test_gradient_checks():
    with criterion("gradient-checks"):
        start = time.perf_counter()
        torch.manual_seed(0)

        agg = GraphAttentionAggregator(
            dim=4, heads=2, layers=1, generator=torch.Generator().manual_seed(1)
        )
        g = multi_star(
            [(torch.randn(4), [torch.randn(4), torch.randn(4)]), (torch.randn(4), [])]
        )
        probe = torch.randn(2, 4)

        def agg_loss():
            return (aggregate(g, agg).tokens * probe).sum()

        agg_loss().backward()
        params = list(agg.parameters())
        assert_grads_close(
            [p.grad.clone() for p in params], central_fd_grads(params, agg_loss), rel=1e-3
        )

        cfg = ComposerConfig(queries=2, dim=8, text_dim=8, image_dim=8, heads=2,
                             layers=1, ffn_mult=1, max_entities=2)
        composer = Composer(cfg, generator=torch.Generator().manual_seed(2))
        backend = ToyEncoderBackend(
            dims=EncoderDims(channels=2, image_dim=8, seq_len=4, text_dim=8, vector_dim=8), seed=3
        )
        from cirlab.aggregate.gat import EntityTokens

        ent = EntityTokens(tokens=torch.randn(2, 8), subjects=("a", "b"))
        text = backend.encode_text("red dog")
        vis = backend.encode_image("img")
        cprobe = torch.randn(8)

        def comp_loss():
            return (composer.compose(ent, text, vis) * cprobe).sum()

        for p in composer.parameters():
            p.grad = None
        comp_loss().backward()
        cparams = list(composer.parameters())
        assert_grads_close(
            [p.grad.clone() for p in cparams], central_fd_grads(cparams, comp_loss), rel=1e-3
        )

        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"gradient checks took {elapsed:.2f}s"


def test_aggregation_invariants():
    with criterion("aggregation-invariants"):
        agg = GraphAttentionAggregator(
            dim=8, heads=4, layers=1, generator=torch.Generator().manual_seed(4)
        )
        self_vec = torch.randn(8, dtype=torch.float64)
        neighbors = [torch.randn(8, dtype=torch.float64) for _ in range(5)]

        out_fwd = aggregate(star(self_vec, neighbors), agg).tokens.detach()
        out_rev = aggregate(star(self_vec, list(reversed(neighbors))), agg).tokens.detach()
        assert float((out_fwd - out_rev).abs().max()) < 1e-6

        for layer_weights in agg.attention_weights(star(self_vec, neighbors))[0]:
            assert float((layer_weights.sum(dim=0) - 1.0).abs().max()) < 1e-6

        lone = star(self_vec, [])
        weights = agg.attention_weights(lone)[0][0]
        assert weights.shape[0] == 1
        assert float((weights - 1.0).abs().max()) < 1e-12
        assert aggregate(lone, agg).tokens.shape == (1, 8)


def test_metric_oracle():
    with criterion("metric-oracle"):
        rng = np.random.default_rng(7)
        for gallery_size in (1, 2, 37, 200):
            d = 8
            mat = torch.from_numpy(rng.standard_normal((gallery_size, d)))
            mat = mat / torch.linalg.vector_norm(mat, dim=1, keepdim=True)
            ids = tuple(f"g{i:04d}" for i in range(gallery_size))
            index = GalleryIndex(ids=ids, tokens=mat)
            q = normalize(torch.from_numpy(rng.standard_normal(d)))

            sims = {i: float(mat[pos] @ q) for pos, i in enumerate(ids)}
            oracle = sorted(ids, key=lambda i: (-sims[i], i))
            assert rank(q, index) == oracle

            target = ids[int(rng.integers(0, gallery_size))]
            assert rank_of_target(q, target, index) == oracle.index(target) + 1

            if gallery_size >= 10:
                subset = sorted(rng.choice(gallery_size, size=6, replace=False))
                members = [ids[i] for i in subset]
                restricted = [i for i in oracle if i in set(members)]
                for m in members:
                    assert subset_rank(q, members, m, index) == restricted.index(m) + 1

        for _ in range(50):
            ranks = rng.integers(1, 100, size=25).tolist()
            values = [recall_at_k(ranks, k) for k in range(1, 101)]
            assert all(a <= b for a, b in zip(values, values[1:]))
            oracle_vals = [sum(1 for r in ranks if r <= k) / len(ranks) for k in range(1, 101)]
            assert values == oracle_vals


def test_published_arithmetic():
    with criterion("published-arithmetic"):
        assert round2(composite_avg_cirr(85.69, 83.77)) == 84.73
        assert round2(composite_avg_cirr(81.30, 80.65)) == 80.97
        assert round2(category_avg_fashioniq(55.29, 64.84, 63.42)) == 61.18


def test_pipeline_determinism_and_routing(tmp_path):
    with criterion("pipeline-determinism-and-routing"):
        start = time.perf_counter()
        manifest, design, backend = build_pipeline_fixture()

        artifacts = []
        stores = []
        for name in ("a", "b"):
            store = ReviewStore(path=tmp_path / name / "log.jsonl", clock=LogicalClock())
            result = run_pipeline(manifest, PipelineConfig(), mock_clients(), store, backend)
            save_manifest(result.manifest, tmp_path / name / "manifest.jsonl")
            result.ledger.save(tmp_path / name / "ledger.jsonl")
            artifacts.append(
                (
                    (tmp_path / name / "manifest.jsonl").read_bytes(),
                    (tmp_path / name / "ledger.jsonl").read_bytes(),
                    json.dumps(store.export_state(), sort_keys=True),
                )
            )
            stores.append((store, result))
        assert artifacts[0] == artifacts[1]

        store, result = stores[0]
        pair = result.ledger.stage("pair_check")
        assert (pair.retained, pair.review, pair.discarded) == (
            design.three_yes, design.two_yes, design.low_yes)
        sample = result.ledger.stage("image_sample")
        assert sample.discarded == design.low_similarity

        finalized = [t for t in result.manifest.triplets if t.status == "finalized"]
        assert finalized and all(t.mod_text.token_count <= 77 for t in finalized)

        # every flagged assess item re-confirmed rank 1 by the brute-force oracle
        by_id = {t.id: t for t in result.manifest.triplets}
        actives = [t for t in result.manifest.triplets if t.status != "discarded"]
        index = gallery_from_images(sorted({(t.target.id, t.target.uri) for t in actives}), backend)
        flagged = [item for item in store.items() if item.stage.startswith("assess")]
        assert flagged
        for item in flagged:
            t = by_id[item.triplet_id]
            query = (
                backend.text_vector(t.mod_text.text)
                if item.stage == "assess_text"
                else backend.image_vector(t.ref.uri)
            )
            sims = {gid: float(index.tokens[pos] @ query) for pos, gid in enumerate(index.ids)}
            oracle = sorted(index.ids, key=lambda i: (-sims[i], i))
            assert oracle[0] == t.target.id

        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"pipeline criterion took {elapsed:.2f}s"


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    """Shared end-to-end artifacts: dataset, trained model, gallery."""
    out = tmp_path_factory.mktemp("endtoend")
    manifest = build_synthetic_dataset(SyntheticSpec())
    backend = ToyEncoderBackend(
        dims=EncoderDims(channels=4, image_dim=32, seq_len=16, text_dim=32, vector_dim=24),
        seed=7,
    )
    parser = RuleParserBackend()
    config = TrainConfig(steps=1000, batch_size=32, learning_rate=1e-3, seed=7,
                         record_wall_time=False)
    started = time.perf_counter()
    result = run_training(manifest, config, parser, backend, out)
    train_seconds = time.perf_counter() - started
    return manifest, backend, parser, config, result, train_seconds


def test_synthetic_end_to_end(synthetic_run):
    with criterion("synthetic-end-to-end"):
        manifest, backend, parser, config, result, train_seconds = synthetic_run
        assert config.steps <= 2000
        assert train_seconds < 600, f"training took {train_seconds:.0f}s"
        assert result.final_loss < result.first_loss

        model = load_checkpoint(result.checkpoint_path)
        test_examples = prepare_split(manifest, "test", parser, backend)
        images = gallery_images(manifest, "test", "all")
        index = model_gallery_index(model, images, backend)
        report = evaluate_model(
            model, test_examples, index, ks=(1, 5, 10), subset_ks=(1, 2, 3),
            subsets={t.id: list(t.subset_ids) for t in manifest.active() if t.subset_ids},
        )
        composed_r1 = report.recall_at[1]

        baseline_index = gallery_from_images(images, backend)
        test_triplets = [t for t in manifest.active() if t.split == "test"]
        text_hits = sum(
            1
            for t in test_triplets
            if baseline_text_only(t.mod_text.text, backend, baseline_index)[0] == t.target.id
        )
        image_hits = sum(
            1
            for t in test_triplets
            if baseline_image_only(t.ref.uri, backend, baseline_index)[0] == t.target.id
        )
        text_r1 = text_hits / len(test_triplets)
        image_r1 = image_hits / len(test_triplets)

        print(
            f"  composed R@1={composed_r1:.2f}  text-only R@1={text_r1:.2f}  "
            f"image-only R@1={image_r1:.2f}"
        )
        assert composed_r1 >= text_r1 + 0.20
        assert composed_r1 >= image_r1 + 0.20


def test_ablation_reduced_sequence(synthetic_run, tmp_path):
    with criterion("ablation-reduced-sequence"):
        manifest, backend, parser, config, _, _ = synthetic_run
        from dataclasses import replace

        ablated = replace(config, steps=3, no_sg=True)
        result = run_training(manifest, ablated, parser, backend, tmp_path)
        sig = result.signature
        assert sig["variant"] == "no_sg"
        assert sig["entity_slots"] == 0
        assert sig["sequence_capacity"] == config.composer.queries + backend.dims.seq_len
        full_capacity = (
            config.composer.queries + config.composer.max_entities + backend.dims.seq_len
        )
        assert sig["sequence_capacity"] < full_capacity


def test_checkpoint_round_trip(tmp_path, parser):
    with criterion("checkpoint-round-trip"):
        backend = ToyEncoderBackend(
            dims=EncoderDims(channels=4, image_dim=32, seq_len=16, text_dim=32, vector_dim=24),
            seed=1,
        )
        model = CompositionModel(config=ComposerConfig(), seed=5)
        from cirlab.train.data import prepare_query

        q = prepare_query("the circle is red. the circle has a dotted pattern.",
                          "synthetic://color=red&shape=circle&pattern=dotted&size=tiny",
                          parser, backend)
        target_vis = backend.encode_image("synthetic://color=red&shape=circle&pattern=dotted&size=large")
        before_c = model.compose_token(q)
        before_t = model.target_token(target_vis)

        path = tmp_path / "model.pt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert float((loaded.compose_token(q) - before_c).abs().max()) == 0.0
        assert float((loaded.target_token(target_vis) - before_t).abs().max()) == 0.0
