import numpy as np
import pytest

from cirlab.core.manifest import validate_finalized
from cirlab.synthetic import (
    FEATURE_DIM,
    SyntheticSpec,
    build_synthetic_dataset,
    modification_text,
    parse_synthetic_uri,
    synthetic_feature_vector,
    synthetic_uri,
)


class TestSyntheticUris:
    def test_uri_round_trip(self):
        attrs = ("red", "circle", "striped", "tiny")
        assert parse_synthetic_uri(synthetic_uri(attrs)) == attrs

    def test_feature_vector_one_hot_blocks(self):
        v = synthetic_feature_vector(synthetic_uri(("red", "circle", "solid", "tiny")))
        assert v.shape == (FEATURE_DIM,)
        assert v.sum() == 4.0  # one hot bit per attribute slot
        assert set(np.unique(v)) == {0.0, 1.0}

    def test_distinct_tuples_distinct_vectors(self):
        a = synthetic_feature_vector(synthetic_uri(("red", "circle", "solid", "tiny")))
        b = synthetic_feature_vector(synthetic_uri(("blue", "circle", "solid", "tiny")))
        assert not np.array_equal(a, b)

    def test_invalid_uri_rejected(self):
        with pytest.raises(ValueError):
            parse_synthetic_uri("synthetic://color=plaid&shape=circle&pattern=solid&size=tiny")


class TestModificationText:
    def test_mentions_only_changed_slots(self):
        ref = ("red", "circle", "solid", "tiny")
        tgt = ("blue", "circle", "solid", "tiny")
        text = modification_text(ref, tgt)
        assert text == "the circle is blue."
        assert "tiny" not in text and "solid" not in text

    def test_shape_change_uses_change_construction(self):
        ref = ("red", "circle", "solid", "tiny")
        tgt = ("red", "square", "solid", "tiny")
        assert modification_text(ref, tgt) == "change the circle to a square."

    def test_multi_change_clause_order(self):
        ref = ("red", "circle", "solid", "tiny")
        tgt = ("blue", "circle", "striped", "tiny")
        assert (
            modification_text(ref, tgt)
            == "the circle is blue. the circle has a striped pattern."
        )

    def test_identical_tuples_rejected(self):
        with pytest.raises(ValueError):
            modification_text(("red", "circle", "solid", "tiny"),
                              ("red", "circle", "solid", "tiny"))

    def test_templates_parse_into_expected_graphs(self, parser):
        text = modification_text(("red", "circle", "solid", "tiny"),
                                 ("blue", "square", "striped", "small"))
        g = parser.parse(text)
        assert "circle" in g.entities and "square" in g.entities
        assert (g.entities.index("circle"), "change to", g.entities.index("square")) in g.relations
        sq = g.entities.index("square")
        assert "blue" in g.attributes[sq] and "small" in g.attributes[sq]
        pat = g.entities.index("pattern")
        assert g.attributes[pat] == ("striped",)


@pytest.fixture(scope="module")
def manifest():
    return build_synthetic_dataset(SyntheticSpec(n_images=120, n_train=80, n_test=30, seed=9))


class TestSyntheticDataset:
    def test_counts_and_validity(self, manifest):
        assert manifest.counts == {"train": 80, "test": 30}
        assert validate_finalized(manifest) == []

    def test_composed_query_identifies_target_uniquely(self, manifest):
        # the reference tuple plus the text's changed slots pins down exactly
        # one image in the pool
        images = {i.id: parse_synthetic_uri(i.uri) for i in manifest.images().values()}
        for t in manifest.triplets:
            ref = parse_synthetic_uri(t.ref.uri)
            tgt = parse_synthetic_uri(t.target.uri)
            matches = [i for i, attrs in images.items() if attrs == tgt]
            assert matches == [t.target.id]
            assert 1 <= sum(a != b for a, b in zip(ref, tgt)) <= 2

    def test_texts_omit_reference_only_attributes(self, manifest):
        import re

        for t in manifest.triplets:
            ref = parse_synthetic_uri(t.ref.uri)
            tgt = parse_synthetic_uri(t.target.uri)
            words = set(re.findall(r"\w+", t.mod_text.text))
            # unchanged color/pattern/size words never leak into the text
            for idx in (0, 2, 3):
                if ref[idx] == tgt[idx]:
                    assert ref[idx] not in words, (t.id, t.mod_text.text)

    def test_subsets_contain_target_and_gallery_members(self, manifest):
        targets = {t.target.id for t in manifest.triplets if t.split == "test"}
        for t in manifest.triplets:
            if t.split != "test":
                assert t.subset_ids is None
                continue
            assert t.subset_ids is not None
            assert t.target.id in t.subset_ids
            assert set(t.subset_ids) <= targets

    def test_deterministic_generation(self):
        spec = SyntheticSpec(n_images=60, n_train=30, n_test=10, seed=4)
        assert build_synthetic_dataset(spec) == build_synthetic_dataset(spec)
