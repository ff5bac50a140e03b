import numpy as np
import pytest

from vtprune import ActivationBundle, BundleMeta, TokenSet, validate_bundle

from conftest import make_bundle


def tiny_bundle(**overrides):
    meta = BundleMeta("t", 4, 64, 8, 1, 1, 2, (2, 6))
    fields = {
        "token_features": np.zeros((4, 3), dtype=np.float32),
        "token_positions": np.full((4, 2), 0.5, dtype=np.float32),
        "cls_attention": np.full((1, 4), 0.25, dtype=np.float32),
        "key_vectors": {
            2: np.ones((1, 4, 2), dtype=np.float32),
            6: np.ones((1, 4, 2), dtype=np.float32),
        },
        "meta": meta,
    }
    fields.update(overrides)
    return ActivationBundle(**fields)


def test_well_formed_bundle_has_no_violations():
    assert validate_bundle(tiny_bundle()) == []


def test_position_out_of_range_is_flagged():
    pos = np.full((4, 2), 0.5, dtype=np.float32)
    pos[2] = (1.2, 0.5)
    violations = validate_bundle(tiny_bundle(token_positions=pos))
    assert len(violations) == 1
    assert "token_positions" in violations[0]


def test_cls_attention_shape_mismatch_is_flagged():
    cls = np.full((1, 3), 0.33, dtype=np.float32)
    violations = validate_bundle(tiny_bundle(cls_attention=cls))
    assert any("cls_attention" in v for v in violations)


def test_negative_attention_is_flagged():
    cls = np.array([[0.5, -0.1, 0.3, 0.3]], dtype=np.float32)
    violations = validate_bundle(tiny_bundle(cls_attention=cls))
    assert any("negative" in v for v in violations)


def test_key_vector_token_count_mismatch_is_flagged():
    kv = {
        2: np.ones((1, 3, 2), dtype=np.float32),
        6: np.ones((1, 4, 2), dtype=np.float32),
    }
    violations = validate_bundle(tiny_bundle(key_vectors=kv))
    assert any("key_vectors[2]" in v for v in violations)


def test_undeclared_key_layer_is_flagged():
    kv = {2: np.ones((1, 4, 2), dtype=np.float32)}
    violations = validate_bundle(tiny_bundle(key_vectors=kv))
    assert any("key_vectors" in v and "declared" in v for v in violations)


def test_token_count_must_match_meta_m():
    bundle = make_bundle(m=32, seed=1)
    bundle.meta.m = 33
    assert any("meta.m" in v or "rows" in v for v in validate_bundle(bundle))


def test_nonfinite_features_are_flagged():
    feats = np.zeros((4, 3), dtype=np.float32)
    feats[0, 0] = np.nan
    violations = validate_bundle(tiny_bundle(token_features=feats))
    assert any("non-finite" in v for v in violations)


def test_validation_is_idempotent_and_pure():
    bundle = make_bundle(m=16, seed=2)
    first = validate_bundle(bundle)
    second = validate_bundle(bundle)
    assert first == second == []


def test_token_set_invariants():
    ts = TokenSet(
        features=np.zeros((3, 2)),
        positions=np.zeros((3, 2)),
        origin=[(0,), (1, 2), (3,)],
        kind=["kept", "merged", "elite"],
    )
    assert ts.violations(m=4) == []
    assert ts.origin_union() == {0, 1, 2, 3}


def test_token_set_overlapping_origins_flagged():
    ts = TokenSet(
        features=np.zeros((2, 2)),
        positions=np.zeros((2, 2)),
        origin=[(0, 1), (1, 2)],
        kind=["merged", "merged"],
    )
    assert any("disjoint" in v for v in ts.violations(m=4))


def test_token_set_kind_origin_consistency():
    ts = TokenSet(
        features=np.zeros((1, 2)),
        positions=np.zeros((1, 2)),
        origin=[(0, 1)],
        kind=["kept"],
    )
    assert any("kind[0]" in v for v in ts.violations(m=4))


def test_strategy_validation():
    from vtprune import PruneStrategy

    with pytest.raises(ValueError):
        PruneStrategy(variant="nope")
    with pytest.raises(ValueError, match="seed"):
        PruneStrategy(variant="random_baseline")
    assert PruneStrategy(variant="random_baseline", seed=7).seed == 7
