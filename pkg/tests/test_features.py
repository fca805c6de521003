from __future__ import annotations

import numpy as np
import pytest

from hitrateopt import (
    FeatureSchema,
    ValidationError,
    apply_scaler,
    encode,
    expand_matrix,
    expand_quadratic,
    fit_scaler,
    quadratic_dim,
)
from oracles import count_monomials


def test_dimension_formula_matches_bruteforce_count():
    for D in range(1, 21):
        assert quadratic_dim(D) == count_monomials(D)


def test_schema_dimensions():
    schema = FeatureSchema(continuous=("a", "b"),
                           categoricals=(("c", ("x", "y", "z")),))
    assert schema.raw_dim == 4  # 2 continuous + (3 - 1) indicators
    assert schema.expanded_dim == quadratic_dim(4)


def test_process_scale_schema():
    # 14 continuous plus two 2-level categoricals: 16 raw, 153 expanded
    schema = FeatureSchema(
        continuous=tuple(f"v{i}" for i in range(14)),
        categoricals=(("line", ("a", "b")), ("grade", ("lo", "hi"))),
    )
    assert schema.raw_dim == 16
    assert schema.expanded_dim == 153
    assert expand_quadratic(np.zeros(16)).size == 153


def test_encode_passthrough_and_indicators():
    schema = FeatureSchema(continuous=("a",), categoricals=(("c", ("x", "y", "z")),))
    vec = encode({"a": 2.5, "c": "y"}, schema)
    assert vec.tolist() == [2.5, 1.0, 0.0]
    reference = encode({"a": 2.5, "c": "x"}, schema)
    assert reference.tolist() == [2.5, 0.0, 0.0]  # reference level: all zeros


def test_encode_errors():
    schema = FeatureSchema(continuous=("a",), categoricals=(("c", ("x", "y")),))
    with pytest.raises(ValidationError):
        encode({"a": 1.0, "c": "unknown"}, schema)
    with pytest.raises(ValidationError):
        encode({"c": "x"}, schema)


def test_encode_injective_on_distinct_levels():
    schema = FeatureSchema(continuous=("a",), categoricals=(("c", ("x", "y", "z")),))
    records = [{"a": 1.0, "c": lvl} for lvl in ("x", "y", "z")]
    encoded = [tuple(encode(r, schema)) for r in records]
    assert len(set(encoded)) == 3


def test_expand_quadratic_example():
    assert expand_quadratic([2.0, 3.0]).tolist() == [1.0, 2.0, 3.0, 4.0, 6.0, 9.0]


def test_expand_quadratic_zero_vector():
    out = expand_quadratic(np.zeros(3))
    assert out[0] == 1.0
    assert np.all(out[1:] == 0.0)


def test_expand_rejects_nonfinite():
    with pytest.raises(ValidationError):
        expand_quadratic([1.0, np.nan])


def test_expansion_permutation_consistency():
    rng = np.random.default_rng(2)
    for D in (2, 3, 4):
        x = rng.normal(size=D)
        base = expand_quadratic(x)
        for _ in range(5):
            perm = rng.permutation(D)
            permuted = expand_quadratic(x[perm])
            # both expansions enumerate the same multiset of monomials
            assert sorted(base.tolist()) == pytest.approx(sorted(permuted.tolist()))
            assert permuted[1 : D + 1] == pytest.approx(x[perm])


def test_scaler_standardizes_training_matrix():
    rng = np.random.default_rng(4)
    X = rng.normal(loc=3.0, scale=2.0, size=(40, 5))
    scaler = fit_scaler(X)
    Z = apply_scaler(scaler, X)
    assert np.max(np.abs(Z.mean(axis=0))) <= 1e-12
    assert Z.std(axis=0) == pytest.approx(np.ones(5))


def test_scaler_leaves_constant_columns_untouched():
    X = np.column_stack([np.ones(10), np.arange(10.0)])
    scaler = fit_scaler(X)
    Z = apply_scaler(scaler, X)
    assert np.all(Z[:, 0] == 1.0)
    assert scaler.scale[0] == 1.0 and scaler.mean[0] == 0.0


def test_scaler_symmetric_pair():
    X = np.array([[-1.0], [1.0]])
    Z = apply_scaler(fit_scaler(X), X)
    assert Z.ravel() == pytest.approx([-1.0, 1.0])


def test_expand_matrix_matches_rowwise():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(7, 4))
    expanded = expand_matrix(X)
    for i in range(7):
        assert expanded[i] == pytest.approx(expand_quadratic(X[i]))


def test_schema_validation():
    with pytest.raises(ValidationError):
        FeatureSchema(continuous=("a", "a"))
    with pytest.raises(ValidationError):
        FeatureSchema(categoricals=(("c", ()),))
