from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_dataset
from whatif.errors import InsufficientDataError, SchemaError, TableError
from whatif.ingest import (
    Dataset,
    RawTable,
    VariableSpec,
    apply_schema,
    complete_cases,
    drop_zero_variance,
    load_dataset,
    load_schema,
    load_table,
    standardize,
    write_schema,
    write_table,
)


def test_load_table_empty_cell(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("a,b\n1,2\n3,\n")
    t = load_table(f)
    assert t.column_names == ("a", "b")
    assert t.n_rows == 2
    assert t.cells[1] == (3.0, None)


def test_load_table_ragged_row_named(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("a,b\n1,2\n3\n4,5,6\n")
    with pytest.raises(TableError, match="row 2"):
        load_table(f)


def test_load_table_tab_and_comments(tmp_path):
    f = tmp_path / "t.tsv"
    f.write_text("# produced elsewhere\nx\ty, z\n1\tfoo\n")
    t = load_table(f)
    assert t.column_names == ("x", "y, z")
    assert t.cells[0] == (1.0, "foo")


def test_load_table_duplicate_names(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("a, a\n1,2\n")
    with pytest.raises(TableError, match="duplicate"):
        load_table(f)


def test_load_table_missing_file(tmp_path):
    with pytest.raises(TableError):
        load_table(tmp_path / "nope.csv")


def test_schema_roundtrip(tmp_path):
    specs = [
        VariableSpec("Glare = reflections", "likert7", "Lighting"),
        VariableSpec("id", "excluded"),
        VariableSpec("age", "numeric"),
    ]
    f = tmp_path / "schema.txt"
    write_schema(specs, f)
    assert load_schema(f) == specs


def test_unknown_kind():
    with pytest.raises(SchemaError):
        VariableSpec("a", "ordinal")


def test_apply_schema_codes_and_excludes():
    table = RawTable(("id", "q1", "dept", "age"), (("r1", 1.0, "ops", 30.0), ("r2", 7.0, "hr", None), ("r3", 4.0, "ops", 41.0)))
    specs = [
        VariableSpec("id", "excluded"),
        VariableSpec("q1", "likert7"),
        VariableSpec("dept", "categorical"),
        VariableSpec("age", "numeric"),
    ]
    data = apply_schema(table, specs)
    assert data.names == ["q1", "dept", "age"]
    np.testing.assert_array_equal(data.values[:, 0], [1, 7, 4])
    np.testing.assert_array_equal(data.values[:, 1], [0, 1, 0])
    assert data.missing[1, 2] and np.isnan(data.values[1, 2])
    assert data.provenance == ("excluded by schema: id",)


def test_apply_schema_output_follows_spec_order():
    table = RawTable(("a", "b"), ((1.0, 2.0),))
    data = apply_schema(table, [VariableSpec("b", "numeric"), VariableSpec("a", "numeric")])
    assert data.names == ["b", "a"]
    assert data.values.tolist() == [[2.0, 1.0]]


def test_apply_schema_all_excluded():
    table = RawTable(("a",), ((1.0,),))
    with pytest.raises(SchemaError, match="empty dataset"):
        apply_schema(table, [VariableSpec("a", "excluded")])


def test_apply_schema_likert_range():
    table = RawTable(("a",), ((8.0,),))
    with pytest.raises(SchemaError, match="outside 1..7"):
        apply_schema(table, [VariableSpec("a", "likert7")])
    table = RawTable(("a",), ((2.5,),))
    with pytest.raises(SchemaError):
        apply_schema(table, [VariableSpec("a", "likert7")])


def test_apply_schema_mismatch():
    table = RawTable(("a", "b"), ((1.0, 2.0),))
    with pytest.raises(SchemaError, match="mismatch"):
        apply_schema(table, [VariableSpec("a", "numeric")])


def test_apply_schema_text_in_numeric():
    table = RawTable(("a",), (("yes",),))
    with pytest.raises(SchemaError, match="non-numeric"):
        apply_schema(table, [VariableSpec("a", "numeric")])


def test_likert_extremes_pass_unchanged():
    table = RawTable(("a",), ((1.0,), (4.0,), (7.0,)))
    data = apply_schema(table, [VariableSpec("a", "likert7")])
    assert data.values[:, 0].tolist() == [1.0, 4.0, 7.0]


def test_schema_counts_124_of_130():
    # 130 raw columns; 5 identifier/metadata columns plus one more marked excluded in the schema
    names = [f"c{j}" for j in range(130)]
    table = RawTable(tuple(names), (tuple(float(1 + j % 7) for j in range(130)),))
    specs = [VariableSpec(nm, "excluded" if j < 6 else "likert7") for j, nm in enumerate(names)]
    assert apply_schema(table, specs).p == 124


def test_complete_cases_drops_sparse_column():
    v = np.arange(30, dtype=float).reshape(10, 3)
    v[:6, 1] = np.nan
    out = complete_cases(make_dataset(v), 0.5, min_rows=1)
    assert out.names == ["v0", "v2"]
    assert out.n == 10
    assert any("v1" in item for item in out.provenance)


def test_complete_cases_identity_without_missing():
    v = np.arange(30, dtype=float).reshape(10, 3)
    d = make_dataset(v)
    assert complete_cases(d) == d


def test_complete_cases_row_deletion_5x3():
    v = np.arange(15, dtype=float).reshape(5, 3)
    v[2, 1] = np.nan
    out = complete_cases(make_dataset(v), 1.0, min_rows=1)
    assert out.values.shape == (4, 3)
    assert out.complete


def test_complete_cases_insufficient():
    v = np.arange(15, dtype=float).reshape(5, 3)
    with pytest.raises(InsufficientDataError, match="n=5"):
        complete_cases(make_dataset(v))


def test_complete_cases_order_stable(rng):
    v = rng.normal(size=(40, 6))
    v[rng.random((40, 6)) < 0.05] = np.nan
    v[:30, 3] = np.nan
    d = make_dataset(v)
    out = complete_cases(d, 0.5)
    assert out.names == [nm for nm in d.names if nm in out.names]


def test_standardize_small_column():
    d = standardize(make_dataset([[1.0], [2.0], [3.0]]))
    col = d.values[:, 0]
    assert abs(col.mean()) < 1e-12
    assert abs(col.var() - 1.0) < 1e-12
    assert d.standardized


def test_standardize_drops_constant():
    with pytest.warns(UserWarning, match="zero-variance"):
        d = standardize(make_dataset([[4.0, 1.0], [4.0, 2.0], [4.0, 3.0]]))
    assert d.names == ["v1"]
    assert "zero variance: v0" in d.provenance


def test_drop_zero_variance_noop():
    d = make_dataset([[1.0, 2.0], [2.0, 3.0]])
    assert drop_zero_variance(d) is d


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 30), st.integers(1, 5)), elements=st.floats(-1e3, 1e3)))
def test_standardize_invariants(values):
    d = make_dataset(values)
    if any(np.ptp(values[:, j]) < 1e-3 for j in range(values.shape[1])):
        return
    z = standardize(d)
    assert np.all(np.abs(z.values.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(z.values.var(axis=0) - 1.0) < 1e-6)
    again = standardize(z)
    assert np.max(np.abs(again.values - z.values)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    arrays(
        np.float64,
        st.tuples(st.integers(1, 12), st.integers(1, 4)),
        elements=st.floats(allow_nan=False, allow_infinity=False, width=64),
    )
)
def test_write_reload_bit_exact(tmp_path_factory, values):
    d = make_dataset(values)
    path = tmp_path_factory.mktemp("rt") / "d.tsv"
    write_table(d, path, header="# stamp\n")
    back = load_table(path)
    got = np.array(back.cells, dtype=float)
    assert got.shape == values.shape
    assert np.array_equal(got.view(np.int64), values.view(np.int64))


def test_dataset_is_read_only():
    d = make_dataset([[1.0, 2.0]])
    with pytest.raises(ValueError):
        d.values[0, 0] = 5.0


def test_dataset_rejects_nan_outside_mask():
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.array([[False]]), (VariableSpec("a", "numeric"),))


def test_load_dataset(tmp_path):
    (tmp_path / "t.csv").write_text("a,b\n1,2\n3,4\n")
    (tmp_path / "s.txt").write_text("a = likert7, Lighting\nb = numeric\n")
    d = load_dataset(tmp_path / "t.csv", tmp_path / "s.txt")
    assert d.specs[0].category == "Lighting"
    assert d.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]
