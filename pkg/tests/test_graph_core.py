import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from funcgnn.graph_core import (
    DatasetError,
    GraphPairRecord,
    LabeledCfg,
    LabelVocabulary,
    build_vocabulary,
    check_cfg,
    normalized_similarity,
    one_hot,
    read_graph,
    read_pair_dataset,
    validate_cfg,
    write_pair_dataset,
)
from strategies import graphs


def test_single_node_graph_is_valid():
    assert validate_cfg(LabeledCfg(("x = 0",))) == []


def test_dangling_edge_reported():
    problems = validate_cfg(LabeledCfg(("a", "b"), ((0, 5),)))
    assert any("dangling edge" in p for p in problems)


def test_duplicate_edge_reported():
    problems = validate_cfg(LabeledCfg(("a", "b"), ((0, 1), (0, 1))))
    assert any("duplicate edge" in p for p in problems)


def test_self_loop_empty_label_and_empty_graph_reported():
    assert any("self-loop" in p for p in validate_cfg(LabeledCfg(("a",), ((0, 0),))))
    assert any("empty label" in p for p in validate_cfg(LabeledCfg(("a", ""))))
    assert validate_cfg(LabeledCfg(())) == ["graph has no nodes"]


def test_validate_reports_every_violation():
    g = LabeledCfg(("", "b"), ((0, 1), (0, 1), (1, 7)))
    assert len(validate_cfg(g)) == 3
    with pytest.raises(ValueError, match="invalid CFG"):
        check_cfg(g)


def test_vocabulary_first_seen_order_and_unk():
    g = LabeledCfg(("a", "b", "a"))
    vocab = build_vocabulary([g])
    assert vocab.index("a") == 0 and vocab.index("b") == 1
    assert vocab.unk_index == 2 and vocab.size == 3
    assert vocab.index("never seen") == vocab.unk_index


def test_single_label_corpus():
    assert build_vocabulary([LabeledCfg(("x",)), LabeledCfg(("x", "x"))]).size == 2


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        build_vocabulary([])


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError):
        LabelVocabulary(("a", "a"))


def test_one_hot_examples():
    vocab = build_vocabulary([LabeledCfg(("a", "b"))])
    assert one_hot("a", vocab).tolist() == [1.0, 0.0, 0.0]
    assert one_hot("zzz", vocab).tolist() == [0.0, 0.0, 1.0]


@given(st.lists(st.text(min_size=1, max_size=3), min_size=1, max_size=8), st.text(max_size=3))
def test_one_hot_sums_to_one(labels, probe):
    vocab = build_vocabulary([LabeledCfg(tuple(labels))])
    v = one_hot(probe, vocab)
    assert len(v) == vocab.size and v.sum() == 1.0 and set(v.tolist()) <= {0.0, 1.0}


@given(st.lists(graphs(), min_size=1, max_size=4))
def test_vocabulary_deterministic(corpus):
    assert build_vocabulary(corpus) == build_vocabulary(list(corpus))


def test_normalized_similarity_examples():
    assert normalized_similarity(0, 5, 5) == 1.0
    assert normalized_similarity(10, 10, 10) == pytest.approx(math.exp(-1), abs=1e-12)
    with pytest.raises(ValueError):
        normalized_similarity(-1, 3, 3)


@given(st.floats(0, 1e6), st.integers(1, 100), st.integers(1, 100))
def test_normalized_similarity_range(ged, n1, n2):
    s = normalized_similarity(ged, n1, n2)
    assert 0 <= s <= 1
    assert (s == 1.0) == (ged == 0) or ged < 1e-12


def test_record_similarity_checked():
    g = LabeledCfg(("a", "b"))
    r = GraphPairRecord(g, g, 2.0)
    assert r.similarity == pytest.approx(math.exp(-1))
    with pytest.raises(ValueError):
        GraphPairRecord(g, g, 2.0, similarity=0.5)
    with pytest.raises(ValueError):
        GraphPairRecord(g, g, -1.0)


@given(st.lists(st.tuples(graphs(name="g"), graphs(), st.floats(0, 50)), min_size=1, max_size=3))
def test_dataset_round_trip(tmp_path_factory, triples):
    records = [GraphPairRecord(a, b, d, "lsap") for a, b, d in triples]
    path = tmp_path_factory.mktemp("ds") / "d.json"
    write_pair_dataset(records, path)
    assert read_pair_dataset(path) == records


def test_round_trip_three_records(tmp_path):
    g1 = LabeledCfg(("a = 1", "return a"), ((0, 1),), "f")
    g2 = LabeledCfg(("a = 2", "return a"), ((0, 1),), "g")
    records = [GraphPairRecord(g1, g1, 0.0), GraphPairRecord(g1, g2, 1.0), GraphPairRecord(g2, g1, 1 / 3, "hed")]
    write_pair_dataset(records, tmp_path / "d.json")
    back = read_pair_dataset(tmp_path / "d.json")
    assert back == records and back[2].ged == 1 / 3


def _write(tmp_path, obj, text=None):
    p = tmp_path / "d.json"
    p.write_text(text if text is not None else json.dumps(obj))
    return p


def test_negative_ged_rejected(tmp_path):
    rec = {"graph_1": {"labels": ["a"], "edges": []}, "graph_2": {"labels": ["a"], "edges": []}, "ged": -1}
    with pytest.raises(DatasetError, match="record 0"):
        read_pair_dataset(_write(tmp_path, [rec]))


def test_empty_file_rejected(tmp_path):
    with pytest.raises(DatasetError, match="no records"):
        read_pair_dataset(_write(tmp_path, None, ""))
    with pytest.raises(DatasetError, match="no records"):
        read_pair_dataset(_write(tmp_path, []))


def test_malformed_and_invalid_records_name_index(tmp_path):
    with pytest.raises(DatasetError, match="malformed"):
        read_pair_dataset(_write(tmp_path, None, "[{"))
    good = {"graph_1": {"labels": ["a"], "edges": []}, "graph_2": {"labels": ["a"], "edges": []}, "ged": 0}
    bad = {"graph_1": {"labels": ["a"], "edges": [[0, 3]]}, "graph_2": {"labels": ["a"], "edges": []}, "ged": 0}
    with pytest.raises(DatasetError, match="record 1.*dangling"):
        read_pair_dataset(_write(tmp_path, [good, bad]))
    with pytest.raises(DatasetError, match="record 0.*'ged'"):
        read_pair_dataset(_write(tmp_path, [{"graph_1": good["graph_1"], "graph_2": good["graph_2"]}]))


def test_spec_schema_record_without_optional_fields(tmp_path):
    rec = {"graph_1": {"labels": ["a", "b"], "edges": [[0, 1]]}, "graph_2": {"labels": ["a"], "edges": []}, "ged": 2, "provenance": "exact"}
    (r,) = read_pair_dataset(_write(tmp_path, [rec]))
    assert r.similarity == pytest.approx(math.exp(-4 / 3), abs=1e-15)


def test_read_graph(tmp_path):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"labels": ["a", "b"], "edges": [[0, 1]]}))
    assert read_graph(p) == LabeledCfg(("a", "b"), ((0, 1),))


@given(graphs())
def test_permuted_graph_keeps_structure(g):
    perm = list(reversed(range(len(g))))
    h = g.permuted(perm)
    assert sorted(h.labels) == sorted(g.labels) and len(h.edges) == len(g.edges)
    assert np.array_equal(h.adjacency()[np.ix_(perm, perm)], g.adjacency())
