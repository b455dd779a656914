import json

import numpy as np
import pytest

from synscaffold.data import (CorefDocument, CorpusError, build_schedule, build_vocab,
                              primary_schedule, read_coref_corpus, read_srl_corpus,
                              read_srl_records, read_treebank, resample, write_coref_corpus,
                              write_srl_records)
from synscaffold.synthetic import toy_coref_documents

RECORD = {"tokens": ["Kim", "saw", "a", "cat", "and", "ran"],
          "targets": [{"span": [2, 2], "frame": "Perception",
                       "args": [{"span": [1, 1], "role": "Agent"}, {"span": [3, 4], "role": "Theme"}]},
                      {"span": [6, 6], "frame": "Motion", "args": [{"span": [1, 1], "role": "Mover"}]}]}


def write_lines(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")
    return path


def test_two_targets_two_instances(tmp_path):
    insts = read_srl_corpus(write_lines(tmp_path / "a.jsonl", [RECORD]))
    assert len(insts) == 2
    assert insts[0].target == (2, 2) and insts[0].arguments == [(1, 1, "Agent"), (3, 4, "Theme")]
    assert insts[1].frame == "Motion" and insts[0].sentence_id == insts[1].sentence_id


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert read_srl_corpus(path) == []
    assert read_coref_corpus(path) == []


def test_instance_count_matches_independent_scan(tmp_path):
    rng = np.random.default_rng(0)
    objs = []
    for _ in range(40):
        rec = json.loads(json.dumps(RECORD))
        rec["targets"] = rec["targets"][:int(rng.integers(0, 3))]
        objs.append(rec)
    path = write_lines(tmp_path / "c.jsonl", objs)
    expected = sum(line.count('"frame"') for line in path.read_text().splitlines())
    assert len(read_srl_corpus(path)) == expected


def test_srl_round_trip_is_byte_identical(tmp_path):
    src = tmp_path / "in.jsonl"
    src.write_text(json.dumps(RECORD, ensure_ascii=False) + "\n" +
                   json.dumps({"tokens": ["ça"], "pos": ["NN"], "targets": []}, ensure_ascii=False) + "\n",
                   encoding="utf-8")
    out = tmp_path / "out.jsonl"
    write_srl_records(out, read_srl_records(src))
    assert out.read_bytes() == src.read_bytes()


def test_coref_round_trip_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    docs = toy_coref_documents(5, seed=1)
    docs[0].genre = "nw"
    docs[0].speakers = ["x"] * len(docs[0].tokens)
    write_coref_corpus(a, docs)
    write_coref_corpus(b, read_coref_corpus(a))
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("bad", [
    {"tokens": ["a", "b", "c"], "targets": [{"span": [1, 1], "frame": "F",
                                             "args": [{"span": [1, 2], "role": "A"},
                                                      {"span": [2, 3], "role": "B"}]}]},
    {"tokens": ["a"], "targets": [{"span": [1, 1], "frame": "F"}]},
    {"tokens": ["a"], "targets": [{"span": [1, 2], "frame": "F", "args": []}]},
])
def test_bad_srl_records_report_line_number(tmp_path, bad):
    path = write_lines(tmp_path / "bad.jsonl", [RECORD, RECORD, bad])
    with pytest.raises(CorpusError, match=r"bad\.jsonl:3"):
        read_srl_corpus(path)


def test_invalid_json_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(RECORD) + "\n{oops\n", encoding="utf-8")
    with pytest.raises(CorpusError, match=":2:"):
        read_srl_corpus(path)


def test_coref_errors(tmp_path):
    doc = {"sentences": [["a", "b"]], "clusters": [[[1, 1], [2, 2]], [[2, 2], [1, 2]]]}
    with pytest.raises(CorpusError, match="two clusters"):
        read_coref_corpus(write_lines(tmp_path / "d.jsonl", [doc]))
    doc = {"sentences": [["a", "b"]], "clusters": [[[1, 1], [2, 3]]]}
    with pytest.raises(CorpusError, match="out of bounds"):
        read_coref_corpus(write_lines(tmp_path / "d.jsonl", [doc]))


def test_treebank_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "tb.txt"
    path.write_text("(S (NP (NN a)))\n\n(S (NP (NN a))\n", encoding="utf-8")
    with pytest.raises(CorpusError, match=":3:"):
        read_treebank(path)


def test_schedule_downsamples():
    primary, scaffold = list(range(100)), [f"s{k}" for k in range(1000)]
    sched = build_schedule(primary, scaffold, seed=1)
    prim = [x for tag, b in sched if tag == "primary" for x in b]
    scaf = [x for tag, b in sched if tag == "scaffold" for x in b]
    assert sorted(prim) == primary and len(scaf) == 100
    assert len(set(scaf)) == 100


def test_schedule_upsamples_with_replacement():
    primary, scaffold = list(range(1000)), [f"s{k}" for k in range(100)]
    sched = build_schedule(primary, scaffold, seed=1)
    scaf = [x for tag, b in sched if tag == "scaffold" for x in b]
    assert len(scaf) == 1000 and set(scaf) == set(scaffold)


def test_schedule_alternates():
    sched = build_schedule(list(range(100)), list(range(7)), seed=2)
    tags = sched.tags()
    assert all(a != b for a, b in zip(tags, tags[1:]))
    assert tags[0] == "primary" and all(len(b) <= 32 for _, b in sched)


def test_schedule_is_deterministic():
    a = build_schedule(list(range(50)), list(range(80)), seed=3).batches
    b = build_schedule(list(range(50)), list(range(80)), seed=3).batches
    assert a == b
    assert a != build_schedule(list(range(50)), list(range(80)), seed=4).batches


def test_schedule_requires_both_streams():
    with pytest.raises(ValueError):
        build_schedule([], [1], seed=0)


def test_resample_and_primary_schedule():
    rng = np.random.default_rng(0)
    assert sorted(resample([1, 2, 3], 3, rng)) == [1, 2, 3]
    sched = primary_schedule(list(range(70)), seed=0)
    assert [len(b) for _, b in sched] == [32, 32, 6] and set(sched.tags()) == {"primary"}


def test_vocab_size_matches_distinct_tokens():
    rng = np.random.default_rng(5)
    sents = [["a", "b", "a"], ["c"], ["b", "d"]]
    table = {"a": np.ones(3), "zz": np.zeros(3)}
    vocab = build_vocab([sents], table, 3, rng)
    assert len(vocab) == len({t for s in sents for t in s}) + 1  # plus the unknown row
    np.testing.assert_array_equal(vocab.vectors[vocab.index["a"]], np.ones(3))
    assert vocab.oov == {"<unk>", "b", "c", "d"}


def test_reader_keeps_duplicate_sentences(tmp_path):
    path = write_lines(tmp_path / "dup.jsonl", [RECORD, RECORD])
    assert len(read_srl_corpus(path)) == 4


def test_document_offsets():
    doc = CorefDocument([["a", "b"], ["c"], ["d", "e"]], [])
    assert doc.sentence_offsets() == [0, 2, 3] and doc.tokens == list("abcde")
