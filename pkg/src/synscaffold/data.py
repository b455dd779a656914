"""Corpus readers and writers, vocabulary building and the multitask batch schedule.

SRL corpus: one JSON object per line::

    {"tokens": [...], "targets": [{"span": [i, j], "frame": "F",
                                    "args": [{"span": [i, j], "role": "R"}]}]}

Coreference corpus: one JSON object per line::

    {"sentences": [[...], ...], "clusters": [[[i, j], ...], ...],
     "genre": "nw", "speakers": [...]}

All indices are 1-based and inclusive; coreference indices count tokens across
the whole document.  ``pos``, ``genre`` and ``speakers`` are optional.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .encoder import Vocabulary
from .scaffold import parse_bracketed_tree


class CorpusError(ValueError):
    pass


@dataclass
class SrlRecord:
    tokens: list
    targets: list
    pos: list | None = None


@dataclass
class SrlInstance:
    tokens: list
    target: tuple
    frame: str
    arguments: list  # (i, j, role)
    sentence_id: int = 0
    pos: list | None = None


@dataclass
class CorefDocument:
    sentences: list
    clusters: list
    genre: str | None = None
    speakers: list | None = None

    @property
    def tokens(self):
        return [t for s in self.sentences for t in s]

    def sentence_offsets(self):
        out, k = [], 0
        for s in self.sentences:
            out.append(k)
            k += len(s)
        return out


def _span(value, where):
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(x, int) for x in value)):
        raise CorpusError(f"{where}: span must be a pair of integers, got {value!r}")
    return tuple(value)


def _check_arguments(args, n, where):
    last = 0
    for i, j, role in sorted(args):
        if not 1 <= i <= j <= n:
            raise CorpusError(f"{where}: argument {(i, j)} out of bounds")
        if i <= last:
            raise CorpusError(f"{where}: overlapping arguments at {(i, j, role)}")
        last = j


def parse_srl_record(obj, where):
    try:
        tokens = obj["tokens"]
        targets = []
        for t in obj["targets"]:
            span = _span(t["span"], where)
            if not 1 <= span[0] <= span[1] <= len(tokens):
                raise CorpusError(f"{where}: target {span} out of bounds")
            args = [(*_span(a["span"], where), a["role"]) for a in t["args"]]
            _check_arguments(args, len(tokens), where)
            targets.append({"span": span, "frame": t["frame"], "args": args})
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"{where}: malformed record ({exc!r})") from None
    return SrlRecord(tokens=list(tokens), targets=targets, pos=obj.get("pos"))


def _lines(path):
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if line.strip():
                try:
                    yield number, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"{path}:{number}: invalid JSON ({exc.msg})") from None


def read_srl_records(path):
    return [parse_srl_record(obj, f"{path}:{number}") for number, obj in _lines(path)]


def srl_instances(records):
    """One instance per (sentence, target) pair."""
    out = []
    for sid, rec in enumerate(records):
        for t in rec.targets:
            out.append(SrlInstance(tokens=rec.tokens, target=t["span"], frame=t["frame"],
                                   arguments=list(t["args"]), sentence_id=sid, pos=rec.pos))
    return out


def read_srl_corpus(path):
    return srl_instances(read_srl_records(path))


def srl_record_json(rec):
    obj = {"tokens": rec.tokens}
    if rec.pos is not None:
        obj["pos"] = rec.pos
    obj["targets"] = [{"span": list(t["span"]), "frame": t["frame"],
                       "args": [{"span": [i, j], "role": r} for i, j, r in t["args"]]}
                      for t in rec.targets]
    return json.dumps(obj, ensure_ascii=False)


def write_srl_records(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(srl_record_json(rec) + "\n")


def records_from_instances(instances, arguments=None):
    """Regroup instances by sentence; ``arguments`` optionally replaces each instance's args."""
    records = {}
    for k, inst in enumerate(instances):
        rec = records.get(inst.sentence_id)
        if rec is None:
            rec = records[inst.sentence_id] = SrlRecord(tokens=inst.tokens, targets=[], pos=inst.pos)
        args = inst.arguments if arguments is None else arguments[k]
        rec.targets.append({"span": tuple(inst.target), "frame": inst.frame, "args": list(args)})
    return [records[k] for k in sorted(records)]


def parse_coref_document(obj, where):
    try:
        sentences = [list(s) for s in obj["sentences"]]
        n = sum(len(s) for s in sentences)
        clusters = [[_span(m, where) for m in c] for c in obj["clusters"]]
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"{where}: malformed document ({exc!r})") from None
    seen = set()
    for c in clusters:
        for i, j in c:
            if not 1 <= i <= j <= n:
                raise CorpusError(f"{where}: mention {(i, j)} out of bounds")
            if (i, j) in seen:
                raise CorpusError(f"{where}: mention {(i, j)} appears in two clusters")
            seen.add((i, j))
    speakers = obj.get("speakers")
    if speakers is not None and len(speakers) != n:
        raise CorpusError(f"{where}: {len(speakers)} speaker ids for {n} tokens")
    return CorefDocument(sentences, clusters, obj.get("genre"), speakers)


def read_coref_corpus(path):
    return [parse_coref_document(obj, f"{path}:{number}") for number, obj in _lines(path)]


def coref_document_json(doc):
    obj = {"sentences": doc.sentences, "clusters": [[list(m) for m in c] for c in doc.clusters]}
    if doc.genre is not None:
        obj["genre"] = doc.genre
    if doc.speakers is not None:
        obj["speakers"] = doc.speakers
    return json.dumps(obj, ensure_ascii=False)


def write_coref_corpus(path, docs):
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(coref_document_json(doc) + "\n")


def read_treebank(path):
    """One bracketed tree per non-blank line."""
    trees = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                trees.append(parse_bracketed_tree(line))
            except ValueError as exc:
                raise CorpusError(f"{path}:{number}: {exc}") from None
    return trees


def build_vocab(corpora, embedding_table, dim, rng):
    """Vocabulary over every token in ``corpora`` (iterables of token lists)."""
    tokens = [tok for corpus in corpora for sentence in corpus for tok in sentence]
    return Vocabulary(tokens, embedding_table, dim, rng)


@dataclass
class BatchSchedule:
    batches: list = field(default_factory=list)  # (tag, list of items)

    def __iter__(self):
        return iter(self.batches)

    def __len__(self):
        return len(self.batches)

    def tags(self):
        return [tag for tag, _ in self.batches]


def resample(items, size, rng):
    """Draw ``size`` items: without replacement when downsampling, with it when upsampling."""
    if size <= len(items):
        picked = rng.choice(len(items), size=size, replace=False)
    else:
        picked = rng.choice(len(items), size=size, replace=True)
    return [items[k] for k in picked]


def build_schedule(primary, scaffold, seed, batch_size=32, primary_tag="primary", scaffold_tag="scaffold"):
    """Alternate primary and scaffold batches, scaffold resampled to the primary size."""
    if not primary or not scaffold:
        raise ValueError("both streams must be non-empty")
    rng = np.random.default_rng(seed)
    sampled = resample(list(scaffold), len(primary), rng)
    order = rng.permutation(len(primary))
    shuffled = [primary[k] for k in order]
    rng.shuffle(sampled)

    def chunks(xs):
        return [xs[k:k + batch_size] for k in range(0, len(xs), batch_size)]

    schedule = BatchSchedule()
    for p, s in zip(chunks(shuffled), chunks(sampled)):
        schedule.batches.append((primary_tag, p))
        schedule.batches.append((scaffold_tag, s))
    return schedule


def primary_schedule(primary, seed, batch_size=32, tag="primary"):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(primary))
    shuffled = [primary[k] for k in order]
    return BatchSchedule([(tag, shuffled[k:k + batch_size]) for k in range(0, len(shuffled), batch_size)])
