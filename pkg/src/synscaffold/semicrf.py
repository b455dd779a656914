"""Zeroth-order semi-Markov CRF over labeled segmentations.

A score table holds one row per span of ``enumerate_spans(n, D)`` and one
column per label; labels are integer column ids here, the caller owns the
mapping to role names.  All dynamic programs work in log space.
"""
from __future__ import annotations

import functools
from typing import NamedTuple

import numpy as np

from . import tensorcore as tc
from .spanrep import enumerate_spans


class Segment(NamedTuple):
    i: int
    j: int
    label: object


class OverlapError(ValueError):
    pass


class SpanIndex:
    """Row lookup for the spans of an (n, D) score table."""

    def __init__(self, n, D):
        self.n, self.D = n, D
        self.spans = enumerate_spans(n, D)
        self.row = {s: k for k, s in enumerate(self.spans)}
        # rows of spans ending at j, ordered by increasing start
        self.ending = {j: [] for j in range(1, n + 1)}
        for i, j in sorted(self.spans, key=lambda s: (s[1], s[0])):
            self.ending[j].append(i)

    def __len__(self):
        return len(self.spans)

    def rows_ending(self, j):
        starts = self.ending[j]
        return starts, [self.row[(i, j)] for i in starts]


@functools.lru_cache(maxsize=512)
def span_index(n, D):
    return SpanIndex(n, D)


def gold_to_segmentation(arguments, n, null_label):
    """Fill the gaps between gold arguments with width-1 null segments.

    ``arguments`` is an iterable of ``(i, j, label)``.  Arguments are not
    checked against a width limit here; see :func:`fits`.
    """
    args = sorted(arguments, key=lambda a: (a[0], a[1]))
    segs = []
    pos = 1
    for i, j, label in args:
        if not 1 <= i <= j <= n:
            raise ValueError(f"argument {(i, j)} out of bounds for {n} tokens")
        if i < pos:
            raise OverlapError(f"argument {(i, j, label)} overlaps a previous argument")
        segs.extend(Segment(k, k, null_label) for k in range(pos, i))
        segs.append(Segment(i, j, label))
        pos = j + 1
    segs.extend(Segment(k, k, null_label) for k in range(pos, n + 1))
    return segs


def arguments_of(segmentation, null_label):
    return [(s.i, s.j, s.label) for s in segmentation if s.label != null_label]


def fits(segmentation, D):
    return all(s.j - s.i < D for s in segmentation)


def is_segmentation(segments, n):
    pos = 1
    for s in segments:
        if s.i != pos or s.j < s.i:
            return False
        pos = s.j + 1
    return pos == n + 1


def cost(segment, gold):
    return 0 if tuple(segment) in {tuple(g) for g in gold} else 1


def cost_table(index, n_labels, gold):
    c = np.ones((len(index), n_labels))
    for s in gold:
        if (s.i, s.j) in index.row:
            c[index.row[(s.i, s.j)], s.label] = 0.0
    return c


def _mask(index, n_labels, label_mask):
    if label_mask is None:
        return None
    return np.broadcast_to(np.asarray(label_mask, dtype=bool), (len(index), n_labels))


def log_partition(scores, n, D, gold=None, label_mask=None, stats=None):
    """log sum_s exp(Psi(s) [+ cost(s, gold)]) over all segmentations, as a scalar Tensor.

    ``label_mask`` (shape (L,) or (spans, L)) removes disallowed labels;
    ``stats`` if given accumulates the number of segment scores consumed.
    """
    scores = tc.as_tensor(scores)
    index = span_index(n, D)
    n_labels = scores.shape[1]
    if scores.shape[0] != len(index):
        raise ValueError(f"score table has {scores.shape[0]} rows, expected {len(index)}")
    extra = cost_table(index, n_labels, gold) if gold is not None else None
    mask = _mask(index, n_labels, label_mask)
    alpha = [tc.Tensor(0.0)]
    for j in range(1, n + 1):
        starts, rows = index.rows_ending(j)
        k = len(rows)
        prev = tc.reshape(tc.stack([alpha[i - 1] for i in starts]), (k, 1))
        cand = tc.take(scores, rows) + prev
        if extra is not None:
            cand = cand + extra[rows]
        alpha.append(tc.logsumexp(cand, mask=None if mask is None else mask[rows]))
        if stats is not None:
            stats["segments"] = stats.get("segments", 0) + k * n_labels
    return alpha[n]


def segmentation_score(scores, n, D, segmentation):
    """Psi(segmentation) as a scalar Tensor."""
    scores = tc.as_tensor(scores)
    index = span_index(n, D)
    n_labels = scores.shape[1]
    flat = []
    for s in segmentation:
        if s.j - s.i >= D:
            raise ValueError(f"segment {tuple(s)} is wider than D={D}")
        flat.append(index.row[(s.i, s.j)] * n_labels + s.label)
    return tc.tensor_sum(tc.take(tc.reshape(scores, (-1,)), flat))


def srl_loss(scores, n, D, gold, label_mask=None, cost_augmented=True):
    """Softmax-margin loss -Psi(gold) + log Z(gold); plain NLL with ``cost_augmented=False``."""
    z = log_partition(scores, n, D, gold if cost_augmented else None, label_mask)
    return z - segmentation_score(scores, n, D, gold)


def viterbi(scores, n, D, label_mask=None):
    """Highest-scoring segmentation.

    Ties go to the first candidate in (start position, label) order.
    """
    table = scores.data if isinstance(scores, tc.Tensor) else np.asarray(scores, dtype=np.float64)
    index = span_index(n, D)
    n_labels = table.shape[1]
    mask = _mask(index, n_labels, label_mask)
    gamma = np.full(n + 1, -np.inf)
    gamma[0] = 0.0
    back = [None] * (n + 1)
    for j in range(1, n + 1):
        starts, rows = index.rows_ending(j)
        cand = table[rows] + gamma[np.array(starts) - 1][:, None]
        if mask is not None:
            cand = np.where(mask[rows], cand, -np.inf)
        best = int(np.argmax(cand))
        k, r = divmod(best, n_labels)
        gamma[j] = cand[k, r]
        back[j] = (starts[k], r)
    segs = []
    j = n
    while j > 0:
        i, r = back[j]
        segs.append(Segment(i, j, r))
        j = i - 1
    return segs[::-1]
