"""Antecedent-ranking coreference head.

Candidate spans are kept in document order (sorted by start, then end).  Each
span chooses one antecedent among the null antecedent and the K spans right
before it; the null antecedent always scores 0.
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from . import tensorcore as tc
from .spanrep import DISTANCE_BUCKETS, bucket


def precedes(a, s):
    return tuple(a) < tuple(s)


class AntecedentTable:
    """Padded (spans, K) antecedent index matrix with its validity mask."""

    def __init__(self, n_spans, K):
        self.n_spans, self.K = n_spans, K
        self.cand = np.zeros((n_spans, K), dtype=np.intp)
        self.valid = np.zeros((n_spans, K), dtype=bool)
        for s in range(n_spans):
            ants = list(range(max(0, s - K), s))[::-1]
            self.cand[s, :len(ants)] = ants
            self.valid[s, :len(ants)] = True

    def pairs(self):
        s, k = np.nonzero(self.valid)
        return s, self.cand[s, k]

    def with_null(self):
        """Validity mask with a leading, always-valid null column."""
        return np.concatenate([np.ones((self.n_spans, 1), dtype=bool), self.valid], axis=1)


def distance_bucket(s_index, a_index):
    """Bucket of the number of candidate spans strictly between ``a`` and ``s``."""
    return bucket(s_index - a_index - 1, DISTANCE_BUCKETS)


class PairScorer:
    """Feed-forward scorer over ``[v_s; v_a; v_s * v_a; phi(s, a)]``."""

    def __init__(self, params, span_dim, ffn_dim=150, depth=2, feature_dim=20, dropout=0.2,
                 genres=None, use_speakers=False, prefix="coref"):
        self.params = params
        self.dropout = dropout
        self.genres = list(genres) if genres else None
        self.use_speakers = use_speakers
        self.distance_emb = params.weight(f"{prefix}.distance", (len(DISTANCE_BUCKETS), feature_dim))
        in_dim = 3 * span_dim + feature_dim
        if self.genres:
            self.genre_emb = params.weight(f"{prefix}.genre", (len(self.genres) + 1, feature_dim))
            in_dim += feature_dim
        if use_speakers:
            self.speaker_emb = params.weight(f"{prefix}.speaker", (2, feature_dim))
            in_dim += feature_dim
        self.layers = []
        for k in range(depth):
            self.layers.append((params.weight(f"{prefix}.ffn{k}.w", (in_dim, ffn_dim)),
                                params.bias(f"{prefix}.ffn{k}.b", ffn_dim)))
            in_dim = ffn_dim
        self.out_w = params.weight(f"{prefix}.out.w", (in_dim, 1))
        self.out_b = params.bias(f"{prefix}.out.b", 1)

    def features(self, s_idx, a_idx, genre=None, same_speaker=None):
        parts = [tc.take(self.distance_emb, [distance_bucket(s, a) for s, a in zip(s_idx, a_idx)])]
        if self.genres:
            g = self.genres.index(genre) + 1 if genre in self.genres else 0
            parts.append(tc.take(self.genre_emb, np.full(len(s_idx), g)))
        if self.use_speakers:
            parts.append(tc.take(self.speaker_emb, np.asarray(same_speaker, dtype=np.intp)))
        return parts[0] if len(parts) == 1 else tc.concat(parts, axis=1)

    def score(self, vs, va, phi, training=False):
        """Scores for row-aligned batches of span pairs, shape (pairs,)."""
        x = tc.concat([vs, va, vs * va, phi], axis=1)
        for w, b in self.layers:
            x = tc.relu(tc.matmul(x, w) + b)
            x = tc.dropout(x, self.dropout, self.params.rng, training)
        return tc.reshape(tc.matmul(x, self.out_w) + self.out_b, (-1,))


def pairwise_score(scorer, spans, v, s, a, genre=None, speakers=None, training=False):
    """Score of span index ``a`` as antecedent of span index ``s``; ``a=None`` is null."""
    if a is None:
        return tc.Tensor(0.0)
    if not precedes(spans[a], spans[s]):
        raise ValueError(f"candidate {spans[a]} does not precede {spans[s]}")
    same = None
    if speakers is not None:
        same = [int(speakers[spans[s][0] - 1] == speakers[spans[a][0] - 1])]
    phi = scorer.features([s], [a], genre, same)
    return scorer.score(tc.take(v, [s]), tc.take(v, [a]), phi, training)[0]


def antecedent_scores(scorer, spans, v, table, genre=None, speakers=None, training=False):
    """(spans, K + 1) score matrix; column 0 is the null antecedent (score 0)."""
    s_idx, a_idx = table.pairs()
    flat = tc.Tensor(np.zeros(1))
    if len(s_idx):
        same = None
        if speakers is not None:
            same = [int(speakers[spans[s][0] - 1] == speakers[spans[a][0] - 1])
                    for s, a in zip(s_idx, a_idx)]
        phi = scorer.features(s_idx, a_idx, genre, same)
        pair = scorer.score(tc.take(v, s_idx), tc.take(v, a_idx), phi, training)
        flat = tc.concat([flat, pair])
    # position 0 of ``flat`` is the constant null score and also fills padding
    where = np.zeros((table.n_spans, table.K + 1), dtype=np.intp)
    s_pos, k_pos = np.nonzero(table.valid)
    where[s_pos, k_pos + 1] = np.arange(1, len(s_pos) + 1)
    return tc.take(flat, where)


def antecedent_distribution(scores, mask=None):
    """Softmax over each row of candidate antecedent scores."""
    return tc.softmax(tc.as_tensor(scores), axis=-1, mask=mask)


def gold_antecedent_mask(spans, table, clusters):
    """True where a candidate is in the span's gold cluster; null where nothing is."""
    cluster_of = {}
    for c, members in enumerate(clusters):
        for m in members:
            cluster_of[tuple(m)] = c
    gold = np.zeros((table.n_spans, table.K + 1), dtype=bool)
    for s, span in enumerate(spans):
        c = cluster_of.get(tuple(span))
        if c is not None:
            for k in range(table.K):
                if table.valid[s, k] and cluster_of.get(tuple(spans[table.cand[s, k]])) == c:
                    gold[s, k + 1] = True
        if not gold[s].any():
            gold[s, 0] = True
    return gold


def coref_loss(scores, valid, gold):
    """-sum_s log sum_{a in gold(s)} p(a | s), with p the row softmax over valid entries."""
    scores = tc.as_tensor(scores)
    total = tc.logsumexp(scores, axis=1, mask=valid)
    marginal = tc.logsumexp(scores, axis=1, mask=gold & valid)
    return tc.tensor_sum(total - marginal)


def predict_antecedents(scores, table):
    """Highest-scoring antecedent per span: a span index, or None for null."""
    data = scores.data if isinstance(scores, tc.Tensor) else np.asarray(scores)
    masked = np.where(table.with_null(), data, -np.inf)
    best = np.argmax(masked, axis=1)
    return [None if k == 0 else int(table.cand[s, k - 1]) for s, k in enumerate(best)]


def recover_clusters(links):
    """Connected components of ``{span: antecedent span or None}``; singletons dropped."""
    graph = defaultdict(set)
    for s, a in links.items():
        graph[s]
        if a is None:
            continue
        if not precedes(a, s):
            raise ValueError(f"antecedent {a} does not precede {s}")
        graph[s].add(a)
        graph[a].add(s)
    seen = set()
    clusters = []
    for start in sorted(graph):
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            node = stack.pop()
            comp.append(node)
            for nxt in graph[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(comp) > 1:
            clusters.append(sorted(comp))
    return clusters
