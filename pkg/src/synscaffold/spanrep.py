"""Candidate spans and their embeddings.

Spans are 1-based inclusive ``(i, j)`` pairs.  A span embedding concatenates
the boundary states, an attention-pooled summary of the span and embedded
width / distance / position features, then passes it through a ReLU
feed-forward network.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensorcore as tc

WIDTH_BUCKETS = (1, 2, 3, 4, 5, 8, 16)
DISTANCE_BUCKETS = (0, 1, 2, 3, 4, 8, 16, 32)
POSITIONS = ("before", "after", "overlap")


def enumerate_spans(n, D):
    return [(i, j) for i in range(1, n + 1) for j in range(i, min(n, i + D - 1) + 1)]


def bucket(value, lower_bounds):
    """Index of the bucket whose lower bound is the largest one <= value."""
    if value < lower_bounds[0]:
        raise ValueError(f"{value} is below the first bucket")
    return int(np.searchsorted(lower_bounds, value, side="right") - 1)


def position(span, target):
    i, j = span
    ts, te = target
    if j < ts:
        return "before"
    if i > te:
        return "after"
    return "overlap"


def distance(span, target):
    """Tokens strictly between span and target; 0 when adjacent or overlapping."""
    i, j = span
    ts, te = target
    if j < ts:
        return ts - j - 1
    if i > te:
        return i - te - 1
    return 0


def span_feature_ids(span, target=None):
    width = bucket(span[1] - span[0] + 1, WIDTH_BUCKETS)
    if target is None:
        return width, None, None
    return (width, bucket(distance(span, target), DISTANCE_BUCKETS),
            POSITIONS.index(position(span, target)))


def span_summary(h, spans, w_head):
    """Attention-pooled summaries u, shape (len(spans), dim), plus the weights sigma."""
    n = h.shape[0]
    logits = tc.matmul(h, w_head)
    k = np.arange(1, n + 1)
    starts = np.array([s[0] for s in spans])[:, None]
    ends = np.array([s[1] for s in spans])[:, None]
    inside = (k >= starts) & (k <= ends)
    rows = tc.reshape(logits, (1, n)) + tc.Tensor(np.zeros((len(spans), 1)))
    sigma = tc.softmax(rows, axis=1, mask=inside)
    return tc.matmul(sigma, h), sigma


@dataclass
class SpanConfig:
    ffn_dim: int = 150
    ffn_depth: int = 2
    ffn_dropout: float = 0.2
    feature_dim: int = 20
    use_target: bool = True


class SpanEmbedder:
    def __init__(self, params, config, token_dim, prefix="span"):
        self.params = params
        self.config = config
        self.w_head = params.weight(f"{prefix}.head", (token_dim, 1))
        fd = config.feature_dim
        self.width_emb = params.weight(f"{prefix}.width", (len(WIDTH_BUCKETS), fd))
        in_dim = 3 * token_dim + fd
        if config.use_target:
            self.distance_emb = params.weight(f"{prefix}.distance", (len(DISTANCE_BUCKETS), fd))
            self.position_emb = params.weight(f"{prefix}.position", (len(POSITIONS), fd))
            in_dim += 2 * fd
        self.layers = []
        for k in range(config.ffn_depth):
            self.layers.append((params.weight(f"{prefix}.ffn{k}.w", (in_dim, config.ffn_dim)),
                                params.bias(f"{prefix}.ffn{k}.b", config.ffn_dim)))
            in_dim = config.ffn_dim
        self.output_dim = in_dim

    def features(self, spans, target=None):
        """Embedded feature vectors a, shape (len(spans), n_features * feature_dim)."""
        ids = np.array([span_feature_ids(s, target) for s in spans], dtype=object)
        parts = [tc.take(self.width_emb, ids[:, 0].astype(np.intp))]
        if self.config.use_target:
            if target is None:
                raise ValueError("target features are enabled but no target was given")
            parts.append(tc.take(self.distance_emb, ids[:, 1].astype(np.intp)))
            parts.append(tc.take(self.position_emb, ids[:, 2].astype(np.intp)))
        return tc.concat(parts, axis=1) if len(parts) > 1 else parts[0]

    def embed(self, h, spans, target=None, training=False):
        """Span embeddings v, shape (len(spans), output_dim)."""
        n = h.shape[0]
        for i, j in spans:
            if not 1 <= i <= j <= n:
                raise ValueError(f"span {(i, j)} out of bounds for {n} tokens")
        starts = np.array([s[0] - 1 for s in spans])
        ends = np.array([s[1] - 1 for s in spans])
        u, _ = span_summary(h, spans, self.w_head)
        x = tc.concat([tc.take(h, starts), tc.take(h, ends), u, self.features(spans, target)], axis=1)
        for w, b in self.layers:
            x = tc.relu(tc.matmul(x, w) + b)
            x = tc.dropout(x, self.config.ffn_dropout, self.params.rng, training)
        return x
