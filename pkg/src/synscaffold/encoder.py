"""Token inputs and the stacked bidirectional LSTM that contextualizes them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensorcore as tc


@dataclass
class EncoderConfig:
    word_dim: int = 300
    target_dim: int = 100
    hidden_dim: int = 300
    layers: int = 6
    recurrent_dropout: float = 0.1
    freeze_embeddings: bool = True
    use_target: bool = True

    def __post_init__(self):
        for name in ("word_dim", "target_dim", "hidden_dim", "layers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.recurrent_dropout < 1.0:
            raise ValueError("recurrent_dropout must lie in [0, 1)")

    @property
    def input_dim(self):
        return self.word_dim + (self.target_dim if self.use_target else 0)

    @property
    def output_dim(self):
        return 2 * self.hidden_dim


def read_embeddings(path, dim):
    """Read a whitespace-separated text embedding file into ``{token: vector}``."""
    table = {}
    bad = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                bad += 1
                continue
            table[parts[0]] = np.array([float(x) for x in parts[1:]])
    if bad:
        raise ValueError(f"{path}: {bad} line(s) do not have {dim} values after the token")
    return table


class Vocabulary:
    """Token index plus the embedding matrix rows backing it.

    Row 0 is the unknown token.  Tokens missing from the pretrained table get a
    random vector drawn once, at construction, so they stay fixed for the run.
    """

    UNK = "<unk>"

    def __init__(self, tokens, embedding_table, dim, rng):
        self.dim = dim
        self.index = {self.UNK: 0}
        for tok in tokens:
            if tok not in self.index:
                self.index[tok] = len(self.index)
        self.vectors = np.empty((len(self.index), dim))
        self.oov = set()
        for tok, row in self.index.items():
            vec = embedding_table.get(tok)
            if vec is None:
                self.oov.add(tok)
                vec = rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim)
            self.vectors[row] = vec

    def __len__(self):
        return len(self.index)

    def __contains__(self, tok):
        return tok in self.index

    def ids(self, tokens):
        return np.array([self.index.get(t, 0) for t in tokens], dtype=np.intp)

    def tokens(self):
        return list(self.index)

    @classmethod
    def from_saved(cls, tokens, vectors):
        vocab = cls.__new__(cls)
        vocab.index = {t: k for k, t in enumerate(tokens)}
        vocab.vectors = np.asarray(vectors)
        vocab.dim = vocab.vectors.shape[1]
        vocab.oov = set()
        return vocab


def target_indicator(n, target):
    """0/1 indicator of the (1-based, inclusive) target span over ``n`` tokens."""
    if n == 0:
        raise ValueError("empty sentence")
    start, end = target
    if not 1 <= start <= end <= n:
        raise ValueError(f"target {target} out of bounds for {n} tokens")
    ind = np.zeros(n, dtype=np.intp)
    ind[start - 1:end] = 1
    return ind


class Encoder:
    """Embeds tokens and runs ``layers`` bidirectional LSTM layers.

    Layers after the first are joined by highway connections:
    ``gate * lstm(x) + (1 - gate) * x`` with ``gate = sigmoid(x W + b)``.
    """

    def __init__(self, params, config, vocab, prefix="encoder"):
        self.config = config
        self.params = params
        self.vocab = vocab
        self.embedding = params.fixed(f"{prefix}.words", vocab.vectors,
                                      trainable=not config.freeze_embeddings)
        if config.use_target:
            self.target = params.weight(f"{prefix}.target", (2, config.target_dim))
        self.layers = []
        in_dim = config.input_dim
        H = config.hidden_dim
        for layer in range(config.layers):
            cells = {}
            for direction in ("fw", "bw"):
                p = f"{prefix}.l{layer}.{direction}"
                cells[direction] = (
                    params.weight(f"{p}.wx", (in_dim, 4 * H)),
                    params.weight(f"{p}.wh", (H, 4 * H)),
                    params.bias(f"{p}.b", 4 * H),
                )
            if layer > 0:
                cells["gate"] = (
                    params.weight(f"{prefix}.l{layer}.gate.w", (in_dim, 2 * H)),
                    params.bias(f"{prefix}.l{layer}.gate.b", 2 * H),
                )
            self.layers.append(cells)
            in_dim = 2 * H

    def embed_tokens(self, tokens, target=None):
        """Concatenated word vectors and transformed target indicators, shape (n, input_dim)."""
        if len(tokens) == 0:
            raise ValueError("empty sentence")
        words = tc.take(self.embedding, self.vocab.ids(tokens))
        if not self.config.use_target:
            return words
        if target is None:
            raise ValueError("a target span is required by this encoder")
        onehot = np.eye(2)[target_indicator(len(tokens), target)]
        return tc.concat([words, tc.matmul(tc.Tensor(onehot), self.target)], axis=1)

    def encode(self, inputs, training=False):
        """Contextualized states h_1..h_n, shape (n, 2 * hidden_dim)."""
        rng = self.params.rng
        x = inputs
        for layer, cells in enumerate(self.layers):
            fw = self._run(x, cells["fw"], reverse=False)
            bw = self._run(x, cells["bw"], reverse=True)
            y = tc.concat([fw, bw], axis=1)
            if layer > 0:
                w, b = cells["gate"]
                gate = tc.sigmoid(tc.matmul(x, w) + b)
                y = gate * y + (1.0 - gate) * x
            if layer < len(self.layers) - 1:
                y = tc.dropout(y, self.config.recurrent_dropout, rng, training)
            x = y
        return x

    def _run(self, x, cell, reverse):
        wx, wh, b = cell
        H = self.config.hidden_dim
        n = x.shape[0]
        projected = tc.matmul(x, wx) + b
        h = tc.Tensor(np.zeros(H))
        c = tc.Tensor(np.zeros(H))
        out = [None] * n
        order = range(n - 1, -1, -1) if reverse else range(n)
        for t in order:
            z = projected[t] + tc.matmul(h, wh)
            sig = tc.sigmoid(z[:3 * H])
            g = tc.tanh(z[3 * H:])
            i, f, o = sig[:H], sig[H:2 * H], sig[2 * H:]
            c = f * c + i * g
            h = o * tc.tanh(c)
            out[t] = h
        return tc.stack(out)
