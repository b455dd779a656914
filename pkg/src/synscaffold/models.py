"""SRL and coreference models sharing one span-embedding network with the scaffold head."""
from __future__ import annotations

import numpy as np

from . import coref as cr
from . import semicrf
from . import tensorcore as tc
from .encoder import Encoder, EncoderConfig, Vocabulary
from .scaffold import LabelScheme, scaffold_loss
from .spanrep import SpanConfig, SpanEmbedder, enumerate_spans

NULL_ROLE = "null"


class SpanModel:
    use_target = True

    def __init__(self, config, vocab, categories=None):
        self.config = config
        self.params = tc.ParameterStore(np.random.default_rng(config.seed))
        enc = EncoderConfig(word_dim=config.word_dim, target_dim=config.target_dim,
                            hidden_dim=config.hidden_dim, layers=config.layers,
                            recurrent_dropout=config.lstm_dropout,
                            freeze_embeddings=config.freeze_embeddings, use_target=self.use_target)
        self.encoder = Encoder(self.params, enc, vocab)
        span_cfg = SpanConfig(ffn_dim=config.ffn_dim, ffn_depth=config.ffn_depth,
                              ffn_dropout=config.ffn_dropout, feature_dim=config.feature_dim,
                              use_target=self.use_target)
        self.spans = SpanEmbedder(self.params, span_cfg, enc.output_dim)
        self.categories = list(categories) if categories else None
        self.scaffold_weights = None
        if self.categories:
            self.scaffold_weights = self.params.weight("scaffold.categories",
                                                       (self.spans.output_dim, len(self.categories)))

    @property
    def vocab(self):
        return self.encoder.vocab

    @property
    def D(self):
        return self.config.max_span_width

    def rng(self):
        return self.params.rng

    def span_embeddings(self, tokens, spans, target=None, training=False):
        x = self.encoder.embed_tokens(tokens, target if self.use_target else None)
        h = self.encoder.encode(x, training)
        return self.spans.embed(h, spans, target if self.use_target else None, training)

    def scaffold_loss(self, inst, training=False):
        if self.scaffold_weights is None:
            raise RuntimeError("model was built without a scaffold head")
        v = self.span_embeddings(inst.tokens, inst.spans, inst.target, training)
        return scaffold_loss(v, inst.labels, self.scaffold_weights, self.categories)

    def meta(self):
        return {"config": self.config.to_dict(), "vocab": self.vocab.tokens(),
                "categories": self.categories}


class SrlModel(SpanModel):
    """Semi-CRF argument labeler.  Label 0 is the null role."""

    def __init__(self, config, vocab, roles, frame_roles=None, categories=None):
        super().__init__(config, vocab, categories)
        self.labels = [NULL_ROLE] + [r for r in roles if r != NULL_ROLE]
        self.label_id = {r: k for k, r in enumerate(self.labels)}
        self.frame_roles = {f: sorted(rs) for f, rs in (frame_roles or {}).items()}
        self.role_weights = self.params.weight("srl.roles", (self.spans.output_dim, len(self.labels)))

    def label_mask(self, frame):
        """Permitted labels for a frame; None (all labels) for unknown frames or PropBank."""
        roles = self.frame_roles.get(frame)
        if roles is None:
            return None
        mask = np.zeros(len(self.labels), dtype=bool)
        mask[0] = True
        for r in roles:
            if r in self.label_id:
                mask[self.label_id[r]] = True
        return mask

    def scores(self, inst, training=False):
        n = len(inst.tokens)
        v = self.span_embeddings(inst.tokens, enumerate_spans(n, self.D), inst.target, training)
        return tc.matmul(v, self.role_weights)

    def gold_segmentation(self, inst):
        """Gold segmentation with label ids, or None if the instance cannot be trained on."""
        args = []
        for i, j, role in inst.arguments:
            if role not in self.label_id:
                return None
            args.append((i, j, self.label_id[role]))
        seg = semicrf.gold_to_segmentation(args, len(inst.tokens), 0)
        return seg if semicrf.fits(seg, self.D) else None

    def loss(self, inst, training=False):
        gold = self.gold_segmentation(inst)
        if gold is None:
            return None
        mask = self.label_mask(inst.frame)
        return semicrf.srl_loss(self.scores(inst, training), len(inst.tokens), self.D, gold, mask)

    def predict(self, inst):
        n = len(inst.tokens)
        seg = semicrf.viterbi(self.scores(inst), n, self.D, self.label_mask(inst.frame))
        return [(s.i, s.j, self.labels[s.label]) for s in seg if s.label != 0]

    def meta(self):
        out = super().meta()
        out.update(kind="srl", roles=self.labels[1:], frame_roles=self.frame_roles)
        return out


class CorefModel(SpanModel):
    """Antecedent ranker over all spans up to width D; sentences are encoded independently."""

    use_target = False

    def __init__(self, config, vocab, genres=None, use_speakers=False, categories=None):
        super().__init__(config, vocab, categories)
        self.genres = sorted(genres) if genres else None
        self.use_speakers = use_speakers
        self.scorer = cr.PairScorer(self.params, self.spans.output_dim, ffn_dim=config.ffn_dim,
                                    depth=config.ffn_depth, feature_dim=config.feature_dim,
                                    dropout=config.ffn_dropout, genres=self.genres,
                                    use_speakers=use_speakers)

    def document_spans(self, doc, training=False):
        spans, parts = [], []
        for offset, sentence in zip(doc.sentence_offsets(), doc.sentences):
            local = enumerate_spans(len(sentence), self.D)
            parts.append(self.span_embeddings(sentence, local, training=training))
            spans.extend((i + offset, j + offset) for i, j in local)
        v = parts[0] if len(parts) == 1 else tc.concat(parts, axis=0)
        return spans, v

    def antecedent_scores(self, doc, training=False):
        spans, v = self.document_spans(doc, training)
        table = cr.AntecedentTable(len(spans), self.config.antecedent_window)
        speakers = doc.speakers if self.use_speakers else None
        scores = cr.antecedent_scores(self.scorer, spans, v, table, doc.genre, speakers, training)
        return spans, table, scores

    def loss(self, doc, training=False):
        spans, table, scores = self.antecedent_scores(doc, training)
        gold = cr.gold_antecedent_mask(spans, table, doc.clusters)
        return cr.coref_loss(scores, table.with_null(), gold)

    def predict(self, doc):
        spans, table, scores = self.antecedent_scores(doc)
        ants = cr.predict_antecedents(scores, table)
        links = {s: (None if a is None else spans[a]) for s, a in zip(spans, ants)}
        return cr.recover_clusters(links)

    def meta(self):
        out = super().meta()
        out.update(kind="coref", genres=self.genres, use_speakers=self.use_speakers)
        return out


def scheme_for(config):
    if not config.scaffold_scheme or config.scaffold_scheme == "none" or config.delta == 0:
        return None
    return LabelScheme(config.scaffold_scheme, frozenset(config.class1))


def build_from_meta(meta, params):
    from .config import RunConfig

    config = RunConfig.from_dict(meta["config"])
    vocab = Vocabulary.from_saved(meta["vocab"], params["encoder.words"])
    if meta["kind"] == "srl":
        model = SrlModel(config, vocab, meta["roles"], meta["frame_roles"], meta["categories"])
    else:
        model = CorefModel(config, vocab, meta["genres"], meta["use_speakers"], meta["categories"])
    missing = set(model.params) ^ set(params)
    if missing:
        raise ValueError(f"checkpoint parameters do not match the model: {sorted(missing)[:5]}")
    for name, t in model.params.items():
        if t.shape != params[name].shape:
            raise ValueError(f"checkpoint parameter {name} has shape {params[name].shape}, expected {t.shape}")
        t.data = params[name].copy()
    return model
