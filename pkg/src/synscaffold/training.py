"""Training, evaluation and prediction for the SRL and coreference tasks."""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import data
from . import tensorcore as tc
from .encoder import read_embeddings
from .metrics import PRF, conll_average, coref_scores, srl_prf
from .models import CorefModel, SrlModel, build_from_meta, scheme_for
from .scaffold import NULL, scaffold_instance

log = logging.getLogger(__name__)

# *_loss: running sums over the epoch's batches (dropout on, parameters moving);
# *_loss_eval: the end-of-epoch model on fixed data with dropout off
HISTORY_FIELDS = ("epoch", "primary_loss", "scaffold_loss", "primary_loss_eval",
                  "scaffold_loss_eval", "dev_metric")


class NumericalError(RuntimeError):
    pass


@dataclass
class TrainResult:
    model: object
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_metric: float = float("-inf")
    checkpoint: str | None = None


def load_corpus(config, path):
    return data.read_srl_corpus(path) if config.is_srl else data.read_coref_corpus(path)


def scaffold_categories(scheme, instances):
    fixed = scheme.fixed_categories()
    if fixed is not None:
        return fixed
    seen = sorted({z for inst in instances for z in inst.labels} - {NULL})
    return [NULL] + seen


def build_model(config, train_items, extra_token_lists=(), scaffold_items=(), categories=None):
    rng = np.random.default_rng(config.seed)
    table = read_embeddings(config.embeddings_path, config.word_dim) if config.embeddings_path else {}
    if config.is_srl:
        sentences = [inst.tokens for inst in train_items]
    else:
        sentences = [s for doc in train_items for s in doc.sentences]
    vocab = data.build_vocab([sentences, extra_token_lists, [x.tokens for x in scaffold_items]],
                             table, config.word_dim, rng)
    if config.is_srl:
        roles = sorted({r for inst in train_items for _, _, r in inst.arguments})
        frame_roles = None
        if config.task == "frame_srl":
            frame_roles = {}
            for inst in train_items:
                frame_roles.setdefault(inst.frame, set()).update(r for _, _, r in inst.arguments)
        return SrlModel(config, vocab, roles, frame_roles, categories)
    genres = sorted({d.genre for d in train_items if d.genre is not None}) or None
    use_speakers = all(d.speakers is not None for d in train_items) and bool(train_items)
    return CorefModel(config, vocab, genres, use_speakers, categories)


def _named_grads(model, grads):
    names = {id(t): name for name, t in model.params.items()}
    return {names[id(t)]: g for t, g in grads.items() if id(t) in names}


def _summed_loss(fn, items):
    total = 0.0
    for item in items:
        loss = fn(item)
        if loss is not None:
            total += loss.item()
    return total


def evaluate_model(model, items):
    """Task metrics as an ordered dict; the early-stopping metric is listed first."""
    if isinstance(model, SrlModel):
        predicted = [model.predict(inst) for inst in items]
        score = srl_prf([inst.arguments for inst in items], predicted)
        return {"argument_f1": score.f1, "srl": score}
    predicted = [model.predict(doc) for doc in items]
    scores = coref_scores([d.clusters for d in items], predicted)
    return {"conll_average": conll_average(*scores.values()), **scores}


def score_predictions(config, gold_items, predicted_items):
    """Metrics for an already-predicted corpus, aligned item by item with the gold one."""
    if config.is_srl:
        score = srl_prf([g.arguments for g in gold_items], [p.arguments for p in predicted_items])
        return {"argument_f1": score.f1, "srl": score}
    scores = coref_scores([d.clusters for d in gold_items], [d.clusters for d in predicted_items])
    return {"conll_average": conll_average(*scores.values()), **scores}


def train(config, train_items=None, dev_items=None, trees=None, write=True):
    """Alternating-batch multitask training with best-dev model selection."""
    if train_items is None:
        train_items = load_corpus(config, config.train_path)
    if dev_items is None:
        dev_items = load_corpus(config, config.dev_path) if config.dev_path else train_items
    scheme = scheme_for(config)
    scaffold_items, categories = [], None
    if scheme is not None:
        if trees is None:
            trees = data.read_treebank(config.treebank_path)
        scaffold_items = [scaffold_instance(t, scheme, config.max_span_width) for t in trees]
        if not scaffold_items:
            raise data.CorpusError("scaffold treebank is empty")
        categories = scaffold_categories(scheme, scaffold_items)
    dev_tokens = [inst.tokens for inst in dev_items] if config.is_srl else \
        [s for d in dev_items for s in d.sentences]
    model = build_model(config, train_items, dev_tokens, scaffold_items, categories)
    state = tc.AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    trainable = model.params.trainable()
    # fixed scaffold sample, at most the primary size, for the end-of-epoch loss
    probe = scaffold_items
    if len(scaffold_items) > len(train_items):
        probe = data.resample(scaffold_items, len(train_items), np.random.default_rng(config.seed))
    result = TrainResult(model)
    best = None
    stale = 0
    for epoch in range(1, config.epochs + 1):
        seed = config.seed * 100003 + epoch
        if scaffold_items:
            schedule = data.build_schedule(train_items, scaffold_items, seed, config.batch_size)
        else:
            schedule = data.primary_schedule(train_items, seed, config.batch_size)
        totals = {"primary": 0.0, "scaffold": 0.0}
        for b, (tag, batch) in enumerate(schedule):
            try:
                with tc.Tape() as tape:
                    losses = []
                    for item in batch:
                        loss = model.loss(item, training=True) if tag == "primary" else \
                            model.scaffold_loss(item, training=True)
                        if loss is not None:
                            losses.append(loss)
                    if not losses:
                        continue
                    total = losses[0]
                    for loss in losses[1:]:
                        total = total + loss
                    objective = total if tag == "primary" else config.delta * total
                value = total.item()
                if not np.isfinite(value):
                    raise FloatingPointError(f"non-finite {tag} loss")
                grads = _named_grads(model, tc.backward(tape, objective))
            except FloatingPointError as exc:
                raise NumericalError(f"epoch {epoch}, batch {b}: {exc}") from None
            totals[tag] += value
            grads = tc.clip_global_norm(grads, config.clip_norm)
            tc.adam_step(trainable, grads, state)
        try:
            l1_eval = _summed_loss(model.loss, train_items)
            l2_eval = _summed_loss(model.scaffold_loss, probe)
        except FloatingPointError as exc:
            raise NumericalError(f"epoch {epoch}, end-of-epoch loss: {exc}") from None
        metric = evaluate_model(model, dev_items)[config.early_stopping_metric]
        row = {"epoch": epoch, "primary_loss": totals["primary"],
               "scaffold_loss": totals["scaffold"], "primary_loss_eval": l1_eval,
               "scaffold_loss_eval": l2_eval, "dev_metric": metric}
        result.history.append(row)
        log.info("epoch %d  L1 %.4f  L2 %.4f  dev %s %.4f", epoch, l1_eval, l2_eval,
                 config.early_stopping_metric, metric)
        if metric > result.best_metric:
            result.best_metric, result.best_epoch = metric, epoch
            best = {k: t.data.copy() for k, t in model.params.items()}
            stale = 0
        else:
            stale += 1
        if config.stop_at and metric >= config.stop_at:
            break
        if config.patience and stale >= config.patience:
            break
    if best is not None:
        for k, t in model.params.items():
            t.data = best[k]
    if write:
        os.makedirs(config.out_dir, exist_ok=True)
        result.checkpoint = os.path.join(config.out_dir, "model.npz")
        tc.save_checkpoint(result.checkpoint, model.params, model.meta())
        write_history(os.path.join(config.out_dir, "metrics.csv"), result.history)
        if config.figures:
            from .plotting import plot_training_curves

            plot_training_curves(result.history, os.path.join(config.out_dir, "loss_curves.png"),
                                 config.early_stopping_metric)
    return result


def write_history(path, history):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(HISTORY_FIELDS)
        for row in history:
            w.writerow([row["epoch"]] + [repr(float(row[k])) for k in HISTORY_FIELDS[1:]])


def load_model(path):
    params, meta = tc.load_checkpoint(path)
    return build_from_meta(meta, params)


def predict_corpus(model, items):
    """Predicted annotations in the corpus classes, aligned with ``items``."""
    if isinstance(model, SrlModel):
        return [data.SrlInstance(tokens=inst.tokens, target=inst.target, frame=inst.frame,
                                 arguments=model.predict(inst), sentence_id=inst.sentence_id,
                                 pos=inst.pos) for inst in items]
    return [data.CorefDocument(doc.sentences, [list(c) for c in model.predict(doc)],
                               doc.genre, doc.speakers) for doc in items]


def write_predictions(path, config, predicted):
    if config.is_srl:
        data.write_srl_records(path, data.records_from_instances(predicted))
    else:
        data.write_coref_corpus(path, predicted)


def flatten_scores(scores):
    """Scores as ``{name: PRF or float}`` for reporting, without duplicates."""
    out = {}
    for name, s in scores.items():
        if name == "argument_f1":
            continue
        out[name] = s
    return out


__all__ = ["train", "evaluate_model", "score_predictions", "predict_corpus", "load_model",
           "write_predictions", "write_history", "NumericalError", "TrainResult", "PRF"]
