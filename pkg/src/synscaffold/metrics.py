"""Labeled-span P/R/F1 for SRL and the MUC / B-cubed / CEAF-phi4 coreference scores."""
from __future__ import annotations

import json
from typing import NamedTuple

import numpy as np


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def _ratio(num, den):
    return num / den if den else 0.0


def prf(p_num, p_den, r_num, r_den):
    p, r = _ratio(p_num, p_den), _ratio(r_num, r_den)
    return PRF(p, r, _ratio(2 * p * r, p + r))


def srl_counts(gold_args, predicted_args):
    gold, pred = set(map(tuple, gold_args)), set(map(tuple, predicted_args))
    return len(gold & pred), len(pred), len(gold)


def srl_prf(gold_args, predicted_args):
    """Micro-averaged exact (span, role) match over a list of per-instance argument lists."""
    correct = n_pred = n_gold = 0
    for g, p in zip(gold_args, predicted_args, strict=True):
        c, np_, ng = srl_counts(g, p)
        correct, n_pred, n_gold = correct + c, n_pred + np_, n_gold + ng
    return prf(correct, n_pred, correct, n_gold)


def _as_sets(clusters):
    # mentions are any hashable; JSON spans arrive as lists
    return [frozenset(tuple(m) if isinstance(m, list) else m for m in c) for c in clusters]


def _muc_half(keys, responses):
    owner = {m: k for k, c in enumerate(responses) for m in c}
    num = den = 0
    for c in keys:
        if len(c) < 2:
            continue
        parts = {owner.get(m, ("alone", m)) for m in c}
        num += len(c) - len(parts)
        den += len(c) - 1
    return num, den


def muc(gold_clusters, predicted_clusters):
    gold, pred = _as_sets(gold_clusters), _as_sets(predicted_clusters)
    r_num, r_den = _muc_half(gold, pred)
    p_num, p_den = _muc_half(pred, gold)
    return prf(p_num, p_den, r_num, r_den)


def _b3_half(keys, responses):
    owner = {m: c for c in responses for m in c}
    total = 0.0
    count = 0
    for c in keys:
        for m in c:
            other = owner.get(m, frozenset([m]))
            total += len(c & other) / len(c)
            count += 1
    return total, count


def b_cubed(gold_clusters, predicted_clusters):
    """Mentions present on one side only count as singletons on the other."""
    gold, pred = _as_sets(gold_clusters), _as_sets(predicted_clusters)
    universe = set().union(*gold, *pred)
    gold = gold + [frozenset([m]) for m in universe - set().union(*gold)]
    pred = pred + [frozenset([m]) for m in universe - set().union(*pred)]
    r_num, r_den = _b3_half(gold, pred)
    p_num, p_den = _b3_half(pred, gold)
    return prf(p_num, p_den, r_num, r_den)


def phi4(a, b):
    return 2 * len(a & b) / (len(a) + len(b))


def kuhn_munkres(weights):
    """Maximum-weight assignment for a rectangular matrix.

    The matrix is padded with zeros to square size; returns ``(row, col)``
    pairs inside the original bounds and the total weight.
    """
    w = np.asarray(weights, dtype=np.float64)
    rows, cols = w.shape
    n = max(rows, cols)
    if n == 0:
        return [], 0.0
    cost = np.zeros((n, n))
    cost[:rows, :cols] = -w
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.intp)  # match[col] = row, 1-based, 0 = free
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta, j1 = np.inf, 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    pairs = [(int(match[j]) - 1, j - 1) for j in range(1, n + 1)
             if match[j] - 1 < rows and j - 1 < cols]
    pairs.sort()
    return pairs, float(sum(w[r, c] for r, c in pairs))


def ceaf_phi4(gold_clusters, predicted_clusters):
    gold, pred = _as_sets(gold_clusters), _as_sets(predicted_clusters)
    if not gold or not pred:
        return PRF(0.0, 0.0, 0.0)
    sim = np.array([[phi4(g, p) for p in pred] for g in gold])
    _, total = kuhn_munkres(sim)
    return prf(total, len(pred), total, len(gold))


def conll_average(*scores):
    return sum(s.f1 for s in scores) / len(scores)


def coref_scores(gold_docs, predicted_docs):
    """Corpus-level MUC, B-cubed and CEAF-phi4 with mentions keyed by document."""
    gold, pred = [], []
    for d, (g, p) in enumerate(zip(gold_docs, predicted_docs, strict=True)):
        gold.extend([(d, *m) for m in c] for c in g)
        pred.extend([(d, *m) for m in c] for c in p)
    m, b, c = muc(gold, pred), b_cubed(gold, pred), ceaf_phi4(gold, pred)
    return {"muc": m, "b_cubed": b, "ceaf_phi4": c}


def report_lines(scores):
    """Line-JSON rows ``{metric, precision, recall, f1}``."""
    lines = []
    for name, s in scores.items():
        if isinstance(s, PRF):
            row = {"metric": name, "precision": s.precision, "recall": s.recall, "f1": s.f1}
        else:
            row = {"metric": name, "f1": float(s)}
        lines.append(json.dumps(row))
    return lines
