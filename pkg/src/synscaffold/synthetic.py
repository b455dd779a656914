"""Small generated corpora drawn from a toy phrase-structure grammar.

Used for smoke runs and for the overfitting checks in the test-suite: SRL
instances, treebank trees and coreference documents all come from the same
grammar, so the scaffold labels are informative about the SRL arguments.
"""
from __future__ import annotations

import numpy as np

from .data import CorefDocument, SrlInstance
from .scaffold import parse_bracketed_tree

DETS = ("the", "a")
NOUNS = ("cat", "dog", "ball", "park", "box", "tree")
NAMES = ("Kim", "Lee", "Sam")
VERBS = {"saw": "Perception", "kicked": "Impact", "chased": "Pursuit"}
PREPS = ("in", "near")


def _np(rng):
    if rng.random() < 0.3:
        name = NAMES[rng.integers(len(NAMES))]
        return f"(NP (NNP {name}))", [name]
    det, noun = DETS[rng.integers(len(DETS))], NOUNS[rng.integers(len(NOUNS))]
    return f"(NP (DT {det}) (NN {noun}))", [det, noun]


def _sentence(rng):
    subj, subj_toks = _np(rng)
    verb = list(VERBS)[rng.integers(len(VERBS))]
    obj, obj_toks = _np(rng)
    pieces = [f"(VBD {verb})", obj]
    toks = subj_toks + [verb] + obj_toks
    args = [(1, len(subj_toks), "Agent"), (len(subj_toks) + 2, len(subj_toks) + 1 + len(obj_toks), "Theme")]
    if rng.random() < 0.5:
        prep = PREPS[rng.integers(len(PREPS))]
        pobj, pobj_toks = _np(rng)
        start = len(toks) + 1
        pieces.append(f"(PP (IN {prep}) {pobj})")
        toks += [prep] + pobj_toks
        args.append((start, len(toks), "Place"))
    tree = f"(S {subj} (VP {' '.join(pieces)}))"
    return tree, toks, verb, len(subj_toks) + 1, args


def toy_srl_instances(count, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        tree, toks, verb, vpos, args = _sentence(rng)
        pos = parse_bracketed_tree(tree).pos
        out.append(SrlInstance(tokens=toks, target=(vpos, vpos), frame=VERBS[verb],
                               arguments=args, sentence_id=k, pos=pos))
    return out


def toy_tree_lines(count, seed=0):
    rng = np.random.default_rng(seed)
    return [_sentence(rng)[0] for _ in range(count)]


def toy_trees(count, seed=0):
    return [parse_bracketed_tree(line) for line in toy_tree_lines(count, seed)]


def toy_coref_documents(count, seed=0, sentences=2):
    """Documents where a name is picked up again by a pronoun in a later sentence."""
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(count):
        sents, clusters = [], []
        offset = 0
        for _ in range(sentences):
            name = NAMES[rng.integers(len(NAMES))]
            verb = list(VERBS)[rng.integers(len(VERBS))]
            noun = NOUNS[rng.integers(len(NOUNS))]
            first = [name, verb, "the", noun]
            second = ["he", "liked", "it"]
            sents.append(first)
            sents.append(second)
            clusters.append([[offset + 1, offset + 1], [offset + 5, offset + 5]])
            clusters.append([[offset + 3, offset + 4], [offset + 7, offset + 7]])
            offset += len(first) + len(second)
        docs.append(CorefDocument(sents, clusters))
    return docs
