"""Syntactic scaffold: treebank reading, span labels and the auxiliary loss.

Every candidate span of a treebank sentence gets a syntactic label under one
of four schemes; a softmax classifier over span embeddings is trained to
predict it alongside the primary task and thrown away afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensorcore as tc
from .spanrep import enumerate_spans

SCHEMES = ("identity", "nonterminal", "nonterminal_parent", "common")
NULL = "null"
OTHER = "OTHER"
EMPTY_POS = "-NONE-"


class TreeParseError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class Tree:
    """A node of a phrase-structure tree.  Preterminals carry ``word``."""

    __slots__ = ("label", "children", "word", "start", "end")

    def __init__(self, label, children=(), word=None):
        self.label = label
        self.children = list(children)
        self.word = word
        self.start = self.end = 0

    @property
    def is_preterminal(self):
        return self.word is not None

    @property
    def span(self):
        return self.start, self.end

    def leaves(self):
        if self.is_preterminal:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]

    @property
    def tokens(self):
        return [leaf.word for leaf in self.leaves()]

    @property
    def pos(self):
        return [leaf.label for leaf in self.leaves()]

    def linearize(self):
        if self.is_preterminal:
            return f"({self.label} {self.word})"
        return f"({self.label} {' '.join(c.linearize() for c in self.children)})"

    def __eq__(self, other):
        return isinstance(other, Tree) and self.linearize() == other.linearize()

    def __repr__(self):
        return f"Tree({self.linearize()!r})"


def _tokenize(text):
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            yield ch, i
            i += 1
        else:
            k = i
            while k < n and not text[k].isspace() and text[k] not in "()":
                k += 1
            yield text[i:k], i
            i = k


def parse_bracketed_tree(text):
    """Parse one s-expression tree.

    Empty-category leaves (POS ``-NONE-``) and the phrases left empty by their
    removal are dropped, as is an unlabeled root wrapper.
    """
    def offset(char_index):
        return len(text[:char_index].encode("utf-8"))

    tokens = list(_tokenize(text))
    if not tokens:
        raise TreeParseError("empty input", 0)
    pos = 0

    def node():
        nonlocal pos
        tok, at = tokens[pos]
        if tok != "(":
            raise TreeParseError(f"stray token {tok!r}", offset(at))
        pos += 1
        if pos >= len(tokens):
            raise TreeParseError("unbalanced parentheses", offset(at))
        label = ""
        if tokens[pos][0] not in "()":
            label = tokens[pos][0]
            pos += 1
        if pos >= len(tokens):
            raise TreeParseError("unbalanced parentheses", offset(at))
        if tokens[pos][0] == ")":
            raise TreeParseError("empty constituent", offset(at))
        if tokens[pos][0] != "(":
            word = tokens[pos][0]
            pos += 1
            if pos >= len(tokens):
                raise TreeParseError("unbalanced parentheses", offset(at))
            if tokens[pos][0] != ")":
                raise TreeParseError(f"stray token {tokens[pos][0]!r}", offset(tokens[pos][1]))
            pos += 1
            if not label:
                raise TreeParseError("leaf without a tag", offset(at))
            return Tree(label, word=word)
        children = []
        while True:
            if pos >= len(tokens):
                raise TreeParseError("unbalanced parentheses", offset(at))
            if tokens[pos][0] == ")":
                pos += 1
                break
            children.append(node())
        return Tree(label, children)

    root = node()
    if pos != len(tokens):
        raise TreeParseError(f"stray token {tokens[pos][0]!r}", offset(tokens[pos][1]))
    root = _strip_empty(root)
    if root is None:
        raise TreeParseError("tree has no surface tokens", 0)
    while not root.label and not root.is_preterminal and len(root.children) == 1:
        root = root.children[0]
    _assign_spans(root, 1)
    return root


def _strip_empty(node):
    if node.is_preterminal:
        return None if node.label == EMPTY_POS else node
    node.children = [c for c in (_strip_empty(c) for c in node.children) if c is not None]
    return node if node.children else None


def _assign_spans(node, start):
    node.start = start
    if node.is_preterminal:
        node.end = start
        return start + 1
    for c in node.children:
        start = _assign_spans(c, start)
    node.end = start - 1
    return start


def category(label):
    """Strip function tags and co-indices: ``NP-SBJ-1`` -> ``NP``."""
    if label.startswith("-"):
        return label
    return label.split("-")[0].split("=")[0]


def constituents(tree):
    """``{(i, j): (chain, parent)}`` for every phrasal constituent.

    Unary chains over one span collapse into one entry with categories joined
    top-down by ``|``; ``parent`` is the category of the node above the chain,
    None at the root.
    """
    out = {}

    def visit(node, parent):
        if node.is_preterminal:
            return
        chain = [node]
        while len(chain[-1].children) == 1 and not chain[-1].children[0].is_preterminal:
            chain.append(chain[-1].children[0])
        out[node.span] = ("|".join(category(c.label) for c in chain), parent)
        below = category(chain[-1].label)
        for child in chain[-1].children:
            visit(child, below)

    visit(tree, None)
    return out


@dataclass(frozen=True)
class LabelScheme:
    name: str
    class1: frozenset = field(default_factory=lambda: frozenset({"NP", "PP"}))

    def __post_init__(self):
        if self.name not in SCHEMES:
            raise ValueError(f"unknown scaffold scheme {self.name!r}; choose from {SCHEMES}")

    @property
    def null(self):
        return "0" if self.name == "identity" else NULL

    @property
    def class1_label(self):
        return "/".join(sorted(self.class1))

    def fixed_categories(self):
        """The closed label set for identity/common, None for the open schemes."""
        if self.name == "identity":
            return ["0", "1"]
        if self.name == "common":
            return [NULL, self.class1_label, OTHER]
        return None

    def label(self, chain, parent):
        if self.name == "identity":
            return "1"
        if self.name == "nonterminal":
            return chain
        if self.name == "nonterminal_parent":
            return f"{chain}+par={parent if parent is not None else NULL}"
        if any(c in self.class1 for c in chain.split("|")):
            return self.class1_label
        return OTHER


def extract_span_labels(tree, scheme, D):
    """Labels for every span of width <= D, in ``enumerate_spans`` order."""
    n = tree.end
    cons = constituents(tree)
    labels = []
    for span in enumerate_spans(n, D):
        hit = cons.get(span)
        labels.append(scheme.null if hit is None else scheme.label(*hit))
    return labels


def placeholder_target(pos_tags):
    """Width-1 span at the last verb (tag starting with VB), else at token 1."""
    for k in range(len(pos_tags), 0, -1):
        if pos_tags[k - 1].startswith("VB"):
            return k, k
    return 1, 1


@dataclass
class ScaffoldInstance:
    tokens: list
    pos: list
    target: tuple
    spans: list
    labels: list


def scaffold_instance(tree, scheme, D):
    pos = tree.pos
    return ScaffoldInstance(tokens=tree.tokens, pos=pos, target=placeholder_target(pos),
                            spans=enumerate_spans(len(pos), D),
                            labels=extract_span_labels(tree, scheme, D))


def category_distribution(span_embeddings, category_weights):
    """p(z = c | span) for every span, shape (spans, categories)."""
    return tc.softmax(tc.matmul(span_embeddings, category_weights), axis=1)


def scaffold_loss(span_embeddings, labels, category_weights, categories):
    """Summed negative log-probability of each span's gold category.

    ``category_weights`` has one column per entry of ``categories``.
    """
    lookup = {c: k for k, c in enumerate(categories)}
    try:
        gold = np.array([lookup[z] for z in labels], dtype=np.intp)
    except KeyError as exc:
        raise ValueError(f"scaffold label {exc.args[0]!r} is not a known category") from None
    logp = tc.log_softmax(tc.matmul(span_embeddings, category_weights), axis=1)
    n_cat = len(categories)
    picked = tc.take(tc.reshape(logp, (-1,)), np.arange(len(gold)) * n_cat + gold)
    return -tc.tensor_sum(picked)


def joint_loss(primary_loss, scaffold_loss_value, delta):
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0 or scaffold_loss_value is None:
        return primary_loss
    return primary_loss + delta * scaffold_loss_value
