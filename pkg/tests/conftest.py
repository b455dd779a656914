import itertools
import math

import numpy as np
import pytest

from synscaffold.config import RunConfig


def all_segmentations(n, D, n_labels):
    """Every labeled segmentation of n tokens with widths <= D, by recursion."""
    if n == 0:
        yield ()
        return
    for width in range(1, min(D, n) + 1):
        for rest in all_segmentations(n - width, D, n_labels):
            for label in range(n_labels):
                # the last segment covers tokens n-width+1 .. n
                yield rest + ((n - width + 1, n, label),)


def brute_scores(table, n, D, gold=None, mask=None):
    """(segmentation, score [+ cost]) pairs computed by direct summation."""
    spans = [(i, j) for i in range(1, n + 1) for j in range(i, min(n, i + D - 1) + 1)]
    row = {s: k for k, s in enumerate(spans)}
    gold_set = set(map(tuple, gold)) if gold is not None else None
    out = []
    for seg in all_segmentations(n, D, table.shape[1]):
        if mask is not None and not all(mask[lab] for _, _, lab in seg):
            continue
        total = sum(table[row[(i, j)], lab] for i, j, lab in seg)
        if gold_set is not None:
            total += sum(1 for s in seg if s not in gold_set)
        out.append((seg, total))
    return out


def brute_log_partition(table, n, D, gold=None, mask=None):
    vals = np.array([s for _, s in brute_scores(table, n, D, gold, mask)])
    m = vals.max()
    return m + math.log(np.exp(vals - m).sum())


def n_spans(n, D):
    return sum(1 for i in range(1, n + 1) for j in range(i, n + 1) if j - i < D)


def random_crf_case(rng, max_n=6, max_D=3, max_labels=3):
    n = int(rng.integers(1, max_n + 1))
    D = int(rng.integers(1, max_D + 1))
    L = int(rng.integers(1, max_labels + 1))
    table = rng.normal(0, 2, size=(n_spans(n, D), L))
    return n, D, L, table


@pytest.fixture
def toy_config():
    """A tiny model for finite-difference checks."""
    return RunConfig.for_task("frame_srl", max_span_width=3, word_dim=3, target_dim=2,
                              hidden_dim=3, layers=2, ffn_dim=4, feature_dim=2,
                              lstm_dropout=0.1, ffn_dropout=0.2, seed=7, figures=False)


def fixture_config(**overrides):
    """Settings for the overfitting runs: small network, default optimizer."""
    values = dict(scaffold_scheme="common", delta=1.0, max_span_width=4, word_dim=16,
                  target_dim=4, hidden_dim=16, layers=2, ffn_dim=32, feature_dim=4,
                  epochs=200, stop_at=0.99, seed=3, figures=False)
    values.update(overrides)
    return RunConfig.for_task("frame_srl", **values)


def pairs(xs):
    return list(itertools.combinations(xs, 2))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
