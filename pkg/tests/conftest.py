import numpy as np
import pytest

from lidkit import submission as sub


def make_random_scorefile(rng, n_segments, languages, oos_fraction=0.0, tie_grid=None):
    """Random records + key; optional ties (grid-snapped scores) and out-of-set
    segments, plus an occasional -inf to exercise the lost-trial convention."""
    n = len(languages)
    entries = {}
    records = []
    for i in range(n_segments):
        seg = f"seg{i:05d}"
        if oos_fraction and rng.random() < oos_fraction:
            entries[seg] = sub.OUT_OF_SET
        else:
            entries[seg] = languages[int(rng.integers(n))]
        scores = rng.normal(size=n)
        if tie_grid:
            scores = np.round(scores * tie_grid) / tie_grid
        if rng.random() < 0.02:
            scores[int(rng.integers(n))] = -np.inf
        records.append(sub.ScoreRecord(seg, scores))
    key = sub.TrialKey(list(languages), entries)
    # every language needs at least one segment for cost denominators
    for j, lang in enumerate(languages):
        if not any(v == lang for v in entries.values()):
            seg = f"pad{j}"
            entries[seg] = lang
            records.append(sub.ScoreRecord(seg, rng.normal(size=n)))
    return records, key


@pytest.fixture
def score_factory():
    return make_random_scorefile
