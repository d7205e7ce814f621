"""Task back-ends: closed-set posterior scoring and zero-resource scoring.

Closed-set tasks score each segment with the network's log posteriors
(optionally projected onto a language subset, without renormalization).
The zero-resource task enrolls each unseen language as the mean of its
reference-utterance embeddings and scores test embeddings by cosine
similarity against those centroids.

Utterances the network cannot process (too few frames after VAD) score
-inf in every column rather than aborting the run; a diagnostic is logged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import net
from .errors import NoUsableReferences, TooFewFrames, ZeroNormVector

log = logging.getLogger(__name__)


@dataclass
class LanguageModelSet:
    """Per-language centroid embeddings built from reference utterances."""

    language_ids: list[str]
    centroids: np.ndarray  # (num_languages, embed_dim)
    num_reference_utts: list[int]

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.shape[0] != len(self.language_ids):
            raise ValueError("one centroid per language required")


def score_closed_set(
    params: net.NetworkParams, features, subset: list[int] | None = None
) -> np.ndarray:
    """Log posteriors for one segment, optionally restricted to a subset.

    ``subset`` lists language indices (training-label order); the returned
    columns follow subset order and are plain projections of the full log
    posteriors, not renormalized.
    """
    n = params.num_classes
    if subset is None:
        idx = np.arange(n)
    else:
        idx = np.asarray(subset, dtype=np.int64)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= n:
            raise ValueError(f"subset indices must lie in [0, {n})")
    try:
        _, cache = net.forward(params, features)
    except TooFewFrames as exc:
        log.warning("closed-set scoring: %s; emitting -inf scores", exc)
        return np.full(idx.size, -np.inf)
    return cache.log_posteriors[idx].copy()


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; raises ZeroNormVector on degenerate input."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormVector("cannot take cosine of a zero-norm vector")
    return float(np.dot(a, b) / (na * nb))


def enroll_languages(
    params: net.NetworkParams, references: dict[str, list]
) -> LanguageModelSet:
    """Average each language's reference-utterance embeddings into a centroid.

    References that yield no embedding (too few frames) are skipped with a
    diagnostic; a language with no usable reference at all is an error.
    """
    language_ids = []
    centroids = []
    counts = []
    for language, feature_list in references.items():
        vectors = []
        for features in feature_list:
            try:
                vectors.append(net.extract_xvector(params, features).values)
            except TooFewFrames as exc:
                log.warning("enrollment %s: skipping reference (%s)", language, exc)
        if not vectors:
            raise NoUsableReferences(f"no usable reference utterances for {language!r}")
        language_ids.append(language)
        centroids.append(np.mean(vectors, axis=0))
        counts.append(len(vectors))
    return LanguageModelSet(language_ids, np.array(centroids), counts)


def score_zero_resource(
    models: LanguageModelSet, features, params: net.NetworkParams
) -> np.ndarray:
    """Cosine similarity of the segment's embedding against each centroid.

    Zero-norm centroids (or a zero-norm test embedding) produce -inf in the
    affected columns with a diagnostic, never an exception.
    """
    n = len(models.language_ids)
    try:
        xvec = net.extract_xvector(params, features).values
    except TooFewFrames as exc:
        log.warning("zero-resource scoring: %s; emitting -inf scores", exc)
        return np.full(n, -np.inf)
    scores = np.full(n, -np.inf)
    for i, language in enumerate(models.language_ids):
        try:
            scores[i] = cosine_similarity(xvec, models.centroids[i])
        except ZeroNormVector as exc:
            log.warning("zero-resource scoring %s: %s; emitting -inf", language, exc)
    return scores


# ---------------------------------------------------------------------------
# model-set serialization (text, one language per line)

def write_models(models: LanguageModelSet) -> str:
    lines = []
    for language, centroid, count in zip(
        models.language_ids, models.centroids, models.num_reference_utts
    ):
        values = " ".join(f"{v:.17g}" for v in centroid)
        lines.append(f"{language} {count} {values}")
    return "\n".join(lines) + "\n"


def parse_models(text: str) -> LanguageModelSet:
    language_ids = []
    centroids = []
    counts = []
    dim = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) < 3:
            raise ValueError(f"bad enrolled-model line: {raw!r}")
        language_ids.append(tokens[0])
        counts.append(int(tokens[1]))
        vec = np.array([float(t) for t in tokens[2:]])
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise ValueError(f"centroid dim {vec.size} != {dim} for {tokens[0]!r}")
        centroids.append(vec)
    if not language_ids:
        raise ValueError("no enrolled languages found")
    return LanguageModelSet(language_ids, np.array(centroids), counts)
