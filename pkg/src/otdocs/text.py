"""Vocabulary, tf-idf document distributions, and idf-weighted bag-of-vectors.

Documents enter the transport pipeline as sparse probability distributions over
their in-vocabulary tokens, weighted by term frequency times smoothed inverse
document frequency and normalized to sum to one.  The dense baseline averages
idf-weighted word vectors into a single unit-norm vector per document.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateVectorError,
    EmptyDocumentError,
    InputError,
    UnknownTokenError,
)

NBOW_NORM_FLOOR = 1e-12


def _strip_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase, split on Unicode whitespace, strip surrounding punctuation.

    No stemming and no stop-word removal; callers that need a different scheme
    can pre-tokenize and skip this function.
    """
    tokens = []
    for piece in text.lower().split():
        stripped = _strip_punctuation(piece)
        if stripped:
            tokens.append(stripped)
    return tokens


@dataclass
class Vocabulary:
    """Token ids (dense, in first-seen order) with document frequencies."""

    token_ids: dict[str, int]
    doc_frequency: np.ndarray
    n_docs: int
    tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.tokens:
            self.tokens = [""] * len(self.token_ids)
            for tok, idx in self.token_ids.items():
                self.tokens[idx] = tok

    def __len__(self) -> int:
        return len(self.token_ids)

    def __contains__(self, token: str) -> bool:
        return token in self.token_ids

    def id_of(self, token: str) -> int:
        try:
            return self.token_ids[token]
        except KeyError:
            raise UnknownTokenError(f"token not in vocabulary: {token!r}") from None

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]


def build_vocabulary(corpus) -> Vocabulary:
    """Collect every token of ``corpus`` (a sequence of tokenized documents).

    Document frequency counts documents containing the token, not occurrences.
    """
    token_ids: dict[str, int] = {}
    df: list[int] = []
    n_docs = 0
    for doc in corpus:
        n_docs += 1
        # dict.fromkeys dedupes while keeping first-occurrence order, so token
        # ids stay stable across processes (set order varies with hash seed)
        for token in dict.fromkeys(doc):
            idx = token_ids.get(token)
            if idx is None:
                token_ids[token] = len(df)
                df.append(1)
            else:
                df[idx] += 1
    if n_docs == 0:
        raise InputError("cannot build a vocabulary from an empty corpus")
    return Vocabulary(token_ids=token_ids, doc_frequency=np.asarray(df, dtype=np.int64),
                      n_docs=n_docs)


def idf_weight(token_id: int, vocab: Vocabulary) -> float:
    """Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.

    Strictly positive for any stored token (1 <= df <= N by construction).
    """
    if not 0 <= token_id < len(vocab):
        raise UnknownTokenError(f"token id out of range: {token_id}")
    df = int(vocab.doc_frequency[token_id])
    return math.log((1.0 + vocab.n_docs) / (1.0 + df)) + 1.0


@dataclass(frozen=True)
class DocumentDistribution:
    """Sparse probability mass over a document's in-vocabulary tokens.

    ``token_ids`` are unique and sorted ascending; ``tokens`` is the parallel
    list of token strings (kept so embedding lookups need no vocabulary handle).
    """

    token_ids: np.ndarray
    tokens: tuple[str, ...]
    weights: np.ndarray
    doc_id: str = ""

    def __post_init__(self):
        ids = np.asarray(self.token_ids, dtype=np.int64)
        w = np.asarray(self.weights, dtype=np.float64)
        if ids.ndim != 1 or w.shape != ids.shape or ids.size == 0:
            raise InputError("support and weights must be parallel non-empty 1-d arrays")
        if len(self.tokens) != ids.size:
            raise InputError("tokens must parallel the support ids")
        if np.any(np.diff(ids) <= 0):
            raise InputError("support ids must be unique and sorted ascending")
        if np.any(w <= 0):
            raise InputError("distribution weights must be strictly positive")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise InputError("distribution weights must sum to 1 within 1e-9")
        object.__setattr__(self, "token_ids", ids)
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return int(self.token_ids.size)


def tfidf_distribution(doc: list[str], vocab: Vocabulary, doc_id: str = "") -> DocumentDistribution:
    """Term count times idf, normalized to a probability distribution.

    Tokens absent from the vocabulary are ignored; a document with no
    in-vocabulary tokens raises :class:`EmptyDocumentError`.
    """
    counts = Counter(token for token in doc if token in vocab)
    if not counts:
        raise EmptyDocumentError(f"document {doc_id!r} has no in-vocabulary tokens")
    ids = np.sort(np.fromiter((vocab.token_ids[t] for t in counts), dtype=np.int64,
                              count=len(counts)))
    tokens = tuple(vocab.token_of(i) for i in ids)
    raw = np.array(
        [counts[tok] * idf_weight(int(i), vocab) for i, tok in zip(ids, tokens)],
        dtype=np.float64,
    )
    return DocumentDistribution(token_ids=ids, tokens=tokens, weights=raw / raw.sum(),
                                doc_id=doc_id)


def nbow_embed(doc: list[str], vocab: Vocabulary, embeddings) -> np.ndarray:
    """Idf-weighted sum of word vectors, scaled to unit Euclidean norm.

    ``embeddings`` is any object with a ``lookup(token) -> vector | None``
    method (see :class:`otdocs.embeddings.EmbeddingTable`).  Raises
    :class:`EmptyDocumentError` when no token is in both the vocabulary and the
    table, and :class:`DegenerateVectorError` when the weighted sum cancels to
    (near) zero and cannot be normalized.
    """
    acc = None
    used = 0
    for token, count in Counter(doc).items():
        if token not in vocab:
            continue
        vec = embeddings.lookup(token)
        if vec is None:
            continue
        weight = count * idf_weight(vocab.token_ids[token], vocab)
        acc = weight * vec if acc is None else acc + weight * vec
        used += 1
    if used == 0:
        raise EmptyDocumentError("document has no tokens covered by vocabulary and embeddings")
    norm = float(np.linalg.norm(acc))
    if norm < NBOW_NORM_FLOOR:
        raise DegenerateVectorError(
            f"idf-weighted vector sum cancelled to norm {norm:.3e}; cannot normalize"
        )
    return acc / norm
