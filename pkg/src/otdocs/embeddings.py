"""Pretrained word-embedding tables, OOV filtering, and Euclidean cost matrices.

The on-disk format is the common text layout: UTF-8, one record per line,
fields separated by single spaces, each record a token followed by ``dim``
decimal floats, with an optional first line ``count dim``.  Tokens containing
spaces cannot be represented and such lines are skipped (and counted).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DimensionMismatchError,
    EmptyDocumentError,
    FormatError,
    InputError,
    InternalContractError,
)
from .text import DocumentDistribution


class EmbeddingTable:
    """Immutable token -> vector store with verbatim-then-lowercase lookup."""

    def __init__(self, tokens: list[str], matrix: np.ndarray, *,
                 duplicates: int = 0, skipped: int = 0, label: str = ""):
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise InputError("matrix rows must parallel the token list")
        self._rows = {token: i for i, token in enumerate(tokens)}
        self._tokens = list(tokens)
        self._matrix = matrix.astype(np.float64, copy=False)
        self.duplicates = duplicates
        self.skipped = skipped
        self.label = label

    @property
    def dimension(self) -> int:
        return int(self._matrix.shape[1])

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return self.lookup(token) is not None

    def lookup(self, token: str) -> np.ndarray | None:
        """Vector for ``token``, trying the verbatim form then the lowercased one."""
        row = self._rows.get(token)
        if row is None:
            row = self._rows.get(token.lower())
        if row is None:
            return None
        return self._matrix[row]


def _open_text(source):
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8"), True
    if isinstance(source, bytes):
        try:
            return io.StringIO(source.decode("utf-8")), True
        except UnicodeDecodeError as exc:
            raise FormatError(f"embedding stream is not valid UTF-8: {exc}") from exc
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary file-like
    return io.TextIOWrapper(source, encoding="utf-8"), False


def load_embeddings(source, label: str = "") -> EmbeddingTable:
    """Parse an embedding text stream into an :class:`EmbeddingTable`.

    ``source`` may be a path, bytes, or an open file object.  An optional first
    line holding exactly two integers is consumed as a ``count dim`` header.
    Duplicate tokens keep their first vector (later ones are counted), and
    unparseable lines are skipped and counted.  Raises :class:`FormatError` if
    no row parses or if parsed rows disagree on the dimension.
    """
    stream, close = _open_text(source)
    declared_dim = None
    dim = None
    tokens: list[str] = []
    rows: dict[str, int] = {}
    vectors: list[np.ndarray] = []
    duplicates = 0
    skipped = 0
    try:
        for lineno, line in enumerate(stream):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split(" ")
            if lineno == 0 and len(fields) == 2:
                try:
                    int(fields[0])
                    declared_dim = int(fields[1])
                    dim = declared_dim
                    continue
                except ValueError:
                    pass
            token, rest = fields[0], fields[1:]
            try:
                values = np.array([float(x) for x in rest], dtype=np.float64)
            except ValueError:
                skipped += 1
                continue
            if values.size == 0:
                skipped += 1
                continue
            if dim is None:
                dim = values.size
            elif values.size != dim:
                if declared_dim is not None:
                    skipped += 1
                    continue
                raise FormatError(
                    f"line {lineno + 1}: vector has {values.size} components, "
                    f"previous rows had {dim}"
                )
            if token in rows:
                duplicates += 1
                continue
            rows[token] = len(tokens)
            tokens.append(token)
            vectors.append(values)
    except UnicodeDecodeError as exc:
        raise FormatError(f"embedding stream is not valid UTF-8: {exc}") from exc
    finally:
        if close:
            stream.close()
    if not vectors:
        raise FormatError("no parseable embedding rows found")
    return EmbeddingTable(tokens, np.vstack(vectors),
                          duplicates=duplicates, skipped=skipped, label=label)


def save_embeddings(table: EmbeddingTable, destination) -> None:
    """Write a table back to the text format with a ``count dim`` header."""
    own = isinstance(destination, (str, Path))
    out = open(destination, "w", encoding="utf-8") if own else destination
    try:
        out.write(f"{len(table)} {table.dimension}\n")
        for token in table.tokens:
            vec = table.lookup(token)
            out.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    finally:
        if own:
            out.close()


@dataclass(frozen=True)
class OovReport:
    """Accounting of what OOV filtering removed from a distribution."""

    dropped_tokens: tuple[str, ...]
    dropped_mass: float
    coverage_ratio: float


def filter_oov(dist: DocumentDistribution, table: EmbeddingTable) -> tuple[DocumentDistribution, OovReport]:
    """Restrict a distribution to tokens the table covers, renormalizing the rest.

    Relative weights of surviving tokens are preserved.  Raises
    :class:`EmptyDocumentError` when every support token is OOV, leaving the
    fallback decision to the caller.
    """
    keep = np.array([token in table for token in dist.tokens], dtype=bool)
    if keep.all():
        return dist, OovReport(dropped_tokens=(), dropped_mass=0.0, coverage_ratio=1.0)
    dropped = tuple(t for t, k in zip(dist.tokens, keep) if not k)
    dropped_mass = float(dist.weights[~keep].sum())
    if not keep.any():
        raise EmptyDocumentError(
            f"document {dist.doc_id!r}: all {len(dist)} support tokens are OOV"
        )
    kept_weights = dist.weights[keep]
    filtered = DocumentDistribution(
        token_ids=dist.token_ids[keep],
        tokens=tuple(t for t, k in zip(dist.tokens, keep) if k),
        weights=kept_weights / kept_weights.sum(),
        doc_id=dist.doc_id,
    )
    report = OovReport(
        dropped_tokens=dropped,
        dropped_mass=dropped_mass,
        coverage_ratio=1.0 - len(dropped) / len(dist),
    )
    return filtered, report


def support_vectors(dist: DocumentDistribution, table: EmbeddingTable) -> np.ndarray:
    """Stack the embedding of each support token, row i for token i."""
    vecs = []
    for token in dist.tokens:
        vec = table.lookup(token)
        if vec is None:
            raise InternalContractError(
                f"support token {token!r} not resolvable; filter_oov must run first"
            )
        vecs.append(vec)
    return np.vstack(vecs)


def ground_metric(source: DocumentDistribution, target: DocumentDistribution,
                  src_table: EmbeddingTable, tgt_table: EmbeddingTable) -> np.ndarray:
    """Euclidean distances between source and target support embeddings.

    Vectors are used raw (no unit-normalization).  Both tables must share one
    dimension; a single table may serve both sides of a shared embedding space.
    """
    if src_table.dimension != tgt_table.dimension:
        raise DimensionMismatchError(
            f"embedding tables disagree on dimension: "
            f"{src_table.dimension} vs {tgt_table.dimension}"
        )
    S = support_vectors(source, src_table)
    T = support_vectors(target, tgt_table)
    return cdist(S, T, metric="euclidean")


class EmbeddingCache:
    """Path-keyed table cache for long-running processes (invalidated on mtime)."""

    def __init__(self):
        self._cache: dict[str, tuple[float, EmbeddingTable]] = {}

    def __len__(self) -> int:
        return len(self._cache)

    def get(self, path) -> EmbeddingTable:
        resolved = os.path.abspath(os.fspath(path))
        mtime = os.path.getmtime(resolved)
        hit = self._cache.get(resolved)
        if hit is not None and hit[0] == mtime:
            return hit[1]
        table = load_embeddings(resolved, label=Path(resolved).stem)
        self._cache[resolved] = (mtime, table)
        return table
