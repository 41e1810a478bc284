"""Line-oriented corpus ingestion for retrieval and classification runs.

Parallel corpora are two UTF-8 files with one sentence per line, line i of one
pairing with line i of the other.  Labeled corpora are one record per line:
label, a single TAB, then the document text (further TABs belong to the text).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, InputError


@dataclass(frozen=True)
class ParallelCorpus:
    """Aligned (source sentence, target sentence) pairs with dense integer ids."""

    source: tuple[str, ...]
    target: tuple[str, ...]

    def __post_init__(self):
        if len(self.source) != len(self.target):
            raise InputError(
                f"parallel corpus sides differ: {len(self.source)} != {len(self.target)}"
            )

    def __len__(self) -> int:
        return len(self.source)


@dataclass(frozen=True)
class LabeledCorpus:
    """(label, document text) records from one split of a labeled dataset."""

    labels: tuple[str, ...]
    texts: tuple[str, ...]
    rejected_lines: tuple[int, ...] = ()
    split: str = ""

    def __len__(self) -> int:
        return len(self.labels)


def _read_lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    # A trailing newline produces one final empty element; strip trailing blank
    # lines so files with and without a final newline ingest identically.
    while lines and lines[-1] == "":
        lines.pop()
    return [line.rstrip("\r") for line in lines]


def ingest_parallel(source_file, target_file) -> ParallelCorpus:
    """Pair line i of ``source_file`` with line i of ``target_file`` as id i."""
    source = _read_lines(source_file)
    target = _read_lines(target_file)
    if len(source) != len(target):
        raise InputError(
            f"line-count mismatch between {source_file} and {target_file}: "
            f"{len(source)} != {len(target)}"
        )
    if not source:
        raise InputError("parallel corpus is empty")
    return ParallelCorpus(source=tuple(source), target=tuple(target))


def ingest_labeled(file, split: str = "") -> LabeledCorpus:
    """Parse label-TAB-text records; malformed lines are rejected with line numbers."""
    labels: list[str] = []
    texts: list[str] = []
    rejected: list[int] = []
    for lineno, line in enumerate(_read_lines(file), start=1):
        label, sep, text = line.partition("\t")
        if not sep or not label or not text.strip():
            rejected.append(lineno)
            continue
        labels.append(label)
        texts.append(text)
    if not labels:
        raise FormatError(
            f"no valid label<TAB>text records in {file}"
            + (f" (rejected lines: {rejected[:10]})" if rejected else "")
        )
    return LabeledCorpus(labels=tuple(labels), texts=tuple(texts),
                         rejected_lines=tuple(rejected), split=split)
