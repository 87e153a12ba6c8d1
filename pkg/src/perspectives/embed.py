"""Word vectors and mean-pooled text similarity."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

_TOKEN = re.compile(r"[a-z0-9]+")


class VectorFormatError(ValueError):
    pass


def default_stopwords() -> frozenset[str]:
    text = resources.files("perspectives.data").joinpath("stopwords.txt").read_text()
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = frozenset(w.strip().lower() for w in Path(path).read_text().splitlines() if w.strip())
    if not words:
        raise ValueError(f"{path}: empty stopword list")
    return words


@dataclass(frozen=True)
class WordVectorStore:
    dimension: int
    vectors: dict[str, np.ndarray]
    stopwords: frozenset[str] = field(default_factory=default_stopwords)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not self.stopwords:
            raise ValueError("stopword set must be nonempty")
        for tok, vec in self.vectors.items():
            if vec.shape != (self.dimension,):
                raise ValueError(f"vector for {tok!r} has shape {vec.shape}")

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, token):
        return token in self.vectors


def load_vectors(path: str | Path, stopwords: frozenset[str] | None = None) -> WordVectorStore:
    """Read the textual word2vec format: a ``count dim`` header, then ``token v1 .. vd``."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise VectorFormatError("line 1: expected header 'count dimension'")
        count, dim = int(header[0]), int(header[1])
        vectors = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise VectorFormatError(f"line {lineno}: expected {dim} values, got {len(values)}")
            if token in vectors:
                raise VectorFormatError(f"line {lineno}: duplicate token {token!r}")
            try:
                vectors[token] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise VectorFormatError(f"line {lineno}: {exc}") from None
    if len(vectors) != count:
        raise VectorFormatError(f"header declares {count} vectors, found {len(vectors)}")
    return WordVectorStore(dim, vectors, stopwords if stopwords is not None else default_stopwords())


def dump_vectors(store: WordVectorStore, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{len(store)} {store.dimension}\n")
        for tok, vec in store.vectors.items():
            fh.write(tok + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def text_vector(store: WordVectorStore, text: str) -> np.ndarray:
    """Mean vector of the in-vocabulary, non-stopword tokens (zero if none)."""
    vecs = [store.vectors[t] for t in tokenize(text) if t not in store.stopwords and t in store.vectors]
    if not vecs:
        return np.zeros(store.dimension)
    return np.mean(vecs, axis=0)


def similarity(a: np.ndarray, b: np.ndarray, cosine: bool = False) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    dot = float(a @ b)
    if cosine:
        norm = float(np.linalg.norm(a) * np.linalg.norm(b))
        return dot / norm if norm else 0.0
    return dot
