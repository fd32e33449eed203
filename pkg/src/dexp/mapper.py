"""Token-to-protocol attribution with a staged fallback.

Stages, in order: issuer declared in token metadata; a hand-maintained
override table; text similarity between the token's description and
protocol descriptions; finally a synthetic self-protocol so every token
resolves to something.
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyCorpus

# similarity floor below which a text match is not trusted
DEFAULT_SIMILARITY_THETA = 0.3

_SPLIT_RE = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, keep terms of length >= 2."""
    return [t for t in _SPLIT_RE.split(text.lower()) if len(t) >= 2]


@dataclass
class TokenMeta:
    token_id: str
    issuer: str | None = None
    symbol: str = ""
    description: str = ""


@dataclass
class MappingEntry:
    token_id: str
    protocol_id: str
    provenance: str  # metadata | manual | tfidf | self
    similarity: float | None = None


@dataclass
class TfidfModel:
    """Corpus statistics plus one L2-normalized vector per document."""

    idf: dict[str, float]
    doc_vectors: dict[str, dict[str, float]]  # protocol id -> term -> weight

    def vectorize(self, text: str) -> dict[str, float]:
        """Vectorize a query with the corpus vocabulary; unknown terms drop."""
        terms = [t for t in tokenize(text) if t in self.idf]
        if not terms:
            return {}
        counts = Counter(terms)
        length = len(terms)
        vec = {t: (c / length) * self.idf[t] for t, c in counts.items()}
        return _l2_normalize(vec)

    def best_match(self, text: str) -> tuple[str, float] | None:
        """Highest-cosine protocol; ties resolve to the smallest id."""
        query = self.vectorize(text)
        if not query:
            return None
        best_id = None
        best_sim = -1.0
        for pid in sorted(self.doc_vectors):
            sim = cosine_similarity(query, self.doc_vectors[pid])
            if sim > best_sim:
                best_id, best_sim = pid, sim
        if best_id is None:
            return None
        return best_id, best_sim


def _l2_normalize(vec: dict[str, float]) -> dict[str, float]:
    norm = math.sqrt(sum(v * v for v in vec.values()))
    if norm == 0.0:
        return {}
    return {t: v / norm for t, v in vec.items()}


def cosine_similarity(a: dict[str, float], b: dict[str, float]) -> float:
    if not a or not b:
        return 0.0
    if len(b) < len(a):
        a, b = b, a
    return sum(v * b[t] for t, v in a.items() if t in b)


def build_tfidf(corpus: dict[str, str]) -> TfidfModel:
    """Fit idf and document vectors over protocol descriptions.

    tf is term count over document length; idf = ln(N / (1 + df)) + 1 with
    N the corpus size and df the document frequency.
    """
    doc_terms = {pid: tokenize(text) for pid, text in corpus.items()}
    n_docs = len(corpus)
    df: Counter[str] = Counter()
    for terms in doc_terms.values():
        df.update(set(terms))
    if not df:
        raise EmptyCorpus("no usable terms in any protocol description")

    idf = {t: math.log(n_docs / (1 + d)) + 1.0 for t, d in df.items()}
    doc_vectors = {}
    for pid, terms in doc_terms.items():
        if not terms:
            doc_vectors[pid] = {}
            continue
        counts = Counter(terms)
        length = len(terms)
        doc_vectors[pid] = _l2_normalize(
            {t: (c / length) * idf[t] for t, c in counts.items()}
        )
    return TfidfModel(idf=idf, doc_vectors=doc_vectors)


def map_token(
    meta: TokenMeta,
    manual_map: dict[str, str],
    model: TfidfModel | None,
    theta: float = DEFAULT_SIMILARITY_THETA,
) -> MappingEntry:
    """Resolve one token through the fallback chain."""
    if meta.issuer:
        return MappingEntry(meta.token_id, meta.issuer, "metadata")
    if meta.token_id in manual_map:
        return MappingEntry(meta.token_id, manual_map[meta.token_id], "manual")
    if model is not None:
        text = f"{meta.symbol} {meta.description}".strip()
        match = model.best_match(text)
        if match is not None and match[1] >= theta:
            return MappingEntry(meta.token_id, match[0], "tfidf", match[1])
    return MappingEntry(meta.token_id, f"token:{meta.token_id}", "self")


def map_tokens(
    token_ids: list[str],
    metas: dict[str, TokenMeta],
    manual_map: dict[str, str],
    model: TfidfModel | None,
    theta: float = DEFAULT_SIMILARITY_THETA,
) -> dict[str, MappingEntry]:
    """Resolve every token id; tokens without metadata get an empty record."""
    out = {}
    for tid in sorted(set(token_ids)):
        meta = metas.get(tid, TokenMeta(token_id=tid))
        out[tid] = map_token(meta, manual_map, model, theta)
    return out


def issuer_map(entries: dict[str, MappingEntry]) -> dict[str, str]:
    return {tid: e.protocol_id for tid, e in entries.items()}


# -------------------------------------------------------------------------
# serialization
# -------------------------------------------------------------------------


def save_mapping(entries: dict[str, MappingEntry], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token_id", "protocol_id", "provenance", "similarity"])
        for tid in sorted(entries):
            e = entries[tid]
            sim = "" if e.similarity is None else f"{e.similarity:.6f}"
            writer.writerow([e.token_id, e.protocol_id, e.provenance, sim])


def load_mapping(path: str) -> dict[str, MappingEntry]:
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            sim = float(row["similarity"]) if row["similarity"] else None
            out[row["token_id"]] = MappingEntry(
                row["token_id"], row["protocol_id"], row["provenance"], sim
            )
    return out


def load_manual_map(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["token_id"]] = row["protocol_id"]
    return out


def save_manual_map(mapping: dict[str, str], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token_id", "protocol_id"])
        for tid in sorted(mapping):
            writer.writerow([tid, mapping[tid]])


def load_token_metas(path: str) -> dict[str, TokenMeta]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            out[row["token_id"]] = TokenMeta(
                token_id=row["token_id"],
                issuer=row.get("issuer") or None,
                symbol=row.get("symbol", ""),
                description=row.get("description", ""),
            )
    return out


def save_token_metas(metas: dict[str, TokenMeta], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tid in sorted(metas):
            m = metas[tid]
            row = {
                "token_id": m.token_id,
                "issuer": m.issuer,
                "symbol": m.symbol,
                "description": m.description,
            }
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")
