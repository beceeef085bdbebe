"""
Similarity between ungrounded query entities and knowledge graph entities.

:author: Doug Skrypa
"""

import logging
import math
import os
import re
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from threading import Lock
from typing import Optional, Sequence, List, Tuple, Dict, Protocol

import numpy as np
import requests

from ..core.exceptions import SimilarityProviderError, ConfigError
from ..pddl.model import Domain
from .world import Entity

__all__ = [
    'QueryLike', 'SimilarityMatrix', 'SimilarityProvider', 'LexicalSimilarity', 'EmbeddingSimilarity',
    'normalize_tokens', 'jaccard', 'trigram_cosine', 'text_similarity',
]
log = logging.getLogger(__name__)

TOKEN_FINDALL = re.compile(r'[a-z0-9]+').findall
POSSESSIVE_SUB = re.compile(r"['’]s\b").sub
JACCARD_WEIGHT, TRIGRAM_WEIGHT, TYPE_WEIGHT = 0.5, 0.4, 0.1


class QueryLike(Protocol):
    name: str
    attributes: Tuple[str, ...]
    type_hint: Optional[str]


def normalize_tokens(text: str) -> List[str]:
    """Case-fold, drop possessive ``'s``, and split on anything that is not a letter or digit (incl. ``-`` / ``_``)"""
    return TOKEN_FINDALL(POSSESSIVE_SUB('', text.lower()))


def jaccard(a: Sequence[str], b: Sequence[str]) -> float:
    set_a, set_b = set(a), set(b)
    if not set_a or not set_b:
        return 0.0
    return len(set_a & set_b) / len(set_a | set_b)


def _trigrams(tokens: Sequence[str]) -> Counter:
    text = ' {} '.format(' '.join(sorted(tokens)))
    return Counter(text[i:i + 3] for i in range(len(text) - 2))


def trigram_cosine(a: Sequence[str], b: Sequence[str]) -> float:
    if not a or not b:
        return 0.0
    grams_a, grams_b = _trigrams(a), _trigrams(b)
    if grams_a == grams_b:
        return 1.0
    dot = sum(count * grams_b[gram] for gram, count in grams_a.items())
    norm = math.sqrt(sum(c * c for c in grams_a.values())) * math.sqrt(sum(c * c for c in grams_b.values()))
    return min(1.0, dot / norm) if norm else 0.0


def text_similarity(a: str, b: str) -> float:
    """Lexical similarity of two strings without the type term, rescaled to [0, 1]"""
    ta, tb = normalize_tokens(a), normalize_tokens(b)
    combined = JACCARD_WEIGHT * jaccard(ta, tb) + TRIGRAM_WEIGHT * trigram_cosine(ta, tb)
    return combined / (JACCARD_WEIGHT + TRIGRAM_WEIGHT)


@dataclass(frozen=True)
class SimilarityMatrix:
    rows: Tuple[str, ...]       # query entity labels
    columns: Tuple[str, ...]    # world entity names
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.rows), len(self.columns)):
            raise ValueError(f'Matrix shape {self.values.shape} does not match {len(self.rows)}x{len(self.columns)}')
        if not np.all(np.isfinite(self.values)) or self.values.min(initial=0) < 0 or self.values.max(initial=0) > 1:
            raise ValueError('Similarity values must be finite and within [0, 1]')

    def __getitem__(self, item: Tuple[int, int]) -> float:
        return float(self.values[item])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def best(self, row: int) -> float:
        return float(self.values[row].max()) if self.columns else 0.0

    def candidates(self, row: int, cutoff: float) -> List[int]:
        """
        Column indexes whose score passes ``S[row, col] >= cutoff * max(S[row])``, best first (ties by column order).
        Columns scoring 0 are never candidates.
        """
        best = self.best(row)
        if best <= 0:
            return []
        threshold = cutoff * best
        scores = self.values[row]
        passing = [j for j in range(len(self.columns)) if scores[j] >= threshold and scores[j] > 0]
        return sorted(passing, key=lambda j: (-scores[j], j))


class SimilarityProvider(ABC):
    def __init__(self, domain: Optional[Domain] = None):
        self.domain = domain

    @abstractmethod
    def score(self, query: QueryLike, entity: Entity, domain: Optional[Domain] = None) -> float:
        raise NotImplementedError

    def matrix(
        self, queries: Sequence[QueryLike], entities: Sequence[Entity], domain: Optional[Domain] = None
    ) -> SimilarityMatrix:
        """
        :param queries: Query entities (rows)
        :param entities: World entities (columns)
        :param domain: Type hierarchy for type hints; defaults to the provider's own domain
        """
        if not queries or not entities:
            raise ValueError('Both the query entities and the world entities must be nonempty')
        values = np.array([[self.score(q, e, domain) for e in entities] for q in queries], dtype=float).reshape(
            len(queries), len(entities)
        )
        return SimilarityMatrix(tuple(_label(q) for q in queries), tuple(e.name for e in entities), values)

    def type_match(self, query: QueryLike, entity: Entity, domain: Optional[Domain] = None) -> float:
        if not (hint := query.type_hint):
            return 1.0
        hint = hint.lower().replace('-', '_').replace(' ', '_')
        if hint == entity.type:
            return 1.0
        domain = domain or self.domain
        if domain is not None and domain.has_type(hint) and domain.is_subtype(entity.type, hint):
            return 1.0
        return 0.0


def _label(query: QueryLike) -> str:
    return ' '.join([*query.attributes, query.name])


def _entity_phrases(entity: Entity) -> List[List[str]]:
    name_tokens = normalize_tokens(entity.name)
    extra = [t for t in normalize_tokens(entity.attribute_text) if t not in name_tokens]
    return [name_tokens, extra + name_tokens] if extra else [name_tokens]


class LexicalSimilarity(SimilarityProvider):
    """
    Deterministic default provider: 0.5 * token Jaccard + 0.4 * character-trigram cosine + 0.1 * type compatibility.

    The query phrase (attributes followed by the name) is compared both with the entity name and with the entity's
    attributes prepended to its name; the better of the two wins.
    """

    def score(self, query: QueryLike, entity: Entity, domain: Optional[Domain] = None) -> float:
        q_tokens = normalize_tokens(_label(query))
        lexical = max(
            JACCARD_WEIGHT * jaccard(q_tokens, tokens) + TRIGRAM_WEIGHT * trigram_cosine(q_tokens, tokens)
            for tokens in _entity_phrases(entity)
        )
        return min(1.0, lexical + TYPE_WEIGHT * self.type_match(query, entity, domain))


class EmbeddingSimilarity(SimilarityProvider):
    """
    Similarity backed by an external embedding service that accepts ``{"texts": [...]}`` and responds with
    ``{"vectors": [[...], ...]}``.  Cosine similarity is mapped from [-1, 1] to [0, 1] and weighted 0.9, with the same
    0.1 type term as the lexical provider.
    """

    def __init__(self, url: str, token: Optional[str] = None, domain: Optional[Domain] = None, timeout: float = 10):
        super().__init__(domain)
        self.url = url
        self.token = token
        self.timeout = timeout
        self._cache: Dict[str, np.ndarray] = {}
        self._lock = Lock()

    @classmethod
    def from_env(cls, domain: Optional[Domain] = None) -> 'EmbeddingSimilarity':
        if not (url := os.environ.get('KGPLAN_EMBEDDING_URL')):
            raise ConfigError('Embedding similarity requires the KGPLAN_EMBEDDING_URL environment variable')
        return cls(url, os.environ.get('KGPLAN_EMBEDDING_TOKEN'), domain)

    def _embed(self, texts: Sequence[str]) -> Dict[str, np.ndarray]:
        with self._lock:
            missing = sorted({t for t in texts if t not in self._cache})
        if missing:
            headers = {'Authorization': f'Bearer {self.token}'} if self.token else {}
            try:
                resp = requests.post(self.url, json={'texts': missing}, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                vectors = resp.json()['vectors']
            except (requests.RequestException, ValueError, KeyError, TypeError) as e:
                raise SimilarityProviderError(f'Embedding request to {self.url} failed: {e}') from e
            if len(vectors) != len(missing):
                raise SimilarityProviderError(f'Expected {len(missing)} vectors from {self.url}, got {len(vectors)}')
            with self._lock:
                for text, vector in zip(missing, vectors):
                    self._cache[text] = np.asarray(vector, dtype=float)
        with self._lock:
            return {t: self._cache[t] for t in texts}

    @staticmethod
    def _cosine(a: np.ndarray, b: np.ndarray) -> float:
        norm = float(np.linalg.norm(a) * np.linalg.norm(b))
        if not norm:
            return 0.0
        return float(np.clip((float(a @ b) / norm + 1) / 2, 0.0, 1.0))

    def _entity_text(self, entity: Entity) -> str:
        return ' '.join(_entity_phrases(entity)[-1])

    def score(self, query: QueryLike, entity: Entity, domain: Optional[Domain] = None) -> float:
        q_text, e_text = _label(query), self._entity_text(entity)
        vectors = self._embed([q_text, e_text])
        cosine = self._cosine(vectors[q_text], vectors[e_text])
        return min(1.0, 0.9 * cosine + TYPE_WEIGHT * self.type_match(query, entity, domain))

    def matrix(
        self, queries: Sequence[QueryLike], entities: Sequence[Entity], domain: Optional[Domain] = None
    ) -> SimilarityMatrix:
        if not queries or not entities:
            raise ValueError('Both the query entities and the world entities must be nonempty')
        self._embed([_label(q) for q in queries] + [self._entity_text(e) for e in entities])  # one batched request
        return super().matrix(queries, entities, domain)
