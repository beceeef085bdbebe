from .world import (
    Entity, Triplet, GraphDelta, WorldGraph, check_triplet, apply_delta, apply_lenient, to_init_atoms, from_init_atoms,
    format_triplets, SOURCE_VERBAL, SOURCE_PERCEPTION,
)
from .persistence import save, load, dumps, loads
from .similarity import SimilarityMatrix, SimilarityProvider, LexicalSimilarity, EmbeddingSimilarity
from .store import GraphStore, StaleSnapshotError
