from .query import QueryEntity, QueryRelation, QueryGraph, extract_query_graph
from .matching import QueryMapping, EdgeCredit, SubgraphMatcher, mapping_score, match
from .retrievers import RetrievalResult, Retriever, SearchRetriever, BaselineRetriever, FullRetriever, build_retriever
