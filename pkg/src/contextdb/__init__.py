"""contextdb: an embedded multi-context storage engine for RAG applications.

Three storage tiers -- conversational (append-only chat log), situational
(profile records), semantic (vector indexes) -- behind one pipeline that
checks a response cache, gathers context, searches, calls an LLM client, and
persists the exchange.
"""

from .cache import ResponseCache, canonical_question, make_cache_key
from .conversation import ConversationStore, Message
from .core import (Document, EmbeddingProvider, FixtureEmbedder, HashEmbedder,
                   MetaValue, Vector, euclidean_distance, fixture_embed,
                   hash_embed, meta_kind)
from .errors import (CatalogError, ContextDbError, DimensionMismatchError,
                     EmptyIndexError, FilterParseError,
                     FilterTypeMismatchError, InvalidVectorError,
                     NotTrainedError, ProfileNotFoundError,
                     SnapshotCorruptError, SnapshotVersionError, StageError,
                     StorageError, TemplateError, TrainingDataError,
                     UnknownFixtureKeyError)
from .filters import Clause, FilterExpr, Op, evaluate_filter, parse_filter
from .index import (FlatIndex, HnswIndex, HnswParams, IvfIndex, IvfParams,
                    SearchHit, VectorIndex, load_index, read_header,
                    save_index)
from .pipeline import (DEFAULT_TEMPLATE, STAGES, EngineeredPrompt, LlmClient,
                       MockLlm, Pipeline, PipelineResponse, PromptSources,
                       PromptTemplate, assemble_prompt)
from .profiles import Profile, ProfileStore

__version__ = "0.1.0"

__all__ = [
    "CatalogError",
    "Clause",
    "ContextDbError",
    "ConversationStore",
    "DEFAULT_TEMPLATE",
    "DimensionMismatchError",
    "Document",
    "EmbeddingProvider",
    "EmptyIndexError",
    "EngineeredPrompt",
    "FilterExpr",
    "FilterParseError",
    "FilterTypeMismatchError",
    "FixtureEmbedder",
    "FlatIndex",
    "HashEmbedder",
    "HnswIndex",
    "HnswParams",
    "InvalidVectorError",
    "IvfIndex",
    "IvfParams",
    "LlmClient",
    "Message",
    "MetaValue",
    "MockLlm",
    "NotTrainedError",
    "Op",
    "Pipeline",
    "PipelineResponse",
    "Profile",
    "ProfileNotFoundError",
    "ProfileStore",
    "PromptSources",
    "PromptTemplate",
    "ResponseCache",
    "STAGES",
    "SearchHit",
    "SnapshotCorruptError",
    "SnapshotVersionError",
    "StageError",
    "StorageError",
    "TemplateError",
    "TrainingDataError",
    "UnknownFixtureKeyError",
    "Vector",
    "VectorIndex",
    "assemble_prompt",
    "canonical_question",
    "euclidean_distance",
    "evaluate_filter",
    "fixture_embed",
    "hash_embed",
    "load_index",
    "make_cache_key",
    "meta_kind",
    "parse_filter",
    "read_header",
    "save_index",
]
