from .knowledge import (
    DuplicateIdError,
    KBIndex,
    KnowledgeBaseError,
    KnowledgeEntry,
    build_index,
    load_knowledge_dir,
    load_manual_chunks,
    retrieve,
)
from .pipeline import (
    RelevanceVerdict,
    TranslationFailedError,
    TranslationPipeline,
    UnparseableResponseError,
    Utterance,
    classify_relevance,
    generate_autoir,
)
from .prompts import (
    COT_RELEVANCE_TEMPLATE,
    GENERATION_TEMPLATE,
    SIMPLE_RELEVANCE_TEMPLATE,
    PromptTemplate,
    QAExample,
    build_generation_prompt,
    build_relevance_prompt,
)
from .providers import (
    HttpProvider,
    MockProvider,
    Provider,
    ProviderError,
    ProviderRequest,
    ProviderResponse,
    driving_lexicon,
    mock_complete,
)
from .text import Chunk, chunk_document, cosine, embed_text, tokenize

__all__ = [
    "Chunk",
    "COT_RELEVANCE_TEMPLATE",
    "DuplicateIdError",
    "GENERATION_TEMPLATE",
    "HttpProvider",
    "KBIndex",
    "KnowledgeBaseError",
    "KnowledgeEntry",
    "MockProvider",
    "PromptTemplate",
    "Provider",
    "ProviderError",
    "ProviderRequest",
    "ProviderResponse",
    "QAExample",
    "RelevanceVerdict",
    "SIMPLE_RELEVANCE_TEMPLATE",
    "TranslationFailedError",
    "TranslationPipeline",
    "UnparseableResponseError",
    "Utterance",
    "build_generation_prompt",
    "build_index",
    "build_relevance_prompt",
    "chunk_document",
    "classify_relevance",
    "cosine",
    "driving_lexicon",
    "embed_text",
    "generate_autoir",
    "load_knowledge_dir",
    "load_manual_chunks",
    "mock_complete",
    "retrieve",
    "tokenize",
]
