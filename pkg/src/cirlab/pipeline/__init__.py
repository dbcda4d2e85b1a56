from .clients import (
    ClientError,
    HttpMllmClient,
    MllmClient,
    MockCompressor,
    MockFineMtGenerator,
    MockPairChecker,
    MockRefiner,
    ReplyParseError,
    mock_clients,
)
from .prompts import (
    COMPRESS,
    FINE_PROMPT,
    FINE_PROMPT_FASHION,
    PAIR_CHECK,
    REFINE,
    REFINE_DETAIL,
    PromptTemplate,
    get_template,
    template_ids,
)
from .runner import Disposition, PipelineResult, StageLedger, StageRecord, run_pipeline
from .stages import (
    AssessResult,
    CompressionResult,
    GenerationResult,
    PipelineConfig,
    RefinementResult,
    assess_by_image,
    assess_by_text,
    build_fine_prompt,
    compress_finemt,
    generate_finemt,
    image_sample,
    mllm_pair_check,
    pair_similarity,
    parse_pair_check_reply,
    refine_finemt,
    route_by_eval,
)

__all__ = [
    "ClientError",
    "HttpMllmClient",
    "MllmClient",
    "MockCompressor",
    "MockFineMtGenerator",
    "MockPairChecker",
    "MockRefiner",
    "ReplyParseError",
    "mock_clients",
    "COMPRESS",
    "FINE_PROMPT",
    "FINE_PROMPT_FASHION",
    "PAIR_CHECK",
    "REFINE",
    "REFINE_DETAIL",
    "PromptTemplate",
    "get_template",
    "template_ids",
    "Disposition",
    "PipelineResult",
    "StageLedger",
    "StageRecord",
    "run_pipeline",
    "AssessResult",
    "CompressionResult",
    "GenerationResult",
    "PipelineConfig",
    "RefinementResult",
    "assess_by_image",
    "assess_by_text",
    "build_fine_prompt",
    "compress_finemt",
    "generate_finemt",
    "image_sample",
    "mllm_pair_check",
    "pair_similarity",
    "parse_pair_check_reply",
    "refine_finemt",
    "route_by_eval",
]
