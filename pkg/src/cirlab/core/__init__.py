from .manifest import (
    SCHEMA_VERSION,
    StatsReport,
    Violation,
    load_manifest,
    manifest_stats,
    save_manifest,
    triplet_from_record,
    triplet_to_record,
    validate_finalized,
)
from .tokenizer import (
    DEFAULT_TOKENIZER,
    CallableTokenizerAdapter,
    Tokenizer,
    WhitespacePunctTokenizer,
    get_tokenizer,
    register_tokenizer,
)
from .types import (
    DISCARDED,
    GRAINS,
    SPLITS,
    STAGE_ORDER,
    STATUSES,
    TOKEN_LIMIT,
    DatasetManifest,
    EvalRecord,
    ImageRef,
    ModText,
    SchemaError,
    Triplet,
    check_status_advance,
    stage_index,
)

__all__ = [
    "SCHEMA_VERSION",
    "StatsReport",
    "Violation",
    "load_manifest",
    "manifest_stats",
    "save_manifest",
    "triplet_from_record",
    "triplet_to_record",
    "validate_finalized",
    "DEFAULT_TOKENIZER",
    "CallableTokenizerAdapter",
    "Tokenizer",
    "WhitespacePunctTokenizer",
    "get_tokenizer",
    "register_tokenizer",
    "DISCARDED",
    "GRAINS",
    "SPLITS",
    "STAGE_ORDER",
    "STATUSES",
    "TOKEN_LIMIT",
    "DatasetManifest",
    "EvalRecord",
    "ImageRef",
    "ModText",
    "SchemaError",
    "Triplet",
    "check_status_advance",
    "stage_index",
]
