from .composer import (
    Composer,
    ComposerConfig,
    MlpComposer,
    compose_query,
    compose_query_mlp,
    encode_target,
    pooled_text,
    pooled_visual,
)
from .encoders import (
    EncoderBackend,
    encode_modtext,
    encode_reference,
    EncoderDims,
    ImageSource,
    TextFeature,
    ToyEncoderBackend,
    normalize,
    resolve_image_source,
)
from .model import (
    CHECKPOINT_VERSION,
    CompositionModel,
    ModelVariant,
    QueryInputs,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "Composer",
    "ComposerConfig",
    "MlpComposer",
    "compose_query",
    "compose_query_mlp",
    "encode_target",
    "pooled_text",
    "pooled_visual",
    "EncoderBackend",
    "encode_modtext",
    "encode_reference",
    "EncoderDims",
    "ImageSource",
    "TextFeature",
    "ToyEncoderBackend",
    "normalize",
    "resolve_image_source",
    "CHECKPOINT_VERSION",
    "CompositionModel",
    "ModelVariant",
    "QueryInputs",
    "load_checkpoint",
    "save_checkpoint",
]
