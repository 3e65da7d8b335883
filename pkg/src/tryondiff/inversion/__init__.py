from .adapter import (
    ConditioningSequence,
    InversionAdapter,
    assemble_condition,
    category_prompt,
    null_condition,
    predict_ptes,
)
from .encoders import (
    TOY_VOCAB,
    ToyTextEncoder,
    ToyVisualEncoder,
    register_encoder,
    resolve_encoder,
)
from .training import train_adapter

__all__ = [
    "ConditioningSequence",
    "InversionAdapter",
    "TOY_VOCAB",
    "ToyTextEncoder",
    "ToyVisualEncoder",
    "assemble_condition",
    "category_prompt",
    "null_condition",
    "predict_ptes",
    "register_encoder",
    "resolve_encoder",
    "train_adapter",
]
