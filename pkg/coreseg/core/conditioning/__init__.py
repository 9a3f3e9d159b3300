from .conditioning import (ConditionEncoder, ConditionedFeatures,
                           ConditioningMap, FiLMEncoder, FiLMParams,
                           class_constant_batch, class_constant_map,
                           encode_condition, fill_unlabelled, modulate,
                           onehot_condition)

__all__ = [
    "ConditionEncoder", "ConditionedFeatures", "ConditioningMap",
    "FiLMEncoder", "FiLMParams", "class_constant_batch", "class_constant_map",
    "encode_condition", "fill_unlabelled", "modulate", "onehot_condition"
]
