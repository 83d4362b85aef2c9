from edgeprefetch.forecast.evaluation import (
    ACCURACY_GATE,
    ConfusionMatrix,
    Evaluation,
    confusion_matrix,
    correlation_matrix,
    evaluate,
    stratified_split,
)
from edgeprefetch.forecast.features import (
    FEATURE_NAMES,
    Dataset,
    FeatureVector,
    SessionRecord,
    SessionTracker,
    read_dataset_csv,
    write_dataset_csv,
)
from edgeprefetch.forecast.models import MODEL_KINDS, TrainedModel, TrainingError, train
from edgeprefetch.forecast.persist import ModelFileError, ModelVersionError, load_model, save_model

__all__ = [
    "ACCURACY_GATE", "ConfusionMatrix", "Evaluation", "confusion_matrix", "correlation_matrix",
    "evaluate", "stratified_split", "FEATURE_NAMES", "Dataset", "FeatureVector", "SessionRecord",
    "SessionTracker", "read_dataset_csv", "write_dataset_csv", "MODEL_KINDS", "TrainedModel",
    "TrainingError", "train", "ModelFileError", "ModelVersionError", "load_model", "save_model",
]
