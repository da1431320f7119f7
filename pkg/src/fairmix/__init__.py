"""fairmix: fairness auditing and bias mitigation for small multimodal
tabular datasets (group-balanced augmentation, multimodal fusion, grouped
cross-validation, Equal Accuracy / Disparate Impact reporting)."""

from .dataset import Dataset, ModalityTable, SampleMeta, binarize_panas, load_dataset, save_dataset
from .metrics import PredictionRecord, PredictionSet, accuracy, disparate_impact, equal_accuracy, f1, uar

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "ModalityTable",
    "SampleMeta",
    "binarize_panas",
    "load_dataset",
    "save_dataset",
    "PredictionRecord",
    "PredictionSet",
    "accuracy",
    "disparate_impact",
    "equal_accuracy",
    "f1",
    "uar",
    "__version__",
]
