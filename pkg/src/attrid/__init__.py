"""Cross-domain attribute-identity representation learning for person
re-identification, with unsupervised target adaptation."""

from .autodiff import AdamState, SeededRng, Tensor
from .data import Dataset, GenConfig, Sample, generate_pair, load_dataset, save_dataset
from .estimator import CrossDomainReid
from .evaluation import RetrievalReport, evaluate, evaluate_dataset
from .losses import LossWeights
from .model import Model, ModelConfig, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, TrainReport, run

__all__ = [
    "AdamState", "SeededRng", "Tensor",
    "Dataset", "GenConfig", "Sample", "generate_pair", "load_dataset", "save_dataset",
    "CrossDomainReid",
    "RetrievalReport", "evaluate", "evaluate_dataset",
    "LossWeights",
    "Model", "ModelConfig", "load_checkpoint", "save_checkpoint",
    "TrainConfig", "TrainReport", "run",
]

__version__ = "0.1.0"
