"""Rule-regularised visual-semantic embeddings for zero-shot learning, on a small numpy autodiff."""

from .curriculum import MarginSchedule
from .data import SyntheticSpec, ZslDataset, generate_synthetic, load_dataset, save_dataset
from .errors import ConfigError, ContractError, DataError, NumericError, RulegradError, ShapeError
from .evaluate import EvalReport, evaluate
from .losses import LossWeights, total_loss
from .train import TrainConfig, train
from .vse import VseParams

__all__ = [
    "ConfigError", "ContractError", "DataError", "EvalReport", "LossWeights", "MarginSchedule",
    "NumericError", "RulegradError", "ShapeError", "SyntheticSpec", "TrainConfig", "VseParams",
    "ZslDataset", "evaluate", "generate_synthetic", "load_dataset", "save_dataset", "total_loss",
    "train",
]
__version__ = "0.1.0"
