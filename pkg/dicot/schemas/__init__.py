from .bench import BenchMethod, BenchPoint, ScalingResult, SkippedCell, SweepConfig
from .data import SyntheticSpec, TimeSeriesBatch
from .encoder import EncoderConfig, ModelParams
from .eval import EmbeddingMatrix, EvalReport, EvalRow, ProbeConfig, Standardization
from .objective import LossConfig, PositiveMode, TargetVector
from .partition import PartitionParams, PartitionPlan, SplitMode, SubBlockSet
from .trainer import OptimizerConfig, OptimizerState, TrainLog, TrainRecord

__all__ = [
    "BenchMethod", "BenchPoint", "ScalingResult", "SkippedCell", "SweepConfig",
    "SyntheticSpec", "TimeSeriesBatch",
    "EncoderConfig", "ModelParams",
    "EmbeddingMatrix", "EvalReport", "EvalRow", "ProbeConfig", "Standardization",
    "LossConfig", "PositiveMode", "TargetVector",
    "PartitionParams", "PartitionPlan", "SplitMode", "SubBlockSet",
    "OptimizerConfig", "OptimizerState", "TrainLog", "TrainRecord",
]
