"""Counterfactual explanation generation and robustness benchmarking for small dense classifiers."""
from .data import Dataset, FeatureSchema, default_preprocess, load_csv, split, synth_gaussian_blobs
from .model import DenseModel, ParamBall, TrainConfig, init_model, interval_logit, train
from .task import ClassificationTask, train_task
from .generators import GENERATORS, CounterfactualResult, GeneratorConfig, generate
from .bench import BenchConfig, BenchmarkReport, default_benchmark, render_table, run_benchmark

__all__ = [
    "Dataset", "FeatureSchema", "default_preprocess", "load_csv", "split", "synth_gaussian_blobs",
    "DenseModel", "ParamBall", "TrainConfig", "init_model", "interval_logit", "train",
    "ClassificationTask", "train_task", "GENERATORS", "CounterfactualResult", "GeneratorConfig",
    "generate", "BenchConfig", "BenchmarkReport", "default_benchmark", "render_table", "run_benchmark",
]
