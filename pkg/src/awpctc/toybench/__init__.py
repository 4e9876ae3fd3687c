"""Desk-scale synthetic benchmark: data, model, optimizer and training loop."""
from .model import WindowModel, window_features
from .optim import AdamState, OptimizerConfig, adam_step
from .synth import SynthConfig, SynthUtterance, gen_dataset, load_split, save_split
from .train import (METRICS_COLUMNS, MetricsRecord, TrainConfig, TrainState,
                    TrainingDivergedError, metrics_csv, train)
