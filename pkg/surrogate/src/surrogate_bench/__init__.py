"""surrogate_bench: neural surrogates for windowed rule-stream queries.

Consumes the labeled datasets the stream engine exports (NDJSON/CSV plus
a metadata sidecar), trains the study's LSTM and CNN architectures on
them, and reports accuracy/MSE and single-sample inference latency.
"""

from .arch import ARCHS, ArchSpec, ConfigurationError, Layer, build_model, check_task_compatible
from .data import DatasetBundle, Task, load_dataset
from .train import (
    DEFAULTS,
    TrainReport,
    measure_latency,
    save_curves,
    train,
    train_per_sector,
)

__version__ = "0.1.0"
