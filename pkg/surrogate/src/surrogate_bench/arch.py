"""Network architectures, declared as data and built with Keras.

One LSTM and one CNN architecture per shipped query, matching the layer
listings the study settled on.  Recurrent models consume the window as a
length-w sequence of per-tick feature rows; convolutional models treat the
same w x n matrix as a 1-D sequence with n channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    kind: str  # lstm | conv1d | gap | dense | dropout
    units: int = 0
    kernel: int = 0
    activation: Optional[str] = None
    rate: float = 0.0
    padding: str = "valid"


@dataclass(frozen=True)
class ArchSpec:
    family: str  # lstm | cnn
    layers: tuple
    output_units: int
    output_activation: Optional[str]

    def describe(self) -> str:
        parts = []
        for layer in self.layers:
            if layer.kind == "lstm":
                parts.append(f"LSTM({layer.units},{layer.activation})")
            elif layer.kind == "conv1d":
                parts.append(f"Conv1D({layer.units},k{layer.kernel},{layer.activation})")
            elif layer.kind == "gap":
                parts.append("GAP")
            elif layer.kind == "dense":
                parts.append(f"Dense({layer.units},{layer.activation})")
            else:
                parts.append(f"Dropout({layer.rate})")
        parts.append(f"Dense({self.output_units},{self.output_activation or 'linear'})")
        return " -> ".join(parts)


def _lstm(units):
    return Layer("lstm", units=units, activation="tanh")


def _conv(units, kernel, activation="relu"):
    return Layer("conv1d", units=units, kernel=kernel, activation=activation)


def _dense(units, activation):
    return Layer("dense", units=units, activation=activation)


def _drop(rate):
    return Layer("dropout", rate=rate)


_GAP = Layer("gap")

ARCHS = {
    ("q1", "lstm"): ArchSpec("lstm", (_lstm(4), _lstm(4), _lstm(4), _lstm(4)), 1, "sigmoid"),
    ("q2", "lstm"): ArchSpec("lstm", (_lstm(16), _lstm(10)), 10, "sigmoid"),
    ("q3", "lstm"): ArchSpec("lstm", (_lstm(8),), 4, "softmax"),
    ("q4", "lstm"): ArchSpec("lstm", (_lstm(8), _lstm(4), _lstm(2), _lstm(2)), 1, None),
    ("q5", "lstm"): ArchSpec("lstm", (_lstm(24), _lstm(12), _lstm(6)), 3, "sigmoid"),
    ("q1", "cnn"): ArchSpec(
        "cnn",
        (_conv(64, 4), _conv(64, 4), _GAP, _dense(64, "relu"), _drop(0.4),
         _dense(64, "relu"), _drop(0.4)),
        1,
        "sigmoid",
    ),
    ("q2", "cnn"): ArchSpec(
        "cnn",
        (_conv(64, 2), _conv(64, 2), _GAP, _dense(32, "relu"), _drop(0.6),
         _dense(32, "relu"), _drop(0.6)),
        10,
        "sigmoid",
    ),
    ("q3", "cnn"): ArchSpec(
        "cnn",
        (_conv(64, 2), _conv(64, 2), _GAP, _dense(32, "relu"), _drop(0.7)),
        4,
        "softmax",
    ),
    ("q4", "cnn"): ArchSpec(
        "cnn",
        (_conv(64, 2, "elu"), _conv(64, 2, "elu"), _GAP, _dense(64, "elu"), _drop(0.6)),
        1,
        None,
    ),
    ("q5", "cnn"): ArchSpec(
        "cnn",
        (_conv(128, 2), _conv(128, 2), _GAP, _dense(32, "relu"), _drop(0.2),
         _dense(32, "relu"), _drop(0.2)),
        3,
        "sigmoid",
    ),
}

# Default epoch budgets; per-query counts stay inside these bounds.
DEFAULT_EPOCHS = {"lstm": 100, "cnn": 50}


def build_model(spec: ArchSpec, input_shape: tuple):
    """Build a Keras model for (w, n)-shaped inputs; the output layer width
    and activation come from the spec."""
    import keras
    from keras import layers

    if len(input_shape) != 2:
        raise ConfigurationError(f"input shape must be (w, n), got {input_shape}")
    inputs = keras.Input(shape=input_shape)
    x = inputs
    lstm_positions = [i for i, l in enumerate(spec.layers) if l.kind == "lstm"]
    for i, layer in enumerate(spec.layers):
        if layer.kind == "lstm":
            last_lstm = i == lstm_positions[-1]
            x = layers.LSTM(
                layer.units,
                activation=layer.activation,
                return_sequences=not last_lstm,
            )(x)
        elif layer.kind == "conv1d":
            x = layers.Conv1D(
                layer.units,
                layer.kernel,
                activation=layer.activation,
                padding=layer.padding,
            )(x)
        elif layer.kind == "gap":
            x = layers.GlobalAveragePooling1D()(x)
        elif layer.kind == "dense":
            x = layers.Dense(layer.units, activation=layer.activation)(x)
        elif layer.kind == "dropout":
            x = layers.Dropout(layer.rate)(x)
        else:
            raise ConfigurationError(f"unknown layer kind {layer.kind!r}")
    outputs = layers.Dense(spec.output_units, activation=spec.output_activation)(x)
    model = keras.Model(inputs, outputs)
    assert model.count_params() > 0
    return model


def check_task_compatible(spec: ArchSpec, output_width: int) -> None:
    if spec.output_units != output_width:
        raise ConfigurationError(
            f"architecture outputs {spec.output_units} unit(s) but the task "
            f"needs {output_width}"
        )
