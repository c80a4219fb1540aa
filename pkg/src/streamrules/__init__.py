"""streamrules: windowed temporal rule programs over fact streams.

Parse rule programs, evaluate them tick by tick (a naive reference
evaluator and an equivalent incremental engine), ingest or synthesize
sensor streams, and export labeled ML datasets from (program, stream)
pairs.
"""

from .model import (
    At,
    Atom,
    Comp,
    Math,
    Plain,
    Program,
    Rule,
    Stream,
    Substitution,
    Var,
    WindowSpec,
    Windowed,
    atom_sort_key,
    is_ground,
    make_atom,
    match,
    substitute,
)
from .parser import (
    ParseError,
    format_program,
    format_rule,
    parse_extended_atom,
    parse_program,
)
from .windows import UnsupportedWindowError, WindowView, eval_temporal, window_view
from .naive import (
    BuiltinTypeError,
    EvalStats,
    TickResult,
    UnboundArgumentError,
    eval_builtin,
    evaluate_tick_naive,
    fire_rule,
    new_history,
    run_stream_naive,
)
from .incremental import (
    Annotation,
    DerivationState,
    OutOfOrderTickError,
    UnsupportedProgramError,
    answers_at,
    check_equivalence,
    init_state,
    push_tick,
    run_stream_incremental,
)
from .streamio import (
    SensorMeta,
    assign_sectors,
    load_background,
    load_csv,
    read_sensor_meta,
    read_stream,
    write_stream,
)
from .synth import SyntheticConfig, generate_synthetic
from .datasets import (
    FeatureSchema,
    LabeledDataset,
    StandardizationParams,
    TaskKind,
    build_dataset,
    encode_window,
    export_dataset,
    fit_standardize,
    make_labels,
    read_dataset,
    split_dataset,
)
from . import catalog

__version__ = "0.1.0"
