"""Frame identification with windowed positional attention over a toy encoder."""

from .errors import FrameIdError
from .lexicon import (
    AnnotationInstance,
    Lexicon,
    LexicalUnit,
    TargetIndex,
    build_target_index,
    candidate_frames,
    load_annotations,
    load_lexicon,
    save_lexicon,
)
from .inflect import inflect
from .model import EncoderConfig, FramePrediction, ModelParams, forward
from .tokenizer import Vocab, build_vocab, encode_instance, tokenize
from .training import TrainConfig, train
from .evaluation import EvalReport, evaluate, is_ambiguous, top_confused

__version__ = "0.1.0"

__all__ = [
    "AnnotationInstance", "EncoderConfig", "EvalReport", "FrameIdError", "FramePrediction",
    "Lexicon", "LexicalUnit", "ModelParams", "TargetIndex", "TrainConfig", "Vocab",
    "build_target_index", "build_vocab", "candidate_frames", "encode_instance", "evaluate",
    "forward", "inflect", "is_ambiguous", "load_annotations", "load_lexicon", "save_lexicon",
    "tokenize", "top_confused", "train",
]
