"""hanforge: joint Chinese word segmentation, POS tagging, NER and dependency parsing.

One shared encoder serves all tasks, steered by a corpus tag prepended to
every sentence. Decoding uses constrained Viterbi over a linear-chain CRF
for the labeling tasks and a biaffine scorer with maximum-arborescence
decoding for dependency trees. A user lexicon can bias segmentation, and a
trained model can be compressed to half depth by stochastic module
replacement.
"""

from .core import (CorpusTag, DepTree, LabelScheme, Segmentation, TagRegistry,
                   Task, Vocabulary)
from .encoder import EncoderConfig, TransformerEncoder
from .errors import HanforgeError
from .lexicon import Lexicon
from .model import JointModel
from .pipeline import (AnalysisResult, CorpusSpec, TrainingConfig, evaluate,
                       finetune, load, predict, preprocess, save, set_cws_style,
                       train)
from .theseus import ModuleBinding, TheseusSchedule, compress

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult", "CorpusSpec", "CorpusTag", "DepTree", "EncoderConfig",
    "HanforgeError", "JointModel", "LabelScheme", "Lexicon", "ModuleBinding",
    "Segmentation", "TagRegistry", "Task", "TheseusSchedule", "TrainingConfig",
    "TransformerEncoder", "Vocabulary", "compress", "evaluate", "finetune",
    "load", "predict", "preprocess", "save", "set_cws_style", "train",
    "__version__",
]
