"""Exception hierarchy for the toolkit.

Everything raised on purpose derives from :class:`HanforgeError` so callers
(and the CLI) can distinguish our failures from genuine bugs.
"""


class HanforgeError(Exception):
    """Base class for all toolkit errors."""


# --- label sequences ---------------------------------------------------------

class IllegalSequence(HanforgeError):
    """A label sequence violates the scheme's start/transition/end rules."""


# --- encoder -----------------------------------------------------------------

class LengthExceeded(HanforgeError):
    """Input longer than the encoder's position table allows."""


class BadLayerCount(HanforgeError):
    """Requested layer count outside the valid pruning range."""


# --- CRF ---------------------------------------------------------------------

class EmptySequence(HanforgeError):
    """CRF scoring or decoding invoked on a zero-length sequence."""


class LabelOutOfRange(HanforgeError):
    """A gold label index falls outside the scheme's label set."""


class NoLegalPath(HanforgeError):
    """Constrained Viterbi found no path with finite score."""


# --- lexicon -----------------------------------------------------------------

class EmptyWord(HanforgeError):
    """Attempt to add an empty string to the lexicon."""


class NegativeWeight(HanforgeError):
    """Lexicon bias weight must be nonnegative."""


# --- biaffine parser ---------------------------------------------------------

class SpanMismatch(HanforgeError):
    """Segmentation does not cover the feature rows it is pooling."""


class UnknownPosLabel(HanforgeError):
    """POS category absent from the embedding table."""


class InvalidGoldTree(HanforgeError):
    """Gold dependency annotation is not a single-root tree."""


# --- compression -------------------------------------------------------------

class BindingMismatch(HanforgeError):
    """Base/large layer binding inconsistent with the actual models."""


# --- pipeline / IO -----------------------------------------------------------

class EmptyInput(HanforgeError):
    """Prediction or preprocessing invoked on empty input."""


class ModelNotLoaded(HanforgeError):
    """No usable model available (missing file or not initialized)."""


class UnknownTag(HanforgeError):
    """Corpus tag name not registered in the model."""


class CorpusFormatError(HanforgeError):
    """A corpus file does not match its declared format.

    Messages include ``path:line`` so users can jump to the offending row.
    """


class ConfigError(HanforgeError):
    """Training or CLI configuration is invalid."""


class FormatVersionMismatch(HanforgeError):
    """Model container written by an incompatible format version."""


class CorruptContainer(HanforgeError):
    """Model container truncated or failing its checksum."""
