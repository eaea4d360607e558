"""Exception types shared across the package."""


class Error(Exception):
    """Base class for all package-specific failures."""


class UnknownSymbol(Error):
    """A character is missing from the vocabulary and UNK mapping is disabled."""


class EmptyGraph(Error):
    """The input text contains no non-whitespace character."""


class MalformedDocument(Error):
    """A serialized graph document failed to parse or validate."""


class ShapeMismatch(Error):
    """Tensor operands have incompatible shapes."""


class NonScalarLoss(Error):
    """backward() was asked to differentiate a non-scalar tensor."""


class IndexOutOfVocabulary(Error):
    """A node's symbol id does not fit the embedding table."""


class EmptyInput(Error):
    """An encoder received an empty symbol sequence."""


class LengthMismatch(Error):
    """Sequence and graph branches disagree on the number of positions."""


class ConfigMismatch(Error):
    """A checkpoint was produced under a different model configuration."""


class DivergenceDetected(Error):
    """Training loss became non-finite."""
