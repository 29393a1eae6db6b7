"""Type-aware retrieval-augmented answering for non-factoid questions."""

from .core import (
    Answer,
    AnswerMethod,
    ConfigError,
    InputError,
    InternalError,
    NfqaError,
    NfqType,
    ParseError,
    Passage,
    QaPair,
    Question,
    TraceStep,
    TransportError,
)

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "AnswerMethod",
    "ConfigError",
    "InputError",
    "InternalError",
    "NfqaError",
    "NfqType",
    "ParseError",
    "Passage",
    "QaPair",
    "Question",
    "TraceStep",
    "TransportError",
    "__version__",
]
