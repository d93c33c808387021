"""Exception hierarchy shared across the engine."""


class TaglogError(Exception):
    """Base class for all engine errors."""


class CompileError(TaglogError):
    """Any error raised while turning source text into an executable plan.

    Carries an optional (line, col) position pointing into the source.
    """

    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(str(self))

    def __str__(self):
        if self.line is not None:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message


class ParseError(CompileError):
    pass


class TypeInferenceError(CompileError):
    pass


class StratificationError(CompileError):
    pass


class ValidationError(CompileError):
    """A structurally invalid algebra program (should not happen for compiled code)."""


class EvaluationAborted(TaglogError):
    """Runtime abort: iteration limit or world cap exceeded."""


class LoadError(TaglogError):
    """Malformed external fact input (CSV)."""


class ProvenanceError(TaglogError):
    """Misuse of a provenance (e.g. negation where unsupported)."""
