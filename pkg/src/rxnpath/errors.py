"""Exception hierarchy shared by every rxnpath module."""


class RxnError(Exception):
    """Base class for all rxnpath errors."""


class ParseError(RxnError, ValueError):
    """A reaction or molecule string could not be parsed.

    ``field`` names the reaction field (reactants / reagents / product) and
    ``index`` the position of the offending molecule inside it, when known.
    """

    def __init__(self, message, field=None, index=None):
        self.field = field
        self.index = index
        loc = ""
        if field is not None:
            loc = f" [{field}" + (f"#{index}" if index is not None else "") + "]"
        super().__init__(message + loc)


class MappedReagentError(ParseError):
    """A reagent carries atom-map numbers that also appear in the product."""


class UnmappedReactionError(RxnError, ValueError):
    pass


class EncodeError(RxnError, ValueError):
    pass


class DatasetError(RxnError, ValueError):
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class UnknownElementError(RxnError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown element"


class EmptyBatchError(RxnError, ValueError):
    pass


class NumericalError(RxnError, FloatingPointError):
    pass


class VocabError(RxnError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "token outside vocabulary"


class ContractError(RxnError, ValueError):
    """A caller violated an operation's precondition."""


class UndefinedMetricError(RxnError, ValueError):
    pass


class SamplingError(RxnError, ValueError):
    pass


class EmptyResultError(RxnError, ValueError):
    pass


class ParameterError(RxnError, ValueError):
    pass


class PredictFailure(RxnError):
    """The forward predictor could not produce a product."""


class TrainingDiverged(RxnError, FloatingPointError):
    """Raised when a loss becomes non-finite; the last good state is restored first."""
