from typing import Any


class DicotException(Exception):
    kind: str = "Error"
    message: str = "An error occurred"
    exit_code: int = 1

    def __init__(self, message: str | None = None, **details: Any):
        if message is not None:
            self.message = message
        self.details = details
        super().__init__(self.message)


class ShapeError(DicotException):
    kind = "ShapeError"
    message = "Shape mismatch"


class ContractError(DicotException):
    kind = "ContractError"
    message = "Precondition violated"


class ConfigError(DicotException):
    kind = "ConfigError"
    message = "Invalid configuration"


class InvalidPartition(DicotException):
    kind = "InvalidPartition"
    message = "Invalid partition"


class NumericsError(DicotException):
    kind = "NumericsError"
    message = "Non-finite values encountered"


class FormatError(DicotException):
    kind = "FormatError"
    message = "Malformed file"


class BudgetError(DicotException):
    kind = "BudgetError"
    message = "Allocation exceeds the configured budget"


def error_line(exc: BaseException) -> str:
    """Single machine-parsable error line: ``ERROR <kind>: <detail>``."""
    if isinstance(exc, DicotException):
        kind, detail = exc.kind, exc.message
    else:
        kind, detail = "InternalError", str(exc) or type(exc).__name__
    # keep it on one line
    detail = " ".join(detail.split())
    return f"ERROR {kind}: {detail}"
