import functools
import logging
import time
from typing import Any, Callable

import typer
from pydantic import ValidationError

from .core.config import flatten_validation_error
from .exceptions import ConfigError, DicotException, error_line

logger = logging.getLogger("dicot.cli")


def command_middleware(name: str) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
    """Time a command and turn any failure into one ``ERROR <kind>: <detail>`` line.

    Domain errors exit with their own code (1); anything unexpected is an
    InternalError, also exit 1.
    """
    def decorate(func: Callable[..., Any]) -> Callable[..., Any]:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except typer.Exit:
                raise
            except DicotException as exc:
                typer.echo(error_line(exc), err=True)
                raise typer.Exit(code=exc.exit_code) from exc
            except ValidationError as exc:
                typer.echo(error_line(ConfigError(flatten_validation_error(exc))), err=True)
                raise typer.Exit(code=1) from exc
            except Exception as exc:
                logger.exception("unhandled error in %s", name)
                typer.echo(error_line(exc), err=True)
                raise typer.Exit(code=1) from exc
            elapsed = (time.perf_counter() - start) * 1000
            logger.info("%s -> ok (%.2f ms)", name, elapsed)
            return result

        return wrapper

    return decorate
