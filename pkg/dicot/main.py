import logging
import sys
from typing import Optional

import typer

from .core.config import describe_config_keys, settings
from .routers import evaluation, tools, training

app = typer.Typer(
    name="dicot",
    help="Sub-block temporal-contrastive representation learning for time series.",
    add_completion=False,
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)

for module in (training, evaluation, tools):
    for command_name, handler in module.commands.items():
        app.command(command_name)(handler)


def configure_logging(level: Optional[str] = None) -> None:
    # stderr only; stdout carries CSV
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[list[str]] = None) -> None:
    args = list(sys.argv[1:] if argv is None else argv)
    if args[:2] == ["--help", "config"]:
        typer.echo(describe_config_keys())
        raise SystemExit(0)
    configure_logging()
    app(args=args, prog_name="dicot")


if __name__ == "__main__":
    main()
