import logging
from pathlib import Path
from typing import Annotated, Optional

import typer

from ..deps import ChannelsOpt, ConfigOpt, SetOpt, int_list, run_config
from ..exceptions import ConfigError
from ..middleware import command_middleware
from ..schemas.objective import PositiveMode
from ..services import data_service, encoder_service, eval_service, trainer_service
from ..utils import csv_utils, tensor_io

logger = logging.getLogger(__name__)


@command_middleware("pretrain")
def pretrain(
    data: Annotated[Path, typer.Option("--data", help="training windows (.bin or UCR text)")],
    out: Annotated[Path, typer.Option("--out", help="model file to write")],
    config: ConfigOpt = None,
    assignments: SetOpt = None,
    log: Annotated[Optional[Path], typer.Option("--log", help="per-iteration CSV iter,k,lr,loss,k_eff")] = None,
    channels: ChannelsOpt = None,
    iters: Annotated[Optional[int], typer.Option("--iters", help="total_iters [default: 1500]")] = None,
    batch_size: Annotated[Optional[int], typer.Option("--batch-size", help="batch_size [default: 128]")] = None,
    seed: Annotated[Optional[int], typer.Option("--seed", help="seed [default: 1]")] = None,
    tau: Annotated[Optional[float], typer.Option("--tau", help="tau [default: 0.07]")] = None,
    rho: Annotated[Optional[float], typer.Option("--rho", help="rho [default: 0.5]")] = None,
    positive_mode: Annotated[
        Optional[PositiveMode], typer.Option("--positive-mode", help="positive_mode [default: preceding]")
    ] = None,
):
    """Pretrain the encoder on unlabeled windows and write the model file."""
    cfg = run_config(
        config, assignments,
        total_iters=iters, batch_size=batch_size, seed=seed, tau=tau, rho=rho, positive_mode=positive_mode,
    )
    dataset = data_service.load_dataset(data)
    selected = int_list(channels, "--channels")
    if selected:
        dataset = data_service.select_channels(dataset, selected)
    params, train_log = trainer_service.pretrain(
        dataset,
        cfg.encoder_config(dataset.D),
        cfg.partition_params(),
        cfg.loss_config(),
        cfg.optimizer_config(),
    )
    tensor_io.save_model(params, out)
    if log is not None:
        csv_utils.write_train_log(train_log, log)
    final = train_log.records[-1].loss if train_log.records else float("nan")
    typer.echo(f"wrote {out} ({len(train_log.records)} iterations, final loss {final:.4f})", err=True)


@command_middleware("embed")
def embed(
    data: Annotated[Path, typer.Option("--data", help="windows to embed")],
    out: Annotated[Path, typer.Option("--out", help="embeddings CSV (.bin for the tensor container)")],
    model: Annotated[Optional[Path], typer.Option("--model", help="pretrained model file")] = None,
    raw: Annotated[bool, typer.Option("--raw", help="export flattened raw windows instead")] = False,
    random_init: Annotated[
        bool, typer.Option("--random-init", help="embed with a freshly initialised encoder")
    ] = False,
    config: ConfigOpt = None,
    assignments: SetOpt = None,
    seed: Annotated[Optional[int], typer.Option("--seed", help="init seed for --random-init [default: 1]")] = None,
    channels: ChannelsOpt = None,
):
    """Write one embedding row per window (projection head bypassed)."""
    if sum([model is not None, raw, random_init]) != 1:
        raise ConfigError("pass exactly one of --model, --raw, --random-init")
    dataset = data_service.load_dataset(data)
    selected = int_list(channels, "--channels")
    if selected:
        dataset = data_service.select_channels(dataset, selected)

    if raw:
        emb = eval_service.raw_features(dataset)
    elif random_init:
        cfg = run_config(config, assignments, seed=seed)
        encoder = cfg.encoder_config(dataset.D)
        emb = eval_service.embed_windows(dataset, encoder_service.init_params(encoder, cfg.seed), encoder)
    else:
        emb = eval_service.embed_windows(dataset, tensor_io.load_model(model))
    csv_utils.save_embeddings(emb, out)
    typer.echo(f"wrote {out} ({emb.n} x {emb.values.shape[1]})", err=True)


commands = {"pretrain": pretrain, "embed": embed}
