from pathlib import Path
from typing import Annotated, Optional

import typer

from ..deps import ChannelsOpt, ConfigOpt, OutOpt, SeedsOpt, SetOpt, int_list, run_config
from ..middleware import command_middleware
from ..schemas.eval import EvalReport
from ..services import data_service, eval_service
from ..utils import csv_utils, tensor_io

EmbOpt = Annotated[Path, typer.Option("--emb", help="embeddings (CSV or .bin)")]
TestEmbOpt = Annotated[Optional[Path], typer.Option("--test-emb", help="held-out embeddings")]


def _emit(report: EvalReport, out: Optional[Path]) -> None:
    csv_utils.write_report(report, out)
    if out is not None:
        typer.echo(f"wrote {out} ({len(report.rows)} rows)", err=True)


def _load_test(path: Optional[Path]):
    return None if path is None else csv_utils.load_embeddings(path)


@command_middleware("eval-knn")
def eval_knn(
    emb: EmbOpt,
    test_emb: TestEmbOpt = None,
    budget: Annotated[
        str, typer.Option("--budget", help="labels per class, comma-separated")
    ] = "5,10,50,100,500",
    seeds: SeedsOpt = None,
    out: OutOpt = None,
    config: ConfigOpt = None,
    assignments: SetOpt = None,
):
    """1NN accuracy with a per-class label budget; one row per budget and seed plus means."""
    cfg = run_config(config, assignments, seeds=int_list(seeds, "--seeds"))
    report = eval_service.knn_report(
        csv_utils.load_embeddings(emb), _load_test(test_emb), int_list(budget, "--budget"), cfg.seeds
    )
    _emit(report, out)


@command_middleware("eval-linear")
def eval_linear(
    emb: EmbOpt,
    test_emb: TestEmbOpt = None,
    train_frac: Annotated[
        float, typer.Option("--train-frac", help="train share when no --test-emb is given")
    ] = 0.8,
    seeds: SeedsOpt = None,
    out: OutOpt = None,
    config: ConfigOpt = None,
    assignments: SetOpt = None,
):
    """Logistic-regression probe accuracy on frozen embeddings."""
    cfg = run_config(config, assignments, seeds=int_list(seeds, "--seeds"))
    report = eval_service.linear_report(
        csv_utils.load_embeddings(emb), _load_test(test_emb), cfg.probe_config(), cfg.seeds, train_frac
    )
    _emit(report, out)


@command_middleware("eval-cluster")
def eval_cluster(
    emb: EmbOpt,
    n_clusters: Annotated[
        Optional[int], typer.Option("--n-clusters", help="[default: number of label classes]")
    ] = None,
    seeds: SeedsOpt = None,
    out: OutOpt = None,
    config: ConfigOpt = None,
    assignments: SetOpt = None,
):
    """k-means on embeddings scored by NMI and ARI against the labels."""
    cfg = run_config(config, assignments, seeds=int_list(seeds, "--seeds"))
    report = eval_service.cluster_report(
        csv_utils.load_embeddings(emb), cfg.seeds, n_clusters, cfg.kmeans_max_iter
    )
    _emit(report, out)


@command_middleware("eval-lowlabel")
def eval_lowlabel(
    emb: EmbOpt,
    test_emb: Annotated[Path, typer.Option("--test-emb", help="held-out embeddings")],
    frac: Annotated[float, typer.Option("--frac", help="labelled share of the training rows")] = 0.01,
    seeds: SeedsOpt = None,
    out: OutOpt = None,
    config: ConfigOpt = None,
    assignments: SetOpt = None,
):
    """Linear probe trained on a small stratified labelled fraction."""
    cfg = run_config(config, assignments, seeds=int_list(seeds, "--seeds"))
    report = eval_service.lowlabel_report(
        csv_utils.load_embeddings(emb), csv_utils.load_embeddings(test_emb), frac, cfg.probe_config(), cfg.seeds
    )
    _emit(report, out)


@command_middleware("transfer")
def transfer(
    model: Annotated[Path, typer.Option("--model", help="encoder pretrained on the source dataset")],
    train: Annotated[Path, typer.Option("--train", help="target training windows")],
    test: Annotated[Path, typer.Option("--test", help="target test windows")],
    channels: ChannelsOpt = None,
    seeds: SeedsOpt = None,
    out: OutOpt = None,
    config: ConfigOpt = None,
    assignments: SetOpt = None,
):
    """Linear probe on a target dataset with the frozen source encoder."""
    cfg = run_config(config, assignments, seeds=int_list(seeds, "--seeds"))
    report = eval_service.transfer_report(
        tensor_io.load_model(model),
        data_service.load_dataset(train),
        data_service.load_dataset(test),
        int_list(channels, "--channels"),
        cfg.probe_config(),
        cfg.seeds,
    )
    _emit(report, out)


commands = {
    "eval-knn": eval_knn,
    "eval-linear": eval_linear,
    "eval-cluster": eval_cluster,
    "eval-lowlabel": eval_lowlabel,
    "transfer": transfer,
}
