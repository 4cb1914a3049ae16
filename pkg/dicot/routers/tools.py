from dicot.utils.compat import StrEnum
from pathlib import Path
from typing import Annotated, Optional

import typer

from ..core.config import settings
from ..deps import int_list
from ..exceptions import ConfigError
from ..middleware import command_middleware
from ..schemas.bench import SweepConfig
from ..schemas.data import SyntheticSpec
from ..services import bench_service, data_service, partition_service
from ..utils import csv_utils


class DataFormat(StrEnum):
    tsv = "tsv"
    bin = "bin"


@command_middleware("bench")
def bench(
    out: Annotated[Path, typer.Option("--out", help="scaling CSV")] = Path("scaling.csv"),
    t_values: Annotated[str, typer.Option("--T", help="window lengths")] = "64,128,256,512",
    b_values: Annotated[str, typer.Option("--B", help="batch sizes")] = "8,16,32,64",
    k: Annotated[int, typer.Option("--k", help="sub-blocks per window")] = 10,
    f: Annotated[int, typer.Option("--F", help="embedding dimension")] = 64,
    tau: Annotated[float, typer.Option("--tau")] = 0.07,
    repeats: Annotated[int, typer.Option("--repeats", help="timed repeats per cell (>= 5)")] = 5,
    float32: Annotated[bool, typer.Option("--float32", help="time in single precision")] = False,
    seed: Annotated[int, typer.Option("--seed")] = 1,
    budget_bytes: Annotated[
        Optional[int], typer.Option("--budget-bytes", help="score-matrix cap [default: DICOT_BENCH_BUDGET_BYTES]")
    ] = None,
):
    """Time both loss kernels over the T x B grid and print the fitted slopes."""
    sweep = SweepConfig(
        T_values=int_list(t_values, "--T"),
        B_values=int_list(b_values, "--B"),
        k=k,
        F=f,
        tau=tau,
        repeats=repeats,
        float32=float32,
        seed=seed,
        budget_bytes=budget_bytes or settings.BENCH_BUDGET_BYTES,
    )
    result = bench_service.run_scaling(sweep)
    csv_utils.write_bench(result.points, out)
    for method, per_B in result.slope_vs_T.items():
        for B, slope in per_B.items():
            typer.echo(f"slope_vs_T method={method} B={B} slope={slope:.3f}")
    for T, slope in result.dicot_slope_vs_B.items():
        typer.echo(f"slope_vs_B method=dicot T={T} slope={slope:.3f}")
    for cell in result.skipped:
        typer.echo(f"skipped method={cell.method.value} B={cell.B} T={cell.T}: {cell.reason}")
    for point in result.unstable:
        typer.echo(f"unstable method={point.method.value} B={point.B} T={point.T} spread={point.spread:.2f}")


@command_middleware("partition")
def partition(
    t: Annotated[int, typer.Option("--T", help="window length")],
    k: Annotated[int, typer.Option("--k", help="requested sub-block count")] = 10,
    rho: Annotated[float, typer.Option("--rho", help="overlap ratio")] = 0.5,
):
    """Print the sub-block plan for one window length."""
    plan = partition_service.plan_partition(t, k, rho)
    typer.echo(f"L={plan.L} s={plan.s} k_eff={plan.k}")
    for j, (start, stop) in enumerate(plan.block_ranges()):
        typer.echo(f"block {j}: [{start}, {stop})")


@command_middleware("convert")
def convert(
    src: Annotated[Path, typer.Option("--in", help="input dataset")],
    out: Annotated[Path, typer.Option("--out", help="output dataset")],
    from_format: Annotated[DataFormat, typer.Option("--from")] = DataFormat.tsv,
    to_format: Annotated[DataFormat, typer.Option("--to")] = DataFormat.bin,
):
    """Convert between UCR text and the binary dataset format."""
    if from_format == DataFormat.tsv:
        batch = data_service.load_ucr_tsv(src)
    else:
        batch = data_service.load_binary(src)
    if to_format == DataFormat.bin:
        data_service.save_binary(batch, out)
    else:
        data_service.save_ucr_tsv(batch, out)
    typer.echo(f"wrote {out} (N={batch.n} T={batch.T} D={batch.D})", err=True)


@command_middleware("gen-synth")
def gen_synth(
    out: Annotated[Path, typer.Option("--out", help="dataset file (.tsv for UCR text, else binary)")],
    n_per_class: Annotated[int, typer.Option("--n-per-class")] = 500,
    t: Annotated[int, typer.Option("--T")] = 128,
    d: Annotated[int, typer.Option("--D")] = 3,
    c: Annotated[int, typer.Option("--C")] = 4,
    noise_sigma: Annotated[float, typer.Option("--noise-sigma")] = 0.3,
    cycles_base: Annotated[float, typer.Option("--cycles-base")] = 1.0,
    seed: Annotated[int, typer.Option("--seed")] = 1,
):
    """Generate the phase-randomised sinusoid corpus."""
    spec = SyntheticSpec(
        n_per_class=n_per_class, T=t, D=d, C=c, noise_sigma=noise_sigma, cycles_base=cycles_base, seed=seed
    )
    batch = data_service.gen_synthetic(spec)
    if out.suffix == ".tsv":
        if batch.D != 1:
            raise ConfigError("UCR text output needs --D 1")
        data_service.save_ucr_tsv(batch, out)
    else:
        data_service.save_binary(batch, out)
    typer.echo(f"wrote {out} (N={batch.n} T={batch.T} D={batch.D})", err=True)


commands = {"bench": bench, "partition": partition, "convert": convert, "gen-synth": gen_synth}
