import numpy as np
import pytest
from typer.testing import CliRunner

from dicot.main import app, main
from dicot.services import data_service
from dicot.utils import csv_utils

runner = CliRunner()

TINY = [
    "--set", "total_iters=2",
    "--set", "channels=4",
    "--set", "kernel_sizes=3",
    "--set", "embed_dim=4",
    "--set", "batch_size=4",
]


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


@pytest.fixture
def synth_file(tmp_path):
    path = tmp_path / "synth.bin"
    result = invoke("gen-synth", "--out", path, "--n-per-class", 4, "--T", 32, "--D", 2, "--C", 2, "--seed", 7)
    assert result.exit_code == 0, result.output
    return path


def test_partition_plan():
    result = invoke("partition", "--T", 100, "--k", 10, "--rho", 0.5)
    assert result.exit_code == 0
    lines = result.stdout.splitlines()
    assert lines[0] == "L=18 s=9 k_eff=10"
    assert lines[1] == "block 0: [0, 18)"
    assert len(lines) == 11


def test_partition_too_short_window():
    result = invoke("partition", "--T", 1, "--k", 10)
    assert result.exit_code == 1
    assert "ERROR InvalidPartition" in result.output


def test_gen_synth_shapes(synth_file):
    batch = data_service.load_dataset(synth_file)
    assert batch.values.shape == (8, 32, 2)


def test_gen_synth_text_needs_univariate(tmp_path):
    result = invoke("gen-synth", "--out", tmp_path / "x.tsv", "--D", 2)
    assert result.exit_code == 1
    assert "ERROR ConfigError" in result.output


def test_pretrain_embed_evaluate(tmp_path, synth_file):
    model = tmp_path / "model.bin"
    log = tmp_path / "log.csv"
    result = invoke("pretrain", "--data", synth_file, "--out", model, "--log", log, *TINY)
    assert result.exit_code == 0, result.output
    log_lines = log.read_text().splitlines()
    assert log_lines[0] == "iter,k,lr,loss,k_eff"
    assert len(log_lines) == 3

    again = tmp_path / "model2.bin"
    assert invoke("pretrain", "--data", synth_file, "--out", again, *TINY).exit_code == 0
    assert model.read_bytes() == again.read_bytes()

    emb = tmp_path / "emb.csv"
    result = invoke("embed", "--data", synth_file, "--model", model, "--out", emb)
    assert result.exit_code == 0, result.output
    matrix = csv_utils.load_embeddings(emb)
    assert matrix.values.shape == (8, 4)

    report = tmp_path / "knn.csv"
    result = invoke("eval-knn", "--emb", emb, "--budget", 1, "--seeds", "1,2,3,4,5", "--out", report)
    assert result.exit_code == 0, result.output
    rows = report.read_text().splitlines()
    assert rows[0] == "task,metric,value,seed"
    assert [r.split(",")[-1] for r in rows[1:]] == ["1", "2", "3", "4", "5", "mean"]


def test_embed_raw_and_random(tmp_path, synth_file):
    raw = tmp_path / "raw.csv"
    assert invoke("embed", "--data", synth_file, "--raw", "--out", raw).exit_code == 0
    assert csv_utils.load_embeddings(raw).values.shape == (8, 64)
    rand = tmp_path / "rand.bin"
    result = invoke("embed", "--data", synth_file, "--random-init", "--out", rand, *TINY[2:])
    assert result.exit_code == 0, result.output
    assert csv_utils.load_embeddings(rand).values.shape == (8, 4)


def test_embed_needs_exactly_one_source(tmp_path, synth_file):
    result = invoke("embed", "--data", synth_file, "--raw", "--random-init", "--out", tmp_path / "e.csv")
    assert result.exit_code == 1
    assert "ERROR ConfigError: pass exactly one of" in result.output


def test_eval_cluster_to_stdout(tmp_path, synth_file):
    raw = tmp_path / "raw.csv"
    invoke("embed", "--data", synth_file, "--raw", "--out", raw)
    result = invoke("eval-cluster", "--emb", raw, "--seeds", "1")
    assert result.exit_code == 0, result.output
    metrics = [line.split(",")[1] for line in result.stdout.splitlines()[1:]]
    assert sorted(set(metrics)) == ["ari", "inertia", "nmi"]


def test_bad_seed_list(tmp_path, synth_file):
    raw = tmp_path / "raw.csv"
    invoke("embed", "--data", synth_file, "--raw", "--out", raw)
    result = invoke("eval-knn", "--emb", raw, "--seeds", "a,b")
    assert result.exit_code == 1
    assert "ERROR ConfigError" in result.output


def test_unknown_config_key(tmp_path, synth_file):
    result = invoke("pretrain", "--data", synth_file, "--out", tmp_path / "m.bin", "--set", "nope=1")
    assert result.exit_code == 1
    assert "ERROR ConfigError" in result.output


def test_missing_data_file(tmp_path):
    result = invoke("pretrain", "--data", tmp_path / "missing.bin", "--out", tmp_path / "m.bin", *TINY)
    assert result.exit_code == 1
    assert "ERROR FormatError" in result.output


def test_unknown_command_is_a_usage_error():
    assert invoke("frobnicate").exit_code == 2


def test_help_config_lists_keys(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help", "config"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "tau" in out and "positive_mode" in out and "rho" in out


def test_convert_both_ways(tmp_path):
    text = tmp_path / "u.tsv"
    assert invoke("gen-synth", "--out", text, "--n-per-class", 3, "--T", 16, "--D", 1, "--C", 2).exit_code == 0
    binary = tmp_path / "u.bin"
    back = tmp_path / "back.tsv"
    assert invoke("convert", "--in", text, "--out", binary, "--from", "tsv", "--to", "bin").exit_code == 0
    assert invoke("convert", "--in", binary, "--out", back, "--from", "bin", "--to", "tsv").exit_code == 0
    original = data_service.load_ucr_tsv(text)
    restored = data_service.load_ucr_tsv(back)
    np.testing.assert_array_equal(restored.labels, original.labels)
    np.testing.assert_allclose(restored.values, original.values, rtol=1e-6, atol=1e-7)


@pytest.mark.slow
def test_bench_small_grid(tmp_path):
    out = tmp_path / "scaling.csv"
    result = invoke(
        "bench", "--out", out, "--T", "8,16", "--B", "1,2", "--k", 2, "--F", 2, "--budget-bytes", 4096
    )
    assert result.exit_code == 0, result.output
    assert out.read_text().splitlines()[0] == "method,B,T,k,F,median_seconds,bytes"
    assert "slope_vs_T method=dicot B=1" in result.stdout
    assert "skipped method=timestep B=2 T=16" in result.stdout
