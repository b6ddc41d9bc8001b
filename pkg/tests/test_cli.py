import os

import pytest

from crl.cli import main
from crl.problem_graph import read_dataset

TINY = ["--episodes", "512", "--lengths", "2:3", "--set", "k=256", "--set", "k_prime=128",
        "--set", "controller_hidden=8", "--set", "module_hidden=8", "--set", "eval_n=20"]


def _lines(path):
    return sum(1 for f in ("train.tsv", "val.tsv", "test.tsv") for _ in open(os.path.join(path, f)))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = str(root / "data")
    assert main(["generate", "--out", data]) == 0
    run = str(root / "run")
    assert main(["train", "--data", data, "--out", run, "--seeds", "2", *TINY]) == 0
    return root, data, run


def _error(capsys, argv, category):
    assert main(argv) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"error: {category}: ")


def test_generate_numerical_counts(workspace, capsys):
    _, data, _ = workspace
    assert _lines(data) == 5810
    _error(capsys, ["generate", "--out", data], "exists")
    before = open(os.path.join(data, "train.tsv")).read()
    assert main(["generate", "--out", data, "--force"]) == 0
    assert open(os.path.join(data, "train.tsv")).read() == before


def test_generate_multilingual_counts(tmp_path):
    out = str(tmp_path / "ml")
    assert main(["generate", "--task", "multilingual", "--out", out]) == 0
    assert _lines(out) == 46200
    ds = read_dataset(out)
    assert sorted(s for s, _ in ds.heldout_pairs) == list(range(5))
    assert sorted(t for _, t in ds.heldout_pairs) == list(range(5))


def test_env_var_sets_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("CRL_OUTPUT_ROOT", str(tmp_path))
    assert main(["generate"]) == 0
    assert os.path.exists(tmp_path / "data-numerical" / "manifest.json")


def test_train_layout_and_reproducibility(workspace, tmp_path):
    _, data, run = workspace
    assert sorted(os.listdir(run)) == ["config.txt", "seed-0", "seed-1"]
    for s in ("seed-0", "seed-1"):
        assert sorted(os.listdir(os.path.join(run, s))) == ["checkpoint.txt", "config.txt", "eval.csv"]
    again = str(tmp_path / "again")
    assert main(["train", "--data", data, "--out", again, "--seeds", "2", *TINY]) == 0
    for s in ("seed-0", "seed-1"):
        a = open(os.path.join(run, s, "eval.csv")).read()
        assert a == open(os.path.join(again, s, "eval.csv")).read()


def test_config_file_copied_and_flags_win(workspace, tmp_path):
    _, data, _ = workspace
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# tiny\nmodel=hcc\nepisodes=999\nlengths=2:3\nk=256\nk_prime=128\nmodule_hidden=8\n")
    out = str(tmp_path / "r")
    assert main(["train", "--config", str(cfg), "--data", data, "--out", out, "--episodes", "256"]) == 0
    assert open(os.path.join(out, "config.source.txt")).read() == cfg.read_text()
    text = open(os.path.join(out, "seed-0", "config.txt")).read()
    assert "model=hcc\n" in text and "episodes=256\n" in text


def test_eval_extrapolation_and_seed_column(workspace, tmp_path):
    _, _, run = workspace
    out = str(tmp_path / "e.csv")
    assert main(["eval", run, "--lengths", "5,12", "--n", "10", "--out", out]) == 0
    rows = open(out).read().splitlines()
    assert rows[0] == "episodes,split,length,src_lang,tgt_lang,seed,accuracy"
    assert {r.split(",")[2] for r in rows[1:]} == {"5", "12"}
    assert {r.split(",")[5] for r in rows[1:]} == {"0", "1"}


def test_trace_count_and_format(workspace, tmp_path):
    _, _, run = workspace
    out = str(tmp_path / "t.txt")
    assert main(["trace", run, "-n", "4", "--out", out, "--sample"]) == 0
    text = open(out).read()
    assert text.count("\nEND") + text.startswith("END") == 4
    assert "[" in text


def test_export_percentiles(workspace, tmp_path):
    _, _, run = workspace
    out = str(tmp_path / "agg.csv")
    assert main(["export", run, "--out", out]) == 0
    rows = open(out).read().splitlines()
    assert rows[0] == "episodes,split,length,n_seeds,p10,p50,p90"
    assert all(r.split(",")[3] == "2" for r in rows[1:])


def test_export_refuses_mixed_configs(workspace, tmp_path, capsys):
    _, data, run = workspace
    mixed = tmp_path / "mixed"
    assert main(["train", "--data", data, "--out", str(mixed), *TINY]) == 0
    assert main(["train", "--data", data, "--out", str(tmp_path / "other"), "--seed", "1",
                 *TINY, "--set", "lr_modules=0.05"]) == 0
    os.rename(tmp_path / "other" / "seed-1", mixed / "seed-1")
    _error(capsys, ["export", str(mixed)], "mismatch")
    _error(capsys, ["export", str(tmp_path)], "missing")


def test_error_categories(workspace, tmp_path, capsys):
    root, data, run = workspace
    _error(capsys, ["eval", str(tmp_path / "nowhere")], "missing")
    _error(capsys, ["train", "--data", str(tmp_path / "nodata"), "--out", str(tmp_path / "a")], "missing")
    _error(capsys, ["train", "--set", "foo=1", "--out", str(tmp_path / "b")], "config")
    _error(capsys, ["train", "--set", "episodes", "--out", str(tmp_path / "c")], "usage")
    _error(capsys, ["train", "--data", data, "--task", "multilingual", "--out", str(tmp_path / "d")], "mismatch")
    _error(capsys, ["train", "--data", data, "--data-scale", "10", "--out", str(tmp_path / "e")], "mismatch")
    _error(capsys, ["train", "--data", data, "--out", run], "exists")
    broken = tmp_path / "broken"
    broken.mkdir()
    seed0 = os.path.join(run, "seed-0")
    (broken / "config.txt").write_text(open(os.path.join(seed0, "config.txt")).read())
    (broken / "checkpoint.txt").write_text("not a checkpoint\n")
    _error(capsys, ["eval", str(broken)], "checkpoint")


def test_rnn_has_no_traces(workspace, tmp_path, capsys):
    _, data, _ = workspace
    out = str(tmp_path / "rnn")
    assert main(["train", "--data", data, "--out", out, "--model", "rnn", *TINY, "--set", "rnn_hidden=8"]) == 0
    _error(capsys, ["trace", out], "config")
