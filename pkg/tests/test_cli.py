import json
import subprocess
import sys

import pytest

from rxnpath.cli import _ratio_list, main
from rxnpath.io import read_embeddings


def run(*argv):
    return main([str(a) for a in argv])


def test_bad_flag_exits_2(capsys):
    assert run("pretrain", "--bogus") == 2
    assert "usage" in capsys.readouterr().err
    assert run("no-such-command") == 2


def test_structured_error(tmp_path, capsys):
    assert run("prep", "--in", tmp_path / "missing.txt", "--out", tmp_path / "o.jsonl") == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "FileNotFoundError"


def test_ratio_list():
    assert _ratio_list("0.01..0.08") == [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08]
    assert _ratio_list("0.05") == [0.05]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    from rxnpath.toydata import pretraining_reactions

    raw = d / "raw.txt"
    raw.write_text("".join(f"{r.to_smiles()}\t{r.class_label}\n" for r in pretraining_reactions(30, seed=8)))
    cfg = d / "cfg.yaml"
    cfg.write_text("epochs: 2\nbatch_size: 8\nencoder: {model_dim: 16, head_hidden: 16, proj_dim: 16, n_layers: 1, n_heads: 2, max_tokens: 64}\n")
    assert run("prep", "--in", raw, "--out", d / "rxn.jsonl") == 0
    assert run("pretrain", "--data", d / "rxn.jsonl", "--config", cfg, "--epochs", 1, "--out", d / "enc.ckpt") == 0
    assert run("embed", "--ckpt", d / "enc.ckpt", "--data", d / "rxn.jsonl", "--out", d / "emb.bin") == 0
    assert run("toy-data", "--kind", "chains", "--n", 40, "--out", d / "chains.jsonl", "--library-out", d / "lib.jsonl") == 0
    assert run("build-network", "--data", d / "chains.jsonl", "--nodes-out", d / "n.jsonl", "--edges-out", d / "e.jsonl") == 0
    assert run("sample-paths", "--nodes", d / "n.jsonl", "--edges", d / "e.jsonl", "--count", 30, "--out", d / "p.jsonl", "--pairs-out", d / "q.jsonl") == 0
    assert run("train-gen", "--ckpt", d / "enc.ckpt", "--pairs", d / "q.jsonl", "--out", d / "gen.ckpt", "--epochs", 1, "--latent-dim", 16, "--z-dim", 4, "--ref-channels", 8, "--hidden", 16) == 0
    assert run("build-index", "--ckpt", d / "enc.ckpt", "--library", d / "lib.jsonl", "--out", d / "idx.bin") == 0
    return d


def test_prep_pretrain_embed(pipeline):
    d = pipeline
    n = sum(1 for l in open(d / "rxn.jsonl") if l.strip())
    assert read_embeddings(d / "emb.bin").shape == (n, 48)
    m = json.loads((d / "enc.ckpt.manifest.json").read_text())
    assert m["command"] == "pretrain" and m["config"]["epochs"] == 1 and m["config"]["batch_size"] == 8
    assert str(d / "rxn.jsonl") in m["dataset_hashes"] and str(d / "enc.ckpt") in m["checkpoints"]


def test_generate_deterministic(pipeline):
    d = pipeline
    base = ["generate", "--ckpt", d / "enc.ckpt", "--gen", d / "gen.ckpt", "--index", d / "idx.bin", "--seed-smiles", "CCO", "--n", 4, "--seed", 7]
    assert run(*base, "--out", d / "g1.jsonl") == 0
    assert run(*base, "--out", d / "g2.jsonl") == 0
    assert (d / "g1.jsonl").read_bytes() == (d / "g2.jsonl").read_bytes()
    assert len((d / "g1.jsonl").read_text().splitlines()) == 4


def test_replay(pipeline):
    d = pipeline
    before = (d / "emb.bin").read_bytes()
    assert run("replay", d / "emb.bin.manifest.json") == 0
    assert (d / "emb.bin").read_bytes() == before


def test_benchmark_commands(pipeline):
    d = pipeline
    assert run("neg-sample", "--data", d / "rxn.jsonl", "--out", d / "neg.jsonl", "--rounds", 3) == 0
    assert run("retrieve-bench", "--ckpt", d / "enc.ckpt", "--pos", d / "rxn.jsonl", "--neg", d / "neg.jsonl", "--pos-ratio", "0.1", "--out", d / "rb.json", "--csv", d / "rb.csv") == 0
    assert json.loads((d / "rb.json").read_text())[0]["ratio"] == 0.1
    assert run("classify", "--reps", d / "emb.bin", "--labels", d / "rxn.jsonl", "--n-per-class", "2", "--repeats", 3, "--out", d / "c.json") == 0
    assert run("export-attention", "--ckpt", d / "enc.ckpt", "--reaction", json.loads(open(d / "rxn.jsonl").readline())["reaction"], "--out", d / "a.json") == 0


def test_eval_and_de_novo(pipeline):
    d = pipeline
    assert run("de-novo", "--ckpt", d / "enc.ckpt", "--gen", d / "gen.ckpt", "--index", d / "idx.bin", "--paths", d / "p.jsonl", "--n", 2, "--out", d / "dn.jsonl") == 0
    assert run("eval", "--generated", d / "dn.jsonl", "--out", d / "ev.json") == 0
    assert "validity_pct" in json.loads((d / "ev.json").read_text())


def test_yield_knn(pipeline, tmp_path):
    d = pipeline
    rows = [json.loads(l) for l in open(d / "rxn.jsonl")]
    store = tmp_path / "s.jsonl"
    store.write_text("".join(json.dumps({**r, "yield": 10.0 * (i % 10)}) + "\n" for i, r in enumerate(rows)))
    assert run("yield-knn", "--ckpt", d / "enc.ckpt", "--store", store, "--query", store, "--k", 1, "--out", tmp_path / "y.jsonl") == 0
    got = [json.loads(l)["yield"] for l in open(tmp_path / "y.jsonl")]
    assert got[:10] == [10.0 * i for i in range(10)]


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "rxnpath.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "retrieve-bench" in out.stdout
