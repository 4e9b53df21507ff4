"""Command-line entry point: ``rxnpath <subcommand> ...``.

Every run writes one JSON manifest (command, argv, resolved config and its
hash, input hashes, seed, outputs, metrics).  ``rxnpath replay <manifest>``
re-executes a run from its manifest alone.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .errors import RxnError

logger = logging.getLogger("rxnpath")


# --- config and manifest plumbing -----------------------------------------------


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    text = Path(path).read_text()
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise RxnError(f"config {path} must hold a mapping")
    return data


def _hash_json(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


class Run:
    """Collects manifest fields while a subcommand executes."""

    def __init__(self, command: str, argv: Sequence[str], config: dict, seed: Optional[int]):
        self.command = command
        self.argv = list(argv)
        self.config = config
        self.seed = seed
        self.inputs: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        self.metrics: Dict[str, Any] = {}

    def input(self, path: Optional[str]) -> Optional[str]:
        if path:
            from .io import file_sha256

            self.inputs[str(path)] = file_sha256(path)
        return path

    def output(self, path: Optional[str]) -> None:
        if path and Path(path).exists():
            from .io import file_sha256

            self.outputs[str(path)] = file_sha256(path)

    def manifest(self) -> dict:
        return {
            "version": __version__,
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "config_hash": _hash_json(self.config),
            "dataset_hashes": self.inputs,
            "seed": self.seed,
            "checkpoints": self.outputs,
            "metrics": self.metrics,
        }


def _write_json(path: Optional[str], obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write_jsonl(path: Optional[str], rows: Sequence[dict]) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _int_list(text: str) -> List[int]:
    return [int(t) for t in str(text).split(",") if t]


def _ratio_list(text: str) -> List[float]:
    """'0.01,0.05' or an inclusive range '0.01..0.08' stepped by the first value's last decimal."""
    text = str(text)
    if ".." in text:
        lo, hi = text.split("..")
        decimals = len(lo.split(".")[1]) if "." in lo else 0
        step = 10.0 ** -decimals
        n = int(round((float(hi) - float(lo)) / step))
        return [round(float(lo) + i * step, decimals) for i in range(n + 1)]
    return [float(t) for t in text.split(",") if t]


def _depth_range(text: str):
    lo, _, hi = str(text).partition(":")
    return int(lo), int(hi or lo)


# --- subcommands ---------------------------------------------------------------------


def cmd_prep(a, run: Run):
    from .reaction import read_raw_reactions, write_reactions

    rxns = read_raw_reactions(run.input(a.input), lenient=a.lenient)
    n = write_reactions(a.out, rxns)
    run.metrics["reactions"] = n
    run.output(a.out)


def cmd_toy_data(a, run: Run):
    from . import toydata
    from .reaction import write_reactions

    if a.kind == "pretrain":
        rxns = toydata.pretraining_reactions(a.n, seed=a.seed)
    elif a.kind == "classify":
        rxns = toydata.classification_reactions(a.n, seed=a.seed)
    else:
        lib = toydata.build_library(seed=a.seed)
        chains = toydata.grow_chains(a.n, seed=a.seed, library=lib)
        rxns = toydata.chain_reactions(chains)
        if a.library_out:
            _write_jsonl(a.library_out, [e.to_dict() for e in lib])
            run.output(a.library_out)
    run.metrics["reactions"] = write_reactions(a.out, rxns)
    run.output(a.out)


def _pretrain_config(a, cfg: dict):
    from .pretrain import PretrainConfig
    from .utils import deterministic_requested

    cfg = dict(cfg)
    enc = dict(cfg.get("encoder") or {})
    for flag, key in (("model_dim", "model_dim"), ("n_layers", "n_layers"), ("n_heads", "n_heads")):
        if getattr(a, flag) is not None:
            enc[key] = getattr(a, flag)
    cfg["encoder"] = enc
    for key in ("epochs", "lr", "batch_size", "seed", "patience", "tau", "lam"):
        if getattr(a, key, None) is not None:
            cfg[key] = getattr(a, key)
    cfg["deterministic"] = bool(cfg.get("deterministic")) or deterministic_requested()
    return PretrainConfig.from_dict(cfg)


def cmd_pretrain(a, run: Run):
    from .pretrain import pretrain, save_encoder
    from .reaction import read_reactions

    pc = _pretrain_config(a, run.config)
    run.config = pc.to_dict()
    run.seed = pc.seed
    rxns = read_reactions(run.input(a.data))
    val = read_reactions(run.input(a.val_data)) if a.val_data else None
    res = pretrain(rxns, pc, val_reactions=val)
    save_encoder(a.out, res.model, {"history": res.history, "best_epoch": res.best_epoch, "lr": res.lr})
    run.metrics.update(best_epoch=res.best_epoch, lr=res.lr, final=res.history[-1] if res.history else {})
    run.output(a.out)


def cmd_embed(a, run: Run):
    from .io import write_embeddings
    from .pretrain import load_encoder
    from .reaction import read_reactions

    enc = load_encoder(run.input(a.ckpt))
    rxns = read_reactions(run.input(a.data))
    if a.mode == "reaction":
        mat = enc.represent(rxns, mask_product=not a.with_product, drop_masked=a.drop_masked)
    else:
        sig = enc.signals(rxns)
        mat = np.concatenate([sig[k] for k in sorted(sig)], axis=1)
        run.metrics["signal_order"] = sorted(sig)
    write_embeddings(a.out, mat)
    run.metrics.update(rows=int(mat.shape[0]), dim=int(mat.shape[1]))
    run.output(a.out)


def cmd_export_attention(a, run: Run):
    from .encoder import export_attention
    from .pretrain import load_encoder
    from .reaction import parse_reaction

    enc = load_encoder(run.input(a.ckpt))
    export_attention(enc, parse_reaction(a.reaction), a.out)
    run.output(a.out)


def cmd_classify(a, run: Run):
    from .benchmarks import fewshot_classify
    from .io import read_embeddings
    from .reaction import read_reactions

    reps = read_embeddings(run.input(a.reps))
    labels = [r.class_label for r in read_reactions(run.input(a.labels))]
    if len(labels) != len(reps):
        raise RxnError(f"{len(reps)} embedding rows but {len(labels)} labelled reactions")
    rows = [fewshot_classify(reps, labels, n, repeats=a.repeats, seed=a.seed).to_dict() for n in _int_list(a.n_per_class)]
    run.metrics["fewshot"] = [{k: r[k] for k in ("n_per_class", "mean", "std")} for r in rows]
    _write_json(a.out, rows)
    if a.csv:
        with open(a.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n_per_class", "mean", "std"])
            for r in rows:
                w.writerow([r["n_per_class"], f"{r['mean']:.6f}", f"{r['std']:.6f}"])
        run.output(a.csv)
    run.output(a.out)


def cmd_retrieve_bench(a, run: Run):
    from .benchmarks import retrieval_benchmark, retrieval_score
    from .pretrain import load_encoder
    from .reaction import read_reactions

    enc = load_encoder(run.input(a.ckpt))
    pos = retrieval_score(enc, read_reactions(run.input(a.pos)))
    neg = retrieval_score(enc, read_reactions(run.input(a.neg)))
    rows = [retrieval_benchmark(pos, neg, r, seed=a.seed, total=a.total) for r in _ratio_list(a.pos_ratio)]
    run.metrics["retrieval"] = rows
    _write_json(a.out, rows)
    if a.csv:
        keys = sorted(rows[0])
        with open(a.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            w.writerows(rows)
        run.output(a.csv)
    run.output(a.out)


def cmd_neg_sample(a, run: Run):
    from .benchmarks import make_negatives
    from .predictor import TemplatePredictor
    from .reaction import read_reactions, write_reactions

    pool = read_reactions(run.input(a.data))
    negs = make_negatives(pool, TemplatePredictor(), seed=a.seed, rounds=a.rounds)
    run.metrics["negatives"] = write_reactions(a.out, negs)
    run.output(a.out)


def cmd_build_network(a, run: Run):
    from .network import build_network
    from .reaction import read_reactions

    net = build_network(read_reactions(run.input(a.data)))
    net.save(a.nodes_out, a.edges_out)
    run.metrics.update(nodes=len(net.nodes), edges=len(net.edges))
    run.output(a.nodes_out)
    run.output(a.edges_out)


def cmd_sample_paths(a, run: Run):
    from .network import ReactionNetwork, make_pairs, sample_paths, write_jsonl

    net = ReactionNetwork.load(run.input(a.nodes), run.input(a.edges))
    paths = sample_paths(net, a.count, qed_min=a.qed_min, depth_range=_depth_range(a.depth), seed=a.seed)
    run.metrics["paths"] = write_jsonl(a.out, paths)
    if a.pairs_out:
        run.metrics["pairs"] = write_jsonl(a.pairs_out, make_pairs(paths))
        run.output(a.pairs_out)
    run.output(a.out)


GEN_FLAGS = ("epochs", "lr", "batch_size", "latent_dim", "z_dim", "ref_channels", "hidden", "n_max", "delta", "max_path_len")


def cmd_train_gen(a, run: Run):
    from .generator import Embedder, GenConfig, infer_n_max, save_generator, train_cvae
    from .network import read_pairs
    from .pretrain import load_encoder
    from .utils import deterministic_requested

    cfg = dict(run.config)
    for k in GEN_FLAGS + ("seed",):
        if getattr(a, k, None) is not None:
            cfg[k] = getattr(a, k)
    pairs = read_pairs(run.input(a.pairs))
    cfg.setdefault("n_max", max(infer_n_max(pairs), 1))
    cfg["deterministic"] = bool(cfg.get("deterministic")) or deterministic_requested()
    gc = GenConfig.from_dict(cfg)
    run.config, run.seed = cfg, gc.seed
    emb = Embedder(load_encoder(run.input(a.ckpt)))
    res = train_cvae(pairs, emb, gc)
    save_generator(a.out, res.model, {"history": res.history})
    run.metrics["final"] = res.history[-1]
    run.output(a.out)


def _library(path) -> List[tuple]:
    with open(path) as fh:
        rows = [json.loads(l) for l in fh if l.strip()]
    return [(r["smiles"], r["role"]) for r in rows]


def cmd_build_index(a, run: Run):
    from .generator import Embedder, build_index
    from .pretrain import load_encoder

    emb = Embedder(load_encoder(run.input(a.ckpt)))
    idx = build_index(_library(run.input(a.library)), emb)
    idx.save(a.out)
    run.metrics["entries"] = len(idx)
    run.output(a.out)


def _gen_stack(a, run: Run):
    from .generator import Embedder, RetrievalIndex, load_generator
    from .predictor import TemplatePredictor
    from .pretrain import load_encoder
    from .utils import deterministic_requested, seed_everything

    seed_everything(a.seed, deterministic_requested())
    emb = Embedder(load_encoder(run.input(a.ckpt)))
    model, _ = load_generator(run.input(a.gen))
    index = RetrievalIndex.load(run.input(a.index))
    return emb, model, index, TemplatePredictor()


def cmd_generate(a, run: Run):
    from .generator import sample_path

    emb, model, index, pred = _gen_stack(a, run)
    rows = []
    for j, s in enumerate(a.seed_smiles):
        for i in range(a.n):
            p = sample_path(s, model, emb, index, pred, rng_seed=a.seed * 1_000_003 + j * 1009 + i, max_path_len=a.max_len)
            rows.append({"sample": i, **p.to_dict()})
    run.metrics["paths"] = len(rows)
    _write_jsonl(a.out, rows)
    run.output(a.out)


def cmd_de_novo(a, run: Run):
    from .generator import MWHead, de_novo_generate, fit_mw_head
    from .network import read_paths
    from .toydata import fragments

    emb, model, index, pred = _gen_stack(a, run)
    if a.mw_head:
        head = MWHead.from_dict(json.loads(Path(run.input(a.mw_head)).read_text()))
    else:
        head = fit_mw_head(read_paths(run.input(a.paths)), emb)
    frags = [l.strip() for l in open(run.input(a.fragments)) if l.strip()] if a.fragments else fragments()
    paths = de_novo_generate(frags, head, model, emb, index, pred, n=a.n, seed=a.seed, max_path_len=a.max_len)
    run.metrics["paths"] = len(paths)
    _write_jsonl(a.out, [p.to_dict() for p in paths])
    run.output(a.out)


def cmd_eval(a, run: Run):
    from .metrics import generation_report

    per_seed: Dict[str, List[str]] = {}
    with open(run.input(a.generated)) as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            final = d["steps"][-1]["product"] if d["steps"] else d["seed"]
            per_seed.setdefault(d["seed"], []).append(final)
    train = [l.split()[0] for l in open(run.input(a.train)) if l.strip()] if a.train else ()
    report = generation_report(per_seed, train)
    report.pop("properties", None)
    run.metrics.update({k: v for k, v in report.items() if k != "formulas"})
    _write_json(a.out, report)
    run.output(a.out)


def cmd_yield_knn(a, run: Run):
    from .metrics import knn_yield
    from .pretrain import load_encoder
    from .reaction import read_reactions

    enc = load_encoder(run.input(a.ckpt))
    store = [r for r in read_reactions(run.input(a.store)) if r.yield_pct is not None]
    queries = read_reactions(run.input(a.query))
    E = enc.represent(store)
    Q = enc.represent(queries)
    L = np.array([r.yield_pct for r in store])
    rows = [{"reaction": r.to_smiles(), "yield": knn_yield(q, E, L, a.k)} for r, q in zip(queries, Q)]
    run.metrics["queries"] = len(rows)
    _write_jsonl(a.out, rows)
    run.output(a.out)


# --- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rxnpath", description="Reaction representation learning and path-based generation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True, metavar="<command>")

    def add(name, fn, help_, seed=True):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--config", help="YAML/JSON key-value file; flags win")
        sp.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = add("prep", cmd_prep, "raw reaction SMILES -> JSONL", seed=False)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--lenient", action="store_true")

    sp = add("toy-data", cmd_toy_data, "write a synthetic template-reaction corpus")
    sp.add_argument("--kind", choices=("pretrain", "classify", "chains"), default="pretrain")
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--out", required=True)
    sp.add_argument("--library-out")

    sp = add("pretrain", cmd_pretrain, "contrastive pretraining")
    sp.set_defaults(seed=None)
    sp.add_argument("--data", required=True)
    sp.add_argument("--val-data")
    sp.add_argument("--out", required=True)
    for flag, typ in (("--epochs", int), ("--lr", float), ("--batch-size", int), ("--patience", int), ("--tau", float), ("--lam", float), ("--model-dim", int), ("--n-layers", int), ("--n-heads", int)):
        sp.add_argument(flag, type=typ)

    sp = add("embed", cmd_embed, "export reaction embeddings", seed=False)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--mode", choices=("reaction", "signals"), default="reaction")
    sp.add_argument("--with-product", action="store_true", help="do not mask the product block")
    sp.add_argument("--drop-masked", action="store_true")

    sp = add("export-attention", cmd_export_attention, "dump hypergraph attention maps", seed=False)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--reaction", required=True)
    sp.add_argument("--out", required=True)

    sp = add("classify", cmd_classify, "few-shot logistic-regression classification")
    sp.add_argument("--reps", required=True)
    sp.add_argument("--labels", required=True, help="reaction JSONL carrying class labels, row-aligned with --reps")
    sp.add_argument("--n-per-class", default="4,8,16,32,64,128")
    sp.add_argument("--repeats", type=int, default=10)
    sp.add_argument("--out")
    sp.add_argument("--csv")

    sp = add("retrieve-bench", cmd_retrieve_bench, "EF/AUROC retrieval benchmark")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--pos", required=True)
    sp.add_argument("--neg", required=True)
    sp.add_argument("--pos-ratio", default="0.01..0.08")
    sp.add_argument("--total", type=int)
    sp.add_argument("--out")
    sp.add_argument("--csv")

    sp = add("neg-sample", cmd_neg_sample, "perturbation negatives")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--rounds", type=int, default=1)

    sp = add("build-network", cmd_build_network, "reaction network from JSONL", seed=False)
    sp.add_argument("--data", required=True)
    sp.add_argument("--nodes-out", required=True)
    sp.add_argument("--edges-out", required=True)

    sp = add("sample-paths", cmd_sample_paths, "random-walk path sampling")
    sp.add_argument("--nodes", required=True)
    sp.add_argument("--edges", required=True)
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--depth", default="1:3")
    sp.add_argument("--qed-min", type=float, default=0.5)
    sp.add_argument("--out", required=True)
    sp.add_argument("--pairs-out")

    sp = add("train-gen", cmd_train_gen, "train the path CVAE")
    sp.set_defaults(seed=None)
    sp.add_argument("--ckpt", required=True, help="frozen encoder checkpoint")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--out", required=True)
    for k in GEN_FLAGS:
        sp.add_argument("--" + k.replace("_", "-"), type=float if k in ("lr", "delta") else int)

    sp = add("build-index", cmd_build_index, "embed a building-block library", seed=False)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--library", required=True)
    sp.add_argument("--out", required=True)

    for name, fn in (("generate", cmd_generate), ("de-novo", cmd_de_novo)):
        sp = add(name, fn, "sample reaction paths" if name == "generate" else "grow from fragments to a predicted MW")
        sp.add_argument("--ckpt", required=True)
        sp.add_argument("--gen", required=True)
        sp.add_argument("--index", required=True)
        sp.add_argument("--n", type=int, default=8)
        sp.add_argument("--max-len", type=int)
        sp.add_argument("--out")
        if name == "generate":
            sp.add_argument("--seed-smiles", nargs="+", required=True)
        else:
            sp.add_argument("--paths", help="training paths used to fit the MW head")
            sp.add_argument("--mw-head", help="JSON MW head instead of --paths")
            sp.add_argument("--fragments", help="one SMILES per line; default: toy seed fragments")

    sp = add("eval", cmd_eval, "metrics over generated paths", seed=False)
    sp.add_argument("--generated", required=True)
    sp.add_argument("--train", help="training molecules, one SMILES per line")
    sp.add_argument("--out")

    sp = add("yield-knn", cmd_yield_knn, "K-nearest-neighbour yield estimate", seed=False)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--query", required=True)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--out")

    sp = sub.add_parser("replay", help="re-run a command from its manifest")
    sp.add_argument("manifest")
    sp.set_defaults(func=None)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str], cfg: dict) -> argparse.Namespace:
    """Config values become defaults of matching flags; explicit flags still win."""
    ns = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[ns.command]  # noqa: SLF001
    dests = {a.dest for a in sub._actions}  # noqa: SLF001
    flat = {k.replace("-", "_"): v for k, v in cfg.items() if k.replace("-", "_") in dests}
    if flat:
        sub.set_defaults(**flat)
        ns = parser.parse_args(argv)
    return ns


def _manifest_path(a) -> Optional[str]:
    if a.manifest:
        return a.manifest
    out = getattr(a, "out", None)
    return f"{out}.manifest.json" if out else None


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(a.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    if a.command == "replay":
        m = json.loads(Path(a.manifest).read_text())
        return main(m["argv"])
    try:
        cfg = load_config(a.config)
        if cfg:
            a = _apply_config(parser, argv, cfg)
        run = Run(a.command, argv, cfg, getattr(a, "seed", None))
        a.func(a, run)
    except (RxnError, OSError, ValueError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("field", "index", "line_number"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        sys.stderr.write(json.dumps(err) + "\n")
        return 1
    mpath = _manifest_path(a)
    if mpath:
        Path(mpath).write_text(json.dumps(run.manifest(), indent=2, sort_keys=True, default=float) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
