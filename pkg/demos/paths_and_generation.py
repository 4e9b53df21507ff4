"""Toy walk-through of path-based generation.

    python3 demos/paths_and_generation.py --encoder enc.ckpt

Grows template chains over a 1000-entity library, builds the reaction
network, samples training paths, trains the path generator on a frozen
encoder and samples new paths from held-out seeds.
"""

import argparse
import json
import logging

import numpy as np

from rxnpath.generator import Embedder, GenConfig, build_index, ranking_score, sample_path, train_cvae
from rxnpath.metrics import generation_report
from rxnpath.network import build_network, make_pairs, sample_paths
from rxnpath.predictor import TemplatePredictor
from rxnpath.pretrain import load_encoder
from rxnpath.toydata import build_library, chain_reactions, grow_chains


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--encoder", required=True, help="checkpoint from pretrain_and_benchmark.py --out")
    ap.add_argument("--epochs", type=int, default=120)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    lib = build_library()
    net = build_network(chain_reactions(grow_chains(300, seed=0, library=lib)))
    paths = sample_paths(net, 600, seed=0)
    print(f"network: {len(net.nodes)} nodes, {len(net.edges)} edges; {len(paths)} paths, depths {np.bincount([p.depth for p in paths])[1:].tolist()}")

    perm = np.random.default_rng(1).permutation(len(paths))
    test = [paths[i] for i in perm[: len(paths) // 5]]
    train = [paths[i] for i in perm[len(paths) // 5 :]]
    emb = Embedder(load_encoder(args.encoder))
    pairs = make_pairs(train)
    cfg = GenConfig(latent_dim=128, z_dim=32, ref_channels=64, hidden=128, n_max=max(len(p.target) for p in pairs), lr=3e-4, epochs=args.epochs)
    model = train_cvae(pairs, emb, cfg).model
    library = [(e.smiles, e.role) for e in lib]
    print(f"held-out ranking score: {ranking_score(model, make_pairs(test), emb, library):.3f} (random 0.5)")

    index = build_index(library, emb)
    pred = TemplatePredictor()
    per_seed = {}
    for i, seed in enumerate(sorted({p.structures[0] for p in test})[: args.seeds]):
        outs = [sample_path(seed, model, emb, index, pred, rng_seed=8 * i + j) for j in range(8)]
        per_seed[seed] = [p.final for p in outs]
        best = max(outs, key=lambda p: p.depth)
        print(json.dumps(best.to_dict()))
    rep = generation_report(per_seed)
    rep.pop("properties", None)
    print(json.dumps({k: v for k, v in rep.items() if k != "formulas"}, indent=2))


if __name__ == "__main__":
    main()
