"""Toy walk-through: pretrain an encoder on template reactions, then score it.

    python3 demos/pretrain_and_benchmark.py [--epochs 80] [--out enc.ckpt]

Prints held-out pairing accuracy, reactive-centre AUROC, a retrieval table
over positive ratios and a few-shot accuracy table.
"""

import argparse
import logging

import numpy as np

from rxnpath.benchmarks import auroc, fewshot_classify, make_negatives, retrieval_benchmark, retrieval_score
from rxnpath.encoder import EncoderConfig, TokenVocab
from rxnpath.predictor import TemplatePredictor
from rxnpath.pretrain import PretrainConfig, center_predictions, pairing_accuracy, pretrain, save_encoder
from rxnpath.toydata import classification_reactions, pretraining_reactions


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--epochs", type=int, default=80)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    rx = pretraining_reactions(200, seed=0)
    perm = np.random.default_rng(0).permutation(len(rx))
    train, held = [rx[i] for i in perm[:160]], [rx[i] for i in perm[160:]]
    cfg = PretrainConfig(
        encoder=EncoderConfig(model_dim=64, head_hidden=64, proj_dim=64, n_layers=2, max_tokens=64),
        lr=1e-3, epochs=args.epochs, batch_size=16, patience=20,
    )
    enc = pretrain(train, cfg, val_reactions=held, vocab=TokenVocab.build()).model
    if args.out:
        save_encoder(args.out, enc)

    sig = enc.signals(held)
    logits, labels = center_predictions(enc, held)
    print(f"held-out main<->env pairing accuracy: {pairing_accuracy(sig['c_main'], sig['c_env']):.3f}")
    print(f"held-out reactive-centre AUROC:       {auroc(logits, labels.astype(bool)):.3f}")

    negs = make_negatives(rx, TemplatePredictor(), seed=0, rounds=20)
    pos, neg = retrieval_score(enc, rx), retrieval_score(enc, negs)
    print(f"\nretrieval ({len(rx)} positives, {len(negs)} negatives, T=1000)")
    print("ratio   EF_0.01  EF_0.05  AUROC")
    for ratio in (0.01, 0.02, 0.04, 0.06, 0.08):
        r = retrieval_benchmark(pos, neg, ratio, seed=0, total=1000)
        print(f"{ratio:<7} {r['ef_0.01']:8.2f} {r['ef_0.05']:8.2f} {r['auroc']:6.3f}")

    crx = classification_reactions(40, seed=1)
    reps = enc.represent(crx)
    print("\nfew-shot classification (10 repeats)")
    for n in (4, 8, 16, 32):
        res = fewshot_classify(reps, [r.class_label for r in crx], n, repeats=10)
        print(f"N={n:<3} {res.mean:.3f} ± {res.std:.3f}")


if __name__ == "__main__":
    main()
