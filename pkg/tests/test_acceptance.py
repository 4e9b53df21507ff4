"""Acceptance suite: nine standalone criteria, one PASS/FAIL line each.

The trained fixtures are session scoped so criteria 4, 5, 7 and 8 share one
pretraining run and one generator run.
"""

import math
import time

import numpy as np
import pytest
import torch

from conftest import ACCEPTANCE_LINES
from oracles import brute_auroc, brute_div, brute_ef, brute_entropy, brute_knn, brute_moses
from rxnpath.benchmarks import auroc, cen, enrichment_factor, fewshot_classify, make_negatives, retrieval_benchmark, retrieval_score
from rxnpath.chem import get_backend, parse_molecule
from rxnpath.encoder import EncoderConfig, ReactionEncoder, TokenVocab, build_batch
from rxnpath.featurize import UNREACHABLE, featurize
from rxnpath.generator import Embedder, GenConfig, PathCVAE, build_index, ranking_score, sample_path, set_generate, train_cvae
from rxnpath.metrics import diversity, knn_yield, moses_lite, scaffold_entropy
from rxnpath.network import build_network, make_pairs, replays, sample_paths
from rxnpath.predictor import TemplatePredictor
from rxnpath.pretrain import PretrainConfig, center_loss, center_predictions, info_nce, pairing_accuracy, pretrain, pretrain_loss
from rxnpath.reaction import Reaction, parse_reaction
from rxnpath.toydata import build_library, chain_reactions, classification_reactions, grow_chains, pretraining_reactions


def report(n, ok, detail):
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# --- shared trained models ---------------------------------------------------------

TOY_ENCODER = EncoderConfig(model_dim=64, head_hidden=64, proj_dim=64, n_layers=2, max_tokens=64)


@pytest.fixture(scope="session")
def toy_pretrained():
    t0 = time.time()
    rx = pretraining_reactions(200, seed=0)
    perm = np.random.default_rng(0).permutation(len(rx))
    train = [rx[i] for i in perm[:160]]
    held = [rx[i] for i in perm[160:]]
    cfg = PretrainConfig(encoder=TOY_ENCODER, lr=1e-3, epochs=80, batch_size=16, patience=20, seed=0)
    res = pretrain(train, cfg, val_reactions=held, vocab=TokenVocab.build())
    return res.model, rx, train, held, time.time() - t0


@pytest.fixture(scope="session")
def gen_world(toy_pretrained):
    t0 = time.time()
    enc = toy_pretrained[0]
    lib = build_library()
    chains = grow_chains(300, seed=0, library=lib)
    net = build_network(chain_reactions(chains))
    paths = sample_paths(net, 600, seed=0)
    perm = np.random.default_rng(1).permutation(len(paths))
    n_test = len(paths) // 5
    test_paths = [paths[i] for i in perm[:n_test]]
    train_paths = [paths[i] for i in perm[n_test:]]
    train_pairs, test_pairs = make_pairs(train_paths), make_pairs(test_paths)
    emb = Embedder(enc)
    n_max = max(len(p.target) for p in train_pairs + test_pairs)
    cfg = GenConfig(latent_dim=128, z_dim=32, ref_channels=64, hidden=128, n_max=n_max, lr=3e-4, epochs=120, batch_size=32, seed=0)
    model = train_cvae(train_pairs, emb, cfg).model
    library = [(e.smiles, e.role) for e in lib]
    index = build_index(library, emb)
    return dict(lib=lib, library=library, net=net, paths=paths, test_paths=test_paths, train_pairs=train_pairs,
                test_pairs=test_pairs, emb=emb, model=model, index=index, seconds=time.time() - t0)


# --- 1 -------------------------------------------------------------------------------------


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-30))


def test_acceptance_1_invariances():
    t0 = time.time()
    torch.manual_seed(0)
    enc = ReactionEncoder(EncoderConfig(model_dim=32, head_hidden=32, proj_dim=32, n_layers=2, max_tokens=64), TokenVocab.build()).eval()
    rng = np.random.default_rng(0)
    base = pretraining_reactions(20, seed=7)
    extra_subs = [parse_molecule(s) for s in ("BrCC1CCCCC1", "OC(=O)c1ccco1", "NCc1ccncc1")]
    extra_reags = [parse_molecule(s) for s in ("ClCCl", "CCN(CC)CC", "CN(C)C=O", "C1CCOC1", "CO")]
    rxns = []
    for r in base:
        k = int(rng.integers(1, 3))
        subs = r.sub_reactants + tuple(extra_subs[i] for i in rng.choice(3, size=k, replace=False))
        reags = tuple({m.canonical_string: m for m in r.reagents + tuple(extra_reags[i] for i in rng.choice(5, size=2, replace=False))}.values())
        rxns.append(Reaction(r.main_reactant, subs, reags, r.product))
    worst, bitwise = 0.0, True
    for r in rxns:
        ref = enc.signals([r])
        ref["represent"] = enc.represent([r])
        for _ in range(3):
            ps = rng.permutation(len(r.sub_reactants))
            pg = rng.permutation(len(r.reagents))
            q = r.replace(sub_reactants=tuple(r.sub_reactants[i] for i in ps), reagents=tuple(r.reagents[i] for i in pg))
            got = enc.signals([q])
            got["represent"] = enc.represent([q])
            for k in ("c_env", "g_inputs", "represent"):
                worst = max(worst, _rel(ref[k], got[k]))
                bitwise &= bool(np.array_equal(ref[k], got[k]))
    # cross-molecule shortest-path codes
    cross, unreach = 0, 0
    for r in rxns:
        g = featurize(list(r.reactants) + list(r.reagents))
        real = g.molecule_id >= 0
        mask = (g.molecule_id[:, None] != g.molecule_id[None, :]) & real[:, None] & real[None, :]
        cross += int(mask.sum())
        unreach += int((g.sp[mask] == UNREACHABLE).sum())
    secs = time.time() - t0
    ok = worst < 1e-5 and unreach == cross and secs < 60
    report(1, ok, f"max rel dev {worst:.2e} (bitwise={bitwise}); cross-molecule UNREACHABLE {unreach}/{cross}; {secs:.1f}s")


# --- 2 -------------------------------------------------------------------------------------

SMALL_RXNS = (
    "[CH3:1][NH2:2].[CH3:3][I:4]>ClCCl>[CH3:1][NH:2][CH3:3]",
    "[CH3:1][C:2](=[O:3])[OH:4].[CH3:5][CH2:6][OH:7]>O>[CH3:1][C:2](=[O:3])[O:7][CH2:6][CH3:5]",
    "[CH3:1][C:2](=[O:3])[OH:4].[CH3:5][NH2:6]>CN(C)C=O>[CH3:1][C:2](=[O:3])[NH:6][CH3:5]",
)


def test_acceptance_2_gradient():
    t0 = time.time()
    rx = [parse_reaction(s) for s in SMALL_RXNS]
    assert all(sum(m.num_atoms for m in r.reactants) <= 8 for r in rx)
    torch.manual_seed(0)
    cfg = EncoderConfig(model_dim=16, head_hidden=16, proj_dim=16, n_layers=2, n_heads=2, max_tokens=32)
    model = ReactionEncoder(cfg, TokenVocab.build()).double()
    batch = build_batch(rx, model.vocab, with_labels=True)
    model.zero_grad()
    pretrain_loss(model, batch)["total"].backward()
    rng = np.random.default_rng(0)
    eps = 1e-4
    worst, name_worst, n_coords = 0.0, "", 0
    for name, p in model.named_parameters():
        if p.grad is None:
            continue
        flat, grad = p.data.view(-1), p.grad.view(-1)
        idx = rng.choice(flat.numel(), size=min(16, flat.numel()), replace=False)
        fd = []
        with torch.no_grad():
            for i in idx:
                old = flat[i].item()
                flat[i] = old + eps
                up = pretrain_loss(model, batch)["total"].item()
                flat[i] = old - eps
                down = pretrain_loss(model, batch)["total"].item()
                flat[i] = old
                fd.append((up - down) / (2 * eps))
        an = grad[torch.as_tensor(idx)].numpy()
        err = float(np.linalg.norm(np.array(fd) - an) / max(np.linalg.norm(an), 1e-30))
        n_coords += len(idx)
        if err > worst:
            worst, name_worst = err, name
    secs = time.time() - t0
    report(2, worst < 1e-4 and secs < 120, f"max per-tensor rel error {worst:.2e} ({name_worst}) over {n_coords} coords; {secs:.1f}s")


# --- 3 -------------------------------------------------------------------------------------


def test_acceptance_3_analytic_anchors():
    errs = {}
    for B in (2, 8, 32):
        x = torch.randn(1, 7, dtype=torch.float64).expand(B, 7)
        errs[f"infonce_B{B}"] = abs(info_nce(x, x).item() - 2 * math.log(B))
    lab = torch.tensor([0, 1, 1, 0, 1], dtype=torch.float64)
    errs["bce"] = abs(center_loss(torch.zeros(5, dtype=torch.float64), lab).item() - math.log(2))
    errs["cen_diag"] = abs(cen(np.diag([4, 7, 1, 9])))
    errs["cen_swap"] = abs(cen([[0, 5], [5, 0]]) - 1.0)
    ok = all(v < 1e-6 for k, v in errs.items() if k.startswith("infonce")) and errs["bce"] < 1e-9 and errs["cen_diag"] == 0 and errs["cen_swap"] < 1e-9
    report(3, ok, " ".join(f"{k}={v:.1e}" for k, v in errs.items()))


# --- 4 -------------------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_4_toy_pretraining(toy_pretrained):
    t0 = time.time()
    enc, rx, train, held, train_secs = toy_pretrained
    sig = enc.signals(held)
    acc = pairing_accuracy(sig["c_main"], sig["c_env"], batch_size=32)
    logits, labels = center_predictions(enc, held)
    c_auroc = auroc(logits, labels.astype(bool))
    negs = make_negatives(rx, TemplatePredictor(), seed=0, rounds=20)
    pos_s = retrieval_score(enc, rx)
    neg_s = retrieval_score(enc, negs)
    rep = retrieval_benchmark(pos_s, neg_s, 0.05, alphas=(0.01,), seed=0, total=1000)
    ef = rep["ef_0.01"]
    secs = train_secs + time.time() - t0
    ok = acc >= 0.8 and c_auroc >= 0.9 and ef >= 3.0 and secs < 900
    report(4, ok, f"pairing acc {acc:.3f}; centre AUROC {c_auroc:.3f}; EF_0.01 {ef:.2f} (random 1.0, {len(negs)} negatives, retrieval AUROC {rep['auroc']:.3f}); {secs:.0f}s")


# --- 5 -------------------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_5_fewshot(toy_pretrained):
    enc = toy_pretrained[0]
    rx = classification_reactions(40, seed=1)
    labels = [r.class_label for r in rx]
    reps = enc.represent(rx)
    res = {n: fewshot_classify(reps, labels, n, repeats=10, seed=0) for n in (4, 8, 16)}
    means = [res[n].mean for n in (4, 8, 16)]
    chance = 1 / len(set(labels))
    ok = means[0] <= means[1] <= means[2] and means[2] >= 2 * chance
    report(5, ok, " ".join(f"N={n}: {res[n].mean:.3f}±{res[n].std:.3f}" for n in res) + f" (chance {chance:.2f}, 10 repeats, sample std)")


# --- 6 -------------------------------------------------------------------------------------


def test_acceptance_6_metric_oracles():
    rng = np.random.default_rng(0)
    pool = sorted({e.smiles for e in build_library()})
    worst = {}
    for trial in range(5):
        n = int(rng.integers(20, 201))
        scores = rng.integers(0, 20, n).astype(float)
        labels = rng.random(n) < 0.2
        labels[0], labels[1] = True, False
        for a in (0.01, 0.05, 0.1):
            worst["ef"] = max(worst.get("ef", 0), abs(enrichment_factor(scores, labels, a) - brute_ef(scores, labels, a)))
        worst["auroc"] = max(worst.get("auroc", 0), abs(auroc(scores, labels) - brute_auroc(scores, labels)))
        mols = [pool[i] for i in rng.choice(len(pool), size=int(rng.integers(2, 120)))]
        worst["diversity"] = max(worst.get("diversity", 0), abs(diversity(mols) - brute_div(mols)))
        worst["scaffold_entropy"] = max(worst.get("scaffold_entropy", 0), abs(scaffold_entropy(mols) - brute_entropy(mols)))
        E, L = rng.normal(size=(n, 6)), rng.uniform(0, 100, n)
        q = rng.normal(size=6)
        k = int(rng.integers(1, 11))
        worst["knn_yield"] = max(worst.get("knn_yield", 0), abs(knn_yield(q, E, L, k) - brute_knn(q, E, L, k)))
        train = [pool[i] for i in rng.choice(len(pool), size=50)]
        got, want = moses_lite(mols, train), brute_moses(mols, train)
        worst["moses_lite"] = max(worst.get("moses_lite", 0), max(abs(got[k] - want[k]) for k in want))
    E, L = rng.normal(size=(50, 4)), rng.uniform(0, 100, 50)
    k1_exact = all(knn_yield(E[i] + 1e-3, E, L, 1) == L[i] for i in range(50))
    ok = all(v < 1e-9 for v in worst.values()) and k1_exact
    report(6, ok, " ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f" K=1 exact={k1_exact}")


# --- 7 -------------------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_7_set_generator_and_cvae(gen_world):
    torch.manual_seed(0)
    cfg = GenConfig(latent_dim=32, z_dim=16, ref_channels=32, hidden=32, n_max=4)
    m = PathCVAE(24, cfg).eval()
    g = torch.Generator().manual_seed(0)
    z = torch.randn(1000, 16, generator=g) * 3
    ctx = torch.randn(1000, 32, generator=g)
    with torch.no_grad():
        Y, probs, sel = set_generate(m, z, ctx)
    n = sel.sum(1)
    sizes_ok = bool(((n >= 0) & (n <= cfg.n_max)).all())
    delta_ok = bool(torch.equal(sel, probs > cfg.delta))
    w = gen_world
    score = ranking_score(w["model"], w["test_pairs"], w["emb"], w["library"], n_distractors=63, seed=0)
    ok = sizes_ok and delta_ok and score < 0.3 and w["seconds"] < 900
    report(7, ok, f"n in [0,{cfg.n_max}] on 1000 z: {sizes_ok}; delta semantics: {delta_ok}; held-out ranking score {score:.3f} "
           f"(random 0.5) on {len(w['test_pairs'])} pairs; {w['seconds']:.0f}s")


# --- 8 -------------------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_8_generation_replay(gen_world):
    t0 = time.time()
    w = gen_world
    pred = TemplatePredictor()
    backend = get_backend()
    seeds = sorted({p.structures[0] for p in w["test_paths"]})[:40]
    max_len = 3
    n_paths = n_steps = replay_ok = valid = depth_ok = 0
    reasons = {}
    for i, s in enumerate(seeds):
        for j in range(2):
            p = sample_path(s, w["model"], w["emb"], w["index"], pred, rng_seed=1000 * i + j, max_path_len=max_len)
            n_paths += 1
            reasons[p.terminal_reason] = reasons.get(p.terminal_reason, 0) + 1
            good = all(pred.predict(p.structures[k], st) == p.structures[k + 1] for k, st in enumerate(p.steps))
            n_steps += p.depth
            replay_ok += good
            valid += all(backend.is_valid(x) for x in p.structures)
            depth_ok += p.depth <= max_len
    secs = time.time() - t0
    ok = replay_ok == valid == depth_ok == n_paths and len(w["index"]) == 1000 and secs < 600
    report(8, ok, f"{n_paths} paths / {n_steps} steps: replay {replay_ok}/{n_paths}, valid {valid}/{n_paths}, depth<={max_len} {depth_ok}/{n_paths}; "
           f"stops {dict(sorted(reasons.items()))}; {secs:.0f}s")


# --- 9 -------------------------------------------------------------------------------------


@pytest.mark.slow
def test_acceptance_9_network(gen_world):
    w = gen_world
    qed = get_backend().qed
    paths = w["paths"]
    rep = sum(replays(w["net"], p) for p in paths)
    starts = sum(qed(p.structures[-1]) > 0.5 for p in paths)
    depths = sum(1 <= p.depth <= 3 for p in paths)
    hist = np.bincount([p.depth for p in paths], minlength=4)[1:].tolist()
    ok = rep == starts == depths == len(paths) > 0
    report(9, ok, f"{len(paths)} paths: replay {rep}, start QED>0.5 {starts}, depth in [1,3] {depths}; depth histogram {hist}")
