"""Metrics for generated molecule sets."""

from __future__ import annotations

import itertools
import math
import subprocess
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .chem import get_backend
from .errors import ContractError, ParseError, UndefinedMetricError

KNN_EPS = 1e-9


@dataclass(frozen=True)
class PropertyVector:
    mol_weight: float
    n_rotatable_bonds: int
    qed: float
    logp: float


def properties(smiles: str) -> PropertyVector:
    b = get_backend()
    return PropertyVector(b.mol_weight(smiles), b.rotatable_bonds(smiles), b.qed(smiles), b.logp(smiles))


def tanimoto(a: FrozenSet[int], b: FrozenSet[int]) -> float:
    union = len(a | b)
    if union == 0:
        return 1.0  # two empty fingerprints are identical
    return len(a & b) / union


def chemical_distance(gen: str, seed: str) -> float:
    b = get_backend()
    return 1.0 - tanimoto(b.ecfp4(gen), b.ecfp4(seed))


def mean_chemical_distance(pairs: Iterable[Tuple[str, str]]) -> Tuple[float, int]:
    """Mean distance over (generated, seed) pairs; unparsable pairs are skipped and counted."""
    vals, skipped = [], 0
    for g, s in pairs:
        try:
            vals.append(chemical_distance(g, s))
        except ParseError:
            skipped += 1
    return (float(np.mean(vals)) if vals else float("nan")), skipped


def _fps(mols: Sequence[str]) -> List[FrozenSet[int]]:
    b = get_backend()
    return [b.ecfp4(m) for m in mols]


def _mean_pair_distance(fps: Sequence[FrozenSet[int]]) -> float:
    n = len(fps)
    if n < 2:
        raise UndefinedMetricError("diversity needs at least two molecules")
    total = sum(1.0 - tanimoto(fps[i], fps[j]) for i, j in itertools.combinations(range(n), 2))
    return 2.0 * total / (n * (n - 1))


def diversity(mols: Sequence[str]) -> float:
    """Mean pairwise ECFP4 Tanimoto distance over unordered pairs."""
    return _mean_pair_distance(_fps(mols))


def scaffold_entropy(mols: Sequence[str]) -> float:
    """Natural-log entropy of the Bemis-Murcko scaffold distribution (acyclic molecules share the empty scaffold)."""
    if not mols:
        raise UndefinedMetricError("scaffold entropy of an empty set")
    b = get_backend()
    counts = Counter(b.scaffold(m) for m in mols)
    n = len(mols)
    return float(-sum((c / n) * math.log(c / n) for c in counts.values()))


def validity(seeds: Sequence[str], generate: Callable[[str], Sequence]) -> float:
    """Percentage of seeds with at least one valid analogue.

    ``generate(seed)`` returns products, either as SMILES (reactants taken to
    be the seed) or as (product, reactants) tuples.  A product is invalid when
    it does not parse or equals one of its reactants.
    """
    if not seeds:
        raise UndefinedMetricError("validity of an empty seed set")
    b = get_backend()
    ok = 0
    for seed in seeds:
        for out in generate(seed):
            prod, reactants = (out, [seed]) if isinstance(out, str) else (out[0], list(out[1]))
            if not prod or not b.is_valid(prod):
                continue
            canon = b.canonical(prod)
            if any(b.is_valid(r) and b.canonical(r) == canon for r in reactants):
                continue
            ok += 1
            break
    return 100.0 * ok / len(seeds)


def median_bandwidth(x: np.ndarray, y: np.ndarray) -> float:
    z = np.concatenate([x, y]).reshape(len(x) + len(y), -1)
    d = pdist(z)
    med = float(np.median(d)) if len(d) else 0.0
    return med if med > 0 else 1.0


def _mmd2_1d(x: np.ndarray, y: np.ndarray, bandwidth: Optional[float]) -> float:
    x = x.reshape(len(x), -1)
    y = y.reshape(len(y), -1)
    h = bandwidth or median_bandwidth(x, y)
    g = 1.0 / (2 * h * h)
    kxx = np.exp(-g * cdist(x, x, "sqeuclidean"))
    kyy = np.exp(-g * cdist(y, y, "sqeuclidean"))
    kxy = np.exp(-g * cdist(x, y, "sqeuclidean"))
    n, m = len(x), len(y)
    if n == m and n > 1:
        # paired U-statistic: exact zero for identical samples
        hmat = kxx + kyy - kxy - kxy.T
        return float((hmat.sum() - np.trace(hmat)) / (n * (n - 1)))
    if n < 2 or m < 2:
        raise UndefinedMetricError("unbiased MMD needs at least two points per sample")
    return float(
        (kxx.sum() - np.trace(kxx)) / (n * (n - 1)) + (kyy.sum() - np.trace(kyy)) / (m * (m - 1)) - 2 * kxy.mean()
    )


def mmd(sample_a, sample_b, bandwidth: Optional[float] = None) -> Union[float, np.ndarray]:
    """Unbiased Gaussian-kernel MMD^2 with a median-heuristic bandwidth.

    2-D inputs are treated column by column (one value per property).
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise UndefinedMetricError("MMD of an empty sample")
    if a.ndim == 1:
        return _mmd2_1d(a, b, bandwidth)
    if a.shape[1] != b.shape[1]:
        raise ContractError("samples carry different property counts")
    return np.array([_mmd2_1d(a[:, j], b[:, j], bandwidth) for j in range(a.shape[1])])


def knn_yield(query, store_embeddings, store_yields, k: int, return_weights: bool = False):
    """Inverse-distance-weighted mean yield of the K nearest stored reactions.

    Zero distances are replaced by 1e-9 so an exact duplicate dominates.
    """
    E = np.asarray(store_embeddings, dtype=float)
    L = np.asarray(store_yields, dtype=float)
    if k < 1 or k > len(E):
        raise ContractError(f"K={k} outside [1, {len(E)}]")
    d = np.linalg.norm(E - np.asarray(query, dtype=float)[None], axis=1)
    nn = np.lexsort((np.arange(len(d)), d))[:k]
    inv = 1.0 / np.maximum(d[nn], KNN_EPS)
    w = inv / inv.sum()
    y = float((w * L[nn]).sum()) if k > 1 else float(L[nn[0]])
    if return_weights:
        return y, nn, w
    return y


def moses_lite(gen: Sequence[str], train_set: Sequence[str]) -> Dict[str, float]:
    """Validity, uniqueness, novelty and internal diversities of a generated list."""
    if not gen:
        raise UndefinedMetricError("moses_lite of an empty list")
    b = get_backend()
    valid = [b.canonical(s) for s in gen if s and b.is_valid(s)]
    uniq = sorted(set(valid))
    train = {b.canonical(s) for s in train_set if s and b.is_valid(s)}
    out = {
        "validity": len(valid) / len(gen),
        "uniqueness": len(uniq) / len(valid) if valid else 0.0,
        "novelty": sum(s not in train for s in uniq) / len(uniq) if uniq else 0.0,
    }
    out["int_div"] = diversity(uniq) if len(uniq) >= 2 else 0.0
    scaffolds = [b.scaffold(s) for s in uniq]
    scaf_fps = [b.ecfp4(s) if s else frozenset() for s in scaffolds]
    out["scaffold_int_div"] = _mean_pair_distance(scaf_fps) if len(uniq) >= 2 else 0.0
    return out


def most_similar(seed: str, candidates: Sequence[str], first: int = 8) -> Optional[str]:
    """Closest candidate to ``seed`` among the first ``first`` sampled ones; echoes of the seed are skipped."""
    b = get_backend()
    seed_key = b.canonical(seed) if b.is_valid(seed) else seed
    pool = [c for c in candidates[:first] if c and b.is_valid(c) and b.canonical(c) != seed_key]
    if not pool:
        return None
    return min(pool, key=lambda c: (chemical_distance(c, seed), c))


class ExternalScorer:
    """Score molecules with an external command: SMILES lines on stdin, one float per line on stdout."""

    def __init__(self, command: Sequence[str], name: str = "external"):
        self.command = list(command)
        self.name = name

    def __call__(self, smiles: Sequence[str]) -> np.ndarray:
        res = subprocess.run(self.command, input="\n".join(smiles) + "\n", capture_output=True, text=True, check=True)
        vals = [float(x) for x in res.stdout.split()]
        if len(vals) != len(smiles):
            raise ContractError(f"{self.name} returned {len(vals)} scores for {len(smiles)} molecules")
        return np.asarray(vals)


FORMULAS = {
    "chemical_distance": "1 - Tanimoto(ECFP4 r=2, 2048 bits)",
    "diversity": "mean pairwise ECFP4 Tanimoto distance",
    "scaffold_entropy": "natural-log entropy over Bemis-Murcko scaffolds",
    "validity": "seeds with >=1 parsable non-echo product, percent",
    "mmd": "Gaussian kernel, median bandwidth, unbiased (paired U-statistic when n == m)",
}


def generation_report(seed_to_products: Dict[str, Sequence[str]], train_set: Sequence[str] = ()) -> dict:
    """Table-style summary over generated analogues; per-seed best-of-first-8 selection for distances.

    Products that echo their seed (empty paths) count as invalid everywhere.
    """
    generated = [p for ps in seed_to_products.values() for p in ps]
    b = get_backend()
    valid = []
    for s, ps in seed_to_products.items():
        seed_key = b.canonical(s) if b.is_valid(s) else s
        valid.extend(p for p in ps if p and b.is_valid(p) and b.canonical(p) != seed_key)
    picked = {s: most_similar(s, ps) for s, ps in seed_to_products.items()}
    dist, skipped = mean_chemical_distance((p, s) for s, p in picked.items() if p is not None)
    report = {
        "n_seeds": len(seed_to_products),
        "n_generated": len(generated),
        "validity_pct": validity(list(seed_to_products), lambda s: list(seed_to_products[s])) if seed_to_products else float("nan"),
        "chemical_distance": dist,
        "distance_skipped": skipped,
        "diversity": diversity(valid) if len(valid) >= 2 else float("nan"),
        "scaffold_entropy": scaffold_entropy(valid) if valid else float("nan"),
        "formulas": FORMULAS,
    }
    if valid:
        report["properties"] = {k: [asdict(properties(v))[k] for v in valid] for k in ("mol_weight", "n_rotatable_bonds", "qed", "logp")}
        seeds = [s for s in seed_to_products if b.is_valid(s)]
        if len(seeds) >= 2 and len(valid) >= 2:
            P = np.array([[getattr(properties(v), k) for k in ("mol_weight", "n_rotatable_bonds", "qed", "logp")] for v in valid], float)
            S = np.array([[getattr(properties(v), k) for k in ("mol_weight", "n_rotatable_bonds", "qed", "logp")] for v in seeds], float)
            report["mmd"] = dict(zip(("mol_weight", "n_rotatable_bonds", "qed", "logp"), mmd(P, S).tolist()))
    if train_set and generated:
        report["moses"] = moses_lite(generated, train_set)
    return report
