"""Independent brute-force reference implementations used as test oracles."""

import itertools
import math
from collections import Counter

from rdkit import Chem, DataStructs
from rdkit.Chem import AllChem
from rdkit.Chem.Scaffolds import MurckoScaffold


def brute_ef(scores, labels, alpha):
    T = len(scores)
    k = math.ceil(alpha * T - 1e-9)
    order = sorted(range(T), key=lambda i: (-scores[i], i))
    return sum(labels[i] for i in order[:k]) / (sum(labels) * alpha)


def brute_auroc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    tot = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return tot / (len(pos) * len(neg))


def fp(s):
    return AllChem.GetMorganFingerprintAsBitVect(Chem.MolFromSmiles(s), 2, nBits=2048)


def brute_div(mols):
    fps = [fp(m) for m in mols]
    d = [1 - DataStructs.TanimotoSimilarity(a, b) for a, b in itertools.combinations(fps, 2)]
    return sum(d) / len(d)


def brute_entropy(mols):
    scafs = Counter(MurckoScaffold.MurckoScaffoldSmiles(mol=Chem.MolFromSmiles(m)) for m in mols)
    n = len(mols)
    return -sum(c / n * math.log(c / n) for c in scafs.values())


def brute_knn(q, E, L, k):
    d = [math.sqrt(sum((a - b) ** 2 for a, b in zip(q, e))) for e in E]
    nn = sorted(range(len(E)), key=lambda i: (d[i], i))[:k]
    w = [1 / max(d[i], 1e-9) for i in nn]
    return sum(wi * L[i] for wi, i in zip(w, nn)) / sum(w)


def brute_moses(gen, train):
    can = [Chem.MolToSmiles(m) for m in (Chem.MolFromSmiles(s) for s in gen) if m is not None]
    uniq = sorted(set(can))
    tr = {Chem.MolToSmiles(Chem.MolFromSmiles(s)) for s in train}
    scaf = [MurckoScaffold.MurckoScaffoldSmiles(smiles=s) for s in uniq]
    sfps = [fp(s) if s else None for s in scaf]

    def sim(a, b):
        if a is None and b is None:
            return 1.0
        if a is None or b is None:
            return 0.0
        return DataStructs.TanimotoSimilarity(a, b)

    pairs = list(itertools.combinations(range(len(uniq)), 2))
    return {
        "validity": len(can) / len(gen),
        "uniqueness": len(uniq) / len(can),
        "novelty": sum(s not in tr for s in uniq) / len(uniq),
        "int_div": brute_div(uniq) if len(uniq) > 1 else 0.0,
        "scaffold_int_div": sum(1 - sim(sfps[i], sfps[j]) for i, j in pairs) / len(pairs) if pairs else 0.0,
    }
