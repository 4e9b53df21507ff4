"""Downstream harnesses: negative reactions, retrieval (EF / AUROC), few-shot classification, CEN."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import confusion_matrix

from .chem import parse_molecule
from .errors import ContractError, PredictFailure, SamplingError, UndefinedMetricError
from .predictor import REAGENT, SUB_REACTANT, ForwardPredictor, Response
from .reaction import Reaction, environment_multiset

logger = logging.getLogger(__name__)

OPERATIONS = ("add", "delete", "switch")


# --- negative reactions ------------------------------------------------------


@dataclass(frozen=True)
class Negative:
    reaction: Reaction
    source: int
    operation: str


def _env_entities(rxn: Reaction) -> List[Tuple[str, str]]:
    return [(m.canonical_string, SUB_REACTANT) for m in rxn.sub_reactants] + [
        (m.canonical_string, REAGENT) for m in rxn.reagents
    ]


def _with_env(rxn: Reaction, env: Sequence[Tuple[str, str]]) -> Reaction:
    subs = tuple(parse_molecule(s) for s, role in env if role == SUB_REACTANT)
    reags = tuple(parse_molecule(s) for s, role in env if role == REAGENT)
    return rxn.replace(sub_reactants=subs, reagents=reags, yield_pct=None)


def perturb(rxn: Reaction, op: str, foreign: Sequence[Tuple[str, str]], rng: np.random.Generator) -> Optional[Reaction]:
    """Apply one add/delete/switch edit; ``foreign`` holds (smiles, role) entities of other classes.

    Returns None when the edit is impossible (delete on an empty environment,
    no usable foreign entity).
    """
    env = _env_entities(rxn)
    present = {s for s, _ in env}
    usable = [e for e in foreign if e[0] not in present]
    if op == "delete":
        if not env:
            return None
        k = int(rng.integers(len(env)))
        return _with_env(rxn, env[:k] + env[k + 1 :])
    if not usable:
        return None
    new = usable[int(rng.integers(len(usable)))]
    if op == "add":
        return _with_env(rxn, env + [new])
    if op == "switch":
        if not env:
            return None
        k = int(rng.integers(len(env)))
        return _with_env(rxn, env[:k] + [new] + env[k + 1 :])
    raise ContractError(f"unknown perturbation {op!r}")


def make_negatives(
    pool: Sequence[Reaction],
    predictor: ForwardPredictor,
    seed: int = 0,
    rounds: int = 1,
    max_resample: int = 10,
    details: Optional[List[Negative]] = None,
) -> List[Reaction]:
    """Perturbed reactions that the predictor does not map back to the original product.

    Each source reaction gets one uniformly drawn edit per round; impossible
    edits are redrawn.  A negative whose predicted product equals the source
    product is discarded; a predictor failure keeps it.
    """
    if any(r.class_label is None for r in pool):
        raise ContractError("make_negatives needs class labels on every pool reaction")
    rng = np.random.default_rng(seed)
    by_class: Dict[str, set] = {}
    for r in pool:
        by_class.setdefault(r.class_label, set()).update(_env_entities(r))
    foreign_cache: Dict[str, List[Tuple[str, str]]] = {}
    for c in by_class:
        own = {s for s, _ in by_class[c]}
        others = set().union(*(v for k, v in by_class.items() if k != c)) if len(by_class) > 1 else set()
        # entities that also occur in the source class would make the edit same-class
        foreign_cache[c] = sorted(e for e in others if e[0] not in own)
    out: List[Reaction] = []
    seen = set()
    for _ in range(rounds):
        for i, r in enumerate(pool):
            neg = None
            op = None
            for _ in range(max_resample):
                op = OPERATIONS[int(rng.integers(3))]
                neg = perturb(r, op, foreign_cache[r.class_label], rng)
                if neg is not None:
                    break
            if neg is None:
                continue
            responses = [Response(m.canonical_string, SUB_REACTANT) for m in neg.sub_reactants] + [
                Response(m.canonical_string, REAGENT) for m in neg.reagents
            ]
            try:
                same = predictor.predict(neg.main_reactant.canonical_string, responses) == r.product.canonical_string
            except PredictFailure:
                logger.debug("predictor failed on negative of reaction %d; kept", i)
                same = False
            if same:
                continue
            key = (neg.main_reactant.canonical_string, tuple(sorted(environment_multiset(neg).elements())), r.product.canonical_string)
            if key in seen:
                continue
            seen.add(key)
            out.append(neg)
            if details is not None:
                details.append(Negative(neg, i, op))
    return out


class NegativeSampler(Protocol):
    def sample(self, pool: Sequence[Reaction], seed: int = 0) -> List[Reaction]: ...


class PerturbationSampler:
    def __init__(self, predictor: ForwardPredictor, rounds: int = 1):
        self.predictor = predictor
        self.rounds = rounds

    def sample(self, pool, seed=0):
        return make_negatives(pool, self.predictor, seed=seed, rounds=self.rounds)


class TemplateNegativeSampler:
    """Hook for template-driven negatives; the template engine itself is supplied by the caller."""

    def __init__(self, generate: Optional[Callable[[Reaction], List[Reaction]]] = None):
        self.generate = generate

    def sample(self, pool, seed=0):
        if self.generate is None:
            raise NotImplementedError("no template engine configured for TemplateNegativeSampler")
        return [neg for r in pool for neg in self.generate(r)]


# --- retrieval metrics -------------------------------------------------------


def retrieval_score(encoder, reactions: Sequence[Reaction]) -> np.ndarray:
    """Inner product of the c_main and c_env projections."""
    sig = encoder.signals(list(reactions))
    return np.einsum("ij,ij->i", sig["c_main"], sig["c_env"])


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ContractError("scores and labels must be equal-length vectors")
    if not labels.any():
        raise UndefinedMetricError("no positive items")
    return scores, labels


def enrichment_factor(scores, labels, alpha: float) -> float:
    """EF_alpha = NP_alpha / (NP_total * alpha) with a top-ceil(alpha*T) cutoff (ties broken by position)."""
    if not 0 < alpha <= 1:
        raise ContractError(f"alpha must lie in (0, 1], got {alpha}")
    scores, labels = _check_binary(scores, labels)
    T = len(scores)
    k = int(math.ceil(alpha * T - 1e-9))
    order = np.lexsort((np.arange(T), -scores))
    return float(labels[order[:k]].sum() / (labels.sum() * alpha))


def auroc(scores, labels) -> float:
    """Rank-statistic AUROC; tied scores share the average rank."""
    scores, labels = _check_binary(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_neg == 0:
        raise UndefinedMetricError("no negative items")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def retrieval_benchmark(
    pos_scores: np.ndarray,
    neg_scores: np.ndarray,
    ratio: float,
    alphas: Sequence[float] = (0.01, 0.05),
    seed: int = 0,
    total: Optional[int] = None,
) -> dict:
    """Mix positives and negatives at positive ratio ``ratio`` and report EF/AUROC."""
    rng = np.random.default_rng(seed)
    n_neg_avail, n_pos_avail = len(neg_scores), len(pos_scores)
    T = total or int(min(n_neg_avail / (1 - ratio), n_pos_avail / ratio))
    n_pos = int(round(ratio * T))
    n_neg = T - n_pos
    if n_pos < 1 or n_pos > n_pos_avail or n_neg > n_neg_avail:
        raise SamplingError(f"cannot draw {n_pos} positives and {n_neg} negatives at ratio {ratio}")
    p = rng.choice(pos_scores, size=n_pos, replace=False)
    n = rng.choice(neg_scores, size=n_neg, replace=False)
    scores = np.concatenate([p, n])
    labels = np.concatenate([np.ones(n_pos, bool), np.zeros(n_neg, bool)])
    perm = rng.permutation(T)
    scores, labels = scores[perm], labels[perm]
    report = {"ratio": ratio, "total": T, "positives": n_pos, "auroc": auroc(scores, labels)}
    for a in alphas:
        report[f"ef_{a:g}"] = enrichment_factor(scores, labels, a)
    report["mean_pos_score"] = float(p.mean())
    report["mean_neg_score"] = float(n.mean())
    return report


# --- classification ----------------------------------------------------------


@dataclass
class FewShotResult:
    n_per_class: int
    mean: float
    std: float
    accuracies: List[float] = field(default_factory=list)

    def to_dict(self):
        return {"n_per_class": self.n_per_class, "mean": self.mean, "std": self.std, "accuracies": self.accuracies}


def fewshot_classify(
    reps: np.ndarray,
    labels: Sequence,
    n_per_class: int,
    repeats: int = 10,
    seed: int = 0,
    C: float = 1.0,
    n_test_per_class: Optional[int] = None,
) -> FewShotResult:
    """Balanced few-shot logistic-regression accuracy, mean and sample std over repeats.

    Each repeat draws ``n_per_class`` training items per class without
    replacement; the test split is balanced over the remaining items.
    """
    reps = np.asarray(reps, dtype=float)
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    idx = {c: np.flatnonzero(labels == c) for c in classes}
    short = [c for c in classes if len(idx[c]) <= n_per_class]
    if short:
        raise SamplingError(f"classes {short} have no more than {n_per_class} items")
    n_test = min(len(v) for v in idx.values()) - n_per_class
    if n_test_per_class is not None:
        n_test = min(n_test, n_test_per_class)
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(repeats):
        tr, te = [], []
        for c in classes:
            perm = rng.permutation(idx[c])
            tr.extend(perm[:n_per_class])
            te.extend(perm[n_per_class : n_per_class + n_test])
        clf = LogisticRegression(C=C, max_iter=5000)
        clf.fit(reps[tr], labels[tr])
        accs.append(float((clf.predict(reps[te]) == labels[te]).mean()))
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    return FewShotResult(n_per_class, float(np.mean(accs)), std, accs)


def cen(matrix) -> float:
    """Confusion entropy; logarithms in base 2(|C|-1)."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
        raise ContractError("CEN needs a square confusion matrix with at least two classes")
    if (M < 0).any():
        raise ContractError("confusion matrix entries must be nonnegative")
    total = M.sum()
    if total == 0:
        raise UndefinedMetricError("all-zero confusion matrix")
    n = M.shape[0]
    base = math.log(2 * (n - 1))
    out = 0.0
    for j in range(n):
        denom = M[j, :].sum() + M[:, j].sum()
        if denom == 0:
            continue
        cen_j = 0.0
        for k in range(n):
            if k == j:
                continue
            for p in (M[j, k] / denom, M[k, j] / denom):
                if p > 0:
                    cen_j -= p * math.log(p) / base
        out += denom / (2 * total) * cen_j
    return out


def classification_report(y_true, y_pred, classes: Optional[Sequence] = None) -> dict:
    classes = list(classes) if classes is not None else sorted(set(y_true) | set(y_pred))
    M = confusion_matrix(y_true, y_pred, labels=classes)
    return {"accuracy": float(np.trace(M) / M.sum()), "cen": cen(M), "classes": classes, "confusion": M.tolist()}
