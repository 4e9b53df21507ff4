"""Synthetic template-reaction corpora for desk-scale experiments.

Two worlds are generated:

* the pretraining world: five template classes where the sub-reactant carries
  the same ring core and substituent as the main reactant, so the environment
  of a reaction identifies its main reactant;
* the generation world: multi-step chains grown from small seeds with
  building blocks taken from a fixed 1000-entity library.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .chem import canonicalize, get_backend
from .errors import ParseError, PredictFailure
from .predictor import REAGENT, SUB_REACTANT, Response, TemplatePredictor
from .reaction import Reaction

logger = logging.getLogger(__name__)

# ring cores with a {x} slot for the substituent; the functional group is prepended
CORES = {
    "benzene": "c1ccc{x}cc1",
    "pyridine": "c1ccc{x}nc1",
    "thiophene": "c1ccc{x}s1",
    "furan": "c1ccc{x}o1",
    "cyclohexane": "C1CCC{x}CC1",
    "cyclopentane": "C1CCC{x}C1",
    "oxane": "C1CCOC{x}C1",
    "meta_benzene": "c1cccc{x}c1",
}
SUBSTITUENTS = ("", "F", "Cl", "Br", "C", "OC", "C(F)(F)F", "C#N")

REAGENTS = {
    "amide_coupling": ("CN(C)C=O", "CCN(C(C)C)C(C)C", "On1nnc2ccccc21"),
    "esterification": ("O=S(=O)(O)O", "Cc1ccc(S(=O)(=O)O)cc1", "c1ccccc1"),
    "n_alkylation": ("CC#N", "CCN(CC)CC", "CN1CCCC1=O"),
    "reductive_amination": ("ClCCl", "CC(=O)O", "CO"),
    "williamson_ether": ("CC(C)=O", "C1CCOC1", "CS(C)=O"),
}
CLASSES = tuple(REAGENTS)

# (main functional group, partner functional group) per class, both prepended to the ring group
PARTNERS = {
    "amide_coupling": ("OC(=O)", "NC"),
    "esterification": ("OC(=O)", "OC"),
    "n_alkylation": ("NC", "BrC"),
    "reductive_amination": ("O=C", "NC"),
    "williamson_ether": ("O", "BrC"),
}


def r_group(core: str, x: str) -> str:
    return CORES[core].format(x=f"({x})" if x else "")


def _canon(s: str) -> str:
    return canonicalize(s)


def _reagent_subset(cls: str, rng: np.random.Generator) -> List[str]:
    pool = REAGENTS[cls]
    k = int(rng.integers(1, 3))
    return sorted(_canon(s) for s in rng.choice(pool, size=k, replace=False))


def pretraining_reactions(n: int = 200, seed: int = 0, predictor: Optional[TemplatePredictor] = None) -> List[Reaction]:
    """Balanced template reactions; each (class, core, substituent) combination is used once."""
    predictor = predictor or TemplatePredictor()
    rng = np.random.default_rng(seed)
    combos = list(itertools.product(CLASSES, CORES, SUBSTITUENTS))
    rng.shuffle(combos)
    per_class = {c: 0 for c in CLASSES}
    quota = {c: n // len(CLASSES) + (1 if i < n % len(CLASSES) else 0) for i, c in enumerate(CLASSES)}
    out = []
    for cls, core, x in combos:
        if per_class[cls] >= quota[cls]:
            continue
        fg_main, fg_sub = PARTNERS[cls]
        rg = r_group(core, x)
        main, sub = fg_main + rg, fg_sub + rg
        try:
            rxn = predictor.predict_reaction(
                main,
                [Response(sub, SUB_REACTANT)] + [Response(g, REAGENT) for g in _reagent_subset(cls, rng)],
                class_label=cls,
            )
        except (PredictFailure, ParseError):
            continue
        out.append(rxn)
        per_class[cls] += 1
        if len(out) == n:
            break
    return out


def core_is_aromatic(core: str) -> bool:
    return CORES[core][0] == "c"


def classification_reactions(n_per_class: int = 40, seed: int = 1, predictor: Optional[TemplatePredictor] = None) -> List[Reaction]:
    """Five-class labelled set with random (not like-to-like) partners."""
    predictor = predictor or TemplatePredictor()
    rng = np.random.default_rng(seed)
    groups = [r_group(c, x) for c in CORES for x in SUBSTITUENTS]
    out = []
    for cls in CLASSES:
        fg_main, fg_sub = PARTNERS[cls]
        seen = set()
        tries = 0
        while sum(r.class_label == cls for r in out) < n_per_class and tries < 50 * n_per_class:
            tries += 1
            a, b = rng.choice(len(groups), size=2)
            if (a, b) in seen:
                continue
            seen.add((a, b))
            try:
                rxn = predictor.predict_reaction(
                    fg_main + groups[a],
                    [Response(fg_sub + groups[b])] + [Response(g, REAGENT) for g in _reagent_subset(cls, rng)],
                    class_label=cls,
                )
            except (PredictFailure, ParseError):
                continue
            out.append(rxn)
    return out


# --- generation world --------------------------------------------------------

HANDLES = {
    "acid": "OC(=O)",
    "amine": "NC",
    "alcohol": "OC",
    "aldehyde": "O=C",
    "halide": "BrC",
}
LINKERS = ("", "C")
GEN_SUBSTITUENTS = ("", "F", "Cl", "C", "OC", "C(F)(F)F", "C#N", "CO", "CN", "C(=O)O")
SECOND_HANDLES = ("CO", "CN", "C(=O)O")
DECOY_PREFIXES = ("CC(=O)", "CCOC", "CS(=O)(=O)", "CC(C)(C)", "N#CC", "CCC(=O)")
LIBRARY_SIZE = 1000


@dataclass(frozen=True)
class LibraryEntry:
    smiles: str
    role: str
    kind: str  # handle name, "reagent" or "decoy"
    n_handles: int = 0

    def to_dict(self):
        return {"smiles": self.smiles, "role": self.role, "kind": self.kind, "n_handles": self.n_handles}


def build_library(size: int = LIBRARY_SIZE, seed: int = 0) -> List[LibraryEntry]:
    """Building blocks, reagents and inert decoys; exactly ``size`` distinct entities."""
    rng = np.random.default_rng(seed)
    entries: Dict[str, LibraryEntry] = {}
    for pool in REAGENTS.values():
        for s in pool:
            c = _canon(s)
            entries.setdefault(c, LibraryEntry(c, REAGENT, "reagent"))
    blocks = []
    for (h, fg), link, core, x in itertools.product(HANDLES.items(), LINKERS, CORES, GEN_SUBSTITUENTS):
        blocks.append((fg + link + r_group(core, x), h, 1 + (x in SECOND_HANDLES)))
    rng.shuffle(blocks)
    decoys = [(p + r_group(core, x), "decoy", 0) for p in DECOY_PREFIXES for core in CORES for x in SUBSTITUENTS]
    rng.shuffle(decoys)
    for smi, kind, nh in blocks + decoys:
        if len(entries) >= size:
            break
        try:
            c = _canon(smi)
        except ParseError:
            continue
        if c not in entries:
            entries[c] = LibraryEntry(c, SUB_REACTANT, kind, nh)
    if len(entries) != size:
        raise RuntimeError(f"library generation produced {len(entries)} entities, wanted {size}")
    return sorted(entries.values(), key=lambda e: (e.role, e.smiles))


def seed_molecules(seed: int = 0) -> List[str]:
    """Small single-handle starting structures."""
    out = []
    for (h, fg), core, x in itertools.product(HANDLES.items(), CORES, SUBSTITUENTS):
        out.append(_canon(fg + r_group(core, x)))
    return sorted(set(out))


@dataclass
class Chain:
    structures: List[str]
    steps: List[Tuple[Tuple[Response, ...], str]] = field(default_factory=list)  # (responses, template)
    reactions: List[Reaction] = field(default_factory=list)


def grow_chains(
    n_chains: int = 300,
    max_steps: int = 3,
    seed: int = 0,
    library: Optional[Sequence[LibraryEntry]] = None,
    predictor: Optional[TemplatePredictor] = None,
) -> List[Chain]:
    """Grow reaction chains: each step adds one library block plus class reagents.

    A step is kept only when the parsed reaction's main reactant is the
    current structure, so every recorded product feeds the next step as main.
    """
    predictor = predictor or TemplatePredictor()
    library = list(library) if library is not None else build_library()
    rng = np.random.default_rng(seed)
    blocks = [e.smiles for e in library if e.role == SUB_REACTANT and e.kind in HANDLES]
    extenders = [e.smiles for e in library if e.n_handles > 1]
    seeds = seed_molecules()
    chains = []
    attempts = 0
    while len(chains) < n_chains and attempts < 20 * n_chains:
        attempts += 1
        s0 = seeds[int(rng.integers(len(seeds)))]
        chain = Chain([s0])
        depth = int(rng.integers(1, max_steps + 1))
        for k in range(depth):
            cur = chain.structures[-1]
            # non-final steps use blocks that bring a fresh handle
            pool = extenders if k < depth - 1 else blocks
            step = None
            for b in rng.choice(len(pool), size=min(40, len(pool)), replace=False):
                try:
                    o = predictor.best(cur, [Response(pool[b])])
                except PredictFailure:
                    continue
                reagents = _reagent_subset(o.template, rng)
                responses = (Response(pool[b], SUB_REACTANT),) + tuple(Response(g, REAGENT) for g in reagents)
                rxn = predictor.predict_reaction(cur, responses, class_label=o.template)
                if rxn.main_reactant.canonical_string != cur:
                    continue
                step = (responses, o.template, rxn)
                break
            if step is None:
                break
            chain.steps.append(step[:2])
            chain.reactions.append(step[2])
            chain.structures.append(step[2].product.canonical_string)
        if chain.steps:
            chains.append(chain)
    return chains


def chain_reactions(chains: Sequence[Chain]) -> List[Reaction]:
    seen = set()
    out = []
    for ch in chains:
        for r in ch.reactions:
            key = r.to_smiles()
            if key not in seen:
                seen.add(key)
                out.append(r)
    return out


def fragments(max_mw: float = 250.0) -> List[str]:
    backend = get_backend()
    return [s for s in seed_molecules() if backend.mol_weight(s) <= max_mw]
