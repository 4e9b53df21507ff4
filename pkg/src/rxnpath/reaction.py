"""Reactions: parsing, main-reactant selection, reactive centres, reagent tokens, JSONL I/O."""

from __future__ import annotations

import json
import logging
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .chem import Hybridization, Molecule, heavy_atom_count, parse_molecule
from .errors import (
    DatasetError,
    EncodeError,
    MappedReagentError,
    ParseError,
    UnmappedReactionError,
)

logger = logging.getLogger(__name__)

CLS_TOKEN = "[CLS]"


@dataclass(frozen=True)
class Reaction:
    main_reactant: Molecule
    sub_reactants: Tuple[Molecule, ...]
    reagents: Tuple[Molecule, ...]
    product: Molecule
    class_label: Optional[str] = None
    yield_pct: Optional[float] = None

    @property
    def reactants(self) -> Tuple[Molecule, ...]:
        return (self.main_reactant,) + self.sub_reactants

    @property
    def environment(self) -> Tuple[Molecule, ...]:
        """Sub-reactants followed by reagents."""
        return self.sub_reactants + self.reagents

    def to_smiles(self) -> str:
        lhs = ".".join(m.smiles for m in self.reactants)
        mid = ".".join(m.smiles for m in self.reagents)
        return f"{lhs}>{mid}>{self.product.smiles}"

    def replace(self, **changes) -> "Reaction":
        from dataclasses import replace

        return replace(self, **changes)


def _split_field(text: str, name: str) -> List[Molecule]:
    if not text.strip():
        return []
    mols = []
    for i, piece in enumerate(text.strip().split(".")):
        if not piece:
            raise ParseError("empty molecule", field=name, index=i)
        try:
            mols.append(parse_molecule(piece))
        except ParseError as exc:
            raise ParseError(f"unparsable molecule {piece!r}", field=name, index=i) from exc
    return mols


def _main_key(mol: Molecule, product_maps) -> tuple:
    # most shared maps, then more heavy atoms, then smallest canonical string
    return (-len(mol.map_numbers & product_maps), -heavy_atom_count(mol), mol.canonical_string)


def select_main(reactants: Sequence[Molecule], product: Molecule) -> int:
    """Index of the reactant sharing the most atom-map numbers with ``product``."""
    pmaps = product.map_numbers
    keys = [_main_key(m, pmaps) for m in reactants]
    return min(range(len(reactants)), key=lambda i: keys[i])


def parse_reaction(line: str, class_label: Optional[str] = None, yield_pct: Optional[float] = None) -> Reaction:
    """Parse ``reactants>reagents>product`` reaction SMILES.

    Reactant-field molecules that share no map number with the product are
    treated as reagents when the reaction is atom-mapped.  Reagents that do
    share map numbers with the product are rejected.
    """
    line = line.strip()
    if line.count(">") != 2:
        raise ParseError(f"expected exactly two '>' separators, found {line.count('>')}")
    r_txt, g_txt, p_txt = line.split(">")
    reactants = _split_field(r_txt, "reactants")
    reagents = _split_field(g_txt, "reagents")
    products = _split_field(p_txt, "product")
    if not products:
        raise ParseError("empty product", field="product")
    if not reactants:
        raise ParseError("no reactants", field="reactants")
    # multi-product records keep the largest product
    product = max(products, key=lambda m: (heavy_atom_count(m), m.canonical_string))
    pmaps = product.map_numbers
    for i, g in enumerate(reagents):
        if g.map_numbers & pmaps:
            raise MappedReagentError("reagent shares atom maps with the product", field="reagents", index=i)

    main_idx = select_main(reactants, product)
    main = reactants[main_idx]
    subs, moved = [], []
    for i, m in enumerate(reactants):
        if i == main_idx:
            continue
        if pmaps and not (m.map_numbers & pmaps):
            moved.append(m)
        else:
            subs.append(m)
    return Reaction(
        main_reactant=main,
        sub_reactants=tuple(subs),
        reagents=tuple(reagents) + tuple(moved),
        product=product,
        class_label=class_label,
        yield_pct=yield_pct,
    )


@dataclass(frozen=True)
class AtomState:
    formal_charge: int
    hybridization: Hybridization
    neighbor_elements: Tuple[str, ...]  # sorted multiset


def atom_state(mol: Molecule, atom_index: int) -> AtomState:
    if not 0 <= atom_index < mol.num_atoms:
        raise IndexError(f"atom index {atom_index} out of range for {mol.num_atoms} atoms")
    atom = mol.atoms[atom_index]
    nbrs = tuple(sorted(mol.atoms[j].symbol for j in mol.neighbors(atom_index)))
    return AtomState(atom.formal_charge, atom.hybridization, nbrs)


@dataclass(frozen=True)
class ReactiveCenterLabels:
    """Per-atom 0/1 labels over the reactant side (main reactant first, then sub-reactants)."""

    per_molecule: Tuple[np.ndarray, ...]

    @property
    def labels(self) -> np.ndarray:
        if not self.per_molecule:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(self.per_molecule)

    def __len__(self):
        return sum(len(x) for x in self.per_molecule)


def label_reactive_centers(rxn: Reaction) -> ReactiveCenterLabels:
    reactants = rxn.reactants
    if not any(m.map_numbers for m in reactants):
        raise UnmappedReactionError("reaction carries no atom maps on the reactant side")
    prod = rxn.product
    prod_index = {a.map_number: i for i, a in enumerate(prod.atoms) if a.map_number}
    out = []
    for mol in reactants:
        lab = np.ones(mol.num_atoms, dtype=np.int64)
        for i, a in enumerate(mol.atoms):
            j = prod_index.get(a.map_number) if a.map_number else None
            if j is None:
                continue  # leaves the molecule
            lab[i] = int(atom_state(mol, i) != atom_state(prod, j))
        out.append(lab)
    return ReactiveCenterLabels(tuple(out))


# --- reagent tokens -------------------------------------------------------


def tokenize_reagent(mol: Union[Molecule, str]) -> List[str]:
    import selfies as sf

    smiles = mol.canonical_string if isinstance(mol, Molecule) else mol
    try:
        encoded = sf.encoder(smiles)
    except Exception as exc:  # selfies raises its own EncoderError
        raise EncodeError(f"SELFIES encoding failed for {smiles!r}: {exc}") from exc
    if encoded is None:
        raise EncodeError(f"SELFIES encoding failed for {smiles!r}")
    return [CLS_TOKEN] + list(sf.split_selfies(encoded))


def detokenize_reagent(tokens: Sequence[str]) -> str:
    import selfies as sf

    if not tokens or tokens[0] != CLS_TOKEN:
        raise EncodeError("token sequence must start with the CLS token")
    return sf.decoder("".join(tokens[1:]))


# --- JSONL dataset --------------------------------------------------------


def reaction_to_record(rxn: Reaction) -> dict:
    return {"reaction": rxn.to_smiles(), "class": rxn.class_label, "yield": rxn.yield_pct}


def record_to_reaction(rec: dict) -> Reaction:
    if not isinstance(rec, dict) or "reaction" not in rec:
        raise ValueError("record must be an object with a 'reaction' key")
    y = rec.get("yield")
    if y is not None:
        y = float(y)
        if not 0.0 <= y <= 100.0:
            raise ValueError(f"yield {y} outside [0, 100]")
    label = rec.get("class")
    return parse_reaction(rec["reaction"], class_label=None if label is None else str(label), yield_pct=y)


def write_reactions(path: Union[str, Path], reactions: Iterable[Reaction]) -> int:
    n = 0
    with open(path, "w") as fh:
        for rxn in reactions:
            fh.write(json.dumps(reaction_to_record(rxn)) + "\n")
            n += 1
    return n


def iter_reactions(path: Union[str, Path], lenient: bool = False) -> Iterator[Reaction]:
    """Stream reactions from a JSONL file.

    Malformed lines raise :class:`DatasetError` carrying the 1-based line
    number; with ``lenient=True`` they are skipped with a warning instead.
    """
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield record_to_reaction(json.loads(line))
            except (ValueError, ParseError) as exc:
                if not lenient:
                    raise DatasetError(str(exc), line_number=lineno) from exc
                warnings.warn(f"skipping line {lineno}: {exc}", stacklevel=2)


def read_reactions(path: Union[str, Path], lenient: bool = False) -> List[Reaction]:
    return list(iter_reactions(path, lenient=lenient))


def read_raw_reactions(path: Union[str, Path], lenient: bool = False) -> List[Reaction]:
    """Read raw reaction SMILES, one per line; optional tab-separated class and yield columns."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.rstrip("\n").split("\t")
            try:
                label = cols[1] if len(cols) > 1 and cols[1] else None
                y = float(cols[2]) if len(cols) > 2 and cols[2] else None
                out.append(parse_reaction(cols[0], class_label=label, yield_pct=y))
            except (ValueError, ParseError) as exc:
                if not lenient:
                    raise DatasetError(str(exc), line_number=lineno) from exc
                warnings.warn(f"skipping line {lineno}: {exc}", stacklevel=2)
    return out


def environment_multiset(rxn: Reaction) -> Counter:
    return Counter(m.canonical_string for m in rxn.environment)
