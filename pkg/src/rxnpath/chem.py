"""Molecule value types and the pluggable cheminformatics backend.

Everything that needs real chemistry (SMILES parsing, canonicalisation, ring
perception, descriptors, fingerprints, template application) goes through a
:class:`ChemBackend`.  The only shipped implementation wraps RDKit; the
``RXN_BACKEND`` environment variable picks the backend by name.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Protocol, Sequence, Tuple

from .errors import ContractError, ParseError


class Hybridization(IntEnum):
    SP = 0
    SP2 = 1
    SP3 = 2
    OTHER = 3


class BondOrder(IntEnum):
    # 0 is reserved for "no bond" in edge features
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4


@dataclass(frozen=True)
class Atom:
    symbol: str
    formal_charge: int = 0
    hybridization: Hybridization = Hybridization.OTHER
    in_ring: bool = False
    map_number: Optional[int] = None


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    order: BondOrder
    in_ring: bool = False


@dataclass(frozen=True)
class Molecule:
    """Immutable heavy-atom graph plus its canonical (map-free) SMILES.

    ``smiles`` keeps the string the molecule was built from, atom maps
    included, so reactions can be written back losslessly.
    """

    atoms: Tuple[Atom, ...]
    bonds: Tuple[Bond, ...]
    canonical_string: str
    smiles: str = field(default="", compare=False)

    def __post_init__(self):
        n = len(self.atoms)
        seen = set()
        for b in self.bonds:
            if not (0 <= b.i < n and 0 <= b.j < n):
                raise ContractError(f"bond ({b.i},{b.j}) out of range for {n} atoms")
            if b.i == b.j:
                raise ContractError("self-bond")
            key = (min(b.i, b.j), max(b.i, b.j))
            if key in seen:
                raise ContractError(f"duplicate bond {key}")
            seen.add(key)
        maps = [a.map_number for a in self.atoms if a.map_number]
        if len(maps) != len(set(maps)):
            raise ContractError("duplicate atom-map numbers inside one molecule")

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def map_numbers(self) -> FrozenSet[int]:
        return frozenset(a.map_number for a in self.atoms if a.map_number)

    def neighbors(self, index: int) -> List[int]:
        out = []
        for b in self.bonds:
            if b.i == index:
                out.append(b.j)
            elif b.j == index:
                out.append(b.i)
        return out

    def __repr__(self):
        return f"Molecule({self.canonical_string!r})"


@dataclass(frozen=True)
class TemplateOutcome:
    """One product of applying a reaction template.

    ``mapped_reaction`` is ``reactants>>product`` with map numbers on every
    reactant atom that survives into the product (leaving atoms stay unmapped).
    """

    product: str
    mapped_reaction: str


class ChemBackend(Protocol):
    name: str

    def molecule(self, smiles: str) -> Molecule: ...

    def canonical(self, smiles: str) -> str: ...

    def is_valid(self, smiles: str) -> bool: ...

    def qed(self, smiles: str) -> float: ...

    def mol_weight(self, smiles: str) -> float: ...

    def logp(self, smiles: str) -> float: ...

    def rotatable_bonds(self, smiles: str) -> int: ...

    def ecfp4(self, smiles: str, n_bits: int = 2048) -> FrozenSet[int]: ...

    def scaffold(self, smiles: str) -> str: ...

    def apply_template(self, smarts: str, reactants: Sequence[str]) -> List[TemplateOutcome]: ...


_HYB = None


def _hyb_map():
    global _HYB
    if _HYB is None:
        from rdkit import Chem

        H = Chem.rdchem.HybridizationType
        _HYB = {H.SP: Hybridization.SP, H.SP2: Hybridization.SP2, H.SP3: Hybridization.SP3}
    return _HYB


class RDKitBackend:
    name = "rdkit"

    def __init__(self):
        from rdkit import Chem, RDLogger

        RDLogger.DisableLog("rdApp.*")
        self._Chem = Chem

    def _mol(self, smiles: str):
        if not smiles:
            raise ParseError("empty SMILES")
        mol = self._Chem.MolFromSmiles(smiles)
        if mol is None:
            raise ParseError(f"cannot parse SMILES {smiles!r}")
        return mol

    def molecule(self, smiles: str) -> Molecule:
        return _rdkit_molecule(smiles)

    def canonical(self, smiles: str) -> str:
        return _rdkit_canonical(smiles)

    def is_valid(self, smiles: str) -> bool:
        if not smiles:
            return False
        return self._Chem.MolFromSmiles(smiles) is not None

    def qed(self, smiles: str) -> float:
        from rdkit.Chem import QED

        return float(QED.qed(self._mol(smiles)))

    def mol_weight(self, smiles: str) -> float:
        from rdkit.Chem import Descriptors

        return float(Descriptors.MolWt(self._mol(smiles)))

    def logp(self, smiles: str) -> float:
        from rdkit.Chem import Crippen

        return float(Crippen.MolLogP(self._mol(smiles)))

    def rotatable_bonds(self, smiles: str) -> int:
        from rdkit.Chem import Lipinski

        return int(Lipinski.NumRotatableBonds(self._mol(smiles)))

    def ecfp4(self, smiles: str, n_bits: int = 2048) -> FrozenSet[int]:
        return _rdkit_ecfp4(smiles, n_bits)

    def scaffold(self, smiles: str) -> str:
        from rdkit.Chem.Scaffolds import MurckoScaffold

        core = MurckoScaffold.GetScaffoldForMol(self._mol(smiles))
        return self._Chem.MolToSmiles(core)

    def apply_template(self, smarts: str, reactants: Sequence[str]) -> List[TemplateOutcome]:
        Chem = self._Chem
        rxn = _rdkit_reaction(smarts)
        mols = [self._mol(s) for s in reactants]
        for m in mols:
            for a in m.GetAtoms():
                a.SetAtomMapNum(0)
        seen: Dict[str, TemplateOutcome] = {}
        for products in rxn.RunReactants(tuple(mols)):
            prod = products[0]
            try:
                Chem.SanitizeMol(prod)
            except Exception:
                continue
            canon = Chem.MolToSmiles(prod)
            if Chem.MolFromSmiles(canon) is None or canon in seen:
                continue
            # number every reactant atom that survives into the product
            origin = {}
            for a in prod.GetAtoms():
                props = a.GetPropsAsDict()
                origin[a.GetIdx()] = (int(props["react_idx"]), int(props["react_atom_idx"]))
            numbered = [Chem.Mol(m) for m in mols]
            for a in prod.GetAtoms():
                ri, ai = origin[a.GetIdx()]
                num = a.GetIdx() + 1
                a.SetAtomMapNum(num)
                numbered[ri].GetAtomWithIdx(ai).SetAtomMapNum(num)
            lhs = ".".join(Chem.MolToSmiles(m, canonical=False) for m in numbered)
            mapped = f"{lhs}>>{Chem.MolToSmiles(prod, canonical=False)}"
            seen[canon] = TemplateOutcome(product=canon, mapped_reaction=mapped)
        return list(seen.values())


@lru_cache(maxsize=200_000)
def _rdkit_molecule(smiles: str) -> Molecule:
    from rdkit import Chem

    if not smiles:
        raise ParseError("empty SMILES")
    mol = Chem.MolFromSmiles(smiles)
    if mol is None:
        raise ParseError(f"cannot parse SMILES {smiles!r}")
    hyb = _hyb_map()
    atoms = tuple(
        Atom(
            symbol=a.GetSymbol(),
            formal_charge=a.GetFormalCharge(),
            hybridization=hyb.get(a.GetHybridization(), Hybridization.OTHER),
            in_ring=a.IsInRing(),
            map_number=a.GetAtomMapNum() or None,
        )
        for a in mol.GetAtoms()
    )
    order = {
        Chem.BondType.SINGLE: BondOrder.SINGLE,
        Chem.BondType.DOUBLE: BondOrder.DOUBLE,
        Chem.BondType.TRIPLE: BondOrder.TRIPLE,
        Chem.BondType.AROMATIC: BondOrder.AROMATIC,
    }
    bonds = []
    for b in mol.GetBonds():
        bt = order.get(b.GetBondType(), BondOrder.SINGLE)
        bonds.append(Bond(b.GetBeginAtomIdx(), b.GetEndAtomIdx(), bt, b.IsInRing()))
    for a in mol.GetAtoms():
        a.SetAtomMapNum(0)
    return Molecule(atoms=atoms, bonds=tuple(bonds), canonical_string=Chem.MolToSmiles(mol), smiles=smiles)


@lru_cache(maxsize=200_000)
def _rdkit_canonical(smiles: str) -> str:
    return _rdkit_molecule(smiles).canonical_string


@lru_cache(maxsize=200_000)
def _rdkit_ecfp4(smiles: str, n_bits: int) -> FrozenSet[int]:
    from rdkit import Chem
    from rdkit.Chem import rdFingerprintGenerator

    mol = Chem.MolFromSmiles(smiles) if smiles else Chem.Mol()
    if mol is None:
        raise ParseError(f"cannot parse SMILES {smiles!r}")
    gen = rdFingerprintGenerator.GetMorganGenerator(radius=2, fpSize=n_bits)
    return frozenset(gen.GetFingerprint(mol).GetOnBits())


@lru_cache(maxsize=256)
def _rdkit_reaction(smarts: str):
    from rdkit.Chem import AllChem

    rxn = AllChem.ReactionFromSmarts(smarts)
    rxn.Initialize()
    return rxn


_BACKENDS = {"rdkit": RDKitBackend}
_instances: Dict[str, ChemBackend] = {}


def register_backend(name: str, factory) -> None:
    _BACKENDS[name] = factory


def get_backend(name: Optional[str] = None) -> ChemBackend:
    name = name or os.environ.get("RXN_BACKEND", "rdkit")
    if name not in _BACKENDS:
        raise ContractError(f"unknown cheminformatics backend {name!r}; known: {sorted(_BACKENDS)}")
    if name not in _instances:
        _instances[name] = _BACKENDS[name]()
    return _instances[name]


def parse_molecule(smiles: str) -> Molecule:
    return get_backend().molecule(smiles)


def canonicalize(smiles: str) -> str:
    return get_backend().canonical(smiles)


def heavy_atom_count(mol: Molecule) -> int:
    return sum(1 for a in mol.atoms if a.symbol != "H")
