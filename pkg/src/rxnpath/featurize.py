"""Hypergraph featurisation: node/edge ids, shortest-path buckets, virtual node, padding."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .chem import Molecule
from .errors import EmptyBatchError, UnknownElementError

D_MAX = 6
UNREACHABLE = D_MAX + 1
VIRTUAL = D_MAX + 2
N_SP_BUCKETS = D_MAX + 3

# node feature columns
ELEMENT, CHARGE, HYBRID, RING = range(4)

PAD_ID = 0
VIRTUAL_ELEMENT = 1
ELEMENTS = (
    "C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B", "Si", "Se", "H",
    "Li", "Na", "K", "Cs", "Mg", "Ca", "Zn", "Cu", "Fe", "Ni", "Co", "Mn",
    "Pd", "Pt", "Rh", "Ru", "Ir", "Ag", "Au", "Sn", "Al", "Ti", "Cr", "Hg",
    "Ge", "As", "Te", "Bi", "Sb", "Zr", "W", "Mo", "Os", "Xe", "Kr",
)
ELEMENT_IDS = {sym: i + 2 for i, sym in enumerate(ELEMENTS)}
N_ELEMENT_IDS = len(ELEMENTS) + 2
N_CHARGE_IDS = 6  # pad + clamp(-2..2)
N_HYBRID_IDS = 5  # pad + SP, SP2, SP3, OTHER
N_RING_IDS = 3  # pad + {0, 1}
N_EDGE_IDS = 10  # (NONE, SINGLE, DOUBLE, TRIPLE, AROMATIC) x in_ring


def edge_id(order: int, in_ring: bool) -> int:
    return 2 * int(order) + int(bool(in_ring))


def shortest_paths(mol: Molecule, d_max: int = D_MAX) -> np.ndarray:
    """All-pairs hop counts clipped to ``d_max``; disconnected pairs get ``UNREACHABLE``."""
    n = mol.num_atoms
    if n == 1:
        return np.zeros((1, 1), dtype=np.int64)
    rows = [b.i for b in mol.bonds] + [b.j for b in mol.bonds]
    cols = [b.j for b in mol.bonds] + [b.i for b in mol.bonds]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    dist = shortest_path(adj, method="D", unweighted=True, directed=False)
    out = np.full((n, n), d_max + 1, dtype=np.int64)
    finite = np.isfinite(dist)
    out[finite] = np.minimum(dist[finite], d_max).astype(np.int64)
    return out


def node_features(mol: Molecule) -> np.ndarray:
    feats = np.zeros((mol.num_atoms, 4), dtype=np.int64)
    for i, a in enumerate(mol.atoms):
        try:
            feats[i, ELEMENT] = ELEMENT_IDS[a.symbol]
        except KeyError:
            raise UnknownElementError(f"element {a.symbol!r} is outside the featurizer vocabulary") from None
        feats[i, CHARGE] = int(np.clip(a.formal_charge, -2, 2)) + 3
        feats[i, HYBRID] = int(a.hybridization) + 1
        feats[i, RING] = int(a.in_ring) + 1
    return feats


@dataclass
class GraphItem:
    """One hypergraph: the atoms of several molecules plus a trailing virtual node."""

    nodes: np.ndarray  # [n+1, 4]
    edges: np.ndarray  # [n+1, n+1]
    sp: np.ndarray  # [n+1, n+1]
    molecule_id: np.ndarray  # [n+1], virtual node = -1
    atom_labels: List[str]

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def virtual_index(self) -> int:
        return len(self.nodes) - 1

    def to_json(self) -> str:
        return json.dumps(
            {
                "atoms": self.atom_labels,
                "nodes": self.nodes.tolist(),
                "edges": self.edges.tolist(),
                "sp": self.sp.tolist(),
                "molecule_id": self.molecule_id.tolist(),
            }
        )


def featurize(mols: Sequence[Molecule], d_max: int = D_MAX) -> GraphItem:
    """Build one hypergraph over ``mols``; cross-molecule pairs are UNREACHABLE."""
    if not mols:
        raise EmptyBatchError("featurize needs at least one molecule")
    sizes = [m.num_atoms for m in mols]
    n = sum(sizes)
    nodes = np.zeros((n + 1, 4), dtype=np.int64)
    edges = np.zeros((n + 1, n + 1), dtype=np.int64)
    sp = np.full((n + 1, n + 1), d_max + 1, dtype=np.int64)
    mol_id = np.full(n + 1, -1, dtype=np.int64)
    labels: List[str] = []
    off = 0
    for k, m in enumerate(mols):
        s = m.num_atoms
        nodes[off : off + s] = node_features(m)
        sp[off : off + s, off : off + s] = shortest_paths(m, d_max)
        for b in m.bonds:
            e = edge_id(b.order, b.in_ring)
            edges[off + b.i, off + b.j] = e
            edges[off + b.j, off + b.i] = e
        mol_id[off : off + s] = k
        labels.extend(a.symbol for a in m.atoms)
        off += s
    nodes[n] = (VIRTUAL_ELEMENT, 3, 4, 1)  # zero charge, OTHER hybridisation, not in ring
    sp[n, :] = d_max + 2
    sp[:, n] = d_max + 2
    sp[n, n] = 0
    labels.append("<virtual>")
    return GraphItem(nodes, edges, sp, mol_id, labels)


@dataclass
class GraphBatch:
    nodes: np.ndarray  # [B, N, 4]
    edges: np.ndarray  # [B, N, N]
    sp: np.ndarray  # [B, N, N]
    mask: np.ndarray  # [B, N] bool
    molecule_id: np.ndarray  # [B, N]; virtual -1, padding -2
    virtual_index: np.ndarray  # [B]

    def __len__(self):
        return len(self.nodes)

    @property
    def n_max(self) -> int:
        return self.nodes.shape[1]

    def item(self, b: int) -> GraphItem:
        """Un-pad example ``b`` (atom labels are not stored in the batch)."""
        n = int(self.mask[b].sum())
        return GraphItem(
            self.nodes[b, :n].copy(),
            self.edges[b, :n, :n].copy(),
            self.sp[b, :n, :n].copy(),
            self.molecule_id[b, :n].copy(),
            [],
        )


def collate(items: Sequence[GraphItem]) -> GraphBatch:
    if not items:
        raise EmptyBatchError("cannot collate an empty list")
    B = len(items)
    N = max(it.size for it in items)
    nodes = np.zeros((B, N, 4), dtype=np.int64)
    edges = np.zeros((B, N, N), dtype=np.int64)
    sp = np.full((B, N, N), UNREACHABLE, dtype=np.int64)
    mask = np.zeros((B, N), dtype=bool)
    mol_id = np.full((B, N), -2, dtype=np.int64)
    vidx = np.zeros(B, dtype=np.int64)
    for b, it in enumerate(items):
        n = it.size
        nodes[b, :n] = it.nodes
        edges[b, :n, :n] = it.edges
        sp[b, :n, :n] = it.sp
        mask[b, :n] = True
        mol_id[b, :n] = it.molecule_id
        vidx[b] = it.virtual_index
    return GraphBatch(nodes, edges, sp, mask, mol_id, vidx)
