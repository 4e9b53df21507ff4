"""Reaction network over canonical structures and path sampling for generator training."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .chem import get_backend
from .errors import EmptyResultError
from .predictor import REAGENT, SUB_REACTANT, Response
from .reaction import Reaction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Edge:
    source: str  # main reactant
    target: str  # product
    responses: Tuple[Response, ...]  # sub-reactants then reagents, canonical order
    reaction_id: int

    def to_dict(self):
        return {
            "source": self.source,
            "target": self.target,
            "responses": [r.to_dict() for r in self.responses],
            "reaction_id": self.reaction_id,
        }


def responses_of(rxn: Reaction) -> Tuple[Response, ...]:
    subs = sorted(m.canonical_string for m in rxn.sub_reactants)
    reags = sorted(m.canonical_string for m in rxn.reagents)
    return tuple(Response(s, SUB_REACTANT) for s in subs) + tuple(Response(s, REAGENT) for s in reags)


class ReactionNetwork:
    """Directed multigraph: main reactant -> product, one edge per reaction."""

    def __init__(self):
        self.nodes: Dict[str, int] = {}
        self.edges: List[Edge] = []
        self.out_edges: Dict[str, List[int]] = defaultdict(list)
        self.in_edges: Dict[str, List[int]] = defaultdict(list)

    def add_node(self, key: str) -> None:
        if key not in self.nodes:
            self.nodes[key] = len(self.nodes)

    def add_edge(self, edge: Edge) -> None:
        self.add_node(edge.source)
        self.add_node(edge.target)
        self.out_edges[edge.source].append(len(self.edges))
        self.in_edges[edge.target].append(len(self.edges))
        self.edges.append(edge)

    def has_step(self, source: str, responses: Sequence[Response], target: str) -> bool:
        want = tuple(sorted(responses, key=lambda r: (r.role, r.smiles)))
        for i in self.out_edges.get(source, ()):
            e = self.edges[i]
            if e.target == target and tuple(sorted(e.responses, key=lambda r: (r.role, r.smiles))) == want:
                return True
        return False

    def save(self, nodes_path: Union[str, Path], edges_path: Union[str, Path]) -> None:
        with open(nodes_path, "w") as fh:
            for key, idx in self.nodes.items():
                fh.write(json.dumps({"id": idx, "smiles": key}) + "\n")
        with open(edges_path, "w") as fh:
            for e in self.edges:
                fh.write(json.dumps(e.to_dict()) + "\n")

    @classmethod
    def load(cls, nodes_path, edges_path) -> "ReactionNetwork":
        net = cls()
        with open(nodes_path) as fh:
            for line in fh:
                if line.strip():
                    net.add_node(json.loads(line)["smiles"])
        with open(edges_path) as fh:
            for line in fh:
                if line.strip():
                    d = json.loads(line)
                    resp = tuple(Response(r["smiles"], r["role"]) for r in d["responses"])
                    net.add_edge(Edge(d["source"], d["target"], resp, d["reaction_id"]))
        return net


def build_network(reactions: Iterable[Reaction]) -> ReactionNetwork:
    net = ReactionNetwork()
    for i, r in enumerate(reactions):
        net.add_edge(Edge(r.main_reactant.canonical_string, r.product.canonical_string, responses_of(r), i))
    return net


@dataclass(frozen=True)
class ReactionPath:
    structures: Tuple[str, ...]
    steps: Tuple[Tuple[Response, ...], ...]  # steps[i] turns structures[i] into structures[i+1]

    @property
    def depth(self) -> int:
        return len(self.steps)

    def reversed(self) -> "ReactionPath":
        return ReactionPath(self.structures[::-1], self.steps[::-1])

    def to_dict(self):
        return {
            "structures": list(self.structures),
            "steps": [[r.to_dict() for r in s] for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d) -> "ReactionPath":
        return cls(tuple(d["structures"]), tuple(tuple(Response(r["smiles"], r["role"]) for r in s) for s in d["steps"]))


def sample_paths(
    net: ReactionNetwork,
    count: int,
    qed_min: float = 0.5,
    depth_range: Tuple[int, int] = (1, 3),
    seed: int = 0,
    max_attempts: Optional[int] = None,
) -> List[ReactionPath]:
    """Random walks from drug-like nodes, reversed into forward reaction paths.

    Walks start at nodes with QED > ``qed_min`` and step backwards along
    uniformly chosen in-edges (product -> main reactant); reversing the walk
    gives a path that replays forward and ends at the drug-like start node.
    Identical paths are emitted once.
    """
    backend = get_backend()
    starts = sorted(k for k in net.nodes if backend.qed(k) > qed_min)
    if not starts:
        raise EmptyResultError(f"no node with QED > {qed_min}")
    lo, hi = depth_range
    rng = np.random.default_rng(seed)
    seen = set()
    out: List[ReactionPath] = []
    max_attempts = max_attempts or 20 * count
    for _ in range(max_attempts):
        if len(out) >= count:
            break
        node = starts[int(rng.integers(len(starts)))]
        depth = int(rng.integers(lo, hi + 1))
        structs, steps = [node], []
        for _ in range(depth):
            inc = net.in_edges.get(structs[-1], [])
            if not inc:
                break
            e = net.edges[inc[int(rng.integers(len(inc)))]]
            steps.append(e.responses)
            structs.append(e.source)
        if len(steps) < lo:
            continue
        path = ReactionPath(tuple(structs), tuple(steps)).reversed()
        key = (path.structures, path.steps)
        if key in seen:
            continue
        seen.add(key)
        out.append(path)
    return out


def replays(net: ReactionNetwork, path: ReactionPath) -> bool:
    return all(net.has_step(path.structures[i], path.steps[i], path.structures[i + 1]) for i in range(path.depth))


@dataclass(frozen=True)
class PathPair:
    prefix: Tuple[str, ...]  # structures up to and including the current main reactant
    target: Tuple[Response, ...]
    terminal: bool

    def to_dict(self):
        return {"prefix": list(self.prefix), "target": [r.to_dict() for r in self.target], "terminal": self.terminal}

    @classmethod
    def from_dict(cls, d) -> "PathPair":
        return cls(tuple(d["prefix"]), tuple(Response(r["smiles"], r["role"]) for r in d["target"]), bool(d["terminal"]))


def make_pairs(paths: Sequence[ReactionPath]) -> List[PathPair]:
    """One (prefix, next responses) pair per step; the last step of each path is terminal."""
    out = []
    for p in paths:
        for i in range(p.depth):
            out.append(PathPair(p.structures[: i + 1], p.steps[i], i == p.depth - 1))
    return out


def write_jsonl(path, items) -> int:
    n = 0
    with open(path, "w") as fh:
        for it in items:
            fh.write(json.dumps(it.to_dict()) + "\n")
            n += 1
    return n


def read_paths(path) -> List[ReactionPath]:
    with open(path) as fh:
        return [ReactionPath.from_dict(json.loads(l)) for l in fh if l.strip()]


def read_pairs(path) -> List[PathPair]:
    with open(path) as fh:
        return [PathPair.from_dict(json.loads(l)) for l in fh if l.strip()]
