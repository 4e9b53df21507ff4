import numpy as np
import pytest

from rxnpath.chem import get_backend
from rxnpath.errors import EmptyResultError
from rxnpath.network import (
    ReactionNetwork,
    ReactionPath,
    build_network,
    make_pairs,
    read_pairs,
    read_paths,
    replays,
    sample_paths,
    write_jsonl,
)
from rxnpath.predictor import Response
from rxnpath.reaction import parse_reaction
from rxnpath.toydata import chain_reactions, grow_chains


@pytest.fixture(scope="module")
def chain_net():
    rx = chain_reactions(grow_chains(80, seed=4))
    return rx, build_network(rx)


def test_shared_product_dedup():
    r1 = parse_reaction("[CH3:1][NH2:2].[CH3:3][I:4]>>[CH3:1][NH:2][CH3:3]")
    r2 = parse_reaction("[CH3:1][NH2:2].[CH3:3][Br:4]>>[CH3:1][NH:2][CH3:3]")
    net = build_network([r1, r2])
    assert len(net.nodes) == 2
    assert len(net.in_edges["CNC"]) == 2


def test_chain_path_exists():
    a = parse_reaction("[CH3:1][NH2:2].[CH3:3][I:4]>>[CH3:1][NH:2][CH3:3]")
    b = parse_reaction("[CH3:1][NH:2][CH3:3].[CH3:5][I:6]>>[CH3:1][N:2]([CH3:3])[CH3:5]")
    net = build_network([a, b])
    path = ReactionPath(("CN", "CNC", "CN(C)C"), ((Response("CI"),), (Response("CI"),)))
    assert replays(net, path)
    assert not replays(net, ReactionPath(("CN", "CN(C)C"), ((Response("CI"),),)))


def test_node_count_oracle(chain_net):
    rx, _ = chain_net
    rx = rx[:30]
    net = build_network(rx)
    want = {r.main_reactant.canonical_string for r in rx} | {r.product.canonical_string for r in rx}
    assert set(net.nodes) == want


def test_sampled_paths_replay(chain_net):
    _, net = chain_net
    paths = sample_paths(net, 60, seed=1)
    qed = get_backend().qed
    assert paths
    for p in paths:
        assert replays(net, p)
        assert 1 <= p.depth <= 3
        assert qed(p.structures[-1]) > 0.5
    assert len({(p.structures, p.steps) for p in paths}) == len(paths)


def test_depth_one_paths(chain_net):
    _, net = chain_net
    assert all(len(p.structures) == 2 for p in sample_paths(net, 20, depth_range=(1, 1), seed=2))


def test_no_paths_from_isolated_node():
    net = ReactionNetwork()
    net.add_node("CC(=O)Nc1ccc(O)cc1")  # drug-like but has no in-edges
    assert sample_paths(net, 5) == []
    empty = ReactionNetwork()
    empty.add_node("C")
    with pytest.raises(EmptyResultError):
        sample_paths(empty, 5)


def test_pairs_counting():
    p3 = ReactionPath(("A", "B", "C", "D"), ((Response("x"),), (Response("y"),), (Response("z"),)))
    p1 = ReactionPath(("A", "B"), ((Response("x"),),))
    pairs = make_pairs([p3])
    assert len(pairs) == 3 and sum(p.terminal for p in pairs) == 1 and pairs[-1].terminal
    assert [len(p.prefix) for p in pairs] == [1, 2, 3]
    one = make_pairs([p1])
    assert len(one) == 1 and one[0].terminal


def test_persistence(chain_net, tmp_path):
    _, net = chain_net
    net.save(tmp_path / "n.jsonl", tmp_path / "e.jsonl")
    back = ReactionNetwork.load(tmp_path / "n.jsonl", tmp_path / "e.jsonl")
    assert back.nodes == net.nodes and back.edges == net.edges
    paths = sample_paths(net, 10, seed=3)
    write_jsonl(tmp_path / "p.jsonl", paths)
    write_jsonl(tmp_path / "q.jsonl", make_pairs(paths))
    assert read_paths(tmp_path / "p.jsonl") == paths
    assert read_pairs(tmp_path / "q.jsonl") == make_pairs(paths)
