import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rxnpath.chem import Hybridization, parse_molecule
from rxnpath.errors import DatasetError, MappedReagentError, ParseError, UnmappedReactionError
from rxnpath.reaction import (
    CLS_TOKEN,
    atom_state,
    detokenize_reagent,
    label_reactive_centers,
    parse_reaction,
    read_reactions,
    tokenize_reagent,
    write_reactions,
)

METHYLATION = "[CH3:1][NH2:2].[CH3:3][I:4]>>[CH3:1][NH:2][CH3:3]"


def test_parse_main_sub_product():
    r = parse_reaction(METHYLATION)
    assert r.main_reactant.canonical_string == "CN"
    assert [m.canonical_string for m in r.sub_reactants] == ["CI"]
    assert r.reagents == ()
    assert r.product.canonical_string == "CNC"


def test_parse_identity_reaction():
    r = parse_reaction("[CH3:1][OH:2]>>[CH3:1][OH:2]")
    assert r.main_reactant.canonical_string == "CO"
    assert r.sub_reactants == () and r.reagents == ()
    assert r.product.canonical_string == "CO"


def test_parse_empty_product():
    with pytest.raises(ParseError):
        parse_reaction("CC>O>")


def test_parse_wrong_separators():
    with pytest.raises(ParseError):
        parse_reaction("CC>>O>C")


def test_mapped_reagent_rejected():
    with pytest.raises(MappedReagentError):
        parse_reaction("[CH3:1][NH2:2]>[CH3:3]I>[CH3:1][NH:2][CH3:3]")


def test_unmapped_reactant_moves_to_reagents():
    r = parse_reaction("[CH3:1][NH2:2].[CH3:3][I:4].CCO>>[CH3:1][NH:2][CH3:3]")
    assert [m.canonical_string for m in r.reagents] == ["CCO"]


def test_main_prefers_more_shared_maps():
    r = parse_reaction("[CH3:3][I:4].[CH3:1][NH2:2]>>[CH3:1][NH:2][CH3:3]")
    assert r.main_reactant.canonical_string == "CN"


def test_atom_state_ethanol_oxygen():
    m = parse_molecule("CCO")
    o = [i for i, a in enumerate(m.atoms) if a.symbol == "O"][0]
    s = atom_state(m, o)
    assert s.formal_charge == 0
    assert s.hybridization == Hybridization.SP3
    assert s.neighbor_elements == ("C",)


def test_atom_state_isolated_and_charged():
    assert atom_state(parse_molecule("C"), 0).neighbor_elements == ()
    assert atom_state(parse_molecule("[NH4+]"), 0).formal_charge == 1


def test_reactive_centres_methylation():
    r = parse_reaction(METHYLATION)
    lab = label_reactive_centers(r)
    by_map = {}
    for mol, arr in zip(r.reactants, lab.per_molecule):
        for a, v in zip(mol.atoms, arr):
            by_map[a.map_number] = int(v)
    assert by_map == {1: 0, 2: 1, 3: 1, 4: 1}


def test_reactive_centres_identity_all_zero():
    lab = label_reactive_centers(parse_reaction("[CH3:1][OH:2]>>[CH3:1][OH:2]"))
    assert lab.labels.sum() == 0


def test_reactive_centres_unmapped():
    with pytest.raises(UnmappedReactionError):
        label_reactive_centers(parse_reaction("CN.CI>>CNC"))


def test_tokens():
    assert tokenize_reagent("CCO") == [CLS_TOKEN, "[C]", "[C]", "[O]"]
    assert tokenize_reagent("C") == [CLS_TOKEN, "[C]"]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["CCO", "c1ccccc1", "CN(C)C=O", "ClCCl", "O=S(=O)(O)O", "CC(=O)O", "C1CCOC1"]))
def test_token_round_trip(smiles):
    from rxnpath.chem import canonicalize

    assert canonicalize(detokenize_reagent(tokenize_reagent(smiles))) == canonicalize(smiles)


def _rxns(n):
    from rxnpath.toydata import pretraining_reactions

    return pretraining_reactions(n, seed=5)


def test_jsonl_round_trip(tmp_path):
    rx = _rxns(50)
    p = tmp_path / "r.jsonl"
    write_reactions(p, rx)
    back = read_reactions(p)
    assert [r.to_smiles() for r in back] == [r.to_smiles() for r in rx]
    assert [r.class_label for r in back] == [r.class_label for r in rx]


def test_jsonl_bad_line(tmp_path):
    rx = _rxns(49)
    p = tmp_path / "r.jsonl"
    write_reactions(p, rx)
    lines = p.read_text().splitlines()
    lines.insert(10, json.dumps({"reaction": "CC>>"}))
    p.write_text("\n".join(lines) + "\n")
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        got = read_reactions(p, lenient=True)
    assert len(got) == 49 and len(w) == 1
    with pytest.raises(DatasetError) as exc:
        read_reactions(p)
    assert exc.value.line_number == 11
