from collections import Counter

from rxnpath.predictor import SUB_REACTANT, TemplatePredictor
from rxnpath.toydata import CLASSES, build_library, chain_reactions, classification_reactions, grow_chains, pretraining_reactions


def test_pretraining_balanced_unique():
    rx = pretraining_reactions(200)
    assert len(rx) == 200
    assert set(Counter(r.class_label for r in rx).values()) == {40}
    assert len({r.to_smiles() for r in rx}) == 200


def test_classification_set():
    rx = classification_reactions(12)
    assert Counter(r.class_label for r in rx) == {c: 12 for c in CLASSES}


def test_library_size_and_roles():
    lib = build_library()
    assert len(lib) == 1000 and len({e.smiles for e in lib}) == 1000
    assert {e.role for e in lib} == {SUB_REACTANT, "reagent"}


def test_chains_replay():
    pred = TemplatePredictor()
    for ch in grow_chains(20, seed=9):
        for i, (resp, _) in enumerate(ch.steps):
            assert pred.predict(ch.structures[i], resp) == ch.structures[i + 1]
            assert ch.reactions[i].main_reactant.canonical_string == ch.structures[i]
