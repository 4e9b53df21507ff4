import numpy as np
import pytest
import torch

from rxnpath.encoder import EncoderConfig, ReactionEncoder, TokenVocab
from rxnpath.toydata import pretraining_reactions


def pytest_configure(config):
    torch.set_num_threads(1)


TINY = dict(model_dim=16, head_hidden=16, proj_dim=16, n_layers=1, n_heads=2, text_layers=1, set_layers=1, center_layers=1, max_tokens=64)


@pytest.fixture(scope="session")
def toy_rxns():
    return pretraining_reactions(40, seed=3)


@pytest.fixture(scope="session")
def tiny_cfg():
    return EncoderConfig(**TINY)


@pytest.fixture()
def tiny_encoder(toy_rxns, tiny_cfg):
    torch.manual_seed(0)
    return ReactionEncoder(tiny_cfg, TokenVocab.from_reactions(toy_rxns)).eval()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
