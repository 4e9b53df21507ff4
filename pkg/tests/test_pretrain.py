import math

import numpy as np
import pytest
import torch

from rxnpath.encoder import EncoderConfig, ReactionEncoder, TokenVocab, build_batch
from rxnpath.errors import ContractError, TrainingDiverged
from rxnpath.pretrain import (
    PretrainConfig,
    center_loss,
    info_nce,
    load_encoder,
    pairing_accuracy,
    pretrain,
    pretrain_loss,
    save_encoder,
)
from conftest import TINY


def test_info_nce_identical_embeddings():
    for B in (2, 5, 16):
        x = torch.ones(B, 4, dtype=torch.float64)
        assert abs(info_nce(x, x).item() - 2 * math.log(B)) < 1e-6


def test_info_nce_hand_set():
    x = math.sqrt(2) * torch.eye(2, dtype=torch.float64)
    want = 2 * -math.log(math.e**2 / (math.e**2 + 1))
    assert abs(info_nce(x, x).item() - want) < 1e-9
    assert abs(want - 0.2539) < 1e-4


def test_info_nce_margin_limit():
    e = torch.eye(4, dtype=torch.float64)
    vals = [info_nce(s * e, s * e).item() for s in (1, 3, 10)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-10


def test_info_nce_contract():
    with pytest.raises(ContractError):
        info_nce(torch.ones(1, 3), torch.ones(1, 3))


def test_center_loss_anchors():
    lab = torch.tensor([0.0, 1.0, 1.0, 0.0], dtype=torch.float64)
    assert abs(center_loss(torch.zeros(4, dtype=torch.float64), lab).item() - math.log(2)) < 1e-12
    logits = torch.where(lab > 0, 50.0, -50.0).double()
    assert center_loss(logits, lab).item() < 1e-20
    zero = torch.zeros(4, dtype=torch.float64)
    lg = torch.tensor([8.0, -40, -40, -40], dtype=torch.float64)
    one = torch.nn.functional.binary_cross_entropy_with_logits(lg[:1], zero[:1]).item()
    assert abs(center_loss(lg, zero).item() - one / 4) < 1e-12


def test_center_loss_mask():
    lg = torch.zeros(2, 3)
    lab = torch.zeros(2, 3)
    mask = torch.tensor([[True, True, False], [True, False, False]])
    lg[0, 2] = 100  # masked, ignored
    assert abs(center_loss(lg, lab, mask).item() - math.log(2)) < 1e-6


def test_lambda_zero_gives_zero_center_grads(tiny_encoder, toy_rxns):
    b = build_batch(toy_rxns[:6], tiny_encoder.vocab, with_labels=True)
    tiny_encoder.train()
    pretrain_loss(tiny_encoder, b, lam=0.0)["total"].backward()
    for p in tiny_encoder.center.parameters():
        assert p.grad is None or torch.count_nonzero(p.grad) == 0


def test_loss_parts(tiny_encoder, toy_rxns):
    b = build_batch(toy_rxns[:6], tiny_encoder.vocab, with_labels=True)
    parts = pretrain_loss(tiny_encoder, b, lam=0.5)
    assert set(parts) == {"c", "g", "center", "total"}
    assert torch.isclose(parts["total"], parts["c"] + parts["g"] + 0.5 * parts["center"])


def _cfg(**kw):
    base = dict(encoder=EncoderConfig(**TINY), epochs=2, batch_size=8, seed=11, deterministic=True)
    base.update(kw)
    return PretrainConfig(**base)


def test_deterministic_checkpoints(toy_rxns, tmp_path):
    paths = []
    for k in range(2):
        res = pretrain(toy_rxns[:24], _cfg())
        p = tmp_path / f"enc{k}.ckpt"
        save_encoder(p, res.model)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


def test_checkpoint_round_trip(tiny_encoder, toy_rxns, tmp_path):
    p = tmp_path / "e.ckpt"
    save_encoder(p, tiny_encoder)
    back = load_encoder(p)
    a, b = tiny_encoder.signals(toy_rxns[:5]), back.signals(toy_rxns[:5])
    for k in a:
        assert np.allclose(a[k], b[k], atol=1e-6)


def test_divergence_restores(toy_rxns, monkeypatch):
    import rxnpath.pretrain as pt

    real = pt.pretrain_loss
    calls = {"n": 0}

    def flaky(model, batch, tau=1.0, lam=1.0):
        calls["n"] += 1
        out = real(model, batch, tau, lam)
        if calls["n"] == 3:
            out["total"] = out["total"] * float("nan")
        return out

    monkeypatch.setattr(pt, "pretrain_loss", flaky)
    with pytest.raises(TrainingDiverged):
        pretrain(toy_rxns[:16], _cfg(epochs=3, val_fraction=0.0))


def test_lr_range_test_runs(toy_rxns):
    res = pretrain(toy_rxns[:16], _cfg(lr=None, epochs=1))
    assert 0 < res.lr < 1


def test_config_unknown_key():
    with pytest.raises(ContractError):
        PretrainConfig.from_dict({"epochz": 3})


def test_pairing_accuracy_oracle():
    x = np.eye(4)
    assert pairing_accuracy(x, x) == 1.0
    assert pairing_accuracy(x, x[[1, 0, 3, 2]]) == 0.0
