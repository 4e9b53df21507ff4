"""Pretraining objectives and loop.

Total loss per batch:
    InfoNCE(c_main, c_env) + InfoNCE(g_inputs, g_product) + lam * BCE(center logits, labels)
In-batch mispairings supply the negatives.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from .encoder import EncoderConfig, ReactionBatch, ReactionEncoder, TokenVocab, build_batch
from .errors import ContractError, TrainingDiverged
from .io import load_tensors, save_tensors
from .reaction import Reaction
from .utils import seed_everything

logger = logging.getLogger(__name__)


def info_nce(x: torch.Tensor, v: torch.Tensor, tau: float = 1.0) -> torch.Tensor:
    """Symmetric in-batch InfoNCE with inner-product similarity; row i of x pairs with row i of v."""
    if x.shape[0] < 2 or x.shape != v.shape:
        raise ContractError(f"info_nce needs matching [B>=2, d] inputs, got {tuple(x.shape)} and {tuple(v.shape)}")
    logits = x @ v.T / tau
    target = torch.arange(x.shape[0])
    return F.cross_entropy(logits, target) + F.cross_entropy(logits.T, target)


def center_loss(logits: torch.Tensor, labels: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Mean binary cross-entropy over real atoms."""
    if logits.shape != labels.shape:
        raise ContractError(f"logits {tuple(logits.shape)} and labels {tuple(labels.shape)} differ in shape")
    per_atom = F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype), reduction="none")
    if mask is None:
        return per_atom.mean()
    if mask.shape != logits.shape:
        raise ContractError("mask shape differs from logits")
    m = mask.to(logits.dtype)
    return (per_atom * m).sum() / m.sum().clamp_min(1.0)


def padded_labels(batch: ReactionBatch, width: int) -> torch.Tensor:
    lab = np.zeros((len(batch), width), dtype=np.float64)
    for b, arr in enumerate(batch.center_labels):
        lab[b, : len(arr)] = arr
    return torch.from_numpy(lab)


def pretrain_loss(model: ReactionEncoder, batch: ReactionBatch, tau: float = 1.0, lam: float = 1.0) -> Dict[str, torch.Tensor]:
    out = model(batch, with_center=batch.center_labels is not None)
    l_c = info_nce(out["c_main"], out["c_env"], tau)
    l_g = info_nce(out["g_inputs"], out["g_product"], tau)
    total = l_c + l_g
    parts = {"c": l_c, "g": l_g}
    if batch.center_labels is not None:
        logits = out["center_logits"]
        l_center = center_loss(logits, padded_labels(batch, logits.shape[1]).to(logits.dtype), out["center_mask"])
        parts["center"] = l_center
        total = total + lam * l_center
    parts["total"] = total
    return parts


@dataclass
class PretrainConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    lr: Optional[float] = 1e-3  # None runs the range test
    epochs: int = 60
    batch_size: int = 32
    tau: float = 1.0
    lam: float = 1.0
    seed: int = 0
    patience: int = 10
    halve_every: int = 20
    val_fraction: float = 0.1
    weight_decay: float = 0.0
    grad_clip: Optional[float] = 5.0
    deterministic: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "PretrainConfig":
        d = dict(d)
        enc = d.pop("encoder", {}) or {}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown pretrain config keys: {sorted(unknown)}")
        return cls(encoder=EncoderConfig(**enc), **d)

    def to_dict(self) -> dict:
        return asdict(self)


def _batches(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    order = rng.permutation(n)
    chunks = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    # a trailing singleton has no in-batch negative
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        chunks[-2] = np.concatenate([chunks[-2], chunks.pop()])
    return chunks


@torch.no_grad()
def evaluate_loss(model: ReactionEncoder, batches: Sequence[ReactionBatch], tau: float, lam: float) -> float:
    model.eval()
    vals = [pretrain_loss(model, b, tau, lam)["total"].item() for b in batches if len(b) >= 2]
    return float(np.mean(vals)) if vals else float("nan")


def lr_range_test(
    reactions: Sequence[Reaction],
    cfg: PretrainConfig,
    vocab: TokenVocab,
    lrs: Sequence[float] = tuple(np.logspace(-5, -1, 13)),
    steps: int = 3,
) -> Tuple[float, List[float]]:
    """Short runs from one shared init at each lr; returns lr/10 of the lr with the lowest final loss."""
    seed_everything(cfg.seed)
    base = ReactionEncoder(cfg.encoder, vocab)
    rng = np.random.default_rng(cfg.seed)
    idx = _batches(len(reactions), cfg.batch_size, rng)[0]
    batch = build_batch([reactions[i] for i in idx], vocab, cfg.encoder.sp_cutoff, with_labels=True)
    losses = []
    for lr in lrs:
        model = copy.deepcopy(base)
        opt = torch.optim.Adam(model.parameters(), lr=float(lr))
        model.train()
        loss = float("nan")
        for _ in range(steps):
            opt.zero_grad()
            out = pretrain_loss(model, batch, cfg.tau, cfg.lam)["total"]
            loss = out.item()
            if not math.isfinite(loss):
                break
            out.backward()
            opt.step()
        losses.append(loss if math.isfinite(loss) else float("inf"))
    best = float(lrs[int(np.argmin(losses))]) / 10.0
    logger.info("lr range test picked %.2e", best)
    return best, losses


@dataclass
class PretrainResult:
    model: ReactionEncoder
    history: List[dict]
    best_epoch: int
    lr: float


def pretrain(
    reactions: Sequence[Reaction],
    cfg: PretrainConfig,
    val_reactions: Optional[Sequence[Reaction]] = None,
    vocab: Optional[TokenVocab] = None,
) -> PretrainResult:
    """Train a ReactionEncoder; keeps the best-validation state (early stopping)."""
    reactions = list(reactions)
    if val_reactions is None and cfg.val_fraction > 0:
        rng = np.random.default_rng(cfg.seed + 1)
        perm = rng.permutation(len(reactions))
        n_val = max(2, int(round(cfg.val_fraction * len(reactions))))
        val_reactions = [reactions[i] for i in perm[:n_val]]
        reactions = [reactions[i] for i in perm[n_val:]]
    if len(reactions) < 2:
        raise ContractError("pretraining needs at least two training reactions")
    vocab = vocab or TokenVocab.from_reactions(list(reactions) + list(val_reactions or []))
    lr = cfg.lr
    if lr is None:
        lr, _ = lr_range_test(reactions, cfg, vocab)

    seed_everything(cfg.seed, cfg.deterministic)
    model = ReactionEncoder(cfg.encoder, vocab)
    opt = torch.optim.Adam(model.parameters(), lr=lr, weight_decay=cfg.weight_decay)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=cfg.halve_every, gamma=0.5)
    d_max = cfg.encoder.sp_cutoff
    val_batches = []
    if val_reactions:
        val_batches = [
            build_batch(list(val_reactions[i : i + cfg.batch_size]), vocab, d_max, with_labels=True)
            for i in range(0, len(val_reactions), cfg.batch_size)
        ]
    rng = np.random.default_rng(cfg.seed)
    good_state = copy.deepcopy(model.state_dict())
    best_state, best_val, best_epoch = good_state, float("inf"), -1
    history = []
    stale = 0
    for epoch in range(cfg.epochs):
        model.train()
        tr = []
        for idx in _batches(len(reactions), cfg.batch_size, rng):
            batch = build_batch([reactions[i] for i in idx], vocab, d_max, with_labels=True)
            opt.zero_grad()
            loss = pretrain_loss(model, batch, cfg.tau, cfg.lam)["total"]
            if not torch.isfinite(loss):
                model.load_state_dict(good_state)
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}; restored last good state")
            loss.backward()
            if cfg.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            tr.append(loss.item())
        sched.step()
        good_state = copy.deepcopy(model.state_dict())
        val = evaluate_loss(model, val_batches, cfg.tau, cfg.lam) if val_batches else float(np.mean(tr))
        history.append({"epoch": epoch, "train_loss": float(np.mean(tr)), "val_loss": val, "lr": opt.param_groups[0]["lr"]})
        logger.info("epoch %d train %.4f val %.4f", epoch, np.mean(tr), val)
        if val < best_val - 1e-6:
            best_val, best_epoch, best_state, stale = val, epoch, good_state, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                break
    model.load_state_dict(best_state)
    model.eval()
    return PretrainResult(model, history, best_epoch, float(lr))


# --- evaluation helpers -------------------------------------------------------


def pairing_accuracy(x: np.ndarray, v: np.ndarray, batch_size: int = 32) -> float:
    """In-batch top-1 accuracy: row i of x must score highest against row i of v."""
    hits, total = 0, 0
    for i in range(0, len(x), batch_size):
        s = x[i : i + batch_size] @ v[i : i + batch_size].T
        if len(s) < 2:
            continue
        hits += int((s.argmax(axis=1) == np.arange(len(s))).sum())
        total += len(s)
    return hits / max(total, 1)


@torch.no_grad()
def center_predictions(model: ReactionEncoder, reactions: Sequence[Reaction], batch_size: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """Flattened (logits, labels) over all real reactant atoms."""
    model.eval()
    logits, labels = [], []
    for i in range(0, len(reactions), batch_size):
        b = build_batch(list(reactions[i : i + batch_size]), model.vocab, model.cfg.sp_cutoff, with_labels=True)
        out = model(b, with_center=True)
        lg = out["center_logits"].double().numpy()
        for k, lab in enumerate(b.center_labels):
            logits.append(lg[k, : len(lab)])
            labels.append(lab)
    return np.concatenate(logits), np.concatenate(labels)


# --- checkpoints ----------------------------------------------------------------


def save_encoder(path: Union[str, Path], model: ReactionEncoder, extra: Optional[dict] = None) -> None:
    tensors = {k: v.detach().cpu().float().numpy() for k, v in model.state_dict().items()}
    header = {
        "kind": "encoder",
        "config": asdict(model.cfg),
        "vocab": model.vocab.tokens,
        "extra": extra or {},
    }
    save_tensors(path, tensors, header)


def load_encoder(path: Union[str, Path]) -> ReactionEncoder:
    tensors, header = load_tensors(path)
    if header.get("kind") != "encoder":
        raise ContractError(f"{path} holds a {header.get('kind')!r} checkpoint, not an encoder")
    model = ReactionEncoder(EncoderConfig(**header["config"]), TokenVocab(header["vocab"]))
    model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    model.eval()
    return model
