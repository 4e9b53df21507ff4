"""Conditional VAE over reaction paths with an invariant set generator.

For a path prefix the model emits a set of response vectors (sub-reactant and
reagent embeddings); each vector is mapped to a real library molecule by exact
inner-product search and the forward predictor turns (last structure,
responses) into the next structure.
"""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from scipy.optimize import linear_sum_assignment
from sklearn.linear_model import Ridge

from .chem import canonicalize, get_backend
from .encoder import ReactionEncoder, mlp
from .errors import ContractError, EmptyResultError, ParameterError, PredictFailure, TrainingDiverged
from .io import load_tensors, save_tensors
from .network import PathPair
from .predictor import REAGENT, ForwardPredictor, Response
from .utils import seed_everything, torch_generator

logger = logging.getLogger(__name__)


@dataclass
class GenConfig:
    latent_dim: int = 1024  # width of the reference latents R
    z_dim: int = 512
    ref_channels: int = 512  # K rows of the reference set
    hidden: int = 512
    delta: float = 0.5
    n_max: int = 4
    max_path_len: int = 3
    tau: float = 1.0
    kl_weight: float = 1.0
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    empty_retries: int = 5
    deterministic: bool = False

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ContractError(f"delta must lie in (0, 1), got {self.delta}")
        if self.n_max < 1:
            raise ContractError("n_max must be at least 1")
        if self.n_max > self.ref_channels:
            raise ContractError("n_max cannot exceed the reference-set size")

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown generator config keys: {sorted(unknown)}")
        return cls(**d)


# --- embeddings of structures and entities -------------------------------------


class Embedder:
    """Frozen-encoder lookups with a cache: structures and sub-reactants by graph readout, reagents by text CLS."""

    def __init__(self, encoder: ReactionEncoder):
        self.encoder = encoder
        self.dim = encoder.cfg.model_dim
        self._cache: Dict[Tuple[str, str], np.ndarray] = {}

    def _fill(self, keys: Sequence[Tuple[str, str]]):
        missing = sorted({k for k in keys if k not in self._cache})
        if missing:
            vecs = self.encoder.entity_embeddings(missing)
            for k, v in zip(missing, vecs):
                self._cache[k] = v

    def entities(self, items: Sequence[Tuple[str, str]]) -> np.ndarray:
        keys = [(canonicalize(s), REAGENT if role == REAGENT else "structure") for s, role in items]
        self._fill(keys)
        if not keys:
            return np.zeros((0, self.dim))
        return np.stack([self._cache[k] for k in keys])

    def structures(self, smiles: Sequence[str]) -> np.ndarray:
        return self.entities([(s, "structure") for s in smiles])

    def responses(self, responses: Sequence[Response]) -> np.ndarray:
        return self.entities([(r.smiles, r.role) for r in responses])


# --- model ---------------------------------------------------------------------


class SetGenerator(nn.Module):
    """Reference-set decoder producing up to n_max rows plus selection logits.

    a = MLP1(cond); c = Theta a / ||theta_i||; s = top-n_max of c (descending);
    c~ = softmax(c[s]); X = R[s] * (c~ W1) + c~ W2; X = MLP2(X + cond);
    row i is selected when sigmoid(MLP3(X_i)) > delta.
    """

    def __init__(self, cond_dim: int, out_dim: int, cfg: GenConfig):
        super().__init__()
        self.n_max = cfg.n_max
        self.delta = cfg.delta
        self.mlp1 = mlp(cond_dim, cfg.hidden, cfg.hidden)
        self.theta = nn.Parameter(torch.randn(cfg.ref_channels, cfg.hidden) / math.sqrt(cfg.hidden))
        self.R = nn.Parameter(torch.randn(cfg.ref_channels, cfg.latent_dim))
        self.W1 = nn.Parameter(torch.randn(1, cfg.latent_dim))
        self.W2 = nn.Parameter(torch.randn(1, cfg.latent_dim) * 0.1)
        self.mlp2 = mlp(cfg.latent_dim + cond_dim, cfg.hidden, out_dim)
        self.mlp3 = mlp(out_dim, cfg.hidden, 1)

    def scores(self, cond: torch.Tensor) -> torch.Tensor:
        norms = self.theta.norm(dim=1)
        if bool((norms == 0).any()):
            raise ParameterError("a reference angle row has zero norm")
        return (self.mlp1(cond) @ self.theta.T) / norms

    def pick(self, c: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Indices of the n_max largest scores (descending) and their softmax weights."""
        c_top, s = torch.topk(c, self.n_max, dim=1, sorted=True)
        return s, torch.softmax(c_top, dim=1)

    def forward(self, cond: torch.Tensor):
        c = self.scores(cond)
        s, ct = self.pick(c)
        ct = ct.unsqueeze(-1)  # [B, n_max, 1]
        X = self.R[s] * (ct * self.W1) + ct * self.W2
        X = self.mlp2(torch.cat([X, cond.unsqueeze(1).expand(-1, self.n_max, -1)], dim=-1))
        logits = self.mlp3(X).squeeze(-1)
        return X, logits, s, c

    def select(self, logits: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(logits) > self.delta


def gaussian_kl(mu_q, logvar_q, mu_p, logvar_p) -> torch.Tensor:
    """KL(N(mu_q, var_q) || N(mu_p, var_p)) for diagonal Gaussians, summed over dimensions."""
    return 0.5 * (logvar_p - logvar_q + (logvar_q.exp() + (mu_q - mu_p) ** 2) / logvar_p.exp() - 1.0).sum(-1)


class PathCVAE(nn.Module):
    def __init__(self, entity_dim: int, cfg: GenConfig):
        super().__init__()
        self.cfg = cfg
        self.entity_dim = entity_dim
        H, Z = cfg.hidden, cfg.z_dim
        self.lstm = nn.LSTM(entity_dim, H, batch_first=True)
        self.target_pool = mlp(entity_dim, H, H)
        self.recognition = mlp(2 * H + 1, H, 2 * Z)
        self.prior = mlp(H, H, 2 * Z)
        self.set_gen = SetGenerator(Z + H, entity_dim, cfg)
        self.termination = mlp(H + Z, H, 1)

    def context(self, prefix: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        packed = nn.utils.rnn.pack_padded_sequence(prefix, lengths.cpu(), batch_first=True, enforce_sorted=False)
        _, (h, _) = self.lstm(packed)
        return h[-1]

    def encode_targets(self, targets: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        # sum pooling keeps the recognition input order-free
        m = mask.unsqueeze(-1).to(targets.dtype)
        pooled = (self.target_pool(targets) * m).sum(1)
        count = mask.sum(1, keepdim=True).to(targets.dtype)
        return torch.cat([pooled, count], dim=-1)

    def prior_params(self, ctx):
        mu, logvar = self.prior(ctx).chunk(2, dim=-1)
        return mu, logvar

    def recognition_params(self, ctx, targets, mask):
        mu, logvar = self.recognition(torch.cat([ctx, self.encode_targets(targets, mask)], dim=-1)).chunk(2, dim=-1)
        return mu, logvar

    def decode(self, z, ctx):
        cond = torch.cat([z, ctx], dim=-1)
        Y, logits, s, c = self.set_gen(cond)
        term = self.termination(torch.cat([ctx, z], dim=-1)).squeeze(-1)
        return Y, logits, term


def set_generate(model: PathCVAE, z: torch.Tensor, ctx: torch.Tensor):
    """Rows, selection probabilities and the selected-row mask for latent ``z`` and context ``ctx``."""
    cond = torch.cat([z, ctx], dim=-1)
    Y, logits, _, _ = model.set_gen(cond)
    probs = torch.sigmoid(logits)
    return Y, probs, probs > model.cfg.delta


def hungarian_match(scores: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Rows/cols of the assignment maximising the summed scores (generated rows x targets)."""
    rows, cols = linear_sum_assignment(-scores)
    return rows, cols


def match_loss(
    generated: torch.Tensor,
    sel_logits: torch.Tensor,
    targets: Sequence[torch.Tensor],
    target_keys: Sequence[Sequence[str]],
    tau: float = 1.0,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Contrastive reconstruction and size BCE after optimal row/target matching.

    ``generated`` is [B, n_max, m]; ``targets[b]`` is [t_b, m] with string keys
    used to deduplicate the in-batch candidate pool.
    """
    B, n_max, _ = generated.shape
    indicator = torch.zeros(B, n_max, dtype=generated.dtype)
    rows_all, keys_all = [], []
    pool_keys: Dict[str, int] = {}
    pool_vecs = []
    for b in range(B):
        t = targets[b]
        if len(t) > n_max:
            raise ContractError(f"{len(t)} targets exceed n_max={n_max}")
        for k, key in enumerate(target_keys[b]):
            if key not in pool_keys:
                pool_keys[key] = len(pool_vecs)
                pool_vecs.append(t[k])
        if len(t) == 0:
            continue
        sc = (generated[b] @ t.T).detach().double().numpy()
        r, c = hungarian_match(sc)
        indicator[b, torch.as_tensor(r)] = 1.0
        rows_all.append(generated[b, torch.as_tensor(r)])
        keys_all.extend(pool_keys[target_keys[b][j]] for j in c)
    bce = F.binary_cross_entropy_with_logits(sel_logits, indicator)
    if not rows_all:
        return generated.sum() * 0.0, bce
    rows = torch.cat(rows_all)
    pool = torch.stack(pool_vecs)
    logits = rows @ pool.T / tau
    contrast = F.cross_entropy(logits, torch.as_tensor(keys_all))
    return contrast, bce


# --- training -------------------------------------------------------------------


@dataclass
class PairTensors:
    prefix: torch.Tensor  # [B, L, e]
    lengths: torch.Tensor
    targets: List[torch.Tensor]
    target_keys: List[List[str]]
    target_pad: torch.Tensor  # [B, T, e]
    target_mask: torch.Tensor
    terminal: torch.Tensor


def pair_tensors(pairs: Sequence[PathPair], embedder: Embedder, dtype=torch.float32) -> PairTensors:
    B = len(pairs)
    L = max(len(p.prefix) for p in pairs)
    T = max([len(p.target) for p in pairs] + [1])
    e = embedder.dim
    prefix = np.zeros((B, L, e))
    tpad = np.zeros((B, T, e))
    tmask = np.zeros((B, T), dtype=bool)
    targets, keys = [], []
    for b, p in enumerate(pairs):
        prefix[b, : len(p.prefix)] = embedder.structures(p.prefix)
        tv = embedder.responses(p.target)
        tpad[b, : len(tv)] = tv
        tmask[b, : len(tv)] = True
        targets.append(torch.as_tensor(tv, dtype=dtype))
        keys.append([f"{r.role}:{canonicalize(r.smiles)}" for r in p.target])
    return PairTensors(
        torch.as_tensor(prefix, dtype=dtype),
        torch.as_tensor([len(p.prefix) for p in pairs]),
        targets,
        keys,
        torch.as_tensor(tpad, dtype=dtype),
        torch.as_tensor(tmask),
        torch.as_tensor([float(p.terminal) for p in pairs], dtype=dtype),
    )


def cvae_loss(model: PathCVAE, batch: PairTensors, generator: Optional[torch.Generator] = None) -> Dict[str, torch.Tensor]:
    ctx = model.context(batch.prefix, batch.lengths)
    mu_r, lv_r = model.recognition_params(ctx, batch.target_pad, batch.target_mask)
    mu_p, lv_p = model.prior_params(ctx)
    eps = torch.randn(mu_r.shape, generator=generator, dtype=mu_r.dtype)
    z = mu_r + torch.exp(0.5 * lv_r) * eps
    Y, logits, term = model.decode(z, ctx)
    contrast, size = match_loss(Y, logits, batch.targets, batch.target_keys, model.cfg.tau)
    term_loss = F.binary_cross_entropy_with_logits(term, batch.terminal)
    kl = gaussian_kl(mu_r, lv_r, mu_p, lv_p).mean()
    total = contrast + size + term_loss + model.cfg.kl_weight * kl
    return {"total": total, "contrast": contrast, "size": size, "termination": term_loss, "kl": kl}


def infer_n_max(pairs: Sequence[PathPair]) -> int:
    return max(len(p.target) for p in pairs)


@dataclass
class CVAEResult:
    model: PathCVAE
    history: List[dict]


def train_cvae(pairs: Sequence[PathPair], embedder: Embedder, cfg: GenConfig) -> CVAEResult:
    """Train the path CVAE on (prefix, responses) pairs with the encoder frozen inside ``embedder``."""
    if not pairs:
        raise ContractError("no training pairs")
    if infer_n_max(pairs) > cfg.n_max:
        raise ContractError(f"training targets need n_max >= {infer_n_max(pairs)}")
    for p in embedder.encoder.parameters():
        p.requires_grad_(False)
    seed_everything(cfg.seed, cfg.deterministic)
    model = PathCVAE(embedder.dim, cfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=20, gamma=0.5)
    gen = torch_generator(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    # embed once; the encoder is frozen
    embedder.structures(sorted({s for p in pairs for s in p.prefix}))
    embedder.responses(sorted({r for p in pairs for r in p.target}, key=lambda r: (r.role, r.smiles)))
    history = []
    good = copy.deepcopy(model.state_dict())
    for epoch in range(cfg.epochs):
        model.train()
        order = rng.permutation(len(pairs))
        parts: Dict[str, list] = {}
        for i in range(0, len(order), cfg.batch_size):
            batch = pair_tensors([pairs[j] for j in order[i : i + cfg.batch_size]], embedder)
            opt.zero_grad()
            losses = cvae_loss(model, batch, gen)
            if not torch.isfinite(losses["total"]):
                model.load_state_dict(good)
                raise TrainingDiverged(f"non-finite generator loss at epoch {epoch}; restored last good state")
            losses["total"].backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), 5.0)
            opt.step()
            for k, v in losses.items():
                parts.setdefault(k, []).append(v.item())
        sched.step()
        good = copy.deepcopy(model.state_dict())
        rec = {"epoch": epoch, **{k: float(np.mean(v)) for k, v in parts.items()}}
        history.append(rec)
        if epoch % 10 == 0:
            logger.info("gen epoch %d %s", epoch, rec)
    model.eval()
    return CVAEResult(model, history)


# --- retrieval -------------------------------------------------------------------


@dataclass(frozen=True)
class IndexEntry:
    smiles: str
    role: str


class RetrievalIndex:
    """Exact inner-product search over library embeddings; ties resolve to the lower id."""

    def __init__(self, vectors: np.ndarray, entries: Sequence[IndexEntry]):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(vectors) == 0:
            raise ContractError("a retrieval index needs a non-empty 2-D matrix")
        if len(entries) != len(vectors):
            raise ContractError("one entry per vector is required")
        self.vectors = vectors
        self.vectors.setflags(write=False)
        self.entries = tuple(entries)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.entries)

    def scores(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape[-1] != self.dim:
            raise ContractError(f"query width {vec.shape[-1]} differs from index width {self.dim}")
        return self.vectors @ vec

    def query(self, vec: np.ndarray, k: int = 1) -> List[int]:
        s = self.scores(vec)
        order = np.lexsort((np.arange(len(s)), -s))
        return order[:k].tolist()

    def save(self, path: Union[str, Path]) -> None:
        save_tensors(path, {"vectors": self.vectors}, {"kind": "index", "entries": [asdict(e) for e in self.entries]})

    @classmethod
    def load(cls, path) -> "RetrievalIndex":
        tensors, header = load_tensors(path)
        if header.get("kind") != "index":
            raise ContractError(f"{path} is not a retrieval index")
        return cls(tensors["vectors"].astype(np.float64), [IndexEntry(**e) for e in header["entries"]])


def build_index(library: Sequence[Tuple[str, str]], embedder: Embedder) -> RetrievalIndex:
    """Index (smiles, role) library entities with the frozen encoder."""
    if not library:
        raise ContractError("empty library")
    vecs = embedder.entities(library)
    return RetrievalIndex(vecs, [IndexEntry(canonicalize(s), r) for s, r in library])


# --- sampling ----------------------------------------------------------------------


@dataclass
class GeneratedPath:
    seed: str
    structures: List[str]
    steps: List[Tuple[Response, ...]] = field(default_factory=list)
    terminal_reason: str = ""
    truncated: bool = False

    @property
    def depth(self) -> int:
        return len(self.steps)

    @property
    def final(self) -> str:
        return self.structures[-1]

    def to_dict(self):
        return {
            "seed": self.seed,
            "steps": [
                {"main": self.structures[i], "responses": [r.to_dict() for r in s], "product": self.structures[i + 1]}
                for i, s in enumerate(self.steps)
            ],
            "terminal_reason": self.terminal_reason,
            "truncated": self.truncated,
        }


@torch.no_grad()
def sample_path(
    seed_smiles: str,
    model: PathCVAE,
    embedder: Embedder,
    index: RetrievalIndex,
    predictor: ForwardPredictor,
    rng_seed: int = 0,
    max_path_len: Optional[int] = None,
    termination_criterion: Optional[Callable[[str], bool]] = None,
    use_termination_head: bool = True,
) -> GeneratedPath:
    """Roll out one reaction path from a seed structure."""
    model.eval()
    cfg = model.cfg
    max_len = cfg.max_path_len if max_path_len is None else max_path_len
    gen = torch_generator(rng_seed)
    path = GeneratedPath(canonicalize(seed_smiles), [canonicalize(seed_smiles)])
    dtype = next(model.parameters()).dtype
    while True:
        cur = path.structures[-1]
        if termination_criterion is not None and termination_criterion(cur):
            path.terminal_reason = "user_criterion"
            break
        if path.depth >= max_len:
            path.terminal_reason = "max_path_len"
            break
        prefix = torch.as_tensor(embedder.structures(path.structures), dtype=dtype).unsqueeze(0)
        ctx = model.context(prefix, torch.as_tensor([len(path.structures)]))
        mu, lv = model.prior_params(ctx)
        rows = None
        for _ in range(cfg.empty_retries):
            z = mu + torch.exp(0.5 * lv) * torch.randn(mu.shape, generator=gen, dtype=dtype)
            Y, probs, sel = set_generate(model, z, ctx)
            if bool(sel.any()):
                rows = Y[0][sel[0]].double().numpy()
                break
        if rows is None:
            path.terminal_reason = "empty_set"
            break
        picked = []
        for r in rows:
            e = index.entries[index.query(r, 1)[0]]
            resp = Response(e.smiles, e.role)
            if resp not in picked:
                picked.append(resp)
        responses = tuple(sorted(picked, key=lambda x: (x.role, x.smiles)))
        try:
            product = predictor.predict(cur, responses)
        except PredictFailure:
            path.terminal_reason = "predictor_failure"
            path.truncated = True
            break
        path.steps.append(responses)
        path.structures.append(product)
        if use_termination_head:
            term = model.termination(torch.cat([ctx, z], dim=-1))
            if float(torch.sigmoid(term)) > 0.5:
                path.terminal_reason = "termination_head"
                break
    return path


# --- de novo mode ---------------------------------------------------------------


class MWHead:
    """Linear regression from a seed embedding to the target molecular weight."""

    def __init__(self, alpha: float = 1.0):
        self.model = Ridge(alpha=alpha)
        self.fitted = False

    def fit(self, seed_vecs: np.ndarray, target_mw: np.ndarray) -> "MWHead":
        self.model.fit(seed_vecs, target_mw)
        self.fitted = True
        return self

    def predict(self, vecs: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise ContractError("MW head is not fitted")
        return self.model.predict(np.atleast_2d(vecs))

    def to_dict(self):
        return {"coef": self.model.coef_.tolist(), "intercept": float(self.model.intercept_), "alpha": self.model.alpha}

    @classmethod
    def from_dict(cls, d) -> "MWHead":
        h = cls(d.get("alpha", 1.0))
        h.model.coef_ = np.asarray(d["coef"])
        h.model.intercept_ = float(d["intercept"])
        h.model.n_features_in_ = len(d["coef"])
        h.fitted = True
        return h


def fit_mw_head(paths, embedder: Embedder, alpha: float = 1.0) -> MWHead:
    """Regress final-structure MW on first-structure embedding over training paths."""
    backend = get_backend()
    seeds = [p.structures[0] for p in paths]
    mw = np.array([backend.mol_weight(p.structures[-1]) for p in paths])
    return MWHead(alpha).fit(embedder.structures(seeds), mw)


def de_novo_generate(
    fragments: Sequence[str],
    mw_head: MWHead,
    model: PathCVAE,
    embedder: Embedder,
    index: RetrievalIndex,
    predictor: ForwardPredictor,
    n: int = 8,
    seed: int = 0,
    max_path_len: Optional[int] = None,
) -> List[GeneratedPath]:
    """Grow molecules from random fragments until their MW reaches the head's prediction."""
    if not fragments:
        raise EmptyResultError("fragment library is empty")
    backend = get_backend()
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        frag = fragments[int(rng.integers(len(fragments)))]
        target = float(mw_head.predict(embedder.structures([frag]))[0])
        crit = lambda s, t=target: backend.mol_weight(s) >= t
        out.append(sample_path(frag, model, embedder, index, predictor, rng_seed=seed * 100003 + i, max_path_len=max_path_len, termination_criterion=crit))
    return out


# --- evaluation ------------------------------------------------------------------


@torch.no_grad()
def ranking_score(
    model: PathCVAE,
    pairs: Sequence[PathPair],
    embedder: Embedder,
    library: Sequence[Tuple[str, str]],
    n_distractors: int = 63,
    seed: int = 0,
) -> float:
    """Mean normalised rank of each true response among random library distractors.

    Candidates are scored by their best inner product with the selected rows
    generated from the prior mean (all rows when none is selected); 0 is a
    perfect ranking and 0.5 the random baseline.
    """
    model.eval()
    rng = np.random.default_rng(seed)
    lib_keys = [(canonicalize(s), r) for s, r in library]
    lib_vecs = embedder.entities(lib_keys)
    ranks = []
    for p in pairs:
        if not p.target:
            continue
        batch = pair_tensors([p], embedder)
        ctx = model.context(batch.prefix, batch.lengths)
        mu, _ = model.prior_params(ctx)
        Y, probs, sel = set_generate(model, mu, ctx)
        rows = Y[0][sel[0]] if bool(sel.any()) else Y[0]
        rows = rows.double().numpy()
        tkeys = {(canonicalize(r.smiles), r.role) for r in p.target}
        allowed = [i for i, k in enumerate(lib_keys) if k not in tkeys]
        d_idx = rng.choice(allowed, size=n_distractors, replace=False)
        d_score = (lib_vecs[d_idx] @ rows.T).max(axis=1)
        t_vecs = embedder.responses(p.target)
        for t in (t_vecs @ rows.T).max(axis=1):
            ranks.append(((d_score > t).sum() + 0.5 * (d_score == t).sum()) / n_distractors)
    return float(np.mean(ranks))


# --- checkpoints -------------------------------------------------------------------


def save_generator(path, model: PathCVAE, extra: Optional[dict] = None) -> None:
    tensors = {k: v.detach().cpu().float().numpy() for k, v in model.state_dict().items()}
    save_tensors(path, tensors, {"kind": "generator", "config": asdict(model.cfg), "entity_dim": model.entity_dim, "extra": extra or {}})


def load_generator(path) -> Tuple[PathCVAE, dict]:
    tensors, header = load_tensors(path)
    if header.get("kind") != "generator":
        raise ContractError(f"{path} is not a generator checkpoint")
    model = PathCVAE(header["entity_dim"], GenConfig(**header["config"]))
    model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    model.eval()
    return model, header.get("extra", {})
