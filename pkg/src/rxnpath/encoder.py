"""Multimodal reaction encoder.

Reactants and products go through a graph transformer whose attention logits
carry a learned bond-type bias and a learned shortest-path-bucket bias:

    A_ij = (h_i W_Q)(h_j W_K)^T / sqrt(d) + b(e_ij) + c(SP_ij)

Reagents are SELFIES token sequences encoded by a positional transformer; the
per-reagent CLS vectors are then read out by a second transformer without
positional encoding so the reagent set is order-free.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .chem import Molecule, parse_molecule
from .errors import ContractError, NumericalError, VocabError
from .featurize import (
    D_MAX,
    N_CHARGE_IDS,
    N_EDGE_IDS,
    N_ELEMENT_IDS,
    N_HYBRID_IDS,
    N_RING_IDS,
    GraphBatch,
    GraphItem,
    collate,
    featurize,
)
from .reaction import CLS_TOKEN, Reaction, label_reactive_centers, tokenize_reagent


@dataclass
class EncoderConfig:
    n_heads: int = 4
    model_dim: int = 512
    n_layers: int = 2
    sp_cutoff: int = D_MAX
    head_hidden: int = 512
    proj_dim: int = 512
    text_layers: int = 2
    set_layers: int = 1
    center_layers: int = 2
    ffn_mult: int = 2
    max_tokens: int = 128
    dropout: float = 0.0

    def __post_init__(self):
        if self.model_dim % self.n_heads:
            raise ContractError(f"model_dim {self.model_dim} not divisible by n_heads {self.n_heads}")

    @property
    def n_sp_buckets(self) -> int:
        return self.sp_cutoff + 3


# --- vocabulary -------------------------------------------------------------

PAD_TOKEN = "[PAD]"


class TokenVocab:
    def __init__(self, tokens: Sequence[str]):
        uniq = [PAD_TOKEN, CLS_TOKEN] + sorted(set(tokens) - {PAD_TOKEN, CLS_TOKEN})
        self.tokens = uniq
        self.index = {t: i for i, t in enumerate(uniq)}

    @classmethod
    def build(cls, extra: Sequence[str] = ()) -> "TokenVocab":
        import selfies as sf

        return cls(sorted(sf.get_semantic_robust_alphabet()) + list(extra))

    @classmethod
    def from_reactions(cls, reactions: Sequence[Reaction]) -> "TokenVocab":
        toks = set()
        for r in reactions:
            for g in r.reagents:
                toks.update(tokenize_reagent(g))
        return cls.build(sorted(toks))

    def __len__(self):
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        try:
            return [self.index[t] for t in tokens]
        except KeyError as exc:
            raise VocabError(f"token {exc.args[0]!r} outside the reagent vocabulary") from None


# --- attention blocks ---------------------------------------------------------


class BiasedSelfAttention(nn.Module):
    """Multi-head self-attention with optional per-head edge and shortest-path biases."""

    def __init__(self, dim: int, n_heads: int, n_edge_ids: int = 0, n_sp_buckets: int = 0):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.edge_bias = nn.Embedding(n_edge_ids, n_heads) if n_edge_ids else None
        self.sp_bias = nn.Embedding(n_sp_buckets, n_heads) if n_sp_buckets else None
        for emb in (self.edge_bias, self.sp_bias):
            if emb is not None:
                nn.init.normal_(emb.weight, std=0.02)

    def logits(self, h, edges=None, sp=None):
        B, N, D = h.shape
        q, k, _ = self.qkv(h).view(B, N, 3, self.n_heads, self.head_dim).permute(2, 0, 3, 1, 4)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if edges is not None and self.edge_bias is not None:
            scores = scores + self.edge_bias(edges).permute(0, 3, 1, 2)
        if sp is not None and self.sp_bias is not None:
            scores = scores + self.sp_bias(sp).permute(0, 3, 1, 2)
        return scores

    def forward(self, h, mask, edges=None, sp=None):
        B, N, D = h.shape
        scores = self.logits(h, edges, sp)
        if torch.isnan(scores).any():
            raise NumericalError("NaN in attention logits")
        scores = scores.masked_fill(~mask[:, None, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        v = self.qkv(h).view(B, N, 3, self.n_heads, self.head_dim)[:, :, 2].transpose(1, 2)
        out = (attn @ v).transpose(1, 2).reshape(B, N, D)
        return self.out(out), attn


class TransformerLayer(nn.Module):
    def __init__(self, dim, n_heads, ffn_mult=2, n_edge_ids=0, n_sp_buckets=0, dropout=0.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = BiasedSelfAttention(dim, n_heads, n_edge_ids, n_sp_buckets)
        self.norm2 = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, ffn_mult * dim), nn.GELU(), nn.Linear(ffn_mult * dim, dim))
        self.drop = nn.Dropout(dropout)

    def forward(self, h, mask, edges=None, sp=None):
        a, attn = self.attn(self.norm1(h), mask, edges, sp)
        h = h + self.drop(a)
        h = h + self.drop(self.ffn(self.norm2(h)))
        return h * mask[..., None].to(h.dtype), attn


class GraphTransformer(nn.Module):
    def __init__(self, cfg: EncoderConfig, n_layers: Optional[int] = None):
        super().__init__()
        D = cfg.model_dim
        self.element = nn.Embedding(N_ELEMENT_IDS, D)
        self.charge = nn.Embedding(N_CHARGE_IDS, D)
        self.hybrid = nn.Embedding(N_HYBRID_IDS, D)
        self.ring = nn.Embedding(N_RING_IDS, D)
        self.layers = nn.ModuleList(
            TransformerLayer(D, cfg.n_heads, cfg.ffn_mult, N_EDGE_IDS, cfg.n_sp_buckets, cfg.dropout)
            for _ in range(cfg.n_layers if n_layers is None else n_layers)
        )
        self.norm = nn.LayerNorm(D)

    def embed_nodes(self, nodes):
        return self.element(nodes[..., 0]) + self.charge(nodes[..., 1]) + self.hybrid(nodes[..., 2]) + self.ring(nodes[..., 3])

    def forward(self, nodes, edges, sp, mask, virtual_index, return_attention=False):
        h = self.embed_nodes(nodes) * mask[..., None].to(self.element.weight.dtype)
        maps = []
        for layer in self.layers:
            h, attn = layer(h, mask, edges, sp)
            if return_attention:
                maps.append(attn)
        h = self.norm(h) * mask[..., None].to(h.dtype)
        readout = h[torch.arange(h.shape[0]), virtual_index]
        if return_attention:
            return h, readout, maps
        return h, readout


def sinusoidal_positions(n: int, dim: int) -> torch.Tensor:
    pos = torch.arange(n, dtype=torch.float64)[:, None]
    freq = torch.exp(torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim))
    pe = torch.zeros(n, dim, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(pos * freq)
    pe[:, 1::2] = torch.cos(pos * freq[: dim // 2])
    return pe.float()


class ReagentEncoder(nn.Module):
    """Two-stage reagent encoder: token transformer per reagent, then an order-free set transformer."""

    def __init__(self, cfg: EncoderConfig, vocab_size: int):
        super().__init__()
        D = cfg.model_dim
        self.tok = nn.Embedding(vocab_size, D, padding_idx=0)
        self.register_buffer("pos", sinusoidal_positions(cfg.max_tokens, D), persistent=False)
        self.token_layers = nn.ModuleList(
            TransformerLayer(D, cfg.n_heads, cfg.ffn_mult, dropout=cfg.dropout) for _ in range(cfg.text_layers)
        )
        self.token_norm = nn.LayerNorm(D)
        self.set_layers = nn.ModuleList(
            TransformerLayer(D, cfg.n_heads, cfg.ffn_mult, dropout=cfg.dropout) for _ in range(cfg.set_layers)
        )
        self.set_norm = nn.LayerNorm(D)
        self.readout_token = nn.Parameter(torch.randn(D) * 0.02)
        self.null = nn.Parameter(torch.randn(D) * 0.02)
        self.max_tokens = cfg.max_tokens

    def encode_tokens(self, ids, mask):
        """CLS embedding of each reagent; ``ids`` is [M, L] with CLS at position 0."""
        L = ids.shape[1]
        if L > self.max_tokens:
            raise ContractError(f"reagent of {L} tokens exceeds max_tokens={self.max_tokens}")
        h = self.tok(ids) + self.pos[:L].to(self.tok.weight.dtype)
        h = h * mask[..., None].to(h.dtype)
        for layer in self.token_layers:
            h, _ = layer(h, mask)
        return self.token_norm(h[:, 0])

    def readout(self, cls_vecs, group_mask):
        """Set readout over [B, R, D] CLS vectors; rows with no reagents return the null vector."""
        B, R, D = cls_vecs.shape
        tokens = torch.cat([cls_vecs, self.readout_token.expand(B, 1, D)], dim=1)
        mask = torch.cat([group_mask, torch.ones(B, 1, dtype=torch.bool, device=group_mask.device)], dim=1)
        h = tokens * mask[..., None].to(tokens.dtype)
        for layer in self.set_layers:
            h, _ = layer(h, mask)
        out = self.set_norm(h[:, -1])
        empty = ~group_mask.any(dim=1)
        if empty.any():
            out = torch.where(empty[:, None], self.null.expand(B, D), out)
        return out


class AttentionPool(nn.Module):
    """Order-free attention pooling over a padded entity set."""

    def __init__(self, dim: int):
        super().__init__()
        self.query = nn.Parameter(torch.randn(dim) * 0.02)
        self.key = nn.Linear(dim, dim)
        self.null = nn.Parameter(torch.randn(dim) * 0.02)

    def forward(self, x, mask):
        B, S, D = x.shape
        if S == 0:
            return self.null.expand(B, D)
        scores = (self.key(x) @ self.query) / math.sqrt(D)
        scores = scores.masked_fill(~mask, float("-inf"))
        empty = ~mask.any(dim=1)
        scores = torch.where(empty[:, None], torch.zeros_like(scores), scores)
        w = torch.softmax(scores, dim=1)
        out = (w[..., None] * x).sum(dim=1)
        return torch.where(empty[:, None], self.null.expand(B, D), out)


def mlp(d_in, hidden, d_out):
    return nn.Sequential(nn.Linear(d_in, hidden), nn.GELU(), nn.Linear(hidden, d_out))


class CenterHead(nn.Module):
    """Per-atom reactive-centre logits from reactant tokens plus two context tokens.

    The virtual-node slot is overwritten with the sum-pooled atom tokens and the
    reagent readout is appended as one more column, both reached through the
    VIRTUAL shortest-path bucket.
    """

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        D = cfg.model_dim
        self.context_type = nn.Parameter(torch.randn(2, D) * 0.02)
        self.layers = nn.ModuleList(
            TransformerLayer(D, cfg.n_heads, cfg.ffn_mult, N_EDGE_IDS, cfg.n_sp_buckets, cfg.dropout)
            for _ in range(cfg.center_layers)
        )
        self.norm = nn.LayerNorm(D)
        self.out = nn.Linear(D, 1)
        self.virtual_bucket = cfg.sp_cutoff + 2

    def forward(self, tokens, edges, sp, mask, virtual_index, reagent_readout):
        B, N, D = tokens.shape
        ar = torch.arange(B)
        atom_mask = mask.clone()
        atom_mask[ar, virtual_index] = False
        pooled = (tokens * atom_mask[..., None].to(tokens.dtype)).sum(dim=1)
        h = tokens.clone()
        h[ar, virtual_index] = pooled + self.context_type[0]
        h = torch.cat([h, (reagent_readout + self.context_type[1])[:, None]], dim=1)
        m = torch.cat([mask, torch.ones(B, 1, dtype=torch.bool)], dim=1)
        e = F.pad(edges, (0, 1, 0, 1), value=0)
        s = F.pad(sp, (0, 1, 0, 1), value=self.virtual_bucket)
        s[:, N, N] = 0
        for layer in self.layers:
            h, _ = layer(h, m, e, s)
        logits = self.out(self.norm(h[:, :N])).squeeze(-1)
        return logits, atom_mask


# --- batch preparation ----------------------------------------------------------


@lru_cache(maxsize=100_000)
def _graph_item(smiles_key: Tuple[str, ...], d_max: int) -> GraphItem:
    return featurize([parse_molecule(s) for s in smiles_key], d_max)


def molecule_key(mol: Molecule) -> str:
    return mol.canonical_string


def canonical_order(mols: Sequence[Molecule]) -> List[int]:
    return sorted(range(len(mols)), key=lambda i: (mols[i].canonical_string, mols[i].smiles))


@dataclass
class ReactionBatch:
    graphs: GraphBatch
    main: np.ndarray  # [B] index into graphs
    product: np.ndarray  # [B]
    hyper: np.ndarray  # [B] all-reactants hypergraph
    subs: np.ndarray  # [B, S]
    sub_mask: np.ndarray  # [B, S]
    reagent_ids: np.ndarray  # [M, L]
    reagent_tok_mask: np.ndarray  # [M, L]
    reagent_groups: np.ndarray  # [B, R] index into reagent rows
    reagent_mask: np.ndarray  # [B, R]
    center_labels: Optional[List[np.ndarray]] = None  # hypergraph atom order

    def __len__(self):
        return len(self.main)


def build_batch(reactions: Sequence[Reaction], vocab: TokenVocab, d_max: int = D_MAX, with_labels: bool = False) -> ReactionBatch:
    """Featurise reactions into one deduplicated graph batch plus reagent token tensors.

    Entities inside each role are put in canonical order, which makes every
    readout bitwise independent of how the caller ordered them.
    """
    keys: Dict[Tuple[str, ...], int] = {}
    items: List[GraphItem] = []

    def graph(key: Tuple[str, ...]) -> int:
        if key not in keys:
            keys[key] = len(items)
            items.append(_graph_item(key, d_max))
        return keys[key]

    B = len(reactions)
    S = max([len(r.sub_reactants) for r in reactions] + [0])
    main = np.zeros(B, dtype=np.int64)
    prod = np.zeros(B, dtype=np.int64)
    hyper = np.zeros(B, dtype=np.int64)
    subs = np.zeros((B, S), dtype=np.int64)
    sub_mask = np.zeros((B, S), dtype=bool)
    reagent_seqs: List[List[int]] = []
    reagent_keys: Dict[str, int] = {}
    groups: List[List[int]] = []
    labels = [] if with_labels else None
    for b, r in enumerate(reactions):
        main[b] = graph((r.main_reactant.canonical_string,))
        prod[b] = graph((r.product.canonical_string,))
        order = canonical_order(r.sub_reactants)
        for k, i in enumerate(order):
            subs[b, k] = graph((r.sub_reactants[i].canonical_string,))
            sub_mask[b, k] = True
        reactants = list(r.reactants)
        hord = canonical_order(reactants)
        hyper[b] = graph(tuple(reactants[i].smiles for i in hord))
        if with_labels:
            per_mol = label_reactive_centers(r).per_molecule
            labels.append(np.concatenate([per_mol[i] for i in hord]))
        g = []
        for i in canonical_order(r.reagents):
            key = r.reagents[i].canonical_string
            if key not in reagent_keys:
                reagent_keys[key] = len(reagent_seqs)
                reagent_seqs.append(vocab.encode(tokenize_reagent(r.reagents[i])))
            g.append(reagent_keys[key])
        groups.append(g)

    M = max(len(reagent_seqs), 1)
    L = max([len(s) for s in reagent_seqs] + [1])
    ids = np.zeros((M, L), dtype=np.int64)
    tmask = np.zeros((M, L), dtype=bool)
    tmask[:, 0] = True
    ids[:, 0] = vocab.index[CLS_TOKEN]
    for i, s in enumerate(reagent_seqs):
        ids[i, : len(s)] = s
        tmask[i, : len(s)] = True
    R = max([len(g) for g in groups] + [0])
    rg = np.zeros((B, R), dtype=np.int64)
    rmask = np.zeros((B, R), dtype=bool)
    for b, g in enumerate(groups):
        rg[b, : len(g)] = g
        rmask[b, : len(g)] = True
    return ReactionBatch(collate(items), main, prod, hyper, subs, sub_mask, ids, tmask, rg, rmask, labels)


def graph_tensors(g: GraphBatch):
    return (
        torch.from_numpy(g.nodes),
        torch.from_numpy(g.edges),
        torch.from_numpy(g.sp),
        torch.from_numpy(g.mask),
        torch.from_numpy(g.virtual_index),
    )


VALID_PROJECTIONS = {("c", "main"), ("c", "env"), ("g", "inputs"), ("g", "product")}


class ReactionEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig, vocab: TokenVocab):
        super().__init__()
        self.cfg = cfg
        self.vocab = vocab
        D, H, P = cfg.model_dim, cfg.head_hidden, cfg.proj_dim
        self.graph = GraphTransformer(cfg)
        self.text = ReagentEncoder(cfg, len(vocab))
        self.sub_pool = AttentionPool(D)
        self.heads = nn.ModuleDict(
            {
                "c_main": mlp(D, H, P),
                "c_sub": mlp(D, H, P),
                "c_reagent": mlp(D, H, P),
                "g_main": mlp(D, H, P),
                "g_sub": mlp(D, H, P),
                "g_reagent": mlp(D, H, P),
                "g_product": mlp(D, H, P),
            }
        )
        self.center = CenterHead(cfg)

    @property
    def dtype(self):
        return self.graph.element.weight.dtype

    # -- low-level encoders
    def encode_graphs(self, g: GraphBatch, return_attention=False):
        return self.graph(*graph_tensors(g)[:4], torch.from_numpy(g.virtual_index), return_attention=return_attention)

    def encode_reagent_rows(self, batch: ReactionBatch):
        return self.text.encode_tokens(torch.from_numpy(batch.reagent_ids), torch.from_numpy(batch.reagent_tok_mask))

    def reagent_readout(self, batch: ReactionBatch, cls_rows=None):
        if cls_rows is None:
            cls_rows = self.encode_reagent_rows(batch)
        groups = torch.from_numpy(batch.reagent_groups)
        gmask = torch.from_numpy(batch.reagent_mask)
        vecs = cls_rows[groups] if groups.numel() else cls_rows.new_zeros(len(batch), 0, cls_rows.shape[1])
        return self.text.readout(vecs, gmask)

    # -- projections
    def project(self, signal, role, main=None, subs=None, reagent_readout=None, product=None):
        """Project one reaction's entity vectors onto a contrastive signal.

        ``subs`` is a [k, D] stack of sub-reactant readouts (k may be 0);
        ``reagent_readout`` the reagent-set readout (None means no reagents).
        """
        if (signal, role) not in VALID_PROJECTIONS:
            raise ContractError(f"invalid projection ({signal}, {role})")
        if reagent_readout is None:
            reagent_readout = self.text.null
        if subs is None:
            subs = self.text.null.new_zeros(0, self.cfg.model_dim)
        if role == "product":
            if product is None:
                raise ContractError("product projection needs a product embedding")
            return self.heads["g_product"](product)
        if role == "main":
            if main is None:
                raise ContractError("main projection needs the main-reactant embedding")
            return self.heads["c_main"](main)
        pooled = self.sub_pool(subs[None], torch.ones(1, len(subs), dtype=torch.bool))[0]
        if role == "env":
            return self.heads["c_sub"](pooled) + self.heads["c_reagent"](reagent_readout)
        if main is None:
            raise ContractError("inputs projection needs the main-reactant embedding")
        return self.heads["g_main"](main) + self.heads["g_sub"](pooled) + self.heads["g_reagent"](reagent_readout)

    def forward(self, batch: ReactionBatch, with_center: bool = False) -> Dict[str, torch.Tensor]:
        tokens, readout = self.encode_graphs(batch.graphs)
        reag = self.reagent_readout(batch)
        main = readout[torch.from_numpy(batch.main)]
        prod = readout[torch.from_numpy(batch.product)]
        subs_idx = torch.from_numpy(batch.subs)
        sub_mask = torch.from_numpy(batch.sub_mask)
        sub_vecs = readout[subs_idx] if subs_idx.numel() else readout.new_zeros(len(batch), 0, readout.shape[1])
        pooled = self.sub_pool(sub_vecs, sub_mask)
        out = {
            "c_main": self.heads["c_main"](main),
            "c_env": self.heads["c_sub"](pooled) + self.heads["c_reagent"](reag),
            "g_inputs": self.heads["g_main"](main) + self.heads["g_sub"](pooled) + self.heads["g_reagent"](reag),
            "g_product": self.heads["g_product"](prod),
            "main_readout": main,
            "product_readout": prod,
            "reagent_readout": reag,
            "reactants_readout": readout[torch.from_numpy(batch.hyper)],
        }
        if with_center:
            h = torch.from_numpy(batch.hyper)
            nodes, edges, sp, mask, vidx = graph_tensors(batch.graphs)
            logits, atom_mask = self.center(tokens[h], edges[h], sp[h], mask[h], vidx[h], reag)
            out["center_logits"] = logits
            out["center_mask"] = atom_mask
        return out

    # -- downstream
    @torch.no_grad()
    def represent(self, reactions: Sequence[Reaction], mask_product: bool = True, drop_masked: bool = False, batch_size: int = 64) -> np.ndarray:
        """Reaction vectors: [reactants readout | reagent readout | product readout].

        With ``mask_product`` the product block is zeros (or dropped entirely
        when ``drop_masked``), so widths are 3*D, or 2*D when dropped.
        """
        self.eval()
        rows = []
        for i in range(0, len(reactions), batch_size):
            chunk = reactions[i : i + batch_size]
            b = build_batch(chunk, self.vocab, self.cfg.sp_cutoff)
            tokens, readout = self.encode_graphs(b.graphs)
            reag = self.reagent_readout(b)
            react = readout[torch.from_numpy(b.hyper)]
            prod = readout[torch.from_numpy(b.product)]
            if mask_product:
                prod = torch.zeros_like(prod)
            parts = [react, reag] if (mask_product and drop_masked) else [react, reag, prod]
            rows.append(torch.cat(parts, dim=1).double().numpy())
        return np.concatenate(rows) if rows else np.zeros((0, 3 * self.cfg.model_dim))

    @torch.no_grad()
    def signals(self, reactions: Sequence[Reaction], batch_size: int = 64) -> Dict[str, np.ndarray]:
        self.eval()
        acc: Dict[str, list] = {k: [] for k in ("c_main", "c_env", "g_inputs", "g_product")}
        for i in range(0, len(reactions), batch_size):
            out = self(build_batch(reactions[i : i + batch_size], self.vocab, self.cfg.sp_cutoff))
            for k in acc:
                acc[k].append(out[k].double().numpy())
        return {k: np.concatenate(v) for k, v in acc.items()}

    @torch.no_grad()
    def molecule_embeddings(self, smiles: Sequence[str], batch_size: int = 128) -> np.ndarray:
        """Graph virtual-node readouts of single molecules."""
        self.eval()
        rows = []
        for i in range(0, len(smiles), batch_size):
            items = [_graph_item((parse_molecule(s).canonical_string,), self.cfg.sp_cutoff) for s in smiles[i : i + batch_size]]
            _, readout = self.encode_graphs(collate(items))
            rows.append(readout.double().numpy())
        return np.concatenate(rows) if rows else np.zeros((0, self.cfg.model_dim))

    @torch.no_grad()
    def reagent_embeddings(self, smiles: Sequence[str], batch_size: int = 128) -> np.ndarray:
        """Stage-one CLS vectors of single reagents."""
        self.eval()
        rows = []
        for i in range(0, len(smiles), batch_size):
            seqs = [self.vocab.encode(tokenize_reagent(parse_molecule(s))) for s in smiles[i : i + batch_size]]
            L = max(len(s) for s in seqs)
            ids = np.zeros((len(seqs), L), dtype=np.int64)
            mask = np.zeros((len(seqs), L), dtype=bool)
            for k, s in enumerate(seqs):
                ids[k, : len(s)] = s
                mask[k, : len(s)] = True
            rows.append(self.text.encode_tokens(torch.from_numpy(ids), torch.from_numpy(mask)).double().numpy())
        return np.concatenate(rows) if rows else np.zeros((0, self.cfg.model_dim))

    def entity_embeddings(self, entities: Sequence[Tuple[str, str]]) -> np.ndarray:
        """Embed (smiles, role) pairs: reagents via the text encoder, everything else via the graph encoder."""
        out = np.zeros((len(entities), self.cfg.model_dim))
        reag = [i for i, (_, role) in enumerate(entities) if role == "reagent"]
        other = [i for i, (_, role) in enumerate(entities) if role != "reagent"]
        if reag:
            out[reag] = self.reagent_embeddings([entities[i][0] for i in reag])
        if other:
            out[other] = self.molecule_embeddings([entities[i][0] for i in other])
        return out

    @torch.no_grad()
    def attention_maps(self, mols: Sequence[Molecule]) -> Tuple[np.ndarray, List[str]]:
        """Attention of every graph layer/head over the hypergraph of ``mols``: [layers, heads, N+1, N+1]."""
        self.eval()
        item = featurize(list(mols), self.cfg.sp_cutoff)
        _, _, maps = self.encode_graphs(collate([item]), return_attention=True)
        arr = torch.stack([m[0] for m in maps]).double().numpy()
        return arr, item.atom_labels


def export_attention(encoder: ReactionEncoder, rxn: Reaction, path=None) -> dict:
    """Attention maps of the all-reactants hypergraph, optionally written as JSON."""
    reactants = list(rxn.reactants)
    order = canonical_order(reactants)
    maps, labels = encoder.attention_maps([reactants[i] for i in order])
    payload = {
        "reaction": rxn.to_smiles(),
        "atoms": labels,
        "shape": list(maps.shape),
        "attention": maps.tolist(),
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(payload, fh)
    return payload


def config_to_dict(cfg: EncoderConfig) -> dict:
    return asdict(cfg)
