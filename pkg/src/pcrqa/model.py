"""Built-in trainable mask-fill backend.

A deliberately small embed/weight/project model: token embeddings and the
output projection are the updatable language-model parameters, the prefix
matrix is the trainable soft-prompt block, and per-graph code vectors are
registered frozen.  The output projection starts at zero so a fresh state
predicts the uniform distribution; prefix rows are initialized from the
knowledge-prefix token embeddings, padding rows zero.

Training minimizes summed cross-entropy over all mask positions (the log of
the label-probability product), with AdamW on the trainable tensors only.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .codegraph.graphs import DepGraph
from .prompt import PromptInstance
from .tokens import PAD, SPECIAL_TOKENS

CHECKPOINT_SCHEMA_VERSION = 1

DEFAULT_EMBEDDING_DIM = 64
TRAINABLE_TENSORS = ("token_embeddings", "prefix_matrix", "output_weights")


@dataclass(frozen=True)
class MaskPrediction:
    position: int
    candidates: tuple[tuple[str, float], ...]  # (token, probability), descending


@dataclass(frozen=True)
class CodeGraphEmbedding:
    vector: np.ndarray
    provenance: str


@dataclass
class ModelState:
    vocab: list[str]
    embedding_dim: int
    prefix_len: int
    token_embeddings: np.ndarray
    prefix_matrix: np.ndarray
    output_weights: np.ndarray
    graph_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    frozen_registry: set[str] = field(default_factory=set)
    rng_seed: int = 0
    prefix_initialized: bool = False
    token_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.token_index:
            self.token_index = {tok: i for i, tok in enumerate(self.vocab)}

    @property
    def vocabulary(self) -> set[str]:
        return set(self.vocab)

    def clone(self) -> "ModelState":
        return ModelState(
            vocab=list(self.vocab),
            embedding_dim=self.embedding_dim,
            prefix_len=self.prefix_len,
            token_embeddings=self.token_embeddings.copy(),
            prefix_matrix=self.prefix_matrix.copy(),
            output_weights=self.output_weights.copy(),
            graph_vectors={k: v.copy() for k, v in self.graph_vectors.items()},
            frozen_registry=set(self.frozen_registry),
            rng_seed=self.rng_seed,
            prefix_initialized=self.prefix_initialized,
        )


def build_vocabulary(token_sources: list[list[str]], extra: tuple[str, ...] = ()) -> list[str]:
    """Sorted distinct tokens plus the sentinel specials."""
    seen = set(SPECIAL_TOKENS) | set(extra)
    for tokens in token_sources:
        seen.update(tokens)
    return sorted(seen)


def init_state(
    vocab: list[str],
    embedding_dim: int = DEFAULT_EMBEDDING_DIM,
    prefix_len: int = 50,
    seed: int = 0,
) -> ModelState:
    rng = np.random.default_rng(seed)
    E = rng.uniform(-0.1, 0.1, size=(len(vocab), embedding_dim))
    return ModelState(
        vocab=list(vocab),
        embedding_dim=embedding_dim,
        prefix_len=prefix_len,
        token_embeddings=E,
        prefix_matrix=np.zeros((prefix_len, embedding_dim)),
        output_weights=np.zeros((embedding_dim, len(vocab))),
        rng_seed=seed,
    )


def init_prefix_from_tokens(state: ModelState, tokens: list[str]) -> None:
    """Copy content-token embeddings into the prefix rows; PAD rows stay zero."""
    for r, tok in enumerate(tokens[: state.prefix_len]):
        if tok == PAD:
            continue
        idx = state.token_index.get(tok)
        if idx is not None:
            state.prefix_matrix[r] = state.token_embeddings[idx]
    state.prefix_initialized = True


# --- code graph encoding ------------------------------------------------------


def encode_code_graph(pdg: DepGraph, dim: int = DEFAULT_EMBEDDING_DIM) -> CodeGraphEmbedding:
    """Hashed bag of node and edge features folded into a unit vector."""
    serialized = pdg.to_json()
    provenance = hashlib.blake2s(serialized.encode("utf-8")).hexdigest()[:16]
    vec = np.zeros(dim)
    labels = {n.id: n.label for n in pdg.nodes}
    features = [f"n|{n.kind}|{n.label}" for n in pdg.nodes]
    features.extend(
        f"e|{e.kind}|{labels[e.src]}|{labels[e.dst]}" for e in pdg.edges
    )
    for feat in features:
        digest = hashlib.blake2s(feat.encode("utf-8")).digest()
        idx = int.from_bytes(digest[:4], "little") % dim
        sign = 1.0 if digest[4] & 1 else -1.0
        vec[idx] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return CodeGraphEmbedding(vector=vec, provenance=provenance)


def register_graph(state: ModelState, embedding: CodeGraphEmbedding) -> str:
    """Store a frozen per-graph vector; returns its handle."""
    ref = embedding.provenance
    vec = embedding.vector
    if vec.shape[0] != state.embedding_dim:
        raise ValueError(
            f"graph vector dim {vec.shape[0]} != model dim {state.embedding_dim}"
        )
    state.graph_vectors[ref] = vec.copy()
    state.frozen_registry.add(f"code_graph:{ref}")
    return ref


# --- instance preparation -----------------------------------------------------


@dataclass(frozen=True)
class _Prepared:
    tok_ids: np.ndarray
    tok_pos: np.ndarray
    prefix_start: int
    g_pos: int
    mask_pos: np.ndarray
    graph_ref: Optional[str]


def _prepare(state: ModelState, instance: PromptInstance) -> _Prepared:
    mask_set = set(instance.mask_positions)
    tok_ids: list[int] = []
    tok_pos: list[int] = []
    prefix_start, prefix_end = instance.prefix_range()
    g_pos = instance.graph_position()
    for seg, start, end in instance.segment_offsets():
        if seg.kind in ("knowledge_prefix", "code_graph"):
            continue
        for k, tok in enumerate(seg.tokens or ()):
            pos = start + k
            if pos in mask_set:
                continue
            idx = state.token_index.get(tok)
            if idx is None:
                continue  # out-of-vocabulary context tokens are dropped
            tok_ids.append(idx)
            tok_pos.append(pos)
    return _Prepared(
        tok_ids=np.asarray(tok_ids, dtype=np.int64),
        tok_pos=np.asarray(tok_pos, dtype=np.int64),
        prefix_start=prefix_start,
        g_pos=g_pos,
        mask_pos=np.asarray(instance.mask_positions, dtype=np.int64),
        graph_ref=instance.graph_ref(),
    )


def _graph_vector(state: ModelState, ref: Optional[str]) -> np.ndarray:
    if ref is not None and ref in state.graph_vectors:
        return state.graph_vectors[ref]
    return np.zeros(state.embedding_dim)


def _forward(state: ModelState, prep: _Prepared):
    return kernels.forward(
        state.token_embeddings,
        state.prefix_matrix,
        state.output_weights,
        _graph_vector(state, prep.graph_ref),
        prep.tok_ids,
        prep.tok_pos,
        prep.prefix_start,
        prep.g_pos,
        prep.mask_pos,
    )


# --- prediction -----------------------------------------------------------------


def predict_masks(state: ModelState, instance: PromptInstance, top_k: int) -> list[MaskPrediction]:
    """Per-mask ranked candidates; probability ties break by vocabulary order."""
    if top_k < 1 or top_k > len(state.vocab):
        raise ValueError(f"top_k must be in [1, {len(state.vocab)}]")
    prep = _prepare(state, instance)
    _, probs = _forward(state, prep)
    out = []
    for mi, pos in enumerate(instance.mask_positions):
        order = np.argsort(-probs[mi], kind="stable")[:top_k]
        cands = tuple((state.vocab[int(v)], float(probs[mi, int(v)])) for v in order)
        out.append(MaskPrediction(position=pos, candidates=cands))
    return out


# --- training --------------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    epochs: int = 6
    batch_size: int = 4
    seed: int = 0
    weight_decay: float = 0.0


@dataclass
class TrainResult:
    state: ModelState
    epoch_losses: list[float]


def example_loss(state: ModelState, instance: PromptInstance, gold_tokens: list[str]) -> float:
    """Summed cross-entropy of the gold tokens at the mask positions."""
    prep = _prepare(state, instance)
    _, probs = _forward(state, prep)
    gold_ids = _gold_ids(state, gold_tokens)
    return -float(
        sum(np.log(max(probs[mi, g], 1e-300)) for mi, g in enumerate(gold_ids))
    )


def example_gradients(state: ModelState, instance: PromptInstance, gold_tokens: list[str]):
    """Loss plus analytic gradients for the three trainable tensors."""
    prep = _prepare(state, instance)
    H, probs = _forward(state, prep)
    gold_ids = _gold_ids(state, gold_tokens)
    dE = np.zeros_like(state.token_embeddings)
    dP = np.zeros_like(state.prefix_matrix)
    dW = np.zeros_like(state.output_weights)
    dc = np.zeros(state.embedding_dim)
    loss = kernels.backward(
        state.token_embeddings,
        state.prefix_matrix,
        state.output_weights,
        _graph_vector(state, prep.graph_ref),
        prep.tok_ids,
        prep.tok_pos,
        prep.prefix_start,
        prep.g_pos,
        prep.mask_pos,
        np.asarray(gold_ids, dtype=np.int64),
        H,
        probs,
        dE,
        dP,
        dW,
        dc,
    )
    return float(loss), dE, dP, dW


def _gold_ids(state: ModelState, gold_tokens: list[str]) -> list[int]:
    ids = []
    for tok in gold_tokens:
        idx = state.token_index.get(tok)
        if idx is None:
            raise ValueError(f"gold token not in vocabulary: {tok!r}")
        ids.append(idx)
    return ids


class _Adam:
    def __init__(self, shapes, lr, weight_decay):
        self.lr = lr
        self.wd = weight_decay
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params, grads):
        self.t += 1
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            mhat = self.m[k] / (1 - self.beta1**self.t)
            vhat = self.v[k] / (1 - self.beta2**self.t)
            p -= self.lr * (mhat / (np.sqrt(vhat) + self.eps) + self.wd * p)


def train(
    state: ModelState,
    corpus: list[tuple[PromptInstance, list[str]]],
    config: TrainConfig,
) -> TrainResult:
    """Seeded AdamW over the trainable tensors; frozen vectors untouched."""
    new = state.clone()
    if not new.prefix_initialized and corpus:
        first_instance = corpus[0][0]
        for seg in first_instance.segments:
            if seg.kind == "knowledge_prefix":
                init_prefix_from_tokens(new, list(seg.tokens or ()))
    for _, gold in corpus:
        _gold_ids(new, gold)  # validate up front, naming any unknown token
    if config.epochs == 0 or not corpus:
        return TrainResult(state=new, epoch_losses=[])

    prepared = [(_prepare(new, inst), _gold_ids(new, gold)) for inst, gold in corpus]
    rng = np.random.default_rng(config.seed)
    params = [new.token_embeddings, new.prefix_matrix, new.output_weights]
    adam = _Adam([p.shape for p in params], config.learning_rate, config.weight_decay)
    epoch_losses = []
    for _ in range(config.epochs):
        order = rng.permutation(len(prepared))
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            dE = np.zeros_like(new.token_embeddings)
            dP = np.zeros_like(new.prefix_matrix)
            dW = np.zeros_like(new.output_weights)
            dc = np.zeros(new.embedding_dim)
            for bi in batch:
                prep, gold_ids = prepared[bi]
                H, probs = _forward(new, prep)
                total += kernels.backward(
                    new.token_embeddings,
                    new.prefix_matrix,
                    new.output_weights,
                    _graph_vector(new, prep.graph_ref),
                    prep.tok_ids,
                    prep.tok_pos,
                    prep.prefix_start,
                    prep.g_pos,
                    prep.mask_pos,
                    np.asarray(gold_ids, dtype=np.int64),
                    H,
                    probs,
                    dE,
                    dP,
                    dW,
                    dc,
                )
            scale = 1.0 / len(batch)
            adam.step(params, [dE * scale, dP * scale, dW * scale])
        epoch_losses.append(total / len(prepared))
    return TrainResult(state=new, epoch_losses=epoch_losses)


# --- checkpoints -------------------------------------------------------------------


def save_checkpoint(state: ModelState, path: Path) -> None:
    payload = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "config": {
            "embedding_dim": state.embedding_dim,
            "prefix_len": state.prefix_len,
            "rng_seed": state.rng_seed,
            "prefix_initialized": state.prefix_initialized,
        },
        "vocab": state.vocab,
        "token_embeddings": state.token_embeddings.tolist(),
        "prefix_matrix": state.prefix_matrix.tolist(),
        "output_weights": state.output_weights.tolist(),
        "graph_vectors": {k: v.tolist() for k, v in sorted(state.graph_vectors.items())},
        "frozen_registry": sorted(state.frozen_registry),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path: Path) -> ModelState:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema: {payload.get('schema_version')}")
    cfg = payload["config"]
    return ModelState(
        vocab=payload["vocab"],
        embedding_dim=cfg["embedding_dim"],
        prefix_len=cfg["prefix_len"],
        token_embeddings=np.array(payload["token_embeddings"], dtype=np.float64),
        prefix_matrix=np.array(payload["prefix_matrix"], dtype=np.float64),
        output_weights=np.array(payload["output_weights"], dtype=np.float64),
        graph_vectors={
            k: np.array(v, dtype=np.float64) for k, v in payload["graph_vectors"].items()
        },
        frozen_registry=set(payload["frozen_registry"]),
        rng_seed=cfg["rng_seed"],
        prefix_initialized=cfg["prefix_initialized"],
    )


class BuiltinBackend:
    """Mask-fill backend contract over a trained state."""

    def __init__(self, state: ModelState):
        self.state = state

    @property
    def vocabulary(self) -> set[str]:
        return state_vocab(self.state)

    def predict_masks(self, instance: PromptInstance, top_k: int) -> list[MaskPrediction]:
        return predict_masks(self.state, instance, top_k)


def state_vocab(state: ModelState) -> set[str]:
    return set(state.vocab)
