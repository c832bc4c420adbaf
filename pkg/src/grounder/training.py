"""Training objectives and optimization.

Implements the in-batch contrastive objective for the table retriever and
the triplet margin objective for the cell ranker, with exact analytic
gradients composed through mean-pooling, the linear projection, and L2
normalization. No autodiff framework: one linear layer keeps the chain
rule closed-form, and a finite-difference checker verifies it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .corpus import DialogueRecord, TableDocument, corpus_by_id, linearize_cell, linearize_table
from .encoder import DualEncoder, EncoderParams, normalize, pooled_features
from .tracker import DialogueHistory, history_text


class TrainingError(Exception):
    pass


# -- losses -----------------------------------------------------------------


def contrastive_loss(Q: np.ndarray, T: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """In-batch contrastive loss over B query/knowledge embedding pairs.

    Row i of the BxB similarity matrix Q @ T^T scores query i against every
    knowledge item in the batch; the diagonal holds the positives, so each
    row contributes -log softmax(row)[i]. Returns (loss, dL/dQ, dL/dT).
    """
    if Q.shape != T.shape:
        raise TrainingError(f"shape mismatch: Q {Q.shape} vs T {T.shape}")
    B = Q.shape[0]
    if B < 2:
        raise TrainingError(f"in-batch negatives require B >= 2, got B={B}")
    S = Q @ T.T
    S_shift = S - S.max(axis=1, keepdims=True)
    expS = np.exp(S_shift)
    P = expS / expS.sum(axis=1, keepdims=True)
    loss = float(-np.mean(S_shift.diagonal() - np.log(expS.sum(axis=1))))
    dS = (P - np.eye(B)) / B
    return loss, dS @ T, dS.T @ Q


def l2_distance(x: np.ndarray, y: np.ndarray) -> float:
    if x.shape != y.shape:
        raise TrainingError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y))


def triplet_loss(
    anchor: np.ndarray,
    positive: np.ndarray,
    negative: np.ndarray,
    margin: float,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Hinge on d(anchor, positive) - d(anchor, negative) + margin.

    Gradients are zero when the hinge is inactive; at an exact distance-zero
    coincidence the distance subgradient is taken as the zero vector.
    Returns (loss, dL/danchor, dL/dpositive, dL/dnegative).
    """
    if anchor.shape != positive.shape or anchor.shape != negative.shape:
        raise TrainingError("triplet embeddings must share dimension")
    if margin <= 0:
        raise TrainingError(f"margin must be positive, got {margin}")
    d_p = l2_distance(anchor, positive)
    d_n = l2_distance(anchor, negative)
    activation = d_p - d_n + margin
    zero = np.zeros_like(anchor)
    if activation <= 0:
        return 0.0, zero.copy(), zero.copy(), zero.copy()
    u_p = (anchor - positive) / d_p if d_p > 0 else zero
    u_n = (anchor - negative) / d_n if d_n > 0 else zero
    return float(activation), u_p - u_n, -u_p, u_n


# -- Adam with linear warmup/decay ------------------------------------------


@dataclass
class AdamState:
    lr_peak: float
    warmup_steps: int
    total_steps: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    moments: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise TrainingError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise TrainingError("eps must be positive")
        if self.warmup_steps > self.total_steps:
            raise TrainingError("warmup_steps must not exceed total_steps")


def lr_at(state: AdamState, step: int) -> float:
    """Linear warmup to lr_peak, then linear decay to zero at total_steps."""
    if not 1 <= step <= state.total_steps:
        raise TrainingError(f"step {step} outside [1, {state.total_steps}]")
    if step <= state.warmup_steps:
        return state.lr_peak * step / state.warmup_steps
    if state.total_steps == state.warmup_steps:
        return state.lr_peak
    return state.lr_peak * (state.total_steps - step) / (state.total_steps - state.warmup_steps)


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
) -> None:
    """One bias-corrected Adam update, in place. Errors on non-finite grads."""
    for name, param in params.items():
        grad = grads[name]
        if grad.shape != param.shape:
            raise TrainingError(f"{name}: grad shape {grad.shape} != param shape {param.shape}")
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"{name}: non-finite gradient")
    state.step += 1
    lr = lr_at(state, state.step)
    for name, param in params.items():
        if name not in state.moments:
            state.moments[name] = (np.zeros_like(param), np.zeros_like(param))
        m, v = state.moments[name]
        _kernels.adam_update(
            param.ravel(), grads[name].ravel(), m.ravel(), v.ravel(),
            lr, state.beta1, state.beta2, state.eps, state.step,
        )


# -- finite-difference gradient checker -------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    failures: list[tuple[str, int, float, float, float]]

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def grad_check(
    loss_fn: Callable[[dict[str, np.ndarray]], tuple[float, dict[str, np.ndarray]]],
    params: dict[str, np.ndarray],
    tolerance: float = 1e-4,
    n_samples: int = 20,
    h: float = 1e-5,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients with central finite differences.

    Samples up to n_samples coordinates per parameter. Relative error uses
    a small denominator floor so near-zero coordinates compare absolutely.
    """
    _, analytic = loss_fn(params)
    rng = np.random.default_rng(seed)
    max_err = 0.0
    n_checked = 0
    failures: list[tuple[str, int, float, float, float]] = []
    for name, param in params.items():
        flat = param.ravel()
        n_coords = flat.size
        coords = (
            np.arange(n_coords)
            if n_coords <= n_samples
            else rng.choice(n_coords, size=n_samples, replace=False)
        )
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            lo_plus, _ = loss_fn(params)
            flat[c] = orig - h
            lo_minus, _ = loss_fn(params)
            flat[c] = orig
            fd = (lo_plus - lo_minus) / (2 * h)
            an = float(analytic[name].ravel()[c])
            rel = abs(an - fd) / max(abs(an), abs(fd), 1e-4)
            max_err = max(max_err, rel)
            n_checked += 1
            if rel >= tolerance:
                failures.append((name, int(c), an, fd, rel))
    return GradCheckReport(max_rel_error=max_err, n_checked=n_checked, failures=failures)


# -- training loops ---------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr_peak: float = 1e-2
    warmup_steps: int = 5
    margin: float = 1.0
    seed: int = 0
    d: int = 64
    V: int = 8192
    ngram_max: int = 2

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        obj = json.loads(Path(path).read_text("utf-8"))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise TrainingError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**obj)


def _backprop_embedding(
    ge: np.ndarray, e: np.ndarray, z_norm: float
) -> np.ndarray | None:
    """Gradient w.r.t. the pre-normalization projection z.

    Returns None for the degenerate zero-projection input (basis-vector
    rule), where the embedding does not depend on the weights.
    """
    if z_norm == 0.0:
        return None
    return (ge - e * float(e @ ge)) / z_norm


class _EncodeCache:
    """Memoized pooled features per text."""

    def __init__(self, V: int, ngram_max: int):
        self.V = V
        self.ngram_max = ngram_max
        self._features: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def features(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        if text not in self._features:
            self._features[text] = pooled_features(text, self.V, self.ngram_max)
        return self._features[text]


def _accumulate_w_grad(
    W_grad: np.ndarray,
    gz: np.ndarray | None,
    feats: tuple[np.ndarray, np.ndarray],
) -> None:
    if gz is None:
        return
    idx, counts = feats
    if idx.size:
        np.add.at(W_grad, (slice(None), idx), gz[:, None] * counts[None, :])


def _log_epoch(log_path: str | Path | None, epoch: int, mean_loss: float) -> None:
    if log_path is None:
        return
    with open(log_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"epoch": epoch, "mean_loss": mean_loss}) + "\n")


def _finalize(de: DualEncoder, Wq: np.ndarray, Wk: np.ndarray) -> DualEncoder:
    return DualEncoder(
        query_encoder=replace(de.query_encoder, W=Wq.astype(np.float32)),
        knowledge_encoder=replace(de.knowledge_encoder, W=Wk.astype(np.float32)),
    )


Feats = tuple[np.ndarray, np.ndarray]


def _forward(W: np.ndarray, feats: Feats) -> tuple[np.ndarray, float]:
    idx, counts = feats
    z = W[:, idx] @ counts if idx.size else np.zeros(W.shape[0])
    z_norm = float(np.linalg.norm(z))
    return normalize(z), z_norm


def retriever_batch_loss(
    Wq: np.ndarray,
    Wk: np.ndarray,
    query_feats: Sequence[Feats],
    table_feats: Sequence[Feats],
) -> tuple[float, np.ndarray, np.ndarray]:
    """Contrastive batch loss composed through both linear encoders.

    Returns (loss, dL/dWq, dL/dWk) with the chain rule carried through
    mean-pooled features, the projection, and L2 normalization.
    """
    fw_q = [_forward(Wq, f) for f in query_feats]
    fw_t = [_forward(Wk, f) for f in table_feats]
    Q = np.stack([e for e, _ in fw_q])
    T = np.stack([e for e, _ in fw_t])
    loss, gQ, gT = contrastive_loss(Q, T)
    gWq = np.zeros_like(Wq)
    gWk = np.zeros_like(Wk)
    for j, (f, (e, z_norm)) in enumerate(zip(query_feats, fw_q)):
        _accumulate_w_grad(gWq, _backprop_embedding(gQ[j], e, z_norm), f)
    for j, (f, (e, z_norm)) in enumerate(zip(table_feats, fw_t)):
        _accumulate_w_grad(gWk, _backprop_embedding(gT[j], e, z_norm), f)
    return loss, gWq, gWk


def ranker_triplet_loss(
    Wq: np.ndarray,
    Wk: np.ndarray,
    anchor_feats: Feats,
    pos_feats: Feats,
    neg_feats: Feats,
    margin: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Triplet loss composed through the encoders (anchor via Wq, cells via Wk)."""
    ea, na = _forward(Wq, anchor_feats)
    ep, npos = _forward(Wk, pos_feats)
    en, nn = _forward(Wk, neg_feats)
    loss, ga, gp, gn = triplet_loss(ea, ep, en, margin)
    gWq = np.zeros_like(Wq)
    gWk = np.zeros_like(Wk)
    if loss > 0:
        _accumulate_w_grad(gWq, _backprop_embedding(ga, ea, na), anchor_feats)
        _accumulate_w_grad(gWk, _backprop_embedding(gp, ep, npos), pos_feats)
        _accumulate_w_grad(gWk, _backprop_embedding(gn, en, nn), neg_feats)
    return loss, gWq, gWk


def train_retriever(
    de: DualEncoder,
    pairs: Sequence[tuple[str, str]],
    corpus: Sequence[TableDocument],
    config: TrainConfig,
    log_path: str | Path | None = None,
) -> DualEncoder:
    """Train the retriever on (query, gold table_id) pairs with in-batch negatives.

    Each batch of B pairs yields B positives on the diagonal of the
    similarity matrix and B^2 - B in-batch negatives.
    """
    if config.batch_size < 2:
        raise TrainingError("batch_size must be >= 2 for in-batch negatives")
    by_id = corpus_by_id(corpus)
    table_texts: dict[str, str] = {}
    for query, table_id in pairs:
        if table_id not in by_id:
            raise TrainingError(f"unknown table_id {table_id!r} in training pairs")
        table_texts.setdefault(table_id, linearize_table(by_id[table_id]))

    cache = _EncodeCache(de.V, de.ngram_max)
    Wq = de.query_encoder.W.astype(np.float64)
    Wk = de.knowledge_encoder.W.astype(np.float64)
    B = config.batch_size
    n = len(pairs)
    batches_per_epoch = sum(
        1 for s in range(0, n, B) if min(s + B, n) - s >= 2
    )
    total_steps = max(1, config.epochs * batches_per_epoch)
    state = AdamState(
        lr_peak=config.lr_peak, warmup_steps=min(config.warmup_steps, total_steps),
        total_steps=total_steps,
    )
    rng = np.random.default_rng(config.seed)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, B):
            batch_idx = order[start : start + B]
            if batch_idx.size < 2:
                continue
            query_feats = [cache.features(pairs[i][0]) for i in batch_idx]
            table_feats = [cache.features(table_texts[pairs[i][1]]) for i in batch_idx]
            loss, gWq, gWk = retriever_batch_loss(Wq, Wk, query_feats, table_feats)
            losses.append(loss)
            adam_step(state, {"Wq": Wq, "Wk": Wk}, {"Wq": gWq, "Wk": gWk})
        _log_epoch(log_path, epoch, float(np.mean(losses)) if losses else 0.0)
    return _finalize(de, Wq, Wk)


def train_ranker(
    de: DualEncoder,
    dialogues: Sequence[DialogueRecord],
    corpus: Sequence[TableDocument],
    config: TrainConfig,
    log_path: str | Path | None = None,
) -> DualEncoder:
    """Train the cell ranker with one triplet per gold-labelled turn.

    Anchor: dialogue history up to and including the turn's query. Positive:
    the turn's first gold cell. Negative: a uniformly sampled non-gold cell
    from the same table, resampled each epoch. Turns with no available
    negative are skipped (counted, warned once).
    """
    by_id = corpus_by_id(corpus)
    turns: list[tuple[str, str, list[str]]] = []  # (anchor_text, pos_text, neg_texts)
    skipped = 0
    for dlg in dialogues:
        table = by_id.get(dlg.gold_table_id)
        if table is None:
            raise TrainingError(f"dialogue {dlg.dialogue_id!r}: unknown table {dlg.gold_table_id!r}")
        prior: list[tuple[str, str]] = []
        for turn in dlg.turns:
            if turn.gold_cells:
                gold_set = {(g.row, g.col) for g in turn.gold_cells}
                negatives = [r for r in table.cell_refs() if (r.row, r.col) not in gold_set]
                if negatives:
                    anchor = history_text(DialogueHistory(turns=tuple(prior), current_query=turn.query))
                    pos = linearize_cell(table, turn.gold_cells[0])
                    turns.append((anchor, pos, [linearize_cell(table, r) for r in negatives]))
                else:
                    skipped += 1
            prior.append((turn.query, turn.response))
    if skipped:
        import warnings

        warnings.warn(f"train_ranker: skipped {skipped} turn(s) with no negative cell available")
    if not turns:
        raise TrainingError("no trainable turns (no gold cells with available negatives)")

    cache = _EncodeCache(de.V, de.ngram_max)
    Wq = de.query_encoder.W.astype(np.float64)
    Wk = de.knowledge_encoder.W.astype(np.float64)
    total_steps = config.epochs * len(turns)
    state = AdamState(
        lr_peak=config.lr_peak, warmup_steps=min(config.warmup_steps, total_steps),
        total_steps=total_steps,
    )
    rng = np.random.default_rng(config.seed)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(turns))
        losses = []
        for i in order:
            anchor_text, pos_text, neg_texts = turns[i]
            neg_text = neg_texts[int(rng.integers(len(neg_texts)))]
            loss, gWq, gWk = ranker_triplet_loss(
                Wq,
                Wk,
                cache.features(anchor_text),
                cache.features(pos_text),
                cache.features(neg_text),
                config.margin,
            )
            losses.append(loss)
            # zero-loss turns still step so the schedule tracks the turn count
            adam_step(state, {"Wq": Wq, "Wk": Wk}, {"Wq": gWq, "Wk": gWk})
        _log_epoch(log_path, epoch, float(np.mean(losses)) if losses else 0.0)
    return _finalize(de, Wq, Wk)
