"""Recurrent-attention sentence classifier with optional automaton features.

Three wiring modes:

* ``nnsc``     - word embeddings -> bidirectional LSTM -> bilinear attention
                 (query = last hidden state) -> 2-layer MLP softmax.
* ``instance`` - per-rule state-indicator vectors are concatenated to the
                 attention output before the classifier.
* ``word``     - per-rule binary word tags are appended to each word
                 embedding before the recurrent pass.

All math is plain numpy in float64 with hand-written backward passes so the
analytic gradients can be checked against central finite differences.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .encoding import InstanceFeature, WordTagSeq
from .errors import DimensionMismatchError, MissingFeaturesError, NumericalError
from .matching import Sentence

__all__ = [
    "VARIANTS",
    "UNK",
    "CHECKPOINT_VERSION",
    "ModelParams",
    "ActivationRecord",
    "TrainItem",
    "TrainConfig",
    "build_vocab",
    "forward",
    "loss_and_grads",
    "predict",
    "train",
    "evaluate_items",
    "save_model",
    "load_model",
    "load_pretrained_embeddings",
]

VARIANTS = ("nnsc", "instance", "word")
UNK = "<unk>"
CHECKPOINT_VERSION = "rulefuse-v1"

_TENSOR_NAMES = (
    "emb",
    "fwd_wx",
    "fwd_wh",
    "fwd_b",
    "bwd_wx",
    "bwd_wh",
    "bwd_b",
    "att_w",
    "mlp_w1",
    "mlp_b1",
    "mlp_w2",
    "mlp_b2",
)


def build_vocab(sentences: Iterable[Sentence]) -> dict[str, int]:
    """Word -> index map, UNK at index 0, then first-appearance order."""
    vocab = {UNK: 0}
    for sentence in sentences:
        for word in sentence.words:
            if word not in vocab:
                vocab[word] = len(vocab)
    return vocab


@dataclass
class ModelParams:
    """All trainable tensors plus the configuration they were built for."""

    variant: str
    vocab: dict[str, int]
    d: int
    h: int
    C: int
    p: int
    m_total: int
    emb: np.ndarray
    fwd_wx: np.ndarray
    fwd_wh: np.ndarray
    fwd_b: np.ndarray
    bwd_wx: np.ndarray
    bwd_wh: np.ndarray
    bwd_b: np.ndarray
    att_w: np.ndarray
    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray
    labels: list[str] | None = None  # class-name order used at training time

    @property
    def input_width(self) -> int:
        return self.d + (self.p if self.variant == "word" else 0)

    @property
    def classifier_width(self) -> int:
        return 2 * self.h + (self.m_total if self.variant == "instance" else 0)

    @classmethod
    def init(
        cls,
        variant: str,
        vocab: dict[str, int],
        d: int,
        h: int,
        C: int,
        p: int = 0,
        m_total: int = 0,
        seed: int = 0,
        scale: float = 0.3,
        labels: list[str] | None = None,
    ) -> "ModelParams":
        """Seeded uniform(-scale, scale) weights, zero biases.

        The draw order is fixed, so two variants with identical tensor
        shapes (e.g. any variant at p = 0) get identical values from the
        same seed.  The default scale suits the small hidden sizes this
        model runs at; much smaller values stall learning because the
        stacked squashing layers attenuate the gradient.
        """
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        rng = np.random.default_rng(seed)

        def u(*shape):
            return rng.uniform(-scale, scale, size=shape)

        d_in = d + (p if variant == "word" else 0)
        f_in = 2 * h + (m_total if variant == "instance" else 0)
        return cls(
            variant=variant,
            vocab=dict(vocab),
            d=d,
            h=h,
            C=C,
            p=p,
            m_total=m_total,
            emb=u(len(vocab), d),
            fwd_wx=u(d_in, 4 * h),
            fwd_wh=u(h, 4 * h),
            fwd_b=np.zeros(4 * h),
            bwd_wx=u(d_in, 4 * h),
            bwd_wh=u(h, 4 * h),
            bwd_b=np.zeros(4 * h),
            att_w=u(2 * h, 2 * h),
            mlp_w1=u(f_in, 2 * h),
            mlp_b1=np.zeros(2 * h),
            mlp_w2=u(2 * h, C),
            mlp_b2=np.zeros(C),
            labels=list(labels) if labels is not None else None,
        )

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _TENSOR_NAMES}

    def copy(self) -> "ModelParams":
        kwargs = {name: getattr(self, name).copy() for name in _TENSOR_NAMES}
        return ModelParams(
            variant=self.variant,
            vocab=dict(self.vocab),
            d=self.d,
            h=self.h,
            C=self.C,
            p=self.p,
            m_total=self.m_total,
            labels=list(self.labels) if self.labels is not None else None,
            **kwargs,
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(arr).all() for arr in self.tensors().values())


@dataclass(frozen=True)
class ActivationRecord:
    """Per-forward intermediate values."""

    H: np.ndarray  # (n, 2h) hidden states
    alpha: np.ndarray  # (n,) attention weights, sums to 1
    f: np.ndarray  # (2h,) attended sentence vector
    logits: np.ndarray  # (C,)
    y: np.ndarray  # (C,) class probabilities, sums to 1


@dataclass(frozen=True)
class TrainItem:
    sentence: Sentence
    label: int
    instance_feats: Sequence[InstanceFeature] | None = None
    word_tags: Sequence[WordTagSeq] | None = None


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    lr: float = 0.1
    seed: int = 0
    patience: int | None = None  # early stop on dev accuracy when set
    clip_norm: float | None = 5.0


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x))
    return e / e.sum()


def _lstm_forward(X, wx, wh, b, reverse: bool):
    n = X.shape[0]
    hdim = wh.shape[0]
    hs = np.zeros((n, hdim))
    caches = [None] * n
    h = np.zeros(hdim)
    c = np.zeros(hdim)
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        z = X[t] @ wx + h @ wh + b
        gi = _sigmoid(z[:hdim])
        gf = _sigmoid(z[hdim : 2 * hdim])
        go = _sigmoid(z[2 * hdim : 3 * hdim])
        gg = np.tanh(z[3 * hdim :])
        c_new = gf * c + gi * gg
        tanh_c = np.tanh(c_new)
        caches[t] = (X[t], h, c, gi, gf, go, gg, tanh_c)
        h = go * tanh_c
        c = c_new
        hs[t] = h
    return hs, caches


def _lstm_backward(dhs, caches, wx, wh, reverse: bool, dwx, dwh, db):
    """BPTT for one direction; accumulates weight grads, returns dX."""
    n = dhs.shape[0]
    hdim = wh.shape[0]
    dX = np.zeros((n, wx.shape[0]))
    dh_carry = np.zeros(hdim)
    dc_carry = np.zeros(hdim)
    order = range(n) if reverse else range(n - 1, -1, -1)
    for t in order:
        x_t, h_prev, c_prev, gi, gf, go, gg, tanh_c = caches[t]
        dh = dhs[t] + dh_carry
        do = tanh_c * dh
        dc = go * (1.0 - tanh_c * tanh_c) * dh + dc_carry
        dgi = gg * dc
        dgg = gi * dc
        dgf = c_prev * dc
        dc_carry = gf * dc
        dz = np.concatenate(
            [
                dgi * gi * (1.0 - gi),
                dgf * gf * (1.0 - gf),
                do * go * (1.0 - go),
                dgg * (1.0 - gg * gg),
            ]
        )
        dwx += np.outer(x_t, dz)
        dwh += np.outer(h_prev, dz)
        db += dz
        dX[t] = wx @ dz
        dh_carry = wh @ dz
    return dX


def _gather_features(params, sentence, instance_feats, word_tags):
    """Validate variant/feature agreement; return (tag matrix, instance vec)."""
    n = sentence.n
    tagmat = None
    u = None
    if params.variant == "word":
        if word_tags is None:
            if params.p != 0:
                raise MissingFeaturesError("word variant requires word tags")
            word_tags = []
        if len(word_tags) != params.p:
            raise DimensionMismatchError(
                f"expected {params.p} tag sequences, got {len(word_tags)}"
            )
        for seq in word_tags:
            if len(seq.tags) != n:
                raise DimensionMismatchError(
                    f"tag sequence length {len(seq.tags)} != sentence length {n}"
                )
        if params.p:
            tagmat = np.stack([np.asarray(seq.tags, dtype=np.float64) for seq in word_tags], axis=1)
        else:
            tagmat = np.zeros((n, 0))
    elif params.variant == "instance":
        if instance_feats is None:
            if params.p != 0:
                raise MissingFeaturesError("instance variant requires instance features")
            instance_feats = []
        if len(instance_feats) != params.p:
            raise DimensionMismatchError(
                f"expected {params.p} instance vectors, got {len(instance_feats)}"
            )
        if instance_feats:
            u = np.concatenate([np.asarray(f.values, dtype=np.float64) for f in instance_feats])
        else:
            u = np.zeros(0)
        if u.shape[0] != params.m_total:
            raise DimensionMismatchError(
                f"instance features total {u.shape[0]} != m_total {params.m_total}"
            )
    return tagmat, u


def _forward_cache(params, sentence, instance_feats=None, word_tags=None):
    if sentence.n < 1:
        raise ValueError("forward requires a non-empty sentence")
    tagmat, u = _gather_features(params, sentence, instance_feats, word_tags)
    idxs = [params.vocab.get(w, 0) for w in sentence.words]
    E = params.emb[idxs]
    X = np.concatenate([E, tagmat], axis=1) if tagmat is not None else E

    hf, cache_f = _lstm_forward(X, params.fwd_wx, params.fwd_wh, params.fwd_b, reverse=False)
    hb, cache_b = _lstm_forward(X, params.bwd_wx, params.bwd_wh, params.bwd_b, reverse=True)
    H = np.concatenate([hf, hb], axis=1)

    q = H[-1]
    Wq = params.att_w @ q
    scores = H @ Wq
    alpha = _softmax(scores)
    f = H.T @ alpha

    g = np.concatenate([f, u]) if u is not None else f
    z1 = g @ params.mlp_w1 + params.mlp_b1
    a1 = np.tanh(z1)
    logits = a1 @ params.mlp_w2 + params.mlp_b2
    y = _softmax(logits)

    record = ActivationRecord(H=H, alpha=alpha, f=f, logits=logits, y=y)
    cache = {
        "idxs": idxs,
        "cache_f": cache_f,
        "cache_b": cache_b,
        "H": H,
        "q": q,
        "Wq": Wq,
        "alpha": alpha,
        "g": g,
        "a1": a1,
        "y": y,
    }
    return record, cache


def forward(
    params: ModelParams,
    sentence: Sentence,
    instance_feats: Sequence[InstanceFeature] | None = None,
    word_tags: Sequence[WordTagSeq] | None = None,
) -> ActivationRecord:
    """Run the classifier on one sentence; features as the variant requires."""
    record, _ = _forward_cache(params, sentence, instance_feats, word_tags)
    return record


def _backward(params, cache, label: int, grads: dict[str, np.ndarray]) -> None:
    h2 = 2 * params.h
    y = cache["y"]
    a1 = cache["a1"]
    g = cache["g"]
    H = cache["H"]
    alpha = cache["alpha"]
    q = cache["q"]
    Wq = cache["Wq"]

    dlogits = y.copy()
    dlogits[label] -= 1.0
    grads["mlp_w2"] += np.outer(a1, dlogits)
    grads["mlp_b2"] += dlogits
    da1 = params.mlp_w2 @ dlogits
    dz1 = (1.0 - a1 * a1) * da1
    grads["mlp_w1"] += np.outer(g, dz1)
    grads["mlp_b1"] += dz1
    dg = params.mlp_w1 @ dz1
    df = dg[:h2]

    # attention: f = H^T alpha, alpha = softmax(H (W q)), q = H[-1]
    dalpha = H @ df
    dH = alpha[:, None] * df[None, :]
    dscores = alpha * (dalpha - float(alpha @ dalpha))
    dWq = H.T @ dscores
    dH += dscores[:, None] * Wq[None, :]
    grads["att_w"] += np.outer(dWq, q)
    dq = params.att_w.T @ dWq
    dH[-1] += dq

    dhf = dH[:, : params.h]
    dhb = dH[:, params.h :]
    dX_f = _lstm_backward(
        dhf, cache["cache_f"], params.fwd_wx, params.fwd_wh, False,
        grads["fwd_wx"], grads["fwd_wh"], grads["fwd_b"],
    )
    dX_b = _lstm_backward(
        dhb, cache["cache_b"], params.bwd_wx, params.bwd_wh, True,
        grads["bwd_wx"], grads["bwd_wh"], grads["bwd_b"],
    )
    dX = dX_f + dX_b
    demb = grads["emb"]
    for t, idx in enumerate(cache["idxs"]):
        demb[idx] += dX[t, : params.d]


def loss_and_grads(
    params: ModelParams, batch: Sequence[TrainItem]
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch plus analytic gradients.

    Gradients mirror params.tensors(); raises NumericalError if the loss
    goes non-finite.
    """
    if not batch:
        raise ValueError("empty batch")
    grads = {name: np.zeros_like(arr) for name, arr in params.tensors().items()}
    total = 0.0
    for item in batch:
        record, cache = _forward_cache(
            params, item.sentence, item.instance_feats, item.word_tags
        )
        prob = record.y[item.label]
        if not np.isfinite(prob) or prob <= 0.0:
            raise NumericalError("class probability underflowed or went non-finite")
        total += -float(np.log(prob))
        _backward(params, cache, item.label, grads)
    scale = 1.0 / len(batch)
    loss = total * scale
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite loss {loss}")
    for arr in grads.values():
        arr *= scale
    return loss, grads


def predict(
    params: ModelParams,
    sentence: Sentence,
    instance_feats: Sequence[InstanceFeature] | None = None,
    word_tags: Sequence[WordTagSeq] | None = None,
) -> int:
    """Most probable class; ties break toward the lowest class index."""
    record = forward(params, sentence, instance_feats, word_tags)
    return int(np.argmax(record.y))


def evaluate_items(params: ModelParams, items: Sequence[TrainItem]) -> float:
    """Fraction of items whose prediction matches the gold label."""
    if not items:
        return 0.0
    hits = sum(
        predict(params, it.sentence, it.instance_feats, it.word_tags) == it.label
        for it in items
    )
    return hits / len(items)


def _clip_grads(grads: dict[str, np.ndarray], clip_norm: float) -> None:
    total = 0.0
    for arr in grads.values():
        total += float((arr * arr).sum())
    norm = np.sqrt(total)
    if norm > clip_norm:
        factor = clip_norm / norm
        for arr in grads.values():
            arr *= factor


def train(
    params: ModelParams,
    items: Sequence[TrainItem],
    config: TrainConfig,
    dev_items: Sequence[TrainItem] | None = None,
) -> tuple[ModelParams, list[dict]]:
    """Plain SGD with per-epoch shuffling; deterministic for a given seed.

    Returns the trained params and a per-epoch history of mean loss plus
    dev accuracy (when dev_items given).  With patience set, training stops
    after that many epochs without a dev-accuracy improvement and the best
    params are returned.  A numerical blow-up aborts with the last params
    that were still finite.
    """
    if not items:
        raise ValueError("empty training set")
    for item in items:
        if not 0 <= item.label < params.C:
            raise ValueError(f"label {item.label} outside 0..{params.C - 1}")
    rng = np.random.default_rng(config.seed)
    history: list[dict] = []
    best_params = None
    best_acc = -1.0
    stale = 0
    for epoch in range(config.epochs):
        snapshot = params.copy()
        order = rng.permutation(len(items))
        total_loss = 0.0
        try:
            for lo in range(0, len(order), config.batch_size):
                batch = [items[i] for i in order[lo : lo + config.batch_size]]
                loss, grads = loss_and_grads(params, batch)
                if config.clip_norm is not None:
                    _clip_grads(grads, config.clip_norm)
                for name, arr in params.tensors().items():
                    arr -= config.lr * grads[name]
                total_loss += loss * len(batch)
        except NumericalError:
            params = snapshot
            break
        if not params.all_finite():
            params = snapshot
            break
        entry = {"epoch": epoch, "loss": total_loss / len(items), "dev_accuracy": None}
        if dev_items is not None:
            acc = evaluate_items(params, dev_items)
            entry["dev_accuracy"] = acc
            if config.patience is not None:
                if acc > best_acc:
                    best_acc = acc
                    best_params = params.copy()
                    stale = 0
                else:
                    stale += 1
                    if stale > config.patience:
                        history.append(entry)
                        break
        history.append(entry)
    if best_params is not None:
        params = best_params
    return params, history


def save_model(params: ModelParams, path: str | os.PathLike) -> None:
    """Write a single self-describing checkpoint (exact float round-trip)."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "variant": params.variant,
        "d": params.d,
        "h": params.h,
        "C": params.C,
        "p": params.p,
        "m_total": params.m_total,
        "vocab": params.vocab,
        "labels": params.labels,
    }
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **params.tensors())


def load_model(path: str | os.PathLike) -> ModelParams:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(data["meta"].item())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        tensors = {name: np.array(data[name]) for name in _TENSOR_NAMES}
    return ModelParams(
        variant=meta["variant"],
        vocab={word: int(idx) for word, idx in meta["vocab"].items()},
        d=int(meta["d"]),
        h=int(meta["h"]),
        C=int(meta["C"]),
        p=int(meta["p"]),
        m_total=int(meta["m_total"]),
        labels=meta.get("labels"),
        **tensors,
    )


def load_pretrained_embeddings(params: ModelParams, path: str | os.PathLike) -> int:
    """Overwrite embedding rows from a `word v1 .. vd` text file.

    Unknown words are skipped; returns the number of rows loaded.
    """
    loaded = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            word, vals = parts[0], parts[1:]
            idx = params.vocab.get(word)
            if idx is None:
                continue
            if len(vals) != params.d:
                raise DimensionMismatchError(
                    f"embedding for {word!r} has {len(vals)} dims, expected {params.d}"
                )
            params.emb[idx] = np.array([float(v) for v in vals])
            loaded += 1
    return loaded
