"""Deterministic pooled-embedding probe for relation classification.

Contextual token embeddings (from a provider) are pooled at key positions:

    cls     h at [CLS]                          (D)
    es      [h at [E1], h at [E2]]              (2D)
    en      [avg of e1 span, avg of e2 span]    (2D, marker tokens inclusive)
    cls_es  [h_cls, es]                         (3D)
    cls_en  [h_cls, en]                         (3D)

On top of the pooled summary sit linear softmax heads trained by full-batch
gradient descent: a relation head (mode "re"), or relation + per-entity type
heads (mode "mt_no_share"), or the sharing variant (mode "mt_share") where
learned transforms produce type embeddings that also feed the relation head.
Training is deterministic given the seed; embeddings are never fine-tuned.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .providers import EmbeddingProvider

POOLING_SCHEMES = ("cls", "es", "en", "cls_es", "cls_en")
MODES = ("re", "mt_no_share", "mt_share")

_OPEN1_RE = re.compile(r"^\[(E1|ET1=[A-Z_]+)\]$")
_CLOSE1_RE = re.compile(r"^\[/(E1|ET1=[A-Z_]+)\]$")
_OPEN2_RE = re.compile(r"^\[(E2|ET2=[A-Z_]+)\]$")
_CLOSE2_RE = re.compile(r"^\[/(E2|ET2=[A-Z_]+)\]$")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TokenEmbeddings:
    """Token embedding matrix plus the marker positions pooling needs."""

    vectors: np.ndarray  # (sequence length, D)
    cls_index: int
    e1_open: int
    e1_close: int
    e2_open: int
    e2_close: int

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        object.__setattr__(self, "vectors", v)
        if v.ndim != 2:
            raise ValueError("vectors must be a (length, D) matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("vectors must be finite")
        n = len(v)
        for name in ("cls_index", "e1_open", "e1_close", "e2_open", "e2_close"):
            idx = getattr(self, name)
            if not 0 <= idx < n:
                raise ValueError(f"{name}={idx} out of range for length {n}")
        if not (self.e1_open < self.e1_close and self.e2_open < self.e2_close):
            raise ValueError("marker indices must satisfy open < close")

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class PooledSummary:
    scheme: str
    vector: np.ndarray

    def __post_init__(self):
        if self.scheme not in POOLING_SCHEMES:
            raise ValueError(f"unknown pooling scheme {self.scheme!r}")
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=float))


def pooled_dimension(scheme: str, d: int) -> int:
    return {"cls": d, "es": 2 * d, "en": 2 * d, "cls_es": 3 * d, "cls_en": 3 * d}[scheme]


def pool(emb: TokenEmbeddings, scheme: str) -> PooledSummary:
    """Pool token embeddings at the marker positions for the given scheme."""
    if scheme not in POOLING_SCHEMES:
        raise ValueError(f"unknown pooling scheme {scheme!r}")
    v = emb.vectors
    h_cls = v[emb.cls_index]
    h_es = np.concatenate([v[emb.e1_open], v[emb.e2_open]])
    if scheme in ("en", "cls_en"):
        e1_avg = v[emb.e1_open:emb.e1_close + 1].mean(axis=0)
        e2_avg = v[emb.e2_open:emb.e2_close + 1].mean(axis=0)
        h_en = np.concatenate([e1_avg, e2_avg])
    if scheme == "cls":
        vec = h_cls
    elif scheme == "es":
        vec = h_es
    elif scheme == "en":
        vec = h_en
    elif scheme == "cls_es":
        vec = np.concatenate([h_cls, h_es])
    else:
        vec = np.concatenate([h_cls, h_en])
    return PooledSummary(scheme=scheme, vector=vec)


def embed_markup(rendered: str, provider: EmbeddingProvider) -> TokenEmbeddings:
    """Embed a marker-annotated string and locate its pooling positions."""
    tokens = rendered.split()

    def find(pattern: re.Pattern, last: bool = False) -> int:
        hits = [i for i, t in enumerate(tokens) if pattern.match(t)]
        if not hits:
            raise ValueError(f"marker {pattern.pattern} not found")
        return hits[-1] if last else hits[0]

    try:
        cls_index = tokens.index("[CLS]")
    except ValueError:
        raise ValueError("[CLS] token not found") from None
    return TokenEmbeddings(
        vectors=provider.embed_tokens([rendered])[0],
        cls_index=cls_index,
        e1_open=find(_OPEN1_RE),
        e1_close=find(_CLOSE1_RE, last=True),
        e2_open=find(_OPEN2_RE),
        e2_close=find(_CLOSE2_RE, last=True),
    )


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0


@dataclass
class ProbeModel:
    scheme: str
    mode: str
    relation_labels: tuple[str, ...]
    type_labels: tuple[str, ...]
    params: dict[str, np.ndarray]
    config: TrainConfig
    loss_trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def input_dim(self) -> int:
        base = self.params["W_rel"].shape[1]
        if self.mode == "mt_share":
            return base - 2 * self.params["M1"].shape[0]
        return base


def _entity_blocks(X: np.ndarray, scheme: str) -> tuple[np.ndarray, np.ndarray, int]:
    """Slice the per-entity sub-vectors out of pooled summaries."""
    p = X.shape[1]
    if scheme in ("es", "en"):
        d = p // 2
        return X[:, :d], X[:, d:], d
    if scheme in ("cls_es", "cls_en"):
        d = p // 3
        return X[:, d:2 * d], X[:, 2 * d:], d
    raise ValueError(f"scheme {scheme!r} has no entity blocks (multitask modes need them)")


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _ce_forward_backward(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient wrt the logits."""
    n = len(y)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(n), y].mean())
    grad = _softmax(logits)
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def loss_and_gradients(
    params: Mapping[str, np.ndarray],
    X: np.ndarray,
    y_rel: np.ndarray,
    y_t1: np.ndarray | None,
    y_t2: np.ndarray | None,
    mode: str,
    scheme: str,
    l2: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Total loss (relation CE + type CEs + L2 on weight matrices) and grads."""
    grads: dict[str, np.ndarray] = {}
    W_rel, b_rel = params["W_rel"], params["b_rel"]

    if mode == "re":
        loss, dz = _ce_forward_backward(X @ W_rel.T + b_rel, y_rel)
        grads["W_rel"] = dz.T @ X + 2 * l2 * W_rel
        grads["b_rel"] = dz.sum(axis=0)
        loss += l2 * float((W_rel ** 2).sum())
        return loss, grads

    E1, E2, _ = _entity_blocks(X, scheme)
    W_t1, b_t1 = params["W_t1"], params["b_t1"]
    W_t2, b_t2 = params["W_t2"], params["b_t2"]

    if mode == "mt_no_share":
        loss_rel, dz_rel = _ce_forward_backward(X @ W_rel.T + b_rel, y_rel)
        loss_t1, dz_t1 = _ce_forward_backward(E1 @ W_t1.T + b_t1, y_t1)
        loss_t2, dz_t2 = _ce_forward_backward(E2 @ W_t2.T + b_t2, y_t2)
        grads["W_rel"] = dz_rel.T @ X + 2 * l2 * W_rel
        grads["b_rel"] = dz_rel.sum(axis=0)
        grads["W_t1"] = dz_t1.T @ E1 + 2 * l2 * W_t1
        grads["b_t1"] = dz_t1.sum(axis=0)
        grads["W_t2"] = dz_t2.T @ E2 + 2 * l2 * W_t2
        grads["b_t2"] = dz_t2.sum(axis=0)
        penalty = l2 * float((W_rel ** 2).sum() + (W_t1 ** 2).sum() + (W_t2 ** 2).sum())
        return loss_rel + loss_t1 + loss_t2 + penalty, grads

    if mode == "mt_share":
        M1, M2 = params["M1"], params["M2"]
        H1, H2 = E1 @ M1.T, E2 @ M2.T
        Xs = np.concatenate([X, H1, H2], axis=1)
        loss_rel, dz_rel = _ce_forward_backward(Xs @ W_rel.T + b_rel, y_rel)
        loss_t1, dz_t1 = _ce_forward_backward(H1 @ W_t1.T + b_t1, y_t1)
        loss_t2, dz_t2 = _ce_forward_backward(H2 @ W_t2.T + b_t2, y_t2)

        grads["W_rel"] = dz_rel.T @ Xs + 2 * l2 * W_rel
        grads["b_rel"] = dz_rel.sum(axis=0)
        grads["W_t1"] = dz_t1.T @ H1 + 2 * l2 * W_t1
        grads["b_t1"] = dz_t1.sum(axis=0)
        grads["W_t2"] = dz_t2.T @ H2 + 2 * l2 * W_t2
        grads["b_t2"] = dz_t2.sum(axis=0)

        p = X.shape[1]
        t = M1.shape[0]
        dXs = dz_rel @ W_rel
        dH1 = dXs[:, p:p + t] + dz_t1 @ W_t1
        dH2 = dXs[:, p + t:] + dz_t2 @ W_t2
        grads["M1"] = dH1.T @ E1 + 2 * l2 * M1
        grads["M2"] = dH2.T @ E2 + 2 * l2 * M2
        penalty = l2 * float(
            (W_rel ** 2).sum() + (W_t1 ** 2).sum() + (W_t2 ** 2).sum()
            + (M1 ** 2).sum() + (M2 ** 2).sum()
        )
        return loss_rel + loss_t1 + loss_t2 + penalty, grads

    raise ValueError(f"unknown mode {mode!r}")


def _encode_labels(values: Sequence[str], vocab: tuple[str, ...]) -> np.ndarray:
    index = {v: i for i, v in enumerate(vocab)}
    return np.array([index[v] for v in values], dtype=int)


def train(
    summaries: Sequence[PooledSummary],
    relations: Sequence[str],
    config: TrainConfig = TrainConfig(),
    mode: str = "re",
    entity_types: Sequence[tuple[str, str]] | None = None,
    head_init_scale: float = 0.0,
) -> ProbeModel:
    """Fit the probe by full-batch gradient descent on the summed cross-entropies.

    Heads start at zero (or seeded small-uniform when head_init_scale > 0);
    sharing transforms start seeded small-uniform. Deterministic given seed.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not summaries:
        raise ValueError("no training examples")
    if len(summaries) != len(relations):
        raise ValueError("summaries and relations must align")
    scheme = summaries[0].scheme
    if any(s.scheme != scheme for s in summaries):
        raise ValueError("mixed pooling schemes in one training set")
    X = np.stack([s.vector for s in summaries])
    p = X.shape[1]

    relation_labels = tuple(sorted(set(relations)))
    y_rel = _encode_labels(relations, relation_labels)

    rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    type_labels: tuple[str, ...] = ()
    y_t1 = y_t2 = None

    if mode == "re":
        rel_in = p
    else:
        if entity_types is None or any(t is None for pair in entity_types for t in pair):
            raise ValueError(f"mode {mode!r} requires entity type labels on every example")
        if len(entity_types) != len(summaries):
            raise ValueError("entity_types and summaries must align")
        _, _, d = _entity_blocks(X, scheme)
        type_labels = tuple(sorted({t for pair in entity_types for t in pair}))
        y_t1 = _encode_labels([p_[0] for p_ in entity_types], type_labels)
        y_t2 = _encode_labels([p_[1] for p_ in entity_types], type_labels)
        if mode == "mt_share":
            params["M1"] = rng.uniform(-0.01, 0.01, size=(d, d))
            params["M2"] = rng.uniform(-0.01, 0.01, size=(d, d))
            rel_in = p + 2 * d
        else:
            rel_in = p

    def init(shape):
        if head_init_scale > 0.0:
            return rng.uniform(-head_init_scale, head_init_scale, size=shape)
        return np.zeros(shape)

    params["W_rel"] = init((len(relation_labels), rel_in))
    params["b_rel"] = np.zeros(len(relation_labels))
    if mode != "re":
        _, _, d = _entity_blocks(X, scheme)
        params["W_t1"] = init((len(type_labels), d))
        params["b_t1"] = np.zeros(len(type_labels))
        params["W_t2"] = init((len(type_labels), d))
        params["b_t2"] = np.zeros(len(type_labels))

    trace: list[float] = []
    for epoch in range(config.epochs):
        loss, grads = loss_and_gradients(params, X, y_rel, y_t1, y_t2, mode, scheme, config.l2)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        trace.append(loss)
        for name, g in grads.items():
            params[name] = params[name] - config.learning_rate * g
    final, _ = loss_and_gradients(params, X, y_rel, y_t1, y_t2, mode, scheme, config.l2)
    trace.append(final)

    return ProbeModel(
        scheme=scheme, mode=mode, relation_labels=relation_labels,
        type_labels=type_labels, params=params, config=config,
        loss_trace=tuple(trace),
    )


def predict(model: ProbeModel, summary: PooledSummary) -> tuple[str, np.ndarray]:
    """Relation label (argmax, ties to the smaller index) and probabilities."""
    label_idx, probs = _predict_row(model, summary)
    return model.relation_labels[label_idx], probs


def predict_batch(model: ProbeModel, summaries: Sequence[PooledSummary]) -> list[str]:
    return [predict(model, s)[0] for s in summaries]


def _predict_row(model: ProbeModel, summary: PooledSummary) -> tuple[int, np.ndarray]:
    if summary.scheme != model.scheme:
        raise ValueError(f"summary scheme {summary.scheme!r} != model scheme {model.scheme!r}")
    x = summary.vector
    if model.mode == "mt_share":
        X = x[None, :]
        E1, E2, _ = _entity_blocks(X, model.scheme)
        x = np.concatenate([x, (E1 @ model.params["M1"].T)[0], (E2 @ model.params["M2"].T)[0]])
    if x.shape[0] != model.params["W_rel"].shape[1]:
        raise ValueError(
            f"summary dimension {x.shape[0]} != model input {model.params['W_rel'].shape[1]}"
        )
    logits = model.params["W_rel"] @ x + model.params["b_rel"]
    probs = _softmax(logits[None, :])[0]
    return int(np.argmax(probs)), probs


# ---------------------------------------------------------------------------
# Model persistence (JSON, row-major weights)


def save_model(model: ProbeModel, path: str | Path) -> None:
    doc = {
        "scheme": model.scheme,
        "mode": model.mode,
        "relation_labels": list(model.relation_labels),
        "type_labels": list(model.type_labels),
        "dims": {name: list(w.shape) for name, w in model.params.items()},
        "weights": {name: w.ravel().tolist() for name, w in model.params.items()},
        "config": {
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "l2": model.config.l2,
        },
        "seed": model.config.seed,
    }
    Path(path).write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")


def load_model(path: str | Path) -> ProbeModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    params = {
        name: np.asarray(doc["weights"][name], dtype=float).reshape(doc["dims"][name])
        for name in doc["weights"]
    }
    cfg = TrainConfig(seed=doc["seed"], **doc["config"])
    return ProbeModel(
        scheme=doc["scheme"], mode=doc["mode"],
        relation_labels=tuple(doc["relation_labels"]),
        type_labels=tuple(doc["type_labels"]),
        params=params, config=cfg,
    )


# ---------------------------------------------------------------------------
# Per-relation metric ensemble


@dataclass(frozen=True)
class EnsembleReport:
    """Per-relation best-of-two evaluation, as reported for multitask ensembles."""

    macro_f1: float
    per_relation: dict[str, float]
    winner: dict[str, str]  # relation -> "a" | "b"


def ensemble_per_relation(eval_a, eval_b) -> EnsembleReport:
    """Metric-level ensemble: per relation, keep the better F1 of the two runs."""
    if eval_a.fingerprint != eval_b.fingerprint:
        raise ValueError("evaluations were not computed on the identical test set")
    per: dict[str, float] = {}
    winner: dict[str, str] = {}
    for rel in eval_a.gold_relations():
        fa = eval_a.per_relation[rel].f1
        fb = eval_b.per_relation[rel].f1
        per[rel] = max(fa, fb)
        winner[rel] = "a" if fa >= fb else "b"
    macro = sum(per.values()) / len(per) if per else 0.0
    return EnsembleReport(macro_f1=macro, per_relation=per, winner=winner)
