"""Contrastive dual-encoder training math.

Queries and candidates are encoded separately and scored by cosine
similarity. Training uses in-batch negatives: for each query the positives
of the other queries in the batch act as its negatives, and negatives that
share a charge with the query's own positive are masked out of the softmax
(they are false negatives, legally related to the query). Masking is an
additive large-negative surrogate before the softmax, which is numerically
identical to deleting those entries from the negative set.

The :class:`ToyEmbedder` is a desk-scale trainable encoder (hashed
character n-grams into a linear map); it exists to exercise the loss,
masking, batching and end-to-end trend checks, not to stand in for a
pre-trained model.
"""

from __future__ import annotations

import struct
import zlib
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import (
    BadCheckpoint,
    DegenerateRow,
    NonFiniteLoss,
    ZeroVector,
)
from .seeds import derive_seed

#: Additive stand-in for minus infinity; underflows to exact zero softmax mass.
MASK_SURROGATE = -1.0e9


@runtime_checkable
class Embedder(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 1.0
    masking_enabled: bool = True

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


#: Preset matching the softmax temperature used for large-model runs.
LLM_TEMPERATURE = 0.2


def cosine_matrix(queries: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities; entry (i, j) in [-1, 1].

    Raises :class:`ZeroVector` naming the first offending row if any input
    vector has zero norm.
    """
    q = np.asarray(queries, dtype=np.float64)
    c = np.asarray(candidates, dtype=np.float64)
    if q.ndim != 2 or c.ndim != 2 or q.shape[1] != c.shape[1]:
        raise ValueError(f"shape mismatch: {q.shape} vs {c.shape}")
    qn = np.linalg.norm(q, axis=1)
    cn = np.linalg.norm(c, axis=1)
    for label, norms in (("query", qn), ("candidate", cn)):
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ZeroVector(f"{label} row {int(zero[0])} has zero norm")
    sim = (q / qn[:, None]) @ (c / cn[:, None]).T
    np.clip(sim, -1.0, 1.0, out=sim)
    return sim


def false_negative_mask(positive_charges: Sequence[frozenset[str] | set[str]],
                        mode: str = "overlap") -> np.ndarray:
    """Boolean N×N mask of in-batch negatives sharing charges with the positive.

    ``mask[i][j]`` is True iff ``i != j`` and the charges of positive j
    intersect (mode 'overlap', default) or equal (mode 'exact') the charges
    of positive i. The diagonal is always False: a query's own positive is
    never masked.
    """
    if mode not in ("overlap", "exact"):
        raise ValueError(f"unknown mask mode: {mode}")
    sets = [frozenset(s) for s in positive_charges]
    n = len(sets)
    mask = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if mode == "overlap":
                mask[i, j] = bool(sets[i] & sets[j])
            else:
                mask[i, j] = sets[i] == sets[j]
    return mask


def in_batch_loss(sim: np.ndarray, mask: np.ndarray | None = None,
                  cfg: LossConfig = LossConfig()) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy over each row with the diagonal as the positive.

    Returns ``(loss, grad)`` where loss is
    ``-(1/N) Σ_i log( exp(s_ii/τ) / Σ_{j unmasked or j=i} exp(s_ij/τ) )``
    and grad is its analytic gradient with respect to ``sim``. Masked
    entries are excluded from every denominator and receive exactly zero
    gradient.
    """
    s = np.asarray(sim, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"similarity matrix must be square, got {s.shape}")
    if not np.isfinite(s).all():
        raise ValueError("similarity matrix contains non-finite entries")
    n = s.shape[0]

    apply_mask = mask is not None and cfg.masking_enabled
    if apply_mask:
        m = np.asarray(mask, dtype=bool)
        if m.shape != s.shape:
            raise ValueError(f"mask shape {m.shape} != sim shape {s.shape}")
        if m.diagonal().any():
            raise DegenerateRow("diagonal entries must never be masked")
        s = np.where(m, MASK_SURROGATE, s)

    logits = s / cfg.temperature
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    denom = exp.sum(axis=1)
    log_denom = np.log(denom) + row_max[:, 0]
    losses = log_denom - logits.diagonal()
    loss = float(losses.mean())

    softmax = exp / denom[:, None]
    grad = (softmax - np.eye(n)) / (n * cfg.temperature)
    if apply_mask:
        grad[m] = 0.0
    return loss, grad


# --------------------------------------------------------------------------
# Toy embedder: hashed character n-grams through a trainable linear map
# --------------------------------------------------------------------------

#: Featurization is a pure function of (hashing params, text); the cache is
#: shared across embedder instances so repeated runs over one corpus are cheap.
_FEATURE_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def clear_feature_cache() -> None:
    _FEATURE_CACHE.clear()


class ToyEmbedder:
    """Hashed character n-gram featurizer followed by a linear map.

    Featurization is deterministic (CRC32 bucket hashing, log-damped
    counts); the only parameters are the ``hash_buckets × dim`` weights,
    initialized from a seeded uniform distribution.
    """

    def __init__(self, dim: int = 64, hash_buckets: int = 1 << 15,
                 ngram_min: int = 2, ngram_max: int = 3, seed: int = 0):
        if not 1 <= ngram_min <= ngram_max:
            raise ValueError("need 1 <= ngram_min <= ngram_max")
        self.dim = dim
        self.hash_buckets = hash_buckets
        self.ngram_min = ngram_min
        self.ngram_max = ngram_max
        self.seed = seed
        scale = 1.0 / np.sqrt(hash_buckets)
        rng = np.random.default_rng(seed)
        self.weights = rng.uniform(-scale, scale, size=(hash_buckets, dim))

    @property
    def parameter_count(self) -> int:
        return self.hash_buckets * self.dim

    def features(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        """Sparse feature vector of a text: (bucket indices, damped counts)."""
        key = (self.hash_buckets, self.ngram_min, self.ngram_max, text)
        cached = _FEATURE_CACHE.get(key)
        if cached is not None:
            return cached
        compact = "".join(text.split())
        counts: dict[int, int] = {}
        for n in range(self.ngram_min, self.ngram_max + 1):
            for i in range(len(compact) - n + 1):
                bucket = zlib.crc32(compact[i:i + n].encode("utf-8")) % self.hash_buckets
                counts[bucket] = counts.get(bucket, 0) + 1
        idx = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
        raw = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
        values = 1.0 + np.log(raw)
        _FEATURE_CACHE[key] = (idx, values)
        return idx, values

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            idx, values = self.features(text)
            if idx.size:
                out[row] = values @ self.weights[idx]
        return out

    def save(self, path: str | Path) -> None:
        save_checkpoint(self, path)

    @classmethod
    def load(cls, path: str | Path) -> "ToyEmbedder":
        return load_checkpoint(path)


_CKPT_MAGIC = b"LXTOYEMB"
_CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<IIIIIq")  # version, H, dim, nmin, nmax, seed


def save_checkpoint(embedder: ToyEmbedder, path: str | Path) -> None:
    """Write the embedder to a versioned little-endian binary file.

    Layout: 8-byte magic ``LXTOYEMB``; ``<IIIIIq`` header holding version,
    hash-bucket count, dimension, ngram_min, ngram_max and the init seed;
    then hash_buckets × dim float64 weights, row-major, little-endian.
    """
    header = _CKPT_HEADER.pack(_CKPT_VERSION, embedder.hash_buckets, embedder.dim,
                               embedder.ngram_min, embedder.ngram_max, embedder.seed)
    payload = embedder.weights.astype("<f8").tobytes(order="C")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(_CKPT_MAGIC + header + payload)


def load_checkpoint(path: str | Path) -> ToyEmbedder:
    blob = Path(path).read_bytes()
    if blob[:len(_CKPT_MAGIC)] != _CKPT_MAGIC:
        raise BadCheckpoint(f"{path}: bad magic")
    offset = len(_CKPT_MAGIC)
    try:
        version, buckets, dim, nmin, nmax, seed = _CKPT_HEADER.unpack_from(blob, offset)
    except struct.error as exc:
        raise BadCheckpoint(f"{path}: truncated header") from exc
    if version != _CKPT_VERSION:
        raise BadCheckpoint(f"{path}: unsupported version {version}")
    body = blob[offset + _CKPT_HEADER.size:]
    expected = buckets * dim * 8
    if len(body) != expected:
        raise BadCheckpoint(f"{path}: expected {expected} weight bytes, got {len(body)}")
    embedder = ToyEmbedder(dim=dim, hash_buckets=buckets,
                           ngram_min=nmin, ngram_max=nmax, seed=seed)
    embedder.weights = np.frombuffer(body, dtype="<f8").reshape(buckets, dim).copy()
    return embedder


# --------------------------------------------------------------------------
# Training loop
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PairExample:
    query_text: str
    positive_text: str
    positive_charges: frozenset[str] = frozenset()


@dataclass(frozen=True)
class TrainingBatch:
    queries: list[str]
    positives: list[str]
    positive_charges: list[frozenset[str]]

    def __post_init__(self):
        if not (len(self.queries) == len(self.positives) == len(self.positive_charges)):
            raise ValueError("batch lists must have equal length")

    @property
    def size(self) -> int:
        return len(self.queries)


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-2
    warmup_fraction: float = 0.1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dev_fraction: float = 0.0
    patience: int | None = None


@dataclass
class TrainResult:
    embedder: ToyEmbedder
    loss_curve: list[tuple[int, float]]
    dev_curve: list[tuple[int, float]] = field(default_factory=list)
    stopped_early: bool = False


class Adam:
    """Adaptive moment estimation, deterministic given the gradient stream."""

    def __init__(self, shape: tuple[int, ...], beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        params -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def lr_at(step: int, total_steps: int, schedule: TrainSchedule) -> float:
    """Linear warm-up to the peak rate, then linear decay toward zero."""
    warmup = max(1, int(round(schedule.warmup_fraction * total_steps)))
    if step < warmup:
        return schedule.learning_rate * (step + 1) / warmup
    remaining = max(1, total_steps - warmup)
    return schedule.learning_rate * max(0.0, (total_steps - step) / remaining)


def _batch_gradient(embedder: ToyEmbedder, batch: TrainingBatch,
                    cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Loss and dL/dW for one batch, via the cosine chain rule."""
    q_feats = [embedder.features(t) for t in batch.queries]
    c_feats = [embedder.features(t) for t in batch.positives]
    q_vecs = embedder.embed(batch.queries)
    c_vecs = embedder.embed(batch.positives)

    sim = cosine_matrix(q_vecs, c_vecs)
    mask = false_negative_mask(batch.positive_charges) if cfg.masking_enabled else None
    loss, grad_sim = in_batch_loss(sim, mask, cfg)

    qn = np.linalg.norm(q_vecs, axis=1, keepdims=True)
    cn = np.linalg.norm(c_vecs, axis=1, keepdims=True)
    q_unit = q_vecs / qn
    c_unit = c_vecs / cn
    # d cos(q_i, c_j)/d q_i = (ĉ_j - s_ij q̂_i) / |q_i|
    d_q = (grad_sim @ c_unit - (grad_sim * sim).sum(axis=1, keepdims=True) * q_unit) / qn
    d_c = (grad_sim.T @ q_unit - (grad_sim * sim).sum(axis=0)[:, None] * c_unit) / cn

    w_grad = np.zeros_like(embedder.weights)
    for (idx, values), row in zip(q_feats, d_q):
        if idx.size:
            w_grad[idx] += values[:, None] * row
    for (idx, values), row in zip(c_feats, d_c):
        if idx.size:
            w_grad[idx] += values[:, None] * row
    return loss, w_grad


def _batches(order: Sequence[int], batch_size: int) -> list[list[int]]:
    chunks = [list(order[i:i + batch_size]) for i in range(0, len(order), batch_size)]
    # a singleton batch has no in-batch negatives; drop it
    return [chunk for chunk in chunks if len(chunk) >= 2]


def train_toy(pairs: Sequence[PairExample], embedder: ToyEmbedder,
              schedule: TrainSchedule = TrainSchedule(),
              loss_cfg: LossConfig = LossConfig()) -> TrainResult:
    """First-order training of the toy embedder on query-positive pairs.

    Fully deterministic under the schedule seed: shuffling, batching and
    every update are reproducible bit for bit. Optional early stopping
    watches mean loss on a held-out dev split with the configured patience.
    """
    if not pairs:
        raise ValueError("no training pairs")

    pairs = list(pairs)
    dev_pairs: list[PairExample] = []
    if schedule.dev_fraction > 0 and len(pairs) >= 4:
        rng = Random(derive_seed(schedule.seed, "dev-split"))
        order = list(range(len(pairs)))
        rng.shuffle(order)
        n_dev = max(2, int(len(pairs) * schedule.dev_fraction))
        dev_idx = set(order[:n_dev])
        dev_pairs = [pairs[i] for i in sorted(dev_idx)]
        pairs = [p for i, p in enumerate(pairs) if i not in dev_idx]

    per_epoch = len(_batches(range(len(pairs)), schedule.batch_size))
    if per_epoch == 0:
        raise ValueError("not enough pairs for a single batch of two")
    total_steps = schedule.epochs * per_epoch

    optimizer = Adam((embedder.hash_buckets, embedder.dim),
                     schedule.beta1, schedule.beta2, schedule.eps)
    curve: list[tuple[int, float]] = []
    dev_curve: list[tuple[int, float]] = []
    best_dev = np.inf
    bad_epochs = 0
    stopped = False
    step = 0

    for epoch in range(schedule.epochs):
        rng = Random(derive_seed(schedule.seed, "shuffle", epoch))
        order = list(range(len(pairs)))
        rng.shuffle(order)
        for chunk in _batches(order, schedule.batch_size):
            batch = TrainingBatch(
                queries=[pairs[i].query_text for i in chunk],
                positives=[pairs[i].positive_text for i in chunk],
                positive_charges=[pairs[i].positive_charges for i in chunk])
            try:
                loss, w_grad = _batch_gradient(embedder, batch, loss_cfg)
            except ValueError as exc:
                raise NonFiniteLoss(
                    f"aborted at step {step} (epoch {epoch}, "
                    f"batch rows {chunk[:4]}...): {exc}") from exc
            if not np.isfinite(loss) or not np.isfinite(w_grad).all():
                raise NonFiniteLoss(
                    f"non-finite loss at step {step} (epoch {epoch}): {loss}")
            curve.append((step, loss))
            optimizer.step(embedder.weights, w_grad, lr_at(step, total_steps, schedule))
            step += 1
        if dev_pairs and schedule.patience is not None:
            dev_loss = evaluate_pairs_loss(dev_pairs, embedder, loss_cfg)
            dev_curve.append((step, dev_loss))
            if dev_loss < best_dev - 1e-12:
                best_dev = dev_loss
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= schedule.patience:
                    stopped = True
                    break

    return TrainResult(embedder=embedder, loss_curve=curve,
                       dev_curve=dev_curve, stopped_early=stopped)


def evaluate_pairs_loss(pairs: Sequence[PairExample], embedder: ToyEmbedder,
                        loss_cfg: LossConfig = LossConfig()) -> float:
    """Mean in-batch loss over one pass, without updating parameters."""
    batch = TrainingBatch(
        queries=[p.query_text for p in pairs],
        positives=[p.positive_text for p in pairs],
        positive_charges=[p.positive_charges for p in pairs])
    sim = cosine_matrix(embedder.embed(batch.queries), embedder.embed(batch.positives))
    mask = false_negative_mask(batch.positive_charges) if loss_cfg.masking_enabled else None
    loss, _ = in_batch_loss(sim, mask, loss_cfg)
    return loss


# --------------------------------------------------------------------------
# Benchmark triplets from graded judgments
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Triplet:
    query_id: str
    positive_case_id: str
    negative_case_id: str

    def to_record(self) -> dict:
        return {"query_id": self.query_id,
                "positive_case_id": self.positive_case_id,
                "negative_case_id": self.negative_case_id}


@dataclass
class TripletBuild:
    triplets: list[Triplet]
    skipped: list[str] = field(default_factory=list)


def triplets_from_qrels(pools: Mapping[str, Sequence[str]],
                        qrels: Mapping[str, Mapping[str, int]],
                        seed: int = 0,
                        relevant_label: int = 3) -> TripletBuild:
    """One (query, positive, negative) triplet per top-label positive.

    Positives are every candidate at the top relevance label. Negatives
    come from the remaining annotated candidates; when those run short the
    difference is drawn at random from the query's unannotated pool.
    Queries with no positive are skipped and reported.
    """
    triplets: list[Triplet] = []
    skipped: list[str] = []
    for query_id in sorted(qrels):
        judged = qrels[query_id]
        positives = sorted(c for c, label in judged.items() if label == relevant_label)
        if not positives:
            skipped.append(query_id)
            continue
        annotated_negs = sorted(c for c, label in judged.items() if label != relevant_label)
        pool = pools.get(query_id, ())
        unannotated = sorted(set(pool) - set(judged))
        rng = Random(derive_seed(seed, "triplets", query_id))
        n = len(positives)
        if len(annotated_negs) >= n:
            negatives = rng.sample(annotated_negs, n)
        else:
            negatives = list(annotated_negs)
            shortfall = n - len(negatives)
            take = min(shortfall, len(unannotated))
            negatives.extend(rng.sample(unannotated, take))
        if not negatives:
            skipped.append(query_id)
            continue
        for j, positive in enumerate(positives):
            negatives_j = negatives[j % len(negatives)]
            triplets.append(Triplet(query_id, positive, negatives_j))
    return TripletBuild(triplets=triplets, skipped=skipped)
