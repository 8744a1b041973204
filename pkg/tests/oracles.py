"""Independent brute-force oracles.

Everything here re-derives expected values from first principles (plain
loops, explicit formulas, finite differences) without touching the library
code paths under test. Tests compare library output against these.
"""

from __future__ import annotations

import math


# --- ranking metrics ------------------------------------------------------

def precision_oracle(labels, k, relevant=3):
    hits = 0
    for i in range(min(k, len(labels))):
        if labels[i] == relevant:
            hits += 1
    return hits / k


def ap_oracle(labels, pool_labels, relevant=3):
    total = sum(1 for x in pool_labels if x == relevant)
    if total == 0:
        return 0.0
    acc = 0.0
    seen = 0
    for rank in range(1, len(labels) + 1):
        if labels[rank - 1] == relevant:
            seen += 1
            acc += seen / rank
    return acc / total


def dcg_oracle(labels, k, exponential=False):
    total = 0.0
    for rank in range(1, min(k, len(labels)) + 1):
        label = labels[rank - 1]
        g = (2 ** label - 1) if exponential else label
        total += g / math.log2(rank + 1)
    return total


def ndcg_oracle(labels, pool_labels, k, exponential=False):
    ideal = sorted(pool_labels, reverse=True)
    idcg = dcg_oracle(ideal, k, exponential)
    if idcg == 0:
        return 0.0
    return dcg_oracle(labels, k, exponential) / idcg


# --- contrastive loss -----------------------------------------------------

def filtered_loss_oracle(sim, mask, temperature):
    """Loss and gradient with masked entries physically removed per row.

    sim is a list of lists; mask is a list of lists of bool (or None).
    Returns (loss, grad) with grad as a list of lists; masked positions get
    a literal 0.0 entry because they are absent from the reduced problem.
    """
    n = len(sim)
    loss = 0.0
    grad = [[0.0] * n for _ in range(n)]
    for i in range(n):
        kept = [j for j in range(n) if j == i or mask is None or not mask[i][j]]
        logits = [sim[i][j] / temperature for j in kept]
        m = max(logits)
        exps = [math.exp(x - m) for x in logits]
        z = sum(exps)
        probs = [e / z for e in exps]
        pos = kept.index(i)
        loss += -(math.log(exps[pos] / z))
        for idx, j in enumerate(kept):
            delta = 1.0 if j == i else 0.0
            grad[i][j] = (probs[idx] - delta) / (n * temperature)
    return loss / n, grad


def fd_gradient(fn, sim, eps=1e-5):
    """Central finite differences of a scalar function of a square matrix."""
    n = len(sim)
    grad = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            up = [row[:] for row in sim]
            down = [row[:] for row in sim]
            up[i][j] += eps
            down[i][j] -= eps
            grad[i][j] = (fn(up) - fn(down)) / (2 * eps)
    return grad


# --- geometry -------------------------------------------------------------

def cosine_oracle(q, c):
    """Double-loop cosine matrix over lists of vectors."""
    out = []
    for qi in q:
        row = []
        nq = math.sqrt(sum(x * x for x in qi))
        for cj in c:
            nc = math.sqrt(sum(x * x for x in cj))
            dot = sum(a * b for a, b in zip(qi, cj))
            row.append(dot / (nq * nc))
        out.append(row)
    return out


# --- BM25 -----------------------------------------------------------------

def bm25_oracle(query_tokens, doc_tokens_by_id, doc_id, k1, b):
    """Direct evaluation of the scoring formula over tokenized docs."""
    n = len(doc_tokens_by_id)
    avgdl = sum(len(t) for t in doc_tokens_by_id.values()) / n
    doc = doc_tokens_by_id[doc_id]
    dl = len(doc)
    score = 0.0
    for term in query_tokens:
        tf = sum(1 for t in doc if t == term)
        if tf == 0:
            continue
        df = sum(1 for tokens in doc_tokens_by_id.values() if term in tokens)
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
    return score


# --- segmentation ---------------------------------------------------------

def window_oracle(length, max_len, stride):
    """Enumerate window start offsets one by one."""
    starts = [0]
    while starts[-1] + max_len < length:
        starts.append(starts[-1] + stride)
    return starts
