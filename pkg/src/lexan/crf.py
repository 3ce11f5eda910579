"""Linear-chain CRF over per-position emission scores.

Scores live in the log domain. A labelling ``y`` of length T scores::

    start[y_0] + sum_t emissions[t, y_t] + sum_{t>0} transitions[y_{t-1}, y_t]

The normalizer used for training sums over *every* label sequence, legal
or not; IOB2 legality is enforced only inside :func:`viterbi_decode`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numkernel import logsumexp, neg_inf
from .tagset import LabelSpace


@dataclass
class CrfParams:
    transitions: np.ndarray  # L x L, [prev, next]
    start: np.ndarray  # L

    @property
    def num_labels(self) -> int:
        return self.start.shape[0]

    def arrays(self):
        yield "crf.transitions", self.transitions
        yield "crf.start", self.start

    def copy(self) -> "CrfParams":
        return CrfParams(self.transitions.copy(), self.start.copy())

    def astype(self, dtype) -> "CrfParams":
        return CrfParams(self.transitions.astype(dtype), self.start.astype(dtype))

    @classmethod
    def zeros(cls, num_labels: int, dtype=np.float64) -> "CrfParams":
        return cls(np.zeros((num_labels, num_labels), dtype), np.zeros(num_labels, dtype))


@dataclass(frozen=True)
class DecodeConstraints:
    start_mask: np.ndarray  # bool L
    transition_mask: np.ndarray  # bool L x L

    def __post_init__(self):
        if not self.start_mask.any():
            raise ValueError("constraints admit no start label")
        if not self.transition_mask.any(axis=1).all():
            raise ValueError("some label has no legal successor")

    @classmethod
    def from_space(cls, space: LabelSpace) -> "DecodeConstraints":
        return cls(space.start_mask, space.transition_mask)


def _check(emissions: np.ndarray, params: CrfParams, labels=None) -> None:
    if emissions.ndim != 2 or emissions.shape[0] < 1:
        raise ValueError(f"emissions must be T x L with T >= 1, got {emissions.shape}")
    L = emissions.shape[1]
    if params.transitions.shape != (L, L) or params.start.shape != (L,):
        raise ValueError(f"CRF parameters do not match {L} labels")
    if labels is not None:
        if len(labels) != emissions.shape[0]:
            raise ValueError(f"{len(labels)} labels for {emissions.shape[0]} positions")
        if len(labels) and (min(labels) < 0 or max(labels) >= L):
            raise IndexError("label id out of range")


def sequence_score(emissions: np.ndarray, labels: Sequence[int], params: CrfParams) -> float:
    emissions = np.asarray(emissions)
    _check(emissions, params, labels)
    y = np.asarray(labels, dtype=np.int64)
    total = params.start[y[0]] + emissions[np.arange(len(y)), y].sum()
    if len(y) > 1:
        total += params.transitions[y[:-1], y[1:]].sum()
    return float(total)


def _alphas(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    T = emissions.shape[0]
    alpha = np.empty_like(emissions, dtype=np.result_type(emissions, params.transitions))
    alpha[0] = params.start + emissions[0]
    for t in range(1, T):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + params.transitions, axis=0) + emissions[t]
    return alpha


def log_partition(emissions: np.ndarray, params: CrfParams) -> float:
    emissions = np.asarray(emissions)
    _check(emissions, params)
    return logsumexp(_alphas(emissions, params)[-1])


def marginals(emissions: np.ndarray, params: CrfParams):
    """Forward-backward: ``(log Z, node marginals T x L, summed pair marginals L x L)``."""
    emissions = np.asarray(emissions)
    _check(emissions, params)
    T, L = emissions.shape
    alpha = _alphas(emissions, params)
    beta = np.zeros_like(alpha)
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(params.transitions + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = logsumexp(alpha[-1])
    node = np.exp(alpha + beta - log_z)
    pair = np.zeros((L, L), alpha.dtype)
    for t in range(1, T):
        pair += np.exp(alpha[t - 1][:, None] + params.transitions
                       + (emissions[t] + beta[t])[None, :] - log_z)
    return log_z, node, pair


def log_likelihood(emissions: np.ndarray, labels: Sequence[int], params: CrfParams):
    """Log-probability of ``labels`` and its gradients.

    Returns ``(value, d_emissions, d_transitions, d_start)``; each gradient is
    observed counts minus expected counts under the model.
    """
    emissions = np.asarray(emissions)
    _check(emissions, params, labels)
    y = np.asarray(labels, dtype=np.int64)
    T = len(y)
    log_z, node, pair = marginals(emissions, params)
    value = sequence_score(emissions, y, params) - log_z

    d_em = -node
    d_em[np.arange(T), y] += 1.0
    d_trans = -pair
    np.add.at(d_trans, (y[:-1], y[1:]), 1.0)
    d_start = -node[0].copy()
    d_start[y[0]] += 1.0
    return value, d_em, d_trans, d_start


def _masked(params: CrfParams, constraints: DecodeConstraints | None, dtype):
    trans = params.transitions.astype(dtype, copy=False)
    start = params.start.astype(dtype, copy=False)
    if constraints is not None:
        neg = neg_inf(dtype)
        trans = np.where(constraints.transition_mask, trans, neg).astype(dtype, copy=False)
        start = np.where(constraints.start_mask, start, neg).astype(dtype, copy=False)
    return trans, start


def viterbi_batch(emissions: np.ndarray, lengths: Sequence[int], params: CrfParams,
                  constraints: DecodeConstraints | None = None) -> tuple[list[list[int]], np.ndarray]:
    """Best labellings for a padded ``B x T x L`` batch.

    Ties go to the lowest label id, both for the final label and for every
    back-pointer.
    """
    emissions = np.asarray(emissions)
    B, T, L = emissions.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    trans, start = _masked(params, constraints, emissions.dtype)

    score = start[None, :] + emissions[:, 0]
    backptr = np.empty((T, B, L), dtype=np.int64)
    identity = np.broadcast_to(np.arange(L), (B, L))
    rows = np.arange(B)[:, None]
    for t in range(1, T):
        cand = score[:, :, None] + trans[None]
        bp = np.argmax(cand, axis=1)
        best = cand[rows, bp, np.arange(L)[None, :]] + emissions[:, t]
        live = (t < lengths)[:, None]
        score = np.where(live, best, score)
        backptr[t] = np.where(live, bp, identity)

    last = np.argmax(score, axis=1)
    final = score[np.arange(B), last]
    path = np.empty((B, T), dtype=np.int64)
    path[:, T - 1] = last
    cur = last
    for t in range(T - 1, 0, -1):
        cur = backptr[t, np.arange(B), cur]
        path[:, t - 1] = cur
    # positions past a sentence's end carry its final label; trim them.
    return [path[b, : lengths[b]].tolist() for b in range(B)], final


def viterbi_decode(emissions: np.ndarray, params: CrfParams,
                   constraints: DecodeConstraints | None = None) -> tuple[list[int], float]:
    emissions = np.asarray(emissions)
    _check(emissions, params)
    paths, scores = viterbi_batch(emissions[None], [emissions.shape[0]], params, constraints)
    return paths[0], float(scores[0])
