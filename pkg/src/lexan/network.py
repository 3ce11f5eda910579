"""Character embeddings, stacked Bi-GRU encoder and emission projection.

Forward and backward passes are written out by hand over padded batches.
Arrays are batch-major at the API (``ids[b, t]``) and time-major inside the
recurrences. Padded positions hold the recurrent state unchanged, so a
padded sentence yields the same outputs and gradients on its real positions
as the same sentence run alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .numkernel import WIDE, sigmoid

UNK_ID = 0
PAD_ID = 1

GATE_FIELDS = ("W_ux", "W_uh", "b_u", "W_rx", "W_rh", "b_r", "W_cx", "W_ch", "b_c")


@dataclass
class GruParams:
    """One GRU direction. ``W_*x`` are H x D_in, ``W_*h`` H x H, biases H."""

    W_ux: np.ndarray
    W_uh: np.ndarray
    b_u: np.ndarray
    W_rx: np.ndarray
    W_rh: np.ndarray
    b_r: np.ndarray
    W_cx: np.ndarray
    W_ch: np.ndarray
    b_c: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W_uh.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_ux.shape[1]

    def arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in GATE_FIELDS:
            yield name, getattr(self, name)

    @classmethod
    def zeros(cls, input_dim: int, hidden: int, dtype=WIDE) -> "GruParams":
        return cls(**{name: np.zeros(_gate_shape(name, input_dim, hidden), dtype) for name in GATE_FIELDS})

    def check(self) -> None:
        h, d = self.hidden, self.input_dim
        for name, arr in self.arrays():
            if arr.shape != _gate_shape(name, d, h):
                raise ValueError(f"{name} has shape {arr.shape}, expected {_gate_shape(name, d, h)}")


def _gate_shape(name: str, input_dim: int, hidden: int) -> tuple[int, ...]:
    if name.startswith("b"):
        return (hidden,)
    return (hidden, input_dim) if name.endswith("x") else (hidden, hidden)


@dataclass
class BiGruParams:
    forward: GruParams
    backward: GruParams

    def arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        for direction in ("forward", "backward"):
            for name, arr in getattr(self, direction).arrays():
                yield f"{direction}.{name}", arr


@dataclass
class NetworkParams:
    embedding: np.ndarray  # vocab_size x dim; rows UNK_ID and PAD_ID reserved
    layers: list[BiGruParams]
    proj_w: np.ndarray  # L x 2H
    proj_b: np.ndarray  # L

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def hidden(self) -> int:
        return self.layers[0].forward.hidden

    @property
    def num_labels(self) -> int:
        return self.proj_w.shape[0]

    def arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        """All parameter arrays in the fixed serialization order."""
        yield "embedding", self.embedding
        for k, layer in enumerate(self.layers):
            for name, arr in layer.arrays():
                yield f"layers.{k}.{name}", arr
        yield "proj_w", self.proj_w
        yield "proj_b", self.proj_b

    def astype(self, dtype) -> "NetworkParams":
        def cast(g: GruParams) -> GruParams:
            return GruParams(**{n: a.astype(dtype) for n, a in g.arrays()})

        return NetworkParams(
            self.embedding.astype(dtype),
            [BiGruParams(cast(l.forward), cast(l.backward)) for l in self.layers],
            self.proj_w.astype(dtype),
            self.proj_b.astype(dtype),
        )

    def copy(self) -> "NetworkParams":
        return self.astype(self.embedding.dtype)

    def check(self) -> None:
        if self.vocab_size < 2:
            raise ValueError("embedding table must hold the UNK and PAD rows")
        d_in = self.embed_dim
        for k, layer in enumerate(self.layers):
            for g in (layer.forward, layer.backward):
                g.check()
                if g.input_dim != d_in:
                    raise ValueError(f"layer {k} expects input {g.input_dim}, got {d_in}")
            if layer.forward.hidden != layer.backward.hidden:
                raise ValueError(f"layer {k} directions disagree on hidden size")
            d_in = 2 * layer.forward.hidden
        if self.proj_w.shape[1] != d_in or self.proj_b.shape != (self.proj_w.shape[0],):
            raise ValueError(f"projection shape {self.proj_w.shape} does not fit input {d_in}")


def zeros_like_network(vocab_size: int, embed_dim: int, hidden: int, num_layers: int,
                       num_labels: int, dtype=WIDE) -> NetworkParams:
    layers = []
    d_in = embed_dim
    for _ in range(num_layers):
        layers.append(BiGruParams(GruParams.zeros(d_in, hidden, dtype), GruParams.zeros(d_in, hidden, dtype)))
        d_in = 2 * hidden
    return NetworkParams(
        np.zeros((vocab_size, embed_dim), dtype), layers,
        np.zeros((num_labels, d_in), dtype), np.zeros(num_labels, dtype),
    )


@dataclass
class NetworkGrads:
    """Gradients mirroring :class:`NetworkParams`.

    The embedding gradient is sparse: ``embedding_rows[i]`` is the gradient
    of row ``embedding_ids[i]``; rows not listed have zero gradient.
    """

    embedding_ids: np.ndarray
    embedding_rows: np.ndarray
    layers: list[BiGruParams]
    proj_w: np.ndarray
    proj_b: np.ndarray

    def dense_embedding(self, vocab_size: int) -> np.ndarray:
        out = np.zeros((vocab_size, self.embedding_rows.shape[1]), self.embedding_rows.dtype)
        out[self.embedding_ids] = self.embedding_rows
        return out


# ---------------------------------------------------------------------------
# single steps (reference-level API)


def embed(table: np.ndarray, char_ids) -> np.ndarray:
    ids = np.asarray(char_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"character id out of range [0, {table.shape[0]})")
    return table[ids]


def gru_cell_step(p: GruParams, x_t: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    if x_t.shape[-1] != p.input_dim or h_prev.shape[-1] != p.hidden:
        raise ValueError(f"cell expects input {p.input_dim}, state {p.hidden}; "
                         f"got {x_t.shape[-1]}, {h_prev.shape[-1]}")
    u = sigmoid(x_t @ p.W_ux.T + h_prev @ p.W_uh.T + p.b_u)
    r = sigmoid(x_t @ p.W_rx.T + h_prev @ p.W_rh.T + p.b_r)
    c = np.tanh(x_t @ p.W_cx.T + (r * h_prev) @ p.W_ch.T + p.b_c)
    return (1.0 - u) * h_prev + u * c


# ---------------------------------------------------------------------------
# recurrences over padded, time-major input


@dataclass
class _DirTape:
    x: np.ndarray  # T x B x D
    h_prev: np.ndarray  # T x B x H
    u: np.ndarray
    r: np.ndarray
    c: np.ndarray


def _run_direction(p: GruParams, x: np.ndarray, mask: np.ndarray, reverse: bool,
                   retain: bool) -> tuple[np.ndarray, _DirTape | None]:
    T, B, _ = x.shape
    H = p.hidden
    w_x = np.concatenate([p.W_ux, p.W_rx, p.W_cx])
    w_ur = np.concatenate([p.W_uh, p.W_rh])
    b = np.concatenate([p.b_u, p.b_r, p.b_c])
    gx = x @ w_x.T + b  # T x B x 3H, input contributions for every step at once

    out = np.empty((T, B, H), x.dtype)
    if retain:
        hp_all, u_all, r_all, c_all = (np.empty((T, B, H), x.dtype) for _ in range(4))
    h = np.zeros((B, H), x.dtype)
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        g = gx[t]
        ur = sigmoid(g[:, : 2 * H] + h @ w_ur.T)
        u, r = ur[:, :H], ur[:, H:]
        c = np.tanh(g[:, 2 * H:] + (r * h) @ p.W_ch.T)
        h_new = h + u * (c - h)
        m = mask[t]
        if retain:
            hp_all[t], u_all[t], r_all[t], c_all[t] = h, u, r, c
        h = m * h_new + (1.0 - m) * h
        out[t] = h
    tape = _DirTape(x, hp_all, u_all, r_all, c_all) if retain else None
    return out, tape


def _backprop_direction(p: GruParams, tape: _DirTape, d_out: np.ndarray, mask: np.ndarray,
                        reverse: bool) -> tuple[GruParams, np.ndarray]:
    T, B, H = d_out.shape
    w_x = np.concatenate([p.W_ux, p.W_rx, p.W_cx])
    w_ur = np.concatenate([p.W_uh, p.W_rh])
    da = np.zeros((T, B, 3 * H), d_out.dtype)
    dh = np.zeros((B, H), d_out.dtype)
    steps = range(T) if reverse else range(T - 1, -1, -1)
    for t in steps:
        hp, u, r, c = tape.h_prev[t], tape.u[t], tape.r[t], tape.c[t]
        g = d_out[t] + dh
        m = mask[t]
        g_new = m * g
        dh = (1.0 - m) * g + (1.0 - u) * g_new
        du = g_new * (c - hp)
        dac = g_new * u * (1.0 - c * c)
        drh = dac @ p.W_ch
        dh += drh * r
        dar = drh * hp * r * (1.0 - r)
        dau = du * u * (1.0 - u)
        dh += np.concatenate([dau, dar], axis=1) @ w_ur
        da[t, :, :H], da[t, :, H:2 * H], da[t, :, 2 * H:] = dau, dar, dac

    flat_da = da.reshape(-1, 3 * H)
    d_wx = flat_da.T @ tape.x.reshape(-1, tape.x.shape[2])
    d_b = flat_da.sum(axis=0)
    hp_flat = tape.h_prev.reshape(-1, H)
    d_wur = flat_da[:, : 2 * H].T @ hp_flat
    d_wch = flat_da[:, 2 * H:].T @ (tape.r.reshape(-1, H) * hp_flat)
    grads = GruParams(
        W_ux=d_wx[:H], W_uh=d_wur[:H], b_u=d_b[:H],
        W_rx=d_wx[H:2 * H], W_rh=d_wur[H:], b_r=d_b[H:2 * H],
        W_cx=d_wx[2 * H:], W_ch=d_wch, b_c=d_b[2 * H:],
    )
    d_x = da @ w_x
    return grads, d_x


def bi_gru_layer(p: BiGruParams, inputs: np.ndarray) -> np.ndarray:
    """Run one Bi-GRU layer over a single T x D_in sequence; returns T x 2H."""
    x = np.asarray(inputs)[:, None, :]
    fw, _ = _run_direction(p.forward, x, _full_mask(x), reverse=False, retain=False)
    bw, _ = _run_direction(p.backward, x, _full_mask(x), reverse=True, retain=False)
    return np.concatenate([fw, bw], axis=2)[:, 0, :]


def _full_mask(x: np.ndarray) -> np.ndarray:
    return np.ones((x.shape[0], x.shape[1], 1), x.dtype)


# ---------------------------------------------------------------------------
# whole network


@dataclass
class Tape:
    """State retained by :func:`forward_batch` for :func:`network_backward`."""

    ids: np.ndarray  # B x T
    mask: np.ndarray  # T x B x 1
    layers: list[tuple[_DirTape, _DirTape]] = field(default_factory=list)
    top: np.ndarray | None = None  # T x B x 2H
    single: bool = False


def pad_batch(sequences: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Pad id sequences with PAD_ID; returns ``(ids B x T, lengths B)``."""
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    if len(lengths) == 0 or lengths.min() < 1:
        raise ValueError("every sequence needs at least one character")
    ids = np.full((len(sequences), int(lengths.max())), PAD_ID, dtype=np.int64)
    for i, s in enumerate(sequences):
        ids[i, : len(s)] = s
    return ids, lengths


def length_mask(lengths: np.ndarray, T: int, dtype=WIDE) -> np.ndarray:
    return (np.arange(T)[None, :] < np.asarray(lengths)[:, None]).astype(dtype)


def forward_batch(p: NetworkParams, ids: np.ndarray, lengths=None, retain: bool = True,
                  ) -> tuple[np.ndarray, Tape | None]:
    """Emissions ``B x T x L`` for a padded batch of character ids."""
    ids = np.asarray(ids, dtype=np.int64)
    B, T = ids.shape
    if T < 1:
        raise ValueError("empty sequence")
    dtype = p.embedding.dtype
    if lengths is None:
        lengths = np.full(B, T)
    mask = length_mask(lengths, T, dtype).T[:, :, None]
    x = embed(p.embedding, ids.T)  # T x B x D
    tape = Tape(ids, mask) if retain else None
    for layer in p.layers:
        fw, ft = _run_direction(layer.forward, x, mask, reverse=False, retain=retain)
        bw, bt = _run_direction(layer.backward, x, mask, reverse=True, retain=retain)
        if retain:
            tape.layers.append((ft, bt))
        x = np.concatenate([fw, bw], axis=2)
    emissions = x @ p.proj_w.T + p.proj_b
    if retain:
        tape.top = x
    return emissions.transpose(1, 0, 2), tape


def network_forward(p: NetworkParams, char_ids: Sequence[int], retain: bool = True,
                    ) -> tuple[np.ndarray, Tape | None]:
    """Emissions ``T x L`` for one sentence, plus the tape for backward."""
    emissions, tape = forward_batch(p, np.asarray(char_ids, dtype=np.int64)[None, :], retain=retain)
    if tape is not None:
        tape.single = True
    return emissions[0], tape


def network_backward(p: NetworkParams, tape: Tape, d_emissions: np.ndarray) -> NetworkGrads:
    """Gradients of a scalar loss given its gradient w.r.t. the emissions."""
    d_em = np.asarray(d_emissions)
    if tape.single:
        d_em = d_em[None]
    B, T = tape.ids.shape
    if d_em.shape != (B, T, p.num_labels):
        raise ValueError(f"d_emissions shape {d_em.shape} does not match tape {(B, T, p.num_labels)}")
    d_em = d_em.transpose(1, 0, 2)  # T x B x L
    flat = d_em.reshape(-1, p.num_labels)
    d_proj_w = flat.T @ tape.top.reshape(-1, tape.top.shape[2])
    d_proj_b = flat.sum(axis=0)
    d_x = d_em @ p.proj_w

    layer_grads: list[BiGruParams] = []
    for layer, (ft, bt) in zip(reversed(p.layers), reversed(tape.layers)):
        H = layer.forward.hidden
        gf, dxf = _backprop_direction(layer.forward, ft, d_x[:, :, :H], tape.mask, reverse=False)
        gb, dxb = _backprop_direction(layer.backward, bt, d_x[:, :, H:], tape.mask, reverse=True)
        layer_grads.append(BiGruParams(gf, gb))
        d_x = dxf + dxb
    layer_grads.reverse()

    real = tape.mask.reshape(-1) > 0
    ids_tm = tape.ids.T.reshape(-1)[real]
    uniq, inverse = np.unique(ids_tm, return_inverse=True)
    rows = np.zeros((len(uniq), p.embed_dim), d_x.dtype)
    np.add.at(rows, inverse, d_x.reshape(-1, p.embed_dim)[real])
    return NetworkGrads(uniq, rows, layer_grads, d_proj_w, d_proj_b)
