"""Relational hypergraph attention layer with hand-written reverse-mode gradients.

One layer maps node states ``X`` (m x d) over a hypergraph with construction
ids on its hyperedges to new node states:

1. node-level attention: each hyperedge attends over its member nodes,
   keyed by the construction embedding ``z_j = Ec[c_j]``::

       r_js  = relu((Wc z_j) . (Ws x_s))
       a_j   = softmax_s(r_js)
       g_j   = sum_s a_js Wn x_s
       g'_j  = g_j + Wg z_j

2. edge-level attention: each node attends over its incident hyperedges::

       t_ij  = relu((Wo x_i) . (Wr g'_j))
       b_i   = softmax_j(t_ij)
       h_i   = sum_j b_ij We g'_j            (zero for isolated nodes)

3. ``out = LN(X + relu(W2 (W1 h + b1) + b2))`` -- the residual is taken from
   the layer input, the feed-forward branch reads the attention output.

Forward reductions over nodes and hyperedges are summed in value order and
linear maps go through ``einsum``, so relabelling nodes or reordering
hyperedges changes nothing at the bit level.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .hypergraph import Hyperedge, Hypergraph

LN_EPS = 1e-5
LAYER_FIELDS = ("Wn", "Wc", "Ws", "Wg", "We", "Wo", "Wr", "W1", "b1", "W2", "b2", "ln_gain", "ln_bias")
_MAGIC = b"RHGAT\x00"
_VERSION = 1


class Task(enum.Enum):
    CLASSIFY = "classify"
    REGRESS = "regress"


@dataclass
class LayerParams:
    Wn: np.ndarray
    Wc: np.ndarray
    Ws: np.ndarray
    Wg: np.ndarray
    We: np.ndarray
    Wo: np.ndarray
    Wr: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray


@dataclass
class RHgatParams:
    layers: list[LayerParams]
    Ec: np.ndarray
    head_W: np.ndarray
    head_b: np.ndarray
    task: Task = Task.CLASSIFY
    seed: int = 0

    @property
    def d(self) -> int:
        return self.Ec.shape[1]

    @property
    def d_ff(self) -> int:
        return self.layers[0].W1.shape[0]

    @property
    def n_constructions(self) -> int:
        return self.Ec.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.head_W.shape[0]

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        """All arrays in serialisation order, with stable names."""
        out = []
        for li, layer in enumerate(self.layers):
            out.extend((f"layer{li}.{name}", getattr(layer, name)) for name in LAYER_FIELDS)
        out += [("Ec", self.Ec), ("head_W", self.head_W), ("head_b", self.head_b)]
        return out

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "RHgatParams":
        layers = [LayerParams(**{n: fn(getattr(l, n)) for n in LAYER_FIELDS}) for l in self.layers]
        return RHgatParams(layers, fn(self.Ec), fn(self.head_W), fn(self.head_b), self.task, self.seed)

    def copy(self) -> "RHgatParams":
        return self.map(np.copy)

    def zeros_like(self) -> "RHgatParams":
        return self.map(np.zeros_like)


def _glorot(rng, fan_out, fan_in):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_params(d: int, n_constructions: int, n_outputs: int = 2, task: Task = Task.CLASSIFY,
                d_ff: int | None = None, n_layers: int = 1, seed: int = 0) -> RHgatParams:
    """Glorot-uniform weights, zero biases, unit LN gain, Ec ~ N(0, 1/d)."""
    if d < 1 or n_constructions < 1 or n_layers < 1:
        raise ValueError("d, n_constructions and n_layers must be positive")
    d_ff = 4 * d if d_ff is None else d_ff
    if task is Task.REGRESS:
        n_outputs = 1
    rng = np.random.default_rng(seed)
    layers = []
    for _ in range(n_layers):
        sq = {name: _glorot(rng, d, d) for name in ("Wn", "Wc", "Ws", "Wg", "We", "Wo", "Wr")}
        layers.append(LayerParams(
            **sq,
            W1=_glorot(rng, d_ff, d), b1=np.zeros(d_ff),
            W2=_glorot(rng, d, d_ff), b2=np.zeros(d),
            ln_gain=np.ones(d), ln_bias=np.zeros(d),
        ))
    Ec = rng.standard_normal((n_constructions, d)) / math.sqrt(d)
    head_W = _glorot(rng, n_outputs, d)
    return RHgatParams(layers, Ec, head_W, np.zeros(n_outputs), task, seed)


# --- forward ------------------------------------------------------------------

def _lin(x, w):
    return np.einsum("ik,jk->ij", x, w)


def _ordered_sum(a, axis):
    return np.sort(a, axis=axis).sum(axis=axis)


def _masked_softmax(scores, mask):
    """Row-wise softmax over the masked entries; all-masked rows give zeros."""
    if scores.shape[1] == 0:
        return np.zeros_like(scores)
    shifted = np.where(mask, scores, -np.inf)
    top = shifted.max(axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    e = np.where(mask, np.exp(np.where(mask, scores, 0.0) - top), 0.0)
    denom = _ordered_sum(e, axis=1)[:, None]
    return np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)


def _softmax_backward(p, dp):
    return p * (dp - (p * dp).sum(axis=1, keepdims=True))


@dataclass
class LayerCache:
    X: np.ndarray
    H: np.ndarray
    Z: np.ndarray
    A: np.ndarray
    B: np.ndarray
    r_pre: np.ndarray
    alpha: np.ndarray
    U: np.ndarray
    g: np.ndarray
    g_prime: np.ndarray
    O: np.ndarray
    Q: np.ndarray
    t_pre: np.ndarray
    beta: np.ndarray
    V: np.ndarray
    h: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    xhat: np.ndarray
    inv_std: np.ndarray
    out: np.ndarray

    @property
    def r(self):
        return np.maximum(self.r_pre, 0.0)

    @property
    def t(self):
        return np.maximum(self.t_pre, 0.0)


@dataclass
class ForwardCache:
    construction_ids: np.ndarray
    layers: list[LayerCache] = field(default_factory=list)

    @property
    def output(self) -> np.ndarray:
        return self.layers[-1].out


def _layer_forward(X, H, Z, p: LayerParams) -> LayerCache:
    m, d = X.shape
    n = H.shape[1]
    A = _lin(Z, p.Wc)
    B = _lin(X, p.Ws)
    r_pre = np.einsum("jk,sk->js", A, B)
    alpha = _masked_softmax(np.maximum(r_pre, 0.0), H.T)
    U = _lin(X, p.Wn)
    g = _ordered_sum(alpha[:, :, None] * U[None, :, :], axis=1) if n else np.zeros((0, d))
    g_prime = g + _lin(Z, p.Wg)
    O = _lin(X, p.Wo)
    Q = _lin(g_prime, p.Wr)
    t_pre = np.einsum("ik,jk->ij", O, Q)
    beta = _masked_softmax(np.maximum(t_pre, 0.0), H)
    V = _lin(g_prime, p.We)
    h = _ordered_sum(beta[:, :, None] * V[None, :, :], axis=1) if n else np.zeros((m, d))
    P1 = _lin(h, p.W1) + p.b1
    P2 = _lin(P1, p.W2) + p.b2
    S = X + np.maximum(P2, 0.0)
    centered = S - S.mean(axis=1, keepdims=True)
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv_std
    out = xhat * p.ln_gain + p.ln_bias
    return LayerCache(X, H, Z, A, B, r_pre, alpha, U, g, g_prime, O, Q, t_pre, beta, V, h,
                      P1, P2, xhat, inv_std, out)


def forward(features: np.ndarray, graph: Hypergraph, edge_constructions: Sequence[int] | None,
            params: RHgatParams) -> tuple[np.ndarray, ForwardCache]:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape != (graph.m, params.d):
        raise ValueError(f"features must be {graph.m} x {params.d}, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    cids = np.asarray(graph.construction_ids if edge_constructions is None else edge_constructions,
                      dtype=np.int64)
    if cids.shape != (graph.n_edges,):
        raise ValueError(f"expected {graph.n_edges} construction ids, got {cids.shape[0]}")
    if cids.size and (cids.min() < 0 or cids.max() >= params.n_constructions):
        raise ValueError("construction id outside the embedding table")
    H = graph.incidence
    Z = params.Ec[cids]
    cache = ForwardCache(cids)
    for layer in params.layers:
        lc = _layer_forward(X, H, Z, layer)
        cache.layers.append(lc)
        X = lc.out
    return X, cache


# --- backward -----------------------------------------------------------------

def _layer_backward(c: LayerCache, p: LayerParams, d_out: np.ndarray):
    """Returns (layer grads, dX, dZ)."""
    gr = {}
    gr["ln_gain"] = (d_out * c.xhat).sum(axis=0)
    gr["ln_bias"] = d_out.sum(axis=0)
    dxhat = d_out * p.ln_gain
    dS = c.inv_std * (dxhat - dxhat.mean(axis=1, keepdims=True)
                      - c.xhat * (dxhat * c.xhat).mean(axis=1, keepdims=True))
    dX = dS.copy()
    dP2 = dS * (c.P2 > 0)
    gr["W2"] = dP2.T @ c.P1
    gr["b2"] = dP2.sum(axis=0)
    dP1 = dP2 @ p.W2
    gr["W1"] = dP1.T @ c.h
    gr["b1"] = dP1.sum(axis=0)
    dh = dP1 @ p.W1

    # edge-level attention
    dbeta = dh @ c.V.T
    dV = c.beta.T @ dh
    dt_pre = _softmax_backward(c.beta, dbeta) * (c.t_pre > 0)
    dO = dt_pre @ c.Q
    dQ = dt_pre.T @ c.O
    gr["Wo"] = dO.T @ c.X
    dX += dO @ p.Wo
    gr["Wr"] = dQ.T @ c.g_prime
    gr["We"] = dV.T @ c.g_prime
    dg_prime = dQ @ p.Wr + dV @ p.We

    # construction injection
    gr["Wg"] = dg_prime.T @ c.Z
    dZ = dg_prime @ p.Wg
    dg = dg_prime

    # node-level attention
    dalpha = dg @ c.U.T
    dU = c.alpha.T @ dg
    gr["Wn"] = dU.T @ c.X
    dX += dU @ p.Wn
    dr_pre = _softmax_backward(c.alpha, dalpha) * (c.r_pre > 0)
    dA = dr_pre @ c.B
    dB = dr_pre.T @ c.A
    gr["Wc"] = dA.T @ c.Z
    dZ += dA @ p.Wc
    gr["Ws"] = dB.T @ c.X
    dX += dB @ p.Ws
    return LayerParams(**gr), dX, dZ


def backward(cache: ForwardCache, params: RHgatParams,
             output_gradient: np.ndarray) -> tuple[RHgatParams, np.ndarray]:
    """Gradients of ``sum(output * output_gradient)``.

    Returns parameter gradients (head entries are zero; see
    :func:`head_backward`) and the gradient w.r.t. the input features.
    """
    if len(cache.layers) != len(params.layers) or cache.layers[0].X.shape[1] != params.d:
        raise ValueError("forward cache does not belong to these parameters")
    d_out = np.asarray(output_gradient, dtype=np.float64)
    if d_out.shape != cache.output.shape:
        raise ValueError(f"output gradient must have shape {cache.output.shape}")
    grads = params.zeros_like()
    dZ_total = np.zeros_like(cache.layers[0].Z)
    for li in range(len(params.layers) - 1, -1, -1):
        layer_grad, d_out, dZ = _layer_backward(cache.layers[li], params.layers[li], d_out)
        grads.layers[li] = layer_grad
        dZ_total += dZ
    np.add.at(grads.Ec, cache.construction_ids, dZ_total)
    return grads, d_out


# --- pooling, heads and losses --------------------------------------------------

def pool(output: np.ndarray) -> np.ndarray:
    return output.mean(axis=0)


def pool_and_head(output: np.ndarray, params: RHgatParams, task: Task | None = None) -> np.ndarray:
    """Mean-pool node states and apply the affine head (logits or a 1-vector)."""
    task = params.task if task is None else task
    if output.shape[0] < 1:
        raise ValueError("cannot pool an empty node set")
    pred = params.head_W @ pool(output) + params.head_b
    if task is Task.REGRESS and pred.shape != (1,):
        raise ValueError("a regression head must have exactly one output")
    return pred


def head_backward(output: np.ndarray, params: RHgatParams, d_pred: np.ndarray):
    """Returns (d head_W, d head_b, d output)."""
    hz = pool(output)
    d_hz = params.head_W.T @ d_pred
    d_output = np.broadcast_to(d_hz / output.shape[0], output.shape).copy()
    return np.outer(d_pred, hz), d_pred.copy(), d_output


def loss(prediction: np.ndarray, target, task: Task) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy (class index target) or squared error."""
    prediction = np.asarray(prediction, dtype=np.float64)
    if task is Task.CLASSIFY:
        c = int(target)
        if not 0 <= c < prediction.shape[0]:
            raise ValueError(f"class index {c} outside 0..{prediction.shape[0] - 1}")
        top = prediction.max()
        lse = top + math.log(np.exp(prediction - top).sum())
        probs = np.exp(prediction - lse)
        grad = probs.copy()
        grad[c] -= 1.0
        return float(lse - prediction[c]), grad
    diff = float(prediction[0]) - float(target)
    return diff * diff, np.array([2.0 * diff])


@dataclass
class Example:
    features: np.ndarray
    graph: Hypergraph
    construction_ids: Sequence[int]
    target: float | int


def predict(example: Example, params: RHgatParams) -> np.ndarray:
    out, _ = forward(example.features, example.graph, example.construction_ids, params)
    return pool_and_head(out, params)


def example_gradient(example: Example, params: RHgatParams):
    """Loss, parameter gradients and feature gradient for one graph."""
    out, cache = forward(example.features, example.graph, example.construction_ids, params)
    pred = pool_and_head(out, params)
    value, d_pred = loss(pred, example.target, params.task)
    dW, db, d_out = head_backward(out, params, d_pred)
    grads, d_features = backward(cache, params, d_out)
    grads.head_W = dW
    grads.head_b = db
    return value, grads, d_features


# --- training -----------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 0.02
    epochs: int = 200
    seed: int = 0
    weight_decay: float = 0.0


def train_toy(dataset: Sequence[Example], params: RHgatParams, config: TrainConfig,
              on_epoch: Callable[[int, RHgatParams, float], bool] | None = None):
    """Per-graph gradient descent with decoupled weight decay.

    Returns ``(params, trace)`` where ``trace[e]`` is the mean loss seen
    during epoch ``e``.  ``on_epoch`` may return True to stop early.
    The input parameters are not modified.
    """
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    params = params.copy()
    rng = np.random.default_rng(config.seed)
    lr, wd = config.learning_rate, config.weight_decay
    trace = []
    for epoch in range(config.epochs):
        losses = []
        for idx in rng.permutation(len(dataset)):
            value, grads, _ = example_gradient(dataset[idx], params)
            losses.append(value)
            if lr == 0.0:
                continue
            for (_, p), (_, g) in zip(params.tensors(), grads.tensors()):
                if wd:
                    p *= 1.0 - lr * wd
                p -= lr * g
        trace.append(math.fsum(losses) / len(losses))
        if on_epoch is not None and on_epoch(epoch, params, trace[-1]):
            break
    return params, trace


def accuracy(dataset: Sequence[Example], params: RHgatParams) -> float:
    hits = sum(int(np.argmax(predict(ex, params)) == int(ex.target)) for ex in dataset)
    return hits / len(dataset)


def hyperedge_presence_task(n_instances: int, d: int, n_constructions: int = 8, target_id: int = 0,
                            seed: int = 0, min_nodes: int = 4, max_nodes: int = 10,
                            max_edges: int = 3) -> list[Example]:
    """Label 1 iff construction ``target_id`` labels one of the hyperedges.

    Node features are pure noise, so the label is only recoverable through
    the construction embeddings.  Classes are balanced by coin flip.
    """
    rng = np.random.default_rng(seed)
    others = [c for c in range(n_constructions) if c != target_id]
    data = []
    for _ in range(n_instances):
        m = int(rng.integers(min_nodes, max_nodes + 1))
        n_edges = int(rng.integers(1, max_edges + 1))
        label = int(rng.integers(0, 2))
        cids = [int(c) for c in rng.choice(others, size=n_edges)]
        if label:
            cids[int(rng.integers(0, n_edges))] = target_id
        edges = []
        for cid in cids:
            r = int(rng.integers(2, min(4, m) + 1))
            start = int(rng.integers(0, m - r + 1))
            edges.append(Hyperedge(cid, tuple(range(start, start + r))))
        graph = Hypergraph(m, tuple(edges))
        data.append(Example(rng.standard_normal((m, d)), graph, cids, label))
    return data


# --- files --------------------------------------------------------------------

_HEADER = struct.Struct("<6sHqqqqqqq")


def save_params(params: RHgatParams, path: str | Path) -> None:
    """Header (dims, |V|, seed) then every tensor as little-endian float64, row-major."""
    header = _HEADER.pack(_MAGIC, _VERSION, params.d, params.d_ff, params.n_constructions,
                          len(params.layers), params.n_outputs,
                          0 if params.task is Task.CLASSIFY else 1, params.seed)
    with open(path, "wb") as fh:
        fh.write(header)
        for _, arr in params.tensors():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(path: str | Path) -> RHgatParams:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated parameter file")
    magic, version, d, d_ff, n_cxn, n_layers, n_out, task_code, seed = _HEADER.unpack_from(blob)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not a parameter file")
    shapes = {"Wn": (d, d), "Wc": (d, d), "Ws": (d, d), "Wg": (d, d), "We": (d, d), "Wo": (d, d),
              "Wr": (d, d), "W1": (d_ff, d), "b1": (d_ff,), "W2": (d, d_ff), "b2": (d,),
              "ln_gain": (d,), "ln_bias": (d,)}
    offset = _HEADER.size

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(blob):
            raise ValueError(f"{path}: truncated parameter file")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset = end
        return arr

    layers = [LayerParams(**{name: take(shapes[name]) for name in LAYER_FIELDS}) for _ in range(n_layers)]
    Ec = take((n_cxn, d))
    head_W = take((n_out, d))
    head_b = take((n_out,))
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes after the last tensor")
    return RHgatParams(layers, Ec, head_W, head_b, Task.CLASSIFY if task_code == 0 else Task.REGRESS, seed)


def save_features(features: np.ndarray, path: str | Path) -> None:
    m, d = features.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m} {d}\n")
        for row in features:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_features(path: str | Path) -> np.ndarray:
    """``m d`` header, then m rows of d numbers."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected 'm d' header")
        m, d = int(header[0]), int(header[1])
        rows = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            vals = [float(x) for x in line.split()]
            if len(vals) != d:
                raise ValueError(f"{path}:{lineno}: expected {d} numbers, got {len(vals)}")
            rows.append(vals)
    if len(rows) != m:
        raise ValueError(f"{path}: expected {m} rows, got {len(rows)}")
    return np.array(rows, dtype=np.float64).reshape(m, d)
