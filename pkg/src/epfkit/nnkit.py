"""Minimal reverse-mode autodiff with dense layers, embedding tables and
RMSprop/Adam training.  Everything runs in 64-bit floats for determinism."""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

FORMAT_VERSION = 1


class DivergenceError(RuntimeError):
    pass


class Tensor:
    """Array node on the autodiff tape."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        """Accumulate gradients of this (scalar) node into the whole tape."""
        topo, seen = [], set()

        def visit(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            for p in node._parents:
                visit(p)
            topo.append(node)

        visit(self)
        for node in topo:
            if node.grad is None:
                node.zero_grad()
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)


def matmul(a, b):
    out = Tensor(a.data @ b.data, parents=(a, b))

    def backward(g):
        a.grad += g @ b.data.T
        b.grad += a.data.T @ g

    out._backward = backward
    return out


def add_bias(x, b):
    """x (n,m) plus bias row b (m,)."""
    out = Tensor(x.data + b.data, parents=(x, b))

    def backward(g):
        x.grad += g
        b.grad += g.sum(axis=0)

    out._backward = backward
    return out


def relu(x):
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0), parents=(x,))

    def backward(g):
        x.grad += g * mask

    out._backward = backward
    return out


def sigmoid(x):
    s = 1.0 / (1.0 + np.exp(-x.data))
    out = Tensor(s, parents=(x,))

    def backward(g):
        x.grad += g * s * (1.0 - s)

    out._backward = backward
    return out


def concat(parts):
    """Concatenate (n, m_i) tensors along the feature axis."""
    out = Tensor(np.concatenate([p.data for p in parts], axis=1), parents=tuple(parts))
    widths = [p.data.shape[1] for p in parts]

    def backward(g):
        pos = 0
        for p, w in zip(parts, widths):
            p.grad += g[:, pos : pos + w]
            pos += w

    out._backward = backward
    return out


def embedding_lookup(table, idx):
    """Gather rows of a (vocab, dim) table; gradients hit touched rows only."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(
            f"embedding index out of range for vocab {table.data.shape[0]}"
        )
    out = Tensor(table.data[idx], parents=(table,))

    def backward(g):
        np.add.at(table.grad, idx, g)

    out._backward = backward
    return out


def mse_loss(pred, target):
    target = np.asarray(target, dtype=np.float64)
    if pred.data.size == 0:
        raise ValueError("mse_loss on empty input")
    if pred.data.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.data.shape} vs {target.shape}")
    diff = pred.data - target
    out = Tensor(np.mean(diff * diff), parents=(pred,))

    def backward(g):
        pred.grad += g * 2.0 * diff / diff.size

    out._backward = backward
    return out


def hidden_neurons(n_samples, n_in, n_out, alpha):
    """Rule-of-thumb hidden neuron count n_s / (alpha * (n_i + n_o))."""
    if not 2 <= alpha <= 10:
        raise ValueError("alpha must be in [2, 10]")
    if min(n_samples, n_in, n_out) <= 0:
        raise ValueError("counts must be positive")
    return max(1, int(n_samples // (alpha * (n_in + n_out))))


@dataclass(frozen=True)
class NetworkConfig:
    hidden_layers: int
    neurons: tuple
    hidden_activation: str = "relu"  # relu | sigmoid
    epochs: object = 10  # int or "auto"
    optimizer: str = "rmsprop"  # rmsprop | adam
    learning_rate: float = 0.001
    batch_size: int = 64
    seed: int = 0
    early_stop_patience: int = 10

    def __post_init__(self):
        if len(self.neurons) != self.hidden_layers:
            raise ValueError("neurons list length must equal hidden_layers")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def with_(self, **kwargs):
        return replace(self, **kwargs)


# Named dense-network configurations.
CONFIGS = {
    "c1": NetworkConfig(1, (2085,), "relu", 10, "rmsprop"),
    "c2": NetworkConfig(2, (128, 128), "relu", 10, "rmsprop"),
    "c3": NetworkConfig(2, (2285, 1024), "relu", 10, "rmsprop"),
    "c4": NetworkConfig(2, (484, 381), "sigmoid", "auto", "adam"),
    "c5": NetworkConfig(2, (234, 203), "relu", "auto", "adam"),
}

_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid}


class Network:
    """Dense network with optional embedding tables in front.

    Continuous inputs are concatenated with the looked-up embedding rows and
    fed through the hidden layers to a single linear output.
    """

    def __init__(self, n_cont, emb_spec, config, seed):
        self.n_cont = int(n_cont)
        self.emb_spec = tuple(emb_spec)  # (name, vocab, dim) triples
        self.config = config
        rng = np.random.default_rng(seed)

        self.embeddings = []
        for _, vocab, dim in self.emb_spec:
            self.embeddings.append(Tensor(rng.uniform(-0.05, 0.05, (vocab, dim))))
        n_in = self.n_cont + sum(dim for _, _, dim in self.emb_spec)
        if n_in == 0:
            raise ValueError("network needs at least one input feature")

        self.weights, self.biases = [], []
        sizes = [n_in, *config.neurons, 1]
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(Tensor(rng.uniform(-bound, bound, (fan_in, fan_out))))
            self.biases.append(Tensor(np.zeros(fan_out)))

    @property
    def params(self):
        return [*self.embeddings, *self.weights, *self.biases]

    def forward(self, x_cont, x_idx):
        n = len(x_cont) if x_cont is not None and x_cont.size else len(x_idx)
        parts = []
        if self.n_cont:
            if x_cont is None or x_cont.shape != (n, self.n_cont):
                raise ValueError(f"expected continuous input of shape ({n}, {self.n_cont})")
            parts.append(Tensor(x_cont))
        for j, table in enumerate(self.embeddings):
            parts.append(embedding_lookup(table, x_idx[:, j]))
        h = parts[0] if len(parts) == 1 else concat(parts)
        act = _ACTIVATIONS[self.config.hidden_activation]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = add_bias(matmul(h, w), b)
            if i < len(self.weights) - 1:
                h = act(h)
        return squeeze_column(h)

    def predict(self, x_cont, x_idx):
        return self.forward(x_cont, x_idx).data

    def get_state(self):
        return [p.data.copy() for p in self.params]

    def set_state(self, state):
        for p, s in zip(self.params, state):
            p.data = s.copy()


def squeeze_column(x):
    out = Tensor(x.data[:, 0], parents=(x,))

    def backward(g):
        x.grad += g[:, None]

    out._backward = backward
    return out


class Rmsprop:
    def __init__(self, params, lr, rho=0.9, eps=1e-8):
        self.params, self.lr, self.rho, self.eps = params, lr, rho, eps
        self.v = [np.zeros_like(p.data) for p in params]
        self.step_count = 0

    def step(self):
        self.step_count += 1
        for p, v in zip(self.params, self.v):
            v *= self.rho
            v += (1.0 - self.rho) * p.grad * p.grad
            p.data -= self.lr * p.grad / np.sqrt(v + self.eps)


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params, self.lr = params, lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.step_count = 0

    def step(self):
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad * p.grad
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


_OPTIMIZERS = {"rmsprop": Rmsprop, "adam": Adam}


def _run_epoch(net, x_cont, x_idx, y, order, batch_size, optimizer):
    total, count = 0.0, 0
    for start in range(0, len(order), batch_size):
        sel = order[start : start + batch_size]
        for p in net.params:
            p.grad = None
        pred = net.forward(
            x_cont[sel] if x_cont is not None else None,
            x_idx[sel] if x_idx is not None else None,
        )
        loss = mse_loss(pred, y[sel])
        loss.backward()
        optimizer.step()
        total += float(loss.data) * len(sel)
        count += len(sel)
    return total / count


def _eval_mse(net, x_cont, x_idx, y):
    pred = net.predict(
        x_cont if x_cont is not None else None,
        x_idx if x_idx is not None else None,
    )
    return float(np.mean((pred - y) ** 2))


def train(net, samples, config=None):
    """Train in place with seeded shuffling; returns the per-epoch loss trace.

    With epochs="auto" the chronologically last 10% of samples are held out
    and training stops once validation MSE has not improved for
    early_stop_patience epochs (200-epoch cap), restoring the best weights.
    """
    config = config or net.config
    x_cont, x_idx, y = samples
    n = len(y)
    if n < 1:
        raise ValueError("need at least one training sample")
    rng = np.random.default_rng(config.seed)
    optimizer = _OPTIMIZERS[config.optimizer](net.params, config.learning_rate)

    auto = config.epochs == "auto"
    if auto:
        n_val = max(1, n // 10)
        n_train = n - n_val
        if n_train < 1:
            raise ValueError("too few samples for auto epochs")
        val = (
            x_cont[n_train:] if x_cont is not None else None,
            x_idx[n_train:] if x_idx is not None else None,
            y[n_train:],
        )
        max_epochs = 200
    else:
        n_train = n
        max_epochs = int(config.epochs)

    trace = []
    best_val, best_state, stale = math.inf, None, 0
    for epoch in range(max_epochs):
        order = rng.permutation(n_train)
        loss = _run_epoch(net, x_cont, x_idx, y, order, config.batch_size, optimizer)
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}")
        record = {"epoch": epoch, "train_mse": loss}
        if auto:
            val_mse = _eval_mse(net, *val)
            record["val_mse"] = val_mse
            if val_mse < best_val - 1e-12:
                best_val, best_state, stale = val_mse, net.get_state(), 0
            else:
                stale += 1
            trace.append(record)
            if stale >= config.early_stop_patience:
                break
        else:
            trace.append(record)
    if auto and best_state is not None:
        net.set_state(best_state)
    return trace


def grad_check(net, sample, epsilon=1e-5, max_params=10_000, seed=0):
    """Max relative error of backward gradients vs central finite differences."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x_cont, x_idx, y = sample
    params = net.params
    if not params:
        return 0.0

    def loss_value():
        return float(mse_loss(net.forward(x_cont, x_idx), y).data)

    for p in params:
        p.grad = None
    loss = mse_loss(net.forward(x_cont, x_idx), y)
    loss.backward()
    analytic = [p.grad.copy() for p in params]

    total = sum(p.data.size for p in params)
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    for p, g in zip(params, analytic):
        flat = p.data.reshape(-1)
        idxs = np.arange(flat.size)
        if total > max_params:
            keep = max(1, int(max_params * flat.size / total))
            idxs = rng.choice(flat.size, size=keep, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + epsilon
            up = loss_value()
            flat[i] = orig - epsilon
            down = loss_value()
            flat[i] = orig
            fd = (up - down) / (2.0 * epsilon)
            ad = g.reshape(-1)[i]
            denom = max(abs(fd) + abs(ad), 1e-8)
            max_rel = max(max_rel, abs(fd - ad) / denom)
    return max_rel


def save_network(net, path):
    blob = {
        "version": FORMAT_VERSION,
        "n_cont": net.n_cont,
        "emb_spec": [list(e) for e in net.emb_spec],
        "config": {
            **{k: getattr(net.config, k) for k in (
                "hidden_layers", "hidden_activation", "epochs", "optimizer",
                "learning_rate", "batch_size", "seed", "early_stop_patience",
            )},
            "neurons": list(net.config.neurons),
        },
        "embeddings": [t.data.tolist() for t in net.embeddings],
        "weights": [t.data.tolist() for t in net.weights],
        "biases": [t.data.tolist() for t in net.biases],
    }
    with open(path, "w") as fh:
        json.dump(blob, fh)


def load_network(path):
    with open(path) as fh:
        blob = json.load(fh)
    if blob.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {blob.get('version')!r}")
    cfg = dict(blob["config"])
    cfg["neurons"] = tuple(cfg["neurons"])
    config = NetworkConfig(**cfg)
    net = Network(blob["n_cont"], [tuple(e) for e in blob["emb_spec"]], config, seed=0)
    for t, vals in zip(net.embeddings, blob["embeddings"]):
        t.data = np.asarray(vals, dtype=np.float64)
    for t, vals in zip(net.weights, blob["weights"]):
        t.data = np.asarray(vals, dtype=np.float64)
    for t, vals in zip(net.biases, blob["biases"]):
        t.data = np.asarray(vals, dtype=np.float64)
    return net
