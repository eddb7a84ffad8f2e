"""Dense MLP with manual backpropagation and trainable fractional orders.

Every parameter lives in a registry (:class:`Param`) carrying its optimizer
flags. Fractional orders and FALU betas are registered with
``decay_excluded=True`` and a clamp box, so weight decay never drags them
toward zero.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .activations import BETA_BOX, ORDER_BOX, ActivationSpec, frac_act_backward, frac_act_forward
from .reporting import atomic_write_text
from .errors import CacheMismatchError, DomainError, NonFiniteError, NotYetRunError, TrainingAborted

CHECKPOINT_FORMAT = "fracact-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Param:
    name: str
    value: np.ndarray
    decay_excluded: bool = False
    clamp_box: tuple | None = None
    kind: str = "weight"  # weight | bias | order | beta | slope

    @property
    def size(self):
        return self.value.size


@dataclass
class Layer:
    weight: Param
    bias: Param
    act: ActivationSpec | None = None
    order: Param | None = None
    beta: Param | None = None
    slope: Param | None = None
    last_planes: int | None = None

    def params(self):
        return [p for p in (self.weight, self.bias, self.order, self.beta, self.slope) if p is not None]

    def current_spec(self):
        """The activation spec with the live parameter values substituted."""
        if self.act is None:
            return None
        kw = {}
        if self.order is not None:
            v = self.order.value
            kw["order"] = float(v) if v.ndim == 0 else v
        if self.beta is not None:
            v = self.beta.value
            kw["falu_beta"] = float(v) if v.ndim == 0 else v
        if self.slope is not None:
            kw["prelu_slope"] = float(self.slope.value)
        return replace(self.act, **kw) if kw else self.act


class MlpModel:
    """Affine layers each followed by an activation; the last layer is linear."""

    def __init__(self, layers):
        self.layers = layers
        self.registry = [p for layer in layers for p in layer.params()]
        self._by_name = {p.name: p for p in self.registry}
        if len(self._by_name) != len(self.registry):
            raise ValueError("duplicate parameter names")
        self.velocity = {p.name: np.zeros_like(p.value) for p in self.registry}

    @classmethod
    def build(cls, sizes, activation=None, seed=0, fdo_init="zero", per_channel=False, order_init=None):
        """Create a seeded model.

        ``sizes`` lists layer widths from input to classes. Weights are
        Glorot-uniform, biases zero. Fractional orders
        start at 0 (``fdo_init="zero"``), U[0, 1) (``"uniform"``), or at
        ``order_init`` when given.
        """
        if len(sizes) < 2:
            raise DomainError("need at least input and output sizes")
        rng = np.random.default_rng(seed)
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            w = Param(f"layer{i}.weight", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            b = Param(f"layer{i}.bias", np.zeros(fan_out), kind="bias")
            layer = Layer(w, b)
            last = i == len(sizes) - 2
            if activation is not None and not last:
                spec = replace(activation, name=f"layer{i}.act")
                layer.act = spec
                shape = (fan_out,) if per_channel else ()
                if spec.fractional:
                    if order_init is not None:
                        init = np.full(shape, float(order_init))
                    elif fdo_init == "uniform":
                        init = rng.uniform(0.0, 1.0, size=shape)
                    elif fdo_init == "zero":
                        init = np.zeros(shape)
                    else:
                        raise DomainError(f"unknown fdo_init {fdo_init!r}")
                    init = np.array(np.clip(init, *ORDER_BOX), dtype=np.float64)
                    layer.order = Param(f"layer{i}.order", init, True, ORDER_BOX, "order")
                if spec.is_falu:
                    beta = np.array(np.clip(np.full(shape, float(np.mean(spec.falu_beta))), *BETA_BOX))
                    layer.beta = Param(f"layer{i}.beta", beta, True, BETA_BOX, "beta")
                if spec.base.value == "prelu":
                    layer.slope = Param(f"layer{i}.slope", np.array(float(spec.prelu_slope)), kind="slope")
            layers.append(layer)
        return cls(layers)

    def param(self, name):
        return self._by_name[name]

    def fdo_params(self):
        return [p for p in self.registry if p.kind == "order"]

    def copy_values(self):
        return {p.name: p.value.copy() for p in self.registry}

    @property
    def sizes(self):
        return [self.layers[0].weight.value.shape[0]] + [l.weight.value.shape[1] for l in self.layers]


@dataclass
class LayerCache:
    input: np.ndarray  # input of the affine map
    act: object | None  # ForwardCache of the activation, if any


def forward(model, batch):
    """Logits and per-layer caches; raises NonFiniteError naming the layer."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.sizes[0]:
        raise DomainError(f"batch shape {x.shape} does not match input size {model.sizes[0]}")
    caches = []
    for i, layer in enumerate(model.layers):
        with np.errstate(over="ignore", invalid="ignore"):
            # overflow is reported below with the layer name
            z = x @ layer.weight.value + layer.bias.value
        if not np.all(np.isfinite(z)):
            flat = int(np.flatnonzero(~np.isfinite(z))[0])
            idx = tuple(int(k) for k in np.unravel_index(flat, z.shape))
            name = f"layer{i}.affine"
            raise NonFiniteError(f"layer {name!r}: non-finite output at index {idx}", name, idx)
        spec = layer.current_spec()
        if spec is None:
            caches.append(LayerCache(x, None))
            layer.last_planes = 0
            x = z
        else:
            out, ac = frac_act_forward(spec, z)
            caches.append(LayerCache(x, ac))
            layer.last_planes = ac.plane_count
            x = out
    return x, caches


def backward(model, caches, d_logits):
    """Gradients of every registered parameter, keyed by name."""
    if len(caches) != len(model.layers):
        raise CacheMismatchError(f"{len(caches)} caches for {len(model.layers)} layers")
    grads = {}
    g = np.asarray(d_logits, dtype=np.float64)
    for i in reversed(range(len(model.layers))):
        layer, cache = model.layers[i], caches[i]
        spec = layer.current_spec()
        if spec is not None:
            if cache.act is None:
                raise CacheMismatchError(f"layer {i} has an activation but no activation cache")
            g, d_order, d_beta, d_slope = frac_act_backward(spec, cache.act, g)
            if layer.order is not None:
                grads[layer.order.name] = np.asarray(d_order, dtype=np.float64).reshape(layer.order.value.shape)
            if layer.beta is not None:
                grads[layer.beta.name] = np.asarray(d_beta, dtype=np.float64).reshape(layer.beta.value.shape)
            if layer.slope is not None:
                grads[layer.slope.name] = np.asarray(d_slope, dtype=np.float64).reshape(layer.slope.value.shape)
        x_in = cache.input
        if g.shape != (x_in.shape[0], layer.weight.value.shape[1]):
            raise CacheMismatchError(f"gradient shape {g.shape} does not match layer {i}")
        grads[layer.weight.name] = x_in.T @ g
        grads[layer.bias.name] = g.sum(axis=0)
        g = g @ layer.weight.value.T
    return grads


def count_cached_planes(model):
    """Total sampled planes cached by the most recent forward pass."""
    counts = [layer.last_planes for layer in model.layers if layer.act is not None]
    if any(c is None for c in counts):
        raise NotYetRunError("model has not run a forward pass")
    return int(sum(counts))


def log_softmax(logits):
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_label_smoothed_ce(logits, targets, eps=0.1):
    """Mean cross-entropy against ``(1 - eps) * onehot + eps / K``.

    Returns ``(loss, d_logits)`` with the gradient already averaged over the batch.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise DomainError(f"logits {logits.shape} and targets {targets.shape} do not match")
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"label smoothing must lie in [0, 1), got {eps!r}")
    B, K = logits.shape
    if targets.size and (targets.min() < 0 or targets.max() >= K):
        raise DomainError("target index out of range")
    q = np.full((B, K), eps / K)
    q[np.arange(B), targets] += 1.0 - eps
    logp = log_softmax(logits)
    loss = float(-(q * logp).sum() / B)
    d_logits = (np.exp(logp) - q) / B
    return loss, d_logits


def global_norm(grads):
    return math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads.values()))


def clip_global_norm(grads, max_norm):
    """Scale all gradients by ``max_norm / norm`` when the global L2 norm exceeds it."""
    if not max_norm > 0:
        raise DomainError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return dict(grads)
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    clip_max_norm: float = 10.0
    label_smoothing: float = 0.1
    seed: int = 0
    fdo_init: str = "zero"
    fdo_lr_scale: float = 1.0
    # step decay: multiply the rate by lr_gamma at each listed fraction of the run
    lr_milestones: tuple = ()
    lr_gamma: float = 0.1

    def __post_init__(self):
        for name in ("batch_size", "learning_rate", "clip_max_norm", "fdo_lr_scale"):
            if getattr(self, name) < 0 or (name == "batch_size" and self.batch_size < 1):
                raise DomainError(f"{name} must be positive")
        if self.epochs < 0:
            raise DomainError("epochs must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise DomainError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise DomainError("weight_decay must be >= 0")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise DomainError("label_smoothing must lie in [0, 1)")
        if self.fdo_init not in ("zero", "uniform"):
            raise DomainError(f"fdo_init must be zero or uniform, got {self.fdo_init!r}")
        self.lr_milestones = tuple(float(m) for m in self.lr_milestones)

    def lr_at(self, epoch):
        """Learning rate for 1-based ``epoch``."""
        lr = self.learning_rate
        for m in self.lr_milestones:
            if epoch > m * self.epochs:
                lr *= self.lr_gamma
        return lr


def sgd_step(model, grads, config, lr=None):
    """SGD with momentum and per-parameter weight decay, then clamping.

    v <- momentum * v + (grad + decay * p);  p <- p - lr * v
    where decay is 0 for decay-excluded parameters. The parameter update is
    evaluated as ``p * (1 - lr * decay) - lr * (momentum * v_old + grad)``,
    which is the same map but makes a pure-decay step an exact scaling.
    """
    lr = config.learning_rate if lr is None else lr
    for p in model.registry:
        g = grads.get(p.name)
        if g is None:
            g = np.zeros_like(p.value)
        decay = 0.0 if p.decay_excluded else config.weight_decay
        step_lr = lr * config.fdo_lr_scale if p.kind in ("order", "beta") else lr
        v = model.velocity[p.name]
        v *= config.momentum
        v += g
        if decay:
            old = p.value.copy()
            p.value *= 1.0 - step_lr * decay
            p.value -= step_lr * v
            v += decay * old
        else:
            p.value -= step_lr * v
        if p.clamp_box is not None:
            np.clip(p.value, *p.clamp_box, out=p.value)
    return model


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def mass(self):
        return int(self.counts.sum())


def fdo_histogram(model, bins=20):
    """Counts of every fractional order over [0, 2]."""
    if bins < 1:
        raise DomainError("bins must be >= 1")
    vals = [p.value.ravel() for p in model.fdo_params()]
    vals = np.concatenate(vals) if vals else np.empty(0)
    counts, edges = np.histogram(vals, bins=bins, range=ORDER_BOX)
    return Histogram(edges, counts.astype(np.int64))


@dataclass
class RunMetrics:
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    cached_planes: int | None = None
    fdo_hist_start: Histogram | None = None
    fdo_hist_end: Histogram | None = None

    @property
    def best_test_acc(self):
        return max(self.test_acc) if self.test_acc else float("nan")

    def record(self, epoch, train_loss, test_loss, test_acc, seconds):
        self.epochs.append(epoch)
        self.train_loss.append(train_loss)
        self.test_loss.append(test_loss)
        self.test_acc.append(test_acc)
        self.epoch_seconds.append(seconds)


def iter_batches(n, batch_size, order=None):
    idx = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield idx[start : start + batch_size]


def evaluate(model, dataset, eps=0.0, batch_size=512):
    """Mean smoothed loss and accuracy, reduced in batch-index order."""
    n = len(dataset)
    if n == 0:
        return float("nan"), float("nan")
    total, correct = 0.0, 0
    for idx in iter_batches(n, batch_size):
        logits, _ = forward(model, dataset.features[idx])
        loss, _ = loss_label_smoothed_ce(logits, dataset.labels[idx], eps)
        total += loss * idx.size
        correct += int(np.sum(np.argmax(logits, axis=1) == dataset.labels[idx]))
    return total / n, correct / n


def _abort(exc, epoch, step):
    return TrainingAborted(
        f"epoch {epoch} step {step}: {exc}", layer=getattr(exc, "layer", None), index=getattr(exc, "index", None),
        epoch=epoch, step=step,
    )


def train_epoch(model, dataset, config, epoch):
    """One shuffled pass; returns the sample-weighted mean training loss.

    Batches are drawn from a permutation seeded by ``(seed, epoch)``. A
    non-finite loss or activation raises TrainingAborted.
    """
    n = len(dataset)
    order = np.random.default_rng([config.seed, epoch]).permutation(n)
    lr = config.lr_at(epoch)
    total = 0.0
    for step, idx in enumerate(iter_batches(n, config.batch_size, order)):
        try:
            logits, caches = forward(model, dataset.features[idx])
        except NonFiniteError as exc:
            raise _abort(exc, epoch, step) from exc
        loss, d_logits = loss_label_smoothed_ce(logits, dataset.labels[idx], config.label_smoothing)
        if not math.isfinite(loss):
            raise TrainingAborted(f"epoch {epoch} step {step}: loss is {loss}", layer="loss", epoch=epoch, step=step)
        try:
            grads = backward(model, caches, d_logits)
        except NonFiniteError as exc:
            raise _abort(exc, epoch, step) from exc
        bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
        if bad:
            raise TrainingAborted(f"epoch {epoch} step {step}: non-finite gradient for {bad[0]}", layer=bad[0], epoch=epoch, step=step)
        if config.clip_max_norm:
            grads = clip_global_norm(grads, config.clip_max_norm)
        sgd_step(model, grads, config, lr)
        total += loss * idx.size
    return total / n


def train(model, train_set, test_set, config, on_epoch=None):
    """Full run: epoch-0 evaluation row, then ``config.epochs`` training epochs.

    ``on_epoch(metrics)`` is called after each row is recorded.
    """
    metrics = RunMetrics()
    metrics.fdo_hist_start = fdo_histogram(model)
    eps = config.label_smoothing
    try:
        train_loss, _ = evaluate(model, train_set, eps)
        test_loss, test_acc = evaluate(model, test_set, eps)
    except NonFiniteError as exc:
        raise _abort(exc, 0, 0) from exc
    metrics.cached_planes = count_cached_planes(model) if any(l.act for l in model.layers) else 0
    metrics.record(0, train_loss, test_loss, test_acc, 0.0)
    if on_epoch:
        on_epoch(metrics)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        train_loss = train_epoch(model, train_set, config, epoch)
        seconds = time.perf_counter() - t0
        try:
            test_loss, test_acc = evaluate(model, test_set, eps)
        except NonFiniteError as exc:
            raise _abort(exc, epoch, -1) from exc
        if not math.isfinite(test_loss):
            raise TrainingAborted(f"epoch {epoch}: test loss is {test_loss}", layer="loss", epoch=epoch)
        metrics.record(epoch, train_loss, test_loss, test_acc, seconds)
        if on_epoch:
            on_epoch(metrics)
    metrics.fdo_hist_end = fdo_histogram(model)
    return metrics


# ---- checkpoints -----------------------------------------------------------


def _spec_to_dict(spec):
    d = asdict(spec)
    d["base"] = spec.base.value
    d.pop("name")
    for k in ("order", "falu_beta"):
        if isinstance(d[k], np.ndarray):
            d[k] = d[k].tolist()
    return d


def checkpoint_dict(model):
    layers = []
    for layer in model.layers:
        layers.append({"activation": None if layer.act is None else _spec_to_dict(layer.act)})
    params = [
        {
            "name": p.name,
            "kind": p.kind,
            "shape": list(p.value.shape),
            "decay_excluded": p.decay_excluded,
            "clamp_box": None if p.clamp_box is None else list(p.clamp_box),
            "data": [float(v) for v in p.value.ravel()],
        }
        for p in model.registry
    ]
    return {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "sizes": model.sizes, "layers": layers, "params": params}


def save_checkpoint(model, path):
    atomic_write_text(path, json.dumps(checkpoint_dict(model), indent=1) + "\n")


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DomainError(f"{path}: not a fracact checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DomainError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    by_name = {}
    for pd in doc["params"]:
        value = np.array(pd["data"], dtype=np.float64).reshape(pd["shape"])
        box = tuple(pd["clamp_box"]) if pd["clamp_box"] is not None else None
        by_name[pd["name"]] = Param(pd["name"], value, pd["decay_excluded"], box, pd["kind"])
    layers = []
    for i, ld in enumerate(doc["layers"]):
        layer = Layer(by_name[f"layer{i}.weight"], by_name[f"layer{i}.bias"])
        if ld["activation"] is not None:
            layer.act = ActivationSpec(**ld["activation"], name=f"layer{i}.act")
            layer.order = by_name.get(f"layer{i}.order")
            layer.beta = by_name.get(f"layer{i}.beta")
            layer.slope = by_name.get(f"layer{i}.slope")
        layers.append(layer)
    return MlpModel(layers)
