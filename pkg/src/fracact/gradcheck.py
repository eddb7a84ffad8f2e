"""Central finite-difference checks of every analytic gradient in the package.

Relative error is ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)``;
the floor keeps near-zero gradients from turning round-off into huge ratios.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .activations import (
    ActivationSpec,
    falu_backward,
    falu_forward,
    frac_act_backward,
    frac_act_forward,
    make_activation,
    scalar_fn,
)
from .glcore import frac_apply, frac_grad_input, frac_grad_order, gl_coefficients
from .nn import MlpModel, backward, forward, loss_label_smoothed_ce

SCALAR_TOL = 1e-5
MODEL_TOL = 1e-4
DENOM_FLOOR = 1e-3

SMOOTH_KINDS = ("sigmoid", "gelu_tanh", "mish", "silu", "softplus")
MODEL_ACTIVATIONS = ("sig", "fsig", "gelu", "fgelu", "mish", "fmish", "relu", "prelu", "silu", "softplus", "falu")


def rel_err(analytic, numeric, floor=DENOM_FLOOR):
    a, n = float(analytic), float(numeric)
    return abs(a - n) / max(abs(a), abs(n), floor)


def central_diff(fn, x, step):
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


@dataclass
class SuiteResult:
    name: str
    tol: float
    worst: float = 0.0
    worst_case: dict = field(default_factory=dict)
    cases: int = 0

    @property
    def passed(self):
        return self.worst <= self.tol

    def update(self, err, case):
        self.cases += 1
        if err > self.worst or not np.isfinite(err):
            self.worst = err if np.isfinite(err) else float("inf")
            self.worst_case = case


def check_scalar_input(rng, cases=200, kinds=SMOOTH_KINDS):
    res = SuiteResult("glcore.frac_grad_input", SCALAR_TOL)
    for i in range(cases):
        kind = kinds[i % len(kinds)]
        a, x, N = rng.uniform(0, 2), rng.uniform(-4, 4), int(rng.choice([1, 2, 4, 8]))
        f = scalar_fn(kind)
        co = gl_coefficients(a, N)
        an = frac_grad_input(f, co, x)
        fd = central_diff(lambda t: frac_apply(f, co, t), x, 1e-5)
        res.update(rel_err(an, fd), dict(kind=kind, a=a, x=x, N=N, analytic=an, numeric=fd))
    return res


def check_scalar_order(rng, cases=200, kinds=SMOOTH_KINDS):
    res = SuiteResult("glcore.frac_grad_order", SCALAR_TOL)
    for i in range(cases):
        kind = kinds[i % len(kinds)]
        a, x, N = rng.uniform(0, 2), rng.uniform(-4, 4), int(rng.choice([1, 2, 4, 8]))
        f = scalar_fn(kind)
        h = gl_coefficients(a, N).step
        an = frac_grad_order(f, gl_coefficients(a, N), x)
        fd = central_diff(lambda s: frac_apply(f, gl_coefficients(s, N, h), x), a, 1e-6)
        res.update(rel_err(an, fd), dict(kind=kind, a=a, x=x, N=N, analytic=an, numeric=fd))
    return res


def _falu_sample(rng):
    while True:
        a = rng.uniform(0, 2)
        if abs(a - 1.0) > 1e-3:
            return rng.uniform(-4, 4), a, rng.uniform(1.5, 9.5)


def check_falu(rng, cases=200):
    res = SuiteResult("activations.falu_backward", SCALAR_TOL)
    for _ in range(cases):
        x, a, b = _falu_sample(rng)
        dx, da, db = falu_backward(x, a, b)
        fx = central_diff(lambda t: falu_forward(t, a, b), x, 1e-6)
        fa = central_diff(lambda t: falu_forward(x, t, b), a, 1e-6)
        fb = central_diff(lambda t: falu_forward(x, a, t), b, 1e-6)
        err = max(rel_err(dx, fx), rel_err(da, fa), rel_err(db, fb))
        res.update(err, dict(x=x, a=a, beta=b, analytic=(dx, da, db), numeric=(fx, fa, fb)))
    return res


def check_layer(rng, cases=20):
    """Batch-level check of frac_act_backward against the loss sum(upstream * output)."""
    res = SuiteResult("activations.frac_act_backward", MODEL_TOL)
    kinds = ("sigmoid", "gelu_tanh", "mish", "silu", "softplus")
    for i in range(cases):
        kind = kinds[i % len(kinds)]
        N = int(rng.choice([1, 2, 3, 5]))
        spec = ActivationSpec(kind, fractional=True, order=float(rng.uniform(0.1, 1.9)), terms=N)
        x = rng.normal(size=(6, 3)) * 2
        up = rng.normal(size=x.shape)
        out, cache = frac_act_forward(spec, x)
        d_in, d_order, _, _ = frac_act_backward(spec, cache, up)

        def loss_a(a):
            return float(np.sum(up * frac_act_forward(replace(spec, order=a), x)[0]))

        fd = central_diff(loss_a, spec.order, 1e-6)
        err = rel_err(d_order, fd)
        j = int(rng.integers(x.size))
        e = np.zeros(x.size)
        e[j] = 1e-6
        e = e.reshape(x.shape)
        fdx = (np.sum(up * frac_act_forward(spec, x + e)[0]) - np.sum(up * frac_act_forward(spec, x - e)[0])) / 2e-6
        err = max(err, rel_err(d_in.ravel()[j], fdx))
        res.update(err, dict(kind=kind, N=N, order=spec.order, analytic=d_order, numeric=fd))
    return res


def toy_model(name, seed):
    """2-feature / 4-hidden / 2-class MLP with randomised trainable parameters."""
    rng = np.random.default_rng(seed)
    overrides = {}
    if name in ("fsig", "fgelu", "fmish"):
        overrides["terms"] = 3
    spec = make_activation(name, **overrides)
    if spec.is_falu:
        spec = replace(spec, falu_beta=float(rng.uniform(1.5, 4.0)))
    model = MlpModel.build([2, 4, 2], spec, seed=seed)
    for p in model.registry:
        if p.kind == "order":
            a = rng.uniform(0.2, 1.8)
            if spec.is_falu and abs(a - 1.0) < 0.05:
                a += 0.1
            p.value[...] = a
        elif p.kind == "bias":
            p.value[...] = rng.uniform(-0.5, 0.5, size=p.value.shape)
        elif p.kind == "slope":
            p.value[...] = rng.uniform(0.1, 0.4)
    return model


def model_grad_errors(model, x, y, eps=0.1, step=1e-6):
    """Worst relative error over every scalar entry of every parameter."""
    logits, caches = forward(model, x)
    _, d_logits = loss_label_smoothed_ce(logits, y, eps)
    grads = backward(model, caches, d_logits)
    worst, where = 0.0, None
    for p in model.registry:
        flat = p.value.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            lp = loss_label_smoothed_ce(forward(model, x)[0], y, eps)[0]
            flat[k] = orig - step
            lm = loss_label_smoothed_ce(forward(model, x)[0], y, eps)[0]
            flat[k] = orig
            fd = (lp - lm) / (2 * step)
            an = grads[p.name].reshape(-1)[k]
            err = rel_err(an, fd)
            if err > worst:
                worst, where = err, dict(param=p.name, index=k, analytic=float(an), numeric=fd)
    return worst, where


def check_models(rng, names=MODEL_ACTIVATIONS):
    res = SuiteResult("nn.backward", MODEL_TOL)
    for name in names:
        seed = int(rng.integers(2**31))
        model = toy_model(name, seed)
        data_rng = np.random.default_rng(seed + 1)
        x = data_rng.normal(size=(8, 2))
        y = data_rng.integers(0, 2, size=8)
        err, where = model_grad_errors(model, x, y)
        res.update(err, dict(activation=name, seed=seed, **(where or {})))
    return res


def run_all(seed=0, cases=200):
    """Run every suite; returns a list of :class:`SuiteResult`."""
    ss = np.random.SeedSequence(seed).spawn(5)
    rngs = [np.random.default_rng(s) for s in ss]
    return [
        check_scalar_input(rngs[0], cases),
        check_scalar_order(rngs[1], cases),
        check_falu(rngs[2], cases),
        check_layer(rngs[3], max(5, cases // 10)),
        check_models(rngs[4]),
    ]
