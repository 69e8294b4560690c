"""Generative moment matching network for dependence on the unit cube.

A small feedforward generator G maps iid standard normal inputs to points in
(0,1)^d.  Training minimizes the biased V-statistic estimator of the squared
maximum mean discrepancy between a minibatch of training samples and a fresh
generated sample, under a mixture of Gaussian kernels

    K(u, v) = sum_m exp(-||u - v||^2 / (2 sigma_m^2)).

Gradients are hand-written (the network is tiny, two matmuls deep by
default) and optimized with Adam.  Once trained, the generator consumes
blocked uniforms, so it produces pseudo-random paths from iid uniforms and
quasi-random paths from a randomized Sobol' point set with the same code.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import qmc, stats
from .errors import DimensionError, DomainError, FitError

DEFAULT_BANDWIDTHS = (0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0)
DEFAULT_HIDDEN = (300,)


@dataclass
class TrainConfig:
    """Hyperparameters for stochastic-gradient MMD training."""

    batch_size: int = 128
    epochs: int = 300
    learning_rate: float = 1e-3
    dropout_rate: float = 0.3
    hidden: tuple = DEFAULT_HIDDEN
    bandwidths: tuple = DEFAULT_BANDWIDTHS
    n_gen_per_batch: int | None = None  # None: match the batch size

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.learning_rate <= 0:
            raise DomainError("batch size, epochs and learning rate must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DomainError("dropout rate must lie in [0, 1)")
        if not self.bandwidths:
            raise DomainError("need at least one kernel bandwidth")


@dataclass
class GmmnModel:
    """Generator weights plus everything needed to sample from it."""

    dims: tuple  # (d, hidden..., d)
    weights: list  # weights[l]: (dims[l], dims[l+1])
    biases: list  # biases[l]: (dims[l+1],)
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"
    prior: str = "normal"
    bandwidths: tuple = DEFAULT_BANDWIDTHS
    dropout_rate: float = 0.3
    seed: int = 0
    loss_history: list = field(default_factory=list, repr=False)

    @property
    def dim(self):
        return self.dims[-1]

    def forward(self, V):
        """Deterministic generator pass (dropout off), output in (0,1)^d."""
        H = np.asarray(V, dtype=float)
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            H = H @ W + b
            if l < len(self.weights) - 1:
                H = np.maximum(H, 0.0)
        return _sigmoid(H)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sqdist(X, Y):
    d2 = ((X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :]
          - 2.0 * (X @ Y.T))
    return np.maximum(d2, 0.0)


def mmd2(A, B, bandwidths=DEFAULT_BANDWIDTHS):
    """Biased V-statistic estimate of the squared MMD between samples A and B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionError(
            f"samples must share their dimension, got {A.shape} and {B.shape}"
        )
    if not len(bandwidths):
        raise DomainError("need at least one kernel bandwidth")
    n1, n2 = A.shape[0], B.shape[0]
    total = 0.0
    for d2, scale in ((_sqdist(A, A), 1.0 / (n1 * n1)),
                      (_sqdist(A, B), -2.0 / (n1 * n2)),
                      (_sqdist(B, B), 1.0 / (n2 * n2))):
        buf = np.empty_like(d2)
        for s in bandwidths:
            np.multiply(d2, -0.5 / (s * s), out=buf)
            np.exp(buf, out=buf)
            total += scale * float(buf.sum())
    return float(total)


def _mmd2_value_and_grad(A, B, bandwidths):
    """MMD^2 and its gradient with respect to the generated sample B."""
    n1, n2 = A.shape[0], B.shape[0]
    dab, dbb = _sqdist(A, B), _sqdist(B, B)
    daa = _sqdist(A, A)
    val = 0.0
    G = np.zeros_like(B)
    for s in bandwidths:
        c = -0.5 / (s * s)
        kaa, kab, kbb = np.exp(c * daa), np.exp(c * dab), np.exp(c * dbb)
        val += (kaa.sum() / (n1 * n1) - 2.0 * kab.sum() / (n1 * n2)
                + kbb.sum() / (n2 * n2))
        inv = 1.0 / (s * s)
        # d/db of -2/(n1 n2) sum K(a_i, b_j):  -2/(n1 n2) * k_ij (a_i - b_j)/s^2
        G -= (2.0 / (n1 * n2)) * inv * (kab.T @ A - kab.sum(0)[:, None] * B)
        # d/db of 1/n2^2 sum K(b_j, b_j'):  2/n2^2 * k_jj' (b_j' - b_j)/s^2
        G += (2.0 / (n2 * n2)) * inv * (kbb @ B - kbb.sum(1)[:, None] * B)
    return val, G


def _loss_and_grads(weights, biases, U_batch, V, masks, keep, bandwidths):
    """Minibatch MMD loss and gradients for every weight and bias.

    masks[l] is the dropout mask applied to hidden layer l (or None), with
    inverted scaling by `keep` so that sampling needs no rescaling.
    """
    n_layers = len(weights)
    H = V
    pre = []
    post = [V]
    for l in range(n_layers):
        Z = H @ weights[l] + biases[l]
        pre.append(Z)
        if l < n_layers - 1:
            H = np.maximum(Z, 0.0)
            if masks is not None and masks[l] is not None:
                H = H * masks[l] / keep
        else:
            H = _sigmoid(Z)
        post.append(H)
    B = post[-1]

    loss, G = _mmd2_value_and_grad(U_batch, B, bandwidths)

    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    delta = G * B * (1.0 - B)  # through the sigmoid output
    for l in range(n_layers - 1, -1, -1):
        grads_w[l] = post[l].T @ delta
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ weights[l].T
            if masks is not None and masks[l - 1] is not None:
                delta = delta * masks[l - 1] / keep
            delta = delta * (pre[l - 1] > 0.0)
    return loss, grads_w, grads_b


def _init_params(dims, rng):
    """Glorot-style uniform initialization scaled by fan-in/fan-out."""
    weights, biases = [], []
    for a, b in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (a + b))
        weights.append(rng.uniform(-limit, limit, size=(a, b)))
        biases.append(np.zeros(b))
    return weights, biases


def train(U_trn, cfg=None, seed=0):
    """Train a generator on pseudo-observations by minibatch MMD descent.

    Deterministic in (U_trn, cfg, seed); returns the final-epoch weights with
    the per-epoch running-average minibatch loss in ``loss_history``.
    """
    cfg = cfg or TrainConfig()
    U_trn = np.asarray(U_trn, dtype=float)
    if U_trn.ndim != 2 or U_trn.shape[1] < 2:
        raise DimensionError("training sample must be n x d with d >= 2")
    n, d = U_trn.shape
    if n < cfg.batch_size:
        raise DomainError(f"batch size {cfg.batch_size} exceeds n={n}")

    dims = (d, *cfg.hidden, d)
    rng = np.random.default_rng(seed)
    weights, biases = _init_params(dims, rng)

    keep = 1.0 - cfg.dropout_rate
    lr, beta1, beta2, eps = cfg.learning_rate, 0.9, 0.999, 1e-8
    m_w = [np.zeros_like(W) for W in weights]
    v_w = [np.zeros_like(W) for W in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0

    history = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = U_trn[perm[start:start + cfg.batch_size]]
            m_gen = cfg.n_gen_per_batch or len(batch)
            V = stats.normal_quantile(
                np.clip(rng.random((m_gen, d)), qmc.UNIT_LO, qmc.UNIT_HI)
            )
            if cfg.dropout_rate > 0.0:
                masks = [(rng.random((m_gen, h)) < keep).astype(float)
                         for h in dims[1:-1]]
            else:
                masks = None
            loss, gw, gb = _loss_and_grads(
                weights, biases, batch, V, masks, keep, cfg.bandwidths
            )
            if not np.isfinite(loss):
                raise FitError(
                    f"non-finite training loss at epoch {epoch}, step {step}",
                    history=history + batch_losses,
                )
            step += 1
            bc1 = 1.0 - beta1 ** step
            bc2 = 1.0 - beta2 ** step
            for l in range(len(weights)):
                m_w[l] = beta1 * m_w[l] + (1.0 - beta1) * gw[l]
                v_w[l] = beta2 * v_w[l] + (1.0 - beta2) * gw[l] ** 2
                weights[l] -= lr * (m_w[l] / bc1) / (np.sqrt(v_w[l] / bc2) + eps)
                m_b[l] = beta1 * m_b[l] + (1.0 - beta1) * gb[l]
                v_b[l] = beta2 * v_b[l] + (1.0 - beta2) * gb[l] ** 2
                biases[l] -= lr * (m_b[l] / bc1) / (np.sqrt(v_b[l] / bc2) + eps)
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))

    return GmmnModel(
        dims=dims, weights=weights, biases=biases,
        bandwidths=tuple(cfg.bandwidths), dropout_rate=cfg.dropout_rate,
        seed=int(seed), loss_history=history,
    )


def transform_uniform_paths(model, cube):
    """Map a cube of blocked uniforms through the prior quantile and G."""
    cube = np.asarray(cube, dtype=float)
    if cube.ndim != 3 or cube.shape[2] != model.dim:
        raise DimensionError(
            f"expected an (n_pth, n_gen, {model.dim}) cube, got {cube.shape}"
        )
    n_pth, n_gen, d = cube.shape
    V = stats.normal_quantile(cube.reshape(-1, d))
    out = model.forward(V)
    out = np.clip(out, qmc.UNIT_LO, qmc.UNIT_HI)
    return out.reshape(n_pth, n_gen, d)


def sample_paths_pseudo(model, n_pth, n_gen, seed=0):
    """n_pth paths of n_gen generator samples driven by iid uniforms."""
    ps = qmc.pseudo_uniforms(n_pth, n_gen * model.dim, seed=seed)
    cube = qmc.block_paths(ps, n_pth, n_gen, model.dim).cube
    return transform_uniform_paths(model, cube)


def sample_paths_quasi(model, n_pth, n_gen, seed=0):
    """n_pth paths of n_gen generator samples driven by a randomized Sobol' set.

    The point set lives in dimension n_gen * d and is blocked columnwise, so
    each path spends one Sobol' point.
    """
    ps = qmc.sobol_points(n_pth, n_gen * model.dim, seed=seed, randomize=True)
    cube = qmc.block_paths(ps, n_pth, n_gen, model.dim).cube
    return transform_uniform_paths(model, cube)


def to_json(model):
    """Serializable dict with weights in row-major nested lists."""
    return {
        "dims": list(model.dims),
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "hidden_activation": model.hidden_activation,
        "output_activation": model.output_activation,
        "prior": model.prior,
        "bandwidths": list(model.bandwidths),
        "dropout_rate": model.dropout_rate,
        "seed": model.seed,
    }


def from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    return GmmnModel(
        dims=tuple(obj["dims"]),
        weights=[np.asarray(W, dtype=float) for W in obj["weights"]],
        biases=[np.asarray(b, dtype=float) for b in obj["biases"]],
        hidden_activation=obj.get("hidden_activation", "relu"),
        output_activation=obj.get("output_activation", "sigmoid"),
        prior=obj.get("prior", "normal"),
        bandwidths=tuple(obj.get("bandwidths", DEFAULT_BANDWIDTHS)),
        dropout_rate=float(obj.get("dropout_rate", 0.3)),
        seed=int(obj.get("seed", 0)),
    )


def save_model(model, path):
    with open(path, "w") as f:
        json.dump(to_json(model), f)


def load_model(path):
    with open(path) as f:
        return from_json(json.load(f))
