"""Small feedforward regressor: softplus hidden layers, Adam, squared loss.

The output layer starts at zero weights with bias = mean(y), so an untrained
net predicts the target mean. ``loss_and_grad`` is the single source of both
training gradients and the finite-difference cross-check in the tests.
"""

from __future__ import annotations

import numpy as np

from causalift.models.base import (
    ModelError,
    ModelSpec,
    Schema,
    TrainedModel,
    _arr,
    check_matrix,
    check_vector,
    register_codec,
)

MAX_HIDDEN_LAYERS = 2
MAX_HIDDEN_WIDTH = 128


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_params(
    n_inputs: int, hidden: tuple[int, ...], y_mean: float, rng: np.random.Generator
) -> list[np.ndarray]:
    """[W1, b1, ..., Wout, bout]; zero output weights, bias at the target mean."""
    params: list[np.ndarray] = []
    fan_in = n_inputs
    for width in hidden:
        params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, width)))
        params.append(np.zeros(width))
        fan_in = width
    params.append(np.zeros((fan_in, 1)))
    params.append(np.array([y_mean]))
    return params


def forward(params: list[np.ndarray], X: np.ndarray) -> np.ndarray:
    a = X
    for i in range(0, len(params) - 2, 2):
        a = _softplus(a @ params[i] + params[i + 1])
    return (a @ params[-2] + params[-1])[:, 0]


def loss_and_grad(params: list[np.ndarray], X: np.ndarray, y: np.ndarray, l2: float):
    """Half mean squared error plus L2 on weights; analytic gradients."""
    n = X.shape[0]
    acts = [X]
    pre: list[np.ndarray] = []
    a = X
    for i in range(0, len(params) - 2, 2):
        z = a @ params[i] + params[i + 1]
        pre.append(z)
        a = _softplus(z)
        acts.append(a)
    out = (a @ params[-2] + params[-1])[:, 0]
    err = out - y
    loss = 0.5 * float(err @ err) / n
    for i in range(0, len(params), 2):
        loss += 0.5 * l2 * float(np.sum(params[i] ** 2))
    grads = [np.zeros_like(p) for p in params]
    delta = (err / n)[:, np.newaxis]
    grads[-2] = acts[-1].T @ delta + l2 * params[-2]
    grads[-1] = delta.sum(axis=0)
    back = delta @ params[-2].T
    for i in range(len(params) - 4, -1, -2):
        layer = i // 2
        back = back * _sigmoid(pre[layer])
        grads[i] = acts[layer].T @ back + l2 * params[i]
        grads[i + 1] = back.sum(axis=0)
        back = back @ params[i].T
    return loss, grads


class MlpModel(TrainedModel):
    def __init__(self, spec, schema, summary, params):
        self.spec = spec
        self.input_schema = schema
        self.training_summary = summary
        self.params = params

    @property
    def n_inputs(self) -> int:
        return self.params[0].shape[0] if len(self.params) > 2 else self.params[-2].shape[0]

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return forward(self.params, X)


def fit_mlp(
    X,
    y,
    hidden: tuple[int, ...] = (32,),
    learning_rate: float = 1e-3,
    epochs: int = 30,
    batch_size: int = 256,
    l2: float = 1e-5,
    schema: Schema = None,
    seed: int = 0,
) -> MlpModel:
    """Mini-batch Adam on standardized inputs (caller contract).

    Records the full-training loss after every epoch; a non-finite loss
    raises with the epoch index.
    """
    X = check_matrix(X)
    y = check_vector(y, X.shape[0])
    hidden = tuple(int(h) for h in hidden)
    if not 1 <= len(hidden) <= MAX_HIDDEN_LAYERS:
        raise ModelError(f"hidden layers must number 1..{MAX_HIDDEN_LAYERS}, got {hidden}")
    if any(h < 1 or h > MAX_HIDDEN_WIDTH for h in hidden):
        raise ModelError(f"hidden widths must be 1..{MAX_HIDDEN_WIDTH}, got {hidden}")
    if epochs < 0 or batch_size < 1 or learning_rate <= 0 or l2 < 0:
        raise ModelError("epochs >= 0, batch_size >= 1, learning_rate > 0, l2 >= 0")
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    params = init_params(X.shape[1], hidden, float(y.mean()), rng)
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    losses = []
    # Overflow inside an exploding run is expected; the non-finite check below
    # turns it into a ModelError instead of a warning storm.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                batch = order[start : start + batch_size]
                _, grads = loss_and_grad(params, X[batch], y[batch], l2)
                step += 1
                for i, g in enumerate(grads):
                    m_state[i] = beta1 * m_state[i] + (1 - beta1) * g
                    v_state[i] = beta2 * v_state[i] + (1 - beta2) * g * g
                    mhat = m_state[i] / (1 - beta1**step)
                    vhat = v_state[i] / (1 - beta2**step)
                    params[i] = params[i] - learning_rate * mhat / (np.sqrt(vhat) + eps)
            loss, _ = loss_and_grad(params, X, y, l2)
            if not np.isfinite(loss):
                raise ModelError(f"mlp training diverged at epoch {epoch}")
            losses.append(loss)
    spec = ModelSpec(
        "mlp",
        {
            "hidden": list(hidden),
            "learning_rate": learning_rate,
            "epochs": epochs,
            "batch_size": batch_size,
            "l2": l2,
        },
        seed=seed,
    )
    # flag runs whose loss failed to improve across some 10-epoch window
    stalled = any(
        losses[i + 10] > losses[i] for i in range(len(losses) - 10)
    ) if len(losses) > 10 else False
    summary = {"loss": losses, "loss_stalled": stalled}
    model = MlpModel(spec, schema, summary, params)
    summary["train_mae"] = float(np.abs(model.predict(X) - y).mean())
    return model


def _encode_mlp(model: MlpModel) -> dict:
    return {"params": [{"shape": list(p.shape), "data": _arr(p.ravel())} for p in model.params]}


def _decode_mlp(spec, schema, summary, params) -> MlpModel:
    arrays = [
        np.asarray(p["data"], dtype=np.float64).reshape(p["shape"])
        for p in params["params"]
    ]
    return MlpModel(spec, schema, summary, arrays)


register_codec(MlpModel, "mlp", _encode_mlp, _decode_mlp)
