"""Block-style recurrent forecaster: a 10-frame window in, 5 frames out.

A stack of recurrent layers encodes the input window; an affine decoder maps
the final hidden state to the whole output chunk in one shot. Training is
mini-batch gradient descent on mean squared error with adaptive-moment
updates. Gradients are hand-derived backpropagation through time, validated
against central finite differences (see gradient_check).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvariantViolation, TrainingDivergence
from .frames import FEATURE_LENGTH, feature_bounds
from .serialization import load_container, save_container
from .windows import FORECAST_INPUT_LEN, FORECAST_OUTPUT_LEN, WindowSample

CELL_KINDS = ("tanh", "gru")


@dataclass
class TrainConfig:
    """Optimizer settings for train_forecaster."""

    epochs: int = 200
    batch_size: int = 30
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class ForecastModel:
    """Recurrent encoder plus affine chunk decoder.

    Parameters are plain float64 arrays in ``params``; layer l of a tanh
    stack owns Wx{l}, Wh{l}, b{l}; a gru stack owns the z/r/n gate variants.
    The decoder owns Wo (hidden x out_len*feature_dim) and bo.
    """

    def __init__(self, feature_dim: int = FEATURE_LENGTH, hidden: int = 128,
                 layers: int = 1, cell: str = "tanh",
                 in_len: int = FORECAST_INPUT_LEN,
                 out_len: int = FORECAST_OUTPUT_LEN, seed: int = 0):
        if cell not in CELL_KINDS:
            raise ValueError(f"cell must be one of {CELL_KINDS}, got {cell!r}")
        if layers < 1 or hidden < 1:
            raise ValueError("hidden and layers must be >= 1")
        self.feature_dim = feature_dim
        self.hidden = hidden
        self.layers = layers
        self.cell = cell
        self.in_len = in_len
        self.out_len = out_len
        self.seed = seed
        self.params: dict[str, np.ndarray] = {}
        self.training_log: list[dict] = []
        self.first_epoch_loss: float | None = None
        self.final_epoch_loss: float | None = None
        self._init_params(np.random.default_rng(seed))

    # -- construction ------------------------------------------------------

    def _gate_names(self) -> tuple[str, ...]:
        return ("",) if self.cell == "tanh" else ("z", "r", "n")

    def _init_params(self, rng: np.random.Generator) -> None:
        def uniform(shape, fan_in):
            s = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-s, s, size=shape)

        for l in range(self.layers):
            d_in = self.feature_dim if l == 0 else self.hidden
            for g in self._gate_names():
                self.params[f"Wx{g}{l}"] = uniform((d_in, self.hidden), d_in)
                self.params[f"Wh{g}{l}"] = uniform((self.hidden, self.hidden),
                                                   self.hidden)
                self.params[f"b{g}{l}"] = uniform((self.hidden,), self.hidden)
        out_dim = self.out_len * self.feature_dim
        self.params["Wo"] = uniform((self.hidden, out_dim), self.hidden)
        self.params["bo"] = uniform((out_dim,), self.hidden)

    @property
    def hyperparameters(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "hidden": self.hidden,
            "layers": self.layers,
            "cell": self.cell,
            "in_len": self.in_len,
            "out_len": self.out_len,
            "seed": self.seed,
        }

    # -- forward -----------------------------------------------------------
    # Layers process the whole sequence one after another; per layer the
    # input projections of all timesteps go through a single matmul, which
    # is what keeps training fast at the 1682-wide feature dimension.

    def _layer_forward(self, l: int, seq: np.ndarray,
                       ) -> tuple[np.ndarray, tuple]:
        p = self.params
        B, T, _ = seq.shape
        H = self.hidden
        flat = seq.reshape(B * T, -1)
        h = np.zeros((B, H))
        states = np.empty((B, T, H))
        if self.cell == "tanh":
            xp = (flat @ p[f"Wx{l}"] + p[f"b{l}"]).reshape(B, T, H)
            for t in range(T):
                h = np.tanh(xp[:, t] + h @ p[f"Wh{l}"])
                states[:, t] = h
            return states, (seq, states)
        xz = (flat @ p[f"Wxz{l}"] + p[f"bz{l}"]).reshape(B, T, H)
        xr = (flat @ p[f"Wxr{l}"] + p[f"br{l}"]).reshape(B, T, H)
        xn = (flat @ p[f"Wxn{l}"] + p[f"bn{l}"]).reshape(B, T, H)
        zs = np.empty((B, T, H))
        rs = np.empty((B, T, H))
        ns = np.empty((B, T, H))
        for t in range(T):
            z = _sigmoid(xz[:, t] + h @ p[f"Whz{l}"])
            r = _sigmoid(xr[:, t] + h @ p[f"Whr{l}"])
            n = np.tanh(xn[:, t] + (r * h) @ p[f"Whn{l}"])
            h = (1.0 - z) * h + z * n
            zs[:, t], rs[:, t], ns[:, t] = z, r, n
            states[:, t] = h
        return states, (seq, states, zs, rs, ns)

    def _forward(self, X: np.ndarray, want_cache: bool = False,
                 ) -> tuple[np.ndarray, list | None]:
        B, T, d = X.shape
        if d != self.feature_dim:
            raise DimensionMismatch(
                f"input feature dim {d} != model dim {self.feature_dim}")
        if T != self.in_len:
            raise DimensionMismatch(
                f"input length {T} != model in_len {self.in_len}")
        caches: list | None = [] if want_cache else None
        seq = X
        for l in range(self.layers):
            seq, cache = self._layer_forward(l, seq)
            if want_cache:
                caches.append(cache)
        y = seq[:, -1] @ self.params["Wo"] + self.params["bo"]
        return y.reshape(B, self.out_len, self.feature_dim), caches

    def predict_raw(self, window: np.ndarray) -> np.ndarray:
        """(in_len, d) -> (out_len, d), unclamped model output."""
        window = np.asarray(window, dtype=np.float64)
        if window.shape != (self.in_len, self.feature_dim):
            raise DimensionMismatch(
                f"expected input shape {(self.in_len, self.feature_dim)}, "
                f"got {window.shape}")
        y, _ = self._forward(window[None])
        return y[0]

    def predict_raw_batch(self, X: np.ndarray) -> np.ndarray:
        y, _ = self._forward(np.asarray(X, dtype=np.float64))
        return y

    # -- backward ----------------------------------------------------------

    def _layer_backward(self, l: int, cache: tuple, dseq: np.ndarray,
                        grads: dict[str, np.ndarray], want_dx: bool,
                        ) -> np.ndarray | None:
        """Backprop one layer over the whole sequence.

        dseq is the gradient w.r.t. the layer's hidden-state sequence;
        returns the gradient w.r.t. the layer's input sequence (skipped for
        the bottom layer, whose inputs are data)."""
        p = self.params
        seq = cache[0]
        states = cache[1]
        B, T, H = states.shape
        flat_in = seq.reshape(B * T, -1)
        if self.cell == "tanh":
            da = np.empty((B, T, H))
            dh_next = np.zeros((B, H))
            WhT = p[f"Wh{l}"].T
            for t in range(T - 1, -1, -1):
                dh = dseq[:, t] + dh_next
                h_t = states[:, t]
                da_t = dh * (1.0 - h_t * h_t)
                da[:, t] = da_t
                h_prev = states[:, t - 1] if t > 0 else None
                if h_prev is not None:
                    grads[f"Wh{l}"] += h_prev.T @ da_t
                dh_next = da_t @ WhT
            da_flat = da.reshape(B * T, H)
            grads[f"Wx{l}"] += flat_in.T @ da_flat
            grads[f"b{l}"] += da_flat.sum(axis=0)
            if not want_dx:
                return None
            return (da_flat @ p[f"Wx{l}"].T).reshape(B, T, -1)
        _, states, zs, rs, ns = cache
        daz = np.empty((B, T, H))
        dar = np.empty((B, T, H))
        dan = np.empty((B, T, H))
        dh_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            dh = dseq[:, t] + dh_next
            h_prev = states[:, t - 1] if t > 0 else np.zeros((B, H))
            z, r, n = zs[:, t], rs[:, t], ns[:, t]
            dz = dh * (n - h_prev)
            dn = dh * z
            dh_prev = dh * (1.0 - z)
            dan_t = dn * (1.0 - n * n)
            drh = dan_t @ p[f"Whn{l}"].T
            dr = drh * h_prev
            dh_prev = dh_prev + drh * r
            daz_t = dz * z * (1.0 - z)
            dar_t = dr * r * (1.0 - r)
            grads[f"Whn{l}"] += (r * h_prev).T @ dan_t
            grads[f"Whz{l}"] += h_prev.T @ daz_t
            grads[f"Whr{l}"] += h_prev.T @ dar_t
            dh_prev = dh_prev + daz_t @ p[f"Whz{l}"].T + dar_t @ p[f"Whr{l}"].T
            daz[:, t], dar[:, t], dan[:, t] = daz_t, dar_t, dan_t
            dh_next = dh_prev
        for gate, da in (("z", daz), ("r", dar), ("n", dan)):
            da_flat = da.reshape(B * T, H)
            grads[f"Wx{gate}{l}"] += flat_in.T @ da_flat
            grads[f"b{gate}{l}"] += da_flat.sum(axis=0)
        if not want_dx:
            return None
        dx = (daz.reshape(B * T, H) @ p[f"Wxz{l}"].T
              + dar.reshape(B * T, H) @ p[f"Wxr{l}"].T
              + dan.reshape(B * T, H) @ p[f"Wxn{l}"].T)
        return dx.reshape(B, T, -1)

    def loss(self, X: np.ndarray, Y: np.ndarray) -> float:
        pred, _ = self._forward(np.asarray(X, dtype=np.float64))
        diff = pred - np.asarray(Y, dtype=np.float64)
        return float(np.mean(diff * diff))

    def loss_and_gradients(self, X: np.ndarray, Y: np.ndarray,
                           ) -> tuple[float, dict[str, np.ndarray]]:
        """MSE over the full output block and its gradient for every parameter."""
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        B, T, _ = X.shape
        pred, caches = self._forward(X, want_cache=True)
        diff = pred - Y
        loss = float(np.mean(diff * diff))
        grads = {name: np.zeros_like(arr) for name, arr in self.params.items()}
        dY = (2.0 / diff.size) * diff.reshape(B, -1)
        h_last = caches[-1][1][:, -1]
        grads["Wo"] += h_last.T @ dY
        grads["bo"] += dY.sum(axis=0)
        dseq = np.zeros((B, T, self.hidden))
        dseq[:, -1] = dY @ self.params["Wo"].T
        for l in range(self.layers - 1, -1, -1):
            dx = self._layer_backward(l, caches[l], dseq, grads,
                                      want_dx=l > 0)
            if l > 0:
                dseq = dx
        return loss, grads


def _stack_windows(windows: Sequence[WindowSample],
                   ) -> tuple[np.ndarray, np.ndarray]:
    if not windows:
        raise InvariantViolation("empty window list")
    X = np.stack([w.inputs for w in windows]).astype(np.float64)
    Y = np.stack([w.target for w in windows]).astype(np.float64)
    return X, Y


def train_forecaster(windows: Sequence[WindowSample],
                     config: TrainConfig | None = None,
                     hidden: int = 128, layers: int = 1, cell: str = "tanh",
                     ) -> ForecastModel:
    """Train a forecaster on window samples.

    Deterministic for a fixed config seed: initialization, shuffling and the
    batch reduction order are all seed-controlled, so repeated runs on one
    machine produce bit-identical weights. Raises TrainingDivergence when the
    loss goes non-finite.
    """
    config = config or TrainConfig()
    X, Y = _stack_windows(windows)
    n, in_len, d = X.shape
    out_len = Y.shape[1]
    model = ForecastModel(feature_dim=d, hidden=hidden, layers=layers,
                          cell=cell, in_len=in_len, out_len=out_len,
                          seed=config.seed)
    rng = np.random.default_rng(config.seed + 1)
    m_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    v_state = {k: np.zeros_like(v) for k, v in model.params.items()}
    scratch = {k: np.empty_like(v) for k, v in model.params.items()}
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_losses = []
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            loss, grads = model.loss_and_gradients(X[idx], Y[idx])
            epoch_losses.append(loss)
            step += 1
            bc1 = 1.0 - config.beta1 ** step
            bc2 = 1.0 - config.beta2 ** step
            for name, g in grads.items():
                m = m_state[name]
                v = v_state[name]
                t = scratch[name]
                m *= config.beta1
                m += (1.0 - config.beta1) * g
                np.multiply(g, g, out=t)
                v *= config.beta2
                t *= 1.0 - config.beta2
                v += t
                np.sqrt(v, out=t)
                t *= 1.0 / np.sqrt(bc2)
                t += config.eps
                np.divide(m, t, out=t)
                t *= config.learning_rate / bc1
                model.params[name] -= t
        mean_loss = float(np.mean(epoch_losses))
        if not np.isfinite(mean_loss):
            raise TrainingDivergence(epoch, repr(mean_loss))
        model.training_log.append({"epoch": epoch, "loss": mean_loss})
        if epoch == 1 or epoch == config.epochs:
            full = _full_batch_loss(model, X, Y, config.batch_size)
            if epoch == 1:
                model.first_epoch_loss = full
            if epoch == config.epochs:
                model.final_epoch_loss = full
    return model


def _full_batch_loss(model: ForecastModel, X: np.ndarray, Y: np.ndarray,
                     batch_size: int) -> float:
    total = 0.0
    n = X.shape[0]
    chunk = max(batch_size, 256)
    for lo in range(0, n, chunk):
        pred = model.predict_raw_batch(X[lo:lo + chunk])
        diff = pred - Y[lo:lo + chunk]
        total += float(np.sum(diff * diff))
    return total / (n * Y.shape[1] * Y.shape[2])


def forecast(model: ForecastModel, window: np.ndarray) -> np.ndarray:
    """Predict the next out_len frames from the last in_len frames.

    Output coordinates and blendshapes are clamped to their valid ranges
    ([0, 1] for x, y and blendshape scores; z stays unclamped) when the model
    runs at the canonical feature length; toy dimensions pass through raw.
    """
    pred = model.predict_raw(window)
    bounds = feature_bounds(model.feature_dim)
    if bounds is None:
        return pred
    lo, hi = bounds
    return np.clip(pred, lo, hi)


def forecast_rmse(model: ForecastModel, windows: Sequence[WindowSample],
                  batch_size: int = 256) -> float:
    """RMSE over all target entries of all windows, on raw (unclamped) outputs."""
    X, Y = _stack_windows(windows)
    total = 0.0
    count = 0
    for lo in range(0, X.shape[0], batch_size):
        pred = model.predict_raw_batch(X[lo:lo + batch_size])
        diff = pred - Y[lo:lo + batch_size]
        total += float(np.sum(diff * diff))
        count += diff.size
    return float(np.sqrt(total / count))


# -- gradient verification --------------------------------------------------

def finite_difference_error(model: ForecastModel, X: np.ndarray, Y: np.ndarray,
                            grads: dict[str, np.ndarray],
                            epsilon: float = 1e-5, n_coords: int = 200,
                            seed: int = 0) -> float:
    """Max relative error between given gradients and central differences.

    Samples at least ``n_coords`` weight coordinates across all tensors (all
    of them when the model is small). Relative error for a coordinate is
    |g - fd| / max(|g| + |fd|, 1e-8).
    """
    names = sorted(model.params)
    sizes = np.array([model.params[name].size for name in names])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    if total <= n_coords:
        flat_ids = np.arange(total)
    else:
        flat_ids = rng.choice(total, size=n_coords, replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for fid in flat_ids:
        which = int(np.searchsorted(offsets, fid, side="right") - 1)
        name = names[which]
        local = int(fid - offsets[which])
        flat = model.params[name].reshape(-1)
        orig = flat[local]
        flat[local] = orig + epsilon
        loss_plus = model.loss(X, Y)
        flat[local] = orig - epsilon
        loss_minus = model.loss(X, Y)
        flat[local] = orig
        fd = (loss_plus - loss_minus) / (2.0 * epsilon)
        g = grads[name].reshape(-1)[local]
        err = abs(g - fd) / max(abs(g) + abs(fd), 1e-8)
        worst = max(worst, err)
    return worst


def gradient_check(model: ForecastModel,
                   sample: WindowSample | tuple[np.ndarray, np.ndarray],
                   epsilon: float = 1e-5, n_coords: int = 200,
                   seed: int = 0) -> float:
    """Compare analytic gradients against central finite differences on one
    sample; returns the max relative error over a random weight subsample."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if isinstance(sample, WindowSample):
        X, Y = sample.inputs[None], sample.target[None]
    else:
        X, Y = sample
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.ndim == 2:
            X, Y = X[None], Y[None]
    _, grads = model.loss_and_gradients(X, Y)
    return finite_difference_error(model, X, Y, grads, epsilon, n_coords, seed)


# -- persistence -------------------------------------------------------------

def save_forecaster(model: ForecastModel, path) -> None:
    save_container(path, "forecaster", model.hyperparameters, model.params,
                   training_log=model.training_log)


def load_forecaster(path) -> ForecastModel:
    meta, tensors = load_container(path, expect_kind="forecaster")
    hp = meta["hyperparameters"]
    model = ForecastModel(feature_dim=hp["feature_dim"], hidden=hp["hidden"],
                          layers=hp["layers"], cell=hp["cell"],
                          in_len=hp["in_len"], out_len=hp["out_len"],
                          seed=hp.get("seed", 0))
    expected = set(model.params)
    if expected != set(tensors):
        raise DimensionMismatch(
            f"{path}: tensor names {sorted(tensors)} do not match the "
            f"declared architecture")
    for name in expected:
        if tensors[name].shape != model.params[name].shape:
            raise DimensionMismatch(
                f"{path}: tensor {name!r} has shape {tensors[name].shape}, "
                f"architecture requires {model.params[name].shape}")
        model.params[name] = tensors[name].astype(np.float64)
    model.training_log = meta.get("training_log", [])
    return model
