"""Single-layer LSTM with a fully-connected scalar head.

Forward, squared-error loss and backward (BPTT) are hand-derived.  Gate
rows in the stacked weight matrices are ordered (input i, forget f,
cell g, output o); no peepholes, no special forget-gate bias.  The score
is read from the final hidden state only: prediction = w_fc . h_T + b_fc.
Initial states are h_0 = c_0 = 0.

Inputs may be a single sequence (T, D) or a batch (B, T, D); batch loss
and gradients are means over the batch.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, FormatError
from .numerics import Rng, central_diff, ensure_finite, gaussian_fill

AQAM_MAGIC = b"AQAM"
AQAM_VERSION = 1

DEFAULT_HIDDEN = 256


@dataclass
class ModelParams:
    w_ih: np.ndarray  # (4H, D)
    w_hh: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)
    w_fc: np.ndarray  # (H,)
    b_fc: float

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[1]

    @property
    def dim(self) -> int:
        return self.w_ih.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.w_ih.copy(), self.w_hh.copy(), self.b.copy(),
            self.w_fc.copy(), self.b_fc,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [
                self.w_ih.ravel(),
                self.w_hh.ravel(),
                self.b,
                self.w_fc,
                [self.b_fc],
            ]
        )


@dataclass
class Gradients:
    w_ih: np.ndarray
    w_hh: np.ndarray
    b: np.ndarray
    w_fc: np.ndarray
    b_fc: float
    loss: float

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [
                self.w_ih.ravel(),
                self.w_hh.ravel(),
                self.b,
                self.w_fc,
                [self.b_fc],
            ]
        )


@dataclass
class ForwardTrace:
    gates_i: list[np.ndarray]  # each (B, H)
    gates_f: list[np.ndarray]
    gates_g: list[np.ndarray]
    gates_o: list[np.ndarray]
    cells: list[np.ndarray]
    hiddens: list[np.ndarray]
    prediction: np.ndarray  # (B,)


def init_params(hidden: int, dim: int, std: float, rng: Rng) -> ModelParams:
    """All weights and biases drawn N(0, std^2)."""
    return ModelParams(
        w_ih=gaussian_fill((4 * hidden, dim), std, rng),
        w_hh=gaussian_fill((4 * hidden, hidden), std, rng),
        b=gaussian_fill((4 * hidden,), std, rng),
        w_fc=gaussian_fill((hidden,), std, rng),
        b_fc=float(gaussian_fill((1,), std, rng)[0]),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _as_batch(seq: np.ndarray, dim: int) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim == 2:
        seq = seq[None, :, :]
    if seq.ndim != 3 or seq.shape[2] != dim:
        raise DimensionMismatchError(
            f"input shape {seq.shape} incompatible with feature dim {dim}"
        )
    if seq.shape[1] < 1:
        raise DimensionMismatchError("sequence must have at least one step")
    return seq


def forward(params: ModelParams, seq: np.ndarray) -> ForwardTrace:
    """Run the LSTM over all steps and score the final hidden state."""
    h_size = params.hidden
    x = _as_batch(seq, params.dim)
    batch, steps, _ = x.shape
    h = np.zeros((batch, h_size))
    c = np.zeros((batch, h_size))
    trace = ForwardTrace([], [], [], [], [], [], np.empty(batch))
    for t in range(steps):
        z = x[:, t, :] @ params.w_ih.T + h @ params.w_hh.T + params.b
        gi = _sigmoid(z[:, 0 * h_size : 1 * h_size])
        gf = _sigmoid(z[:, 1 * h_size : 2 * h_size])
        gg = np.tanh(z[:, 2 * h_size : 3 * h_size])
        go = _sigmoid(z[:, 3 * h_size : 4 * h_size])
        c = gf * c + gi * gg
        h = go * np.tanh(c)
        trace.gates_i.append(gi)
        trace.gates_f.append(gf)
        trace.gates_g.append(gg)
        trace.gates_o.append(go)
        trace.cells.append(c)
        trace.hiddens.append(h)
    trace.prediction = h @ params.w_fc + params.b_fc
    ensure_finite(trace.prediction, "prediction")
    return trace


def predict(params: ModelParams, seq: np.ndarray) -> np.ndarray:
    return forward(params, seq).prediction


def loss(prediction: float, target: float) -> float:
    return float((prediction - target) ** 2)


def backward(
    params: ModelParams, seq: np.ndarray, target: np.ndarray | float
) -> Gradients:
    """Exact gradients of the mean squared error over the batch."""
    h_size = params.hidden
    x = _as_batch(seq, params.dim)
    batch, steps, _ = x.shape
    y = np.atleast_1d(np.asarray(target, dtype=np.float64))
    if y.shape != (batch,):
        raise DimensionMismatchError(
            f"target shape {y.shape} does not match batch size {batch}"
        )
    trace = forward(params, x)
    err = trace.prediction - y
    loss_val = float(np.mean(err**2))

    dpred = 2.0 * err / batch
    h_last = trace.hiddens[-1]
    d_w_fc = dpred @ h_last
    d_b_fc = float(np.sum(dpred))
    dh = np.outer(dpred, params.w_fc)
    dc = np.zeros((batch, h_size))
    d_w_ih = np.zeros_like(params.w_ih)
    d_w_hh = np.zeros_like(params.w_hh)
    d_b = np.zeros_like(params.b)

    for t in range(steps - 1, -1, -1):
        gi = trace.gates_i[t]
        gf = trace.gates_f[t]
        gg = trace.gates_g[t]
        go = trace.gates_o[t]
        tanh_c = np.tanh(trace.cells[t])
        c_prev = trace.cells[t - 1] if t > 0 else np.zeros((batch, h_size))
        h_prev = trace.hiddens[t - 1] if t > 0 else np.zeros((batch, h_size))

        d_o = dh * tanh_c
        dc = dc + dh * go * (1.0 - tanh_c**2)
        d_i = dc * gg
        d_g = dc * gi
        d_f = dc * c_prev

        dz = np.concatenate(
            [
                d_i * gi * (1.0 - gi),
                d_f * gf * (1.0 - gf),
                d_g * (1.0 - gg**2),
                d_o * go * (1.0 - go),
            ],
            axis=1,
        )
        d_w_ih += dz.T @ x[:, t, :]
        d_w_hh += dz.T @ h_prev
        d_b += dz.sum(axis=0)
        dh = dz @ params.w_hh
        dc = dc * gf

    grads = Gradients(d_w_ih, d_w_hh, d_b, d_w_fc, d_b_fc, loss_val)
    ensure_finite(grads.flat(), "gradients")
    return grads


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_index: int
    worst_analytic: float
    worst_numeric: float

    def passed(self, tol: float) -> bool:
        return self.max_rel_error < tol


def grad_check(
    params: ModelParams,
    seq: np.ndarray,
    target: float,
    h: float = 1e-5,
    perturb: float = 0.0,
) -> GradCheckReport:
    """Compare analytic gradients against central differences entrywise.

    perturb scales the analytic gradient (fault injection for tests).
    Relative error: |a - n| / max(1e-8, |a| + |n|).
    """
    analytic = backward(params, seq, target).flat()
    if perturb:
        analytic = analytic * (1.0 + perturb)
    flat = params.flat()
    n = flat.size

    # view-backed working copy: perturbing one entry of vec is visible
    # through the weight views without rebuilding ModelParams
    hid, dim = params.hidden, params.dim
    vec = flat.copy()
    s0 = 4 * hid * dim
    s1 = s0 + 4 * hid * hid
    s2 = s1 + 4 * hid
    s3 = s2 + hid
    w_ih = vec[:s0].reshape(4 * hid, dim)
    w_hh = vec[s0:s1].reshape(4 * hid, hid)
    b = vec[s1:s2]
    w_fc = vec[s2:s3]
    x = np.asarray(seq, dtype=np.float64)

    def loss_now() -> float:
        hcur = np.zeros(hid)
        ccur = np.zeros(hid)
        for t in range(x.shape[0]):
            z = w_ih @ x[t] + w_hh @ hcur + b
            gi = _sigmoid(z[:hid])
            gf = _sigmoid(z[hid : 2 * hid])
            gg = np.tanh(z[2 * hid : 3 * hid])
            go = _sigmoid(z[3 * hid :])
            ccur = gf * ccur + gi * gg
            hcur = go * np.tanh(ccur)
        return loss(float(w_fc @ hcur) + vec[-1], target)

    max_err, worst = 0.0, (0, 0.0, 0.0)
    for i in range(n):
        def f(v, i=i):
            old = vec[i]
            vec[i] = v
            out = loss_now()
            vec[i] = old
            return out

        numeric = central_diff(f, flat[i], h)
        denom = max(1e-8, abs(analytic[i]) + abs(numeric))
        rel = abs(analytic[i] - numeric) / denom
        if rel > max_err:
            max_err = rel
            worst = (i, float(analytic[i]), numeric)
    return GradCheckReport(max_err, worst[0], worst[1], worst[2])


def _unflatten(vec: np.ndarray, hidden: int, dim: int) -> ModelParams:
    sizes = [4 * hidden * dim, 4 * hidden * hidden, 4 * hidden, hidden, 1]
    parts = []
    off = 0
    for s in sizes:
        parts.append(vec[off : off + s])
        off += s
    return ModelParams(
        parts[0].reshape(4 * hidden, dim),
        parts[1].reshape(4 * hidden, hidden),
        parts[2].copy(),
        parts[3].copy(),
        float(parts[4][0]),
    )


def save_params(path: str | Path, params: ModelParams) -> None:
    with open(path, "wb") as fh:
        fh.write(AQAM_MAGIC)
        fh.write(bytes([AQAM_VERSION]))
        fh.write(struct.pack("<II", params.hidden, params.dim))
        fh.write(params.flat().astype("<f8").tobytes())


def load_params(path: str | Path) -> ModelParams:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 13:
        raise FormatError(f"{path}: truncated header")
    if blob[:4] != AQAM_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if blob[4] != AQAM_VERSION:
        raise FormatError(f"{path}: unsupported version {blob[4]}")
    hidden, dim = struct.unpack("<II", blob[5:13])
    count = 4 * hidden * dim + 4 * hidden * hidden + 4 * hidden + hidden + 1
    payload = blob[13:]
    if len(payload) != 8 * count:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {8 * count}"
        )
    vec = np.frombuffer(payload, dtype="<f8").copy()
    if not np.all(np.isfinite(vec)):
        raise FormatError(f"{path}: non-finite parameter values")
    return _unflatten(vec, hidden, dim)
