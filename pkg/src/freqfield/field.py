"""Two-branch coordinate network for local acoustic behavior.

Branch one (attenuation) maps hash-encoded (point, source) positions to
per-bin absorption and dispersion coefficients plus a feature vector;
branch two (emission) conditions on those features and the encoded ray
and source directions to produce the directional complex re-emission
spectrum. Forward passes record a tape; backward passes accumulate exact
reverse-mode gradients into caller-owned buffers.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import encoding
from .encoding import DIR_ENCODING_DIM, HashGridConfig
from .errors import InvalidConfigError, InvalidInputError


@dataclass(frozen=True)
class FieldConfig:
    """Network shape. Heads size with the frequency grid's bin count."""

    n_bins: int = 257
    n_layers: int = 6
    hidden_width: int = 256
    feature_width: int = 64
    sigma_bias: float = 0.1
    emission_bias: float = 0.01

    def __post_init__(self):
        if self.n_bins < 1 or self.n_layers < 1 or self.hidden_width < 1:
            raise InvalidConfigError("n_bins, n_layers, hidden_width must be >= 1")
        if self.feature_width < 1:
            raise InvalidConfigError("feature_width must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_bins": self.n_bins,
            "n_layers": self.n_layers,
            "hidden_width": self.hidden_width,
            "feature_width": self.feature_width,
            "sigma_bias": self.sigma_bias,
            "emission_bias": self.emission_bias,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FieldConfig":
        return cls(**d)


@dataclass
class AttenuationSample:
    """Per-point medium correction: absorption sigma (1/m, >= 0 by
    construction) and dispersion beta (rad/m, either sign), per bin."""

    sigma: np.ndarray
    beta: np.ndarray


@dataclass
class EmissionSample:
    """Directional complex re-emission spectrum, linear amplitude."""

    s: np.ndarray


def _unit(v, name):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise InvalidInputError(f"{name} must be a 3-vector")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise InvalidInputError(f"{name} must be unit-norm within 1e-9")
    return v


@dataclass
class SceneQuery:
    """One rendering task: emitter pose and receiver pose."""

    p_tx: np.ndarray
    n_tx: np.ndarray
    p_rx: np.ndarray
    rx_orientation: np.ndarray = dc_field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        self.p_tx = np.asarray(self.p_tx, dtype=np.float64)
        self.p_rx = np.asarray(self.p_rx, dtype=np.float64)
        self.n_tx = _unit(self.n_tx, "n_tx")
        self.rx_orientation = _unit(self.rx_orientation, "rx_orientation")
        if self.p_tx.shape != (3,) or self.p_rx.shape != (3,):
            raise InvalidInputError("positions must be 3-vectors")


def _he_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class FieldParams:
    """All trainable tensors plus structural configs.

    Tensor values are kept float32-representable (training quantizes
    after every update) so the float32 checkpoint payload is lossless.
    """

    def __init__(self, field_cfg: FieldConfig, enc_cfg: HashGridConfig, tensors: dict):
        self.field_cfg = field_cfg
        self.enc_cfg = enc_cfg
        self.tensors = tensors

    @classmethod
    def initialize(
        cls, field_cfg: FieldConfig, enc_cfg: HashGridConfig, seed: int = 0
    ) -> "FieldParams":
        rng = np.random.default_rng(seed)
        cfg = field_cfg
        t: dict[str, np.ndarray] = {}
        t["tables_p"] = encoding.init_tables(enc_cfg, rng)
        t["tables_tx"] = encoding.init_tables(enc_cfg, rng)

        attn_in = 2 * enc_cfg.out_dim
        emis_in = cfg.feature_width + 2 * DIR_ENCODING_DIM
        for prefix, in_dim, head_out in (
            ("attn", attn_in, 2 * cfg.n_bins + cfg.feature_width),
            ("emis", emis_in, 2 * cfg.n_bins),
        ):
            d = in_dim
            for i in range(cfg.n_layers):
                t[f"{prefix}.w{i}"] = _he_uniform(rng, d, cfg.hidden_width)
                t[f"{prefix}.b{i}"] = np.zeros(cfg.hidden_width)
                d = cfg.hidden_width
            t[f"{prefix}.head_w"] = np.zeros((cfg.hidden_width, head_out))
            t[f"{prefix}.head_b"] = np.zeros(head_out)
        # near-transparent start: small positive absorption, tiny real emission
        t["attn.head_b"][: cfg.n_bins] = cfg.sigma_bias
        t["emis.head_b"][: cfg.n_bins] = cfg.emission_bias
        t["kk_scale"] = np.array(1.0)

        params = cls(field_cfg, enc_cfg, t)
        params.quantize_()
        return params

    def names(self):
        return sorted(self.tensors)

    def new_grads(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def quantize_(self) -> None:
        """Round every tensor to its float32 value (in float64 storage)."""
        for k, v in self.tensors.items():
            self.tensors[k] = np.asarray(v.astype(np.float32), dtype=np.float64)

    def copy(self) -> "FieldParams":
        return FieldParams(
            self.field_cfg, self.enc_cfg, {k: v.copy() for k, v in self.tensors.items()}
        )

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.tensors.values())


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _mlp_forward(x0, tensors, prefix, n_layers):
    acts = [x0]
    h = x0
    for i in range(n_layers):
        h = np.maximum(h @ tensors[f"{prefix}.w{i}"] + tensors[f"{prefix}.b{i}"], 0.0)
        acts.append(h)
    head = h @ tensors[f"{prefix}.head_w"] + tensors[f"{prefix}.head_b"]
    return head, acts


def _mlp_backward(g_head, acts, tensors, grads, prefix, n_layers):
    grads[f"{prefix}.head_w"] += acts[-1].T @ g_head
    grads[f"{prefix}.head_b"] += g_head.sum(axis=0)
    g = g_head @ tensors[f"{prefix}.head_w"].T
    for i in range(n_layers - 1, -1, -1):
        g = g * (acts[i + 1] > 0.0)
        grads[f"{prefix}.w{i}"] += acts[i].T @ g
        grads[f"{prefix}.b{i}"] += g.sum(axis=0)
        g = g @ tensors[f"{prefix}.w{i}"].T
    return g


class FieldTape:
    """Intermediates of one batched field evaluation, kept for backward."""

    __slots__ = (
        "n_points",
        "enc_tape_p",
        "enc_tape_tx",
        "attn_acts",
        "sigma_raw",
        "emis_acts",
        "has_emission",
    )


def forward_attenuation(points, p_tx, params: FieldParams):
    """Attenuation branch over a batch of points.

    Returns (sigma, beta, features, tape); sigma/beta have shape
    (P, n_bins), features (P, feature_width).
    """
    cfg = params.field_cfg
    t = params.tensors
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n_pts = points.shape[0]

    enc_p, tape_p = encoding.encode_with_tape(points, t["tables_p"], params.enc_cfg)
    enc_tx, tape_tx = encoding.encode_with_tape(
        np.asarray(p_tx, dtype=np.float64)[None, :], t["tables_tx"], params.enc_cfg
    )
    x0 = np.concatenate([enc_p, np.broadcast_to(enc_tx, (n_pts, enc_tx.shape[1]))], axis=1)

    head, acts = _mlp_forward(x0, t, "attn", cfg.n_layers)
    nb = cfg.n_bins
    sigma_raw = head[:, :nb]
    beta = head[:, nb : 2 * nb]
    feat = head[:, 2 * nb :]
    sigma = _softplus(sigma_raw)

    tape = FieldTape()
    tape.n_points = n_pts
    tape.enc_tape_p = tape_p
    tape.enc_tape_tx = tape_tx
    tape.attn_acts = acts
    tape.sigma_raw = sigma_raw
    tape.emis_acts = None
    tape.has_emission = False
    return sigma, beta, feat, tape


def forward_emission(features, dirs, n_tx, params: FieldParams, tape: FieldTape):
    """Emission branch: complex spectrum per point for its ray direction."""
    cfg = params.field_cfg
    t = params.tensors
    n_pts = features.shape[0]
    enc_dir = encoding.encode_direction(np.atleast_2d(dirs))
    if enc_dir.shape[0] == 1 and n_pts > 1:
        enc_dir = np.broadcast_to(enc_dir, (n_pts, enc_dir.shape[1]))
    enc_ntx = np.broadcast_to(encoding.encode_direction(n_tx)[None, :], (n_pts, DIR_ENCODING_DIM))
    y0 = np.concatenate([features, enc_dir, enc_ntx], axis=1)

    head, acts = _mlp_forward(y0, t, "emis", cfg.n_layers)
    s = head[:, : cfg.n_bins] + 1j * head[:, cfg.n_bins :]

    tape.emis_acts = acts
    tape.has_emission = True
    return s


def forward_field(points, dirs, p_tx, n_tx, params: FieldParams):
    """Full two-branch evaluation for a batch of (point, ray-direction) pairs.

    Returns (sigma, beta, s, tape).
    """
    sigma, beta, feat, tape = forward_attenuation(points, p_tx, params)
    s = forward_emission(feat, dirs, n_tx, params, tape)
    return sigma, beta, s, tape


def field_backward(tape: FieldTape, g_sigma, g_beta, g_s, params: FieldParams, grads: dict):
    """Accumulate parameter gradients for one taped forward pass.

    ``g_sigma``/``g_beta`` are (P, n_bins) real upstream gradients;
    ``g_s`` is a (P, n_bins) complex gradient (d loss / d Re + j d loss /
    d Im) or None when the emission branch was not evaluated. The
    learnable causality scale is untouched here; it only receives
    gradient through the causality regularizer.
    """
    cfg = params.field_cfg
    t = params.tensors
    nb = cfg.n_bins
    n_pts = tape.n_points

    if g_s is not None:
        if not tape.has_emission:
            raise InvalidInputError("emission gradient supplied but branch was not run")
        g_head_e = np.concatenate([g_s.real, g_s.imag], axis=1)
        g_y0 = _mlp_backward(g_head_e, tape.emis_acts, t, grads, "emis", cfg.n_layers)
        g_feat = g_y0[:, : cfg.feature_width]
    else:
        g_feat = np.zeros((n_pts, cfg.feature_width))

    g_sigma_raw = g_sigma * _sigmoid(tape.sigma_raw)
    g_head_a = np.concatenate([g_sigma_raw, g_beta, g_feat], axis=1)
    g_x0 = _mlp_backward(g_head_a, tape.attn_acts, t, grads, "attn", cfg.n_layers)

    d = params.enc_cfg.out_dim
    encoding.encode_backward(tape.enc_tape_p, g_x0[:, :d], grads["tables_p"], params.enc_cfg)
    encoding.encode_backward(
        tape.enc_tape_tx,
        g_x0[:, d:].sum(axis=0, keepdims=True),
        grads["tables_tx"],
        params.enc_cfg,
    )


def eval_attenuation(p, p_tx, params: FieldParams):
    """Single-point attenuation query. Returns (AttenuationSample, features)."""
    sigma, beta, feat, _ = forward_attenuation(np.asarray(p)[None, :], p_tx, params)
    return AttenuationSample(sigma[0], beta[0]), feat[0]


def eval_emission(features, n_dir, n_tx, params: FieldParams):
    """Single-point emission query for one direction. Returns EmissionSample."""
    tape = FieldTape()
    tape.n_points = 1
    tape.has_emission = False
    s = forward_emission(
        np.atleast_2d(features), np.asarray(n_dir)[None, :], np.asarray(n_tx), params, tape
    )
    return EmissionSample(s[0])
