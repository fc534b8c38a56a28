"""Multi-resolution hash-grid positional encoding.

3D positions are mapped, per resolution level, to trilinearly
interpolated feature rows of a fixed-size hash table; levels are
concatenated. Unit directions bypass the grid and use a small sinusoidal
encoding (a volumetric hash is degenerate on the sphere).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError

# spatial-hash mixing constants (large odd integers, one per axis)
_HASH_PRIMES = np.array([2654435761, 805459861, 3674653429], dtype=np.uint64)

# corner offsets of a unit cell, fixed order
_CORNERS = np.array(
    [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=np.int64
)

N_DIR_FREQS = 4
DIR_ENCODING_DIM = 3 * N_DIR_FREQS * 2


@dataclass(frozen=True)
class HashGridConfig:
    """Hyperparameters of the multi-resolution hash grid.

    ``bounds`` is the axis-aligned scene box in meters as
    ``(lo, hi)`` arrays; positions outside are clamped to the boundary.
    """

    n_levels: int = 8
    base_resolution: int = 4
    growth_factor: float = 1.5
    table_size: int = 2**14
    feature_dim: int = 2
    bounds_lo: tuple = (0.0, 0.0, 0.0)
    bounds_hi: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.n_levels < 1:
            raise InvalidConfigError("n_levels must be >= 1")
        if self.growth_factor <= 1.0:
            raise InvalidConfigError("growth_factor must be > 1")
        if self.table_size < 1 or self.table_size & (self.table_size - 1) != 0:
            raise InvalidConfigError("table_size must be a power of two")
        lo = np.asarray(self.bounds_lo, dtype=np.float64)
        hi = np.asarray(self.bounds_hi, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
            raise InvalidConfigError("bounds must be a non-degenerate 3D box")

    @property
    def out_dim(self) -> int:
        return self.n_levels * self.feature_dim

    def level_resolution(self, level: int) -> int:
        return int(np.floor(self.base_resolution * self.growth_factor**level))

    def to_dict(self) -> dict:
        return {
            "n_levels": self.n_levels,
            "base_resolution": self.base_resolution,
            "growth_factor": self.growth_factor,
            "table_size": self.table_size,
            "feature_dim": self.feature_dim,
            "bounds_lo": list(self.bounds_lo),
            "bounds_hi": list(self.bounds_hi),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HashGridConfig":
        d = dict(d)
        d["bounds_lo"] = tuple(d["bounds_lo"])
        d["bounds_hi"] = tuple(d["bounds_hi"])
        return cls(**d)


def init_tables(config: HashGridConfig, rng: np.random.Generator, scale: float = 1e-4) -> np.ndarray:
    """Trainable feature tables, shape (n_levels, table_size, feature_dim)."""
    return rng.uniform(
        -scale, scale, size=(config.n_levels, config.table_size, config.feature_dim)
    )


def hash_corner_indices(corners: np.ndarray, table_size: int) -> np.ndarray:
    """Table slots for integer corner coordinates (..., 3) -> (...,).

    Coordinate-wise multiply by the mixing constants, XOR, mask by
    ``table_size - 1``. Collisions are permitted silently.
    """
    c = corners.astype(np.int64).astype(np.uint64)
    h = (c[..., 0] * _HASH_PRIMES[0]) ^ (c[..., 1] * _HASH_PRIMES[1]) ^ (
        c[..., 2] * _HASH_PRIMES[2]
    )
    return (h & np.uint64(table_size - 1)).astype(np.int64)


def _interp_tape(positions: np.ndarray, config: HashGridConfig):
    """Per-level table slots and trilinear weights for a batch of points.

    Returns (slots, weights): int64 (L, P, 8) and float64 (L, P, 8).
    """
    p = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    lo = np.asarray(config.bounds_lo)
    hi = np.asarray(config.bounds_hi)
    unit = np.clip((p - lo) / (hi - lo), 0.0, 1.0)

    n_pts = p.shape[0]
    slots = np.empty((config.n_levels, n_pts, 8), dtype=np.int64)
    weights = np.empty((config.n_levels, n_pts, 8), dtype=np.float64)
    for level in range(config.n_levels):
        res = config.level_resolution(level)
        g = unit * res
        base = np.floor(g).astype(np.int64)
        frac = g - base
        corners = base[:, None, :] + _CORNERS[None, :, :]  # (P, 8, 3)
        slots[level] = hash_corner_indices(corners, config.table_size)
        w = np.where(_CORNERS[None, :, :] == 1, frac[:, None, :], 1.0 - frac[:, None, :])
        weights[level] = w.prod(axis=-1)
    return slots, weights


def encode(positions: np.ndarray, tables: np.ndarray, config: HashGridConfig) -> np.ndarray:
    """Encode points into concatenated per-level interpolated features.

    Parameters
    ----------
    positions : (P, 3) or (3,) array in meters
    tables : (n_levels, table_size, feature_dim) trainable array
    config : HashGridConfig

    Returns
    -------
    (P, n_levels * feature_dim) array, or 1D for a single point.
    """
    single = np.asarray(positions).ndim == 1
    slots, weights = _interp_tape(positions, config)
    feats = np.einsum("lpc,lpcf->lpf", weights, tables[np.arange(config.n_levels)[:, None, None], slots])
    out = np.moveaxis(feats, 0, 1).reshape(slots.shape[1], -1)
    return out[0] if single else out


def encode_with_tape(positions: np.ndarray, tables: np.ndarray, config: HashGridConfig):
    """Like :func:`encode` but also returns the (slots, weights) tape for backward."""
    slots, weights = _interp_tape(positions, config)
    gathered = tables[np.arange(config.n_levels)[:, None, None], slots]
    feats = np.einsum("lpc,lpcf->lpf", weights, gathered)
    out = np.moveaxis(feats, 0, 1).reshape(slots.shape[1], -1)
    return out, (slots, weights)


def encode_backward(
    tape,
    upstream: np.ndarray,
    grad_tables: np.ndarray,
    config: HashGridConfig,
) -> None:
    """Accumulate feature gradients into the table gradient buffer.

    ``upstream`` has shape (P, n_levels * feature_dim) matching the encode
    output; each touched table row receives its trilinear weight times the
    upstream slice. Not thread-safe: callers serialize or merge private
    buffers.
    """
    slots, weights = tape
    n_levels, n_pts = slots.shape[0], slots.shape[1]
    up = upstream.reshape(n_pts, n_levels, config.feature_dim)
    for level in range(n_levels):
        contrib = weights[level][:, :, None] * up[:, level, None, :]  # (P, 8, F)
        np.add.at(
            grad_tables[level],
            slots[level].reshape(-1),
            contrib.reshape(-1, config.feature_dim),
        )


def encode_direction(direction: np.ndarray) -> np.ndarray:
    """Sinusoidal encoding of unit vectors: sin/cos of 2^k * pi * component.

    Accepts (..., 3); returns (..., 24) for the default 4 frequencies.
    """
    d = np.asarray(direction, dtype=np.float64)
    freqs = (2.0 ** np.arange(N_DIR_FREQS)) * np.pi
    ang = d[..., None, :] * freqs[:, None]  # (..., K, 3)
    out = np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)  # (..., K, 6)
    return out.reshape(*d.shape[:-1], DIR_ENCODING_DIM)
