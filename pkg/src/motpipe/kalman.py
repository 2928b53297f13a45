"""Constant-velocity Kalman filter over box state with an NSA measurement update.

State is the 8-vector (cx, cy, a, h, vcx, vcy, va, vh): box center, aspect
ratio w/h, height, and their per-frame velocities. Noise magnitudes follow the
SORT/ByteTrack lineage convention, scaled by box height: position std h/20,
velocity std h/160. The NSA update scales measurement noise by
(1 - detection confidence), trusting confident detections more; a 1e-6 floor
keeps the innovation covariance invertible at confidence 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import BBox

STD_WEIGHT_POSITION = 1.0 / 20.0
STD_WEIGHT_VELOCITY = 1.0 / 160.0

# The aspect-ratio channel does not scale with box size; lineage constants.
ASPECT_STD = 1e-2
ASPECT_VELOCITY_STD = 1e-5
ASPECT_MEASUREMENT_STD = 1e-1

NSA_FLOOR = 1e-6

_F = np.eye(8)
_F[:4, 4:] = np.eye(4)
_H = np.eye(4, 8)


@dataclass
class KalmanState:
    """Filter mean and covariance; treated as an immutable value."""

    mean: np.ndarray  # shape (8,)
    cov: np.ndarray  # shape (8, 8), symmetric PSD


def _measurement_from_box(b: BBox) -> np.ndarray:
    return np.array([b.x + b.w / 2.0, b.y + b.h / 2.0, b.w / b.h, b.h])


def state_to_bbox(s: KalmanState) -> BBox:
    """Convert the positional block of the mean back to a top-left box."""
    cx, cy, a, h = s.mean[:4]
    w = a * h
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def _position_stds(h: float) -> tuple[float, float]:
    return STD_WEIGHT_POSITION * h, STD_WEIGHT_VELOCITY * h


def _process_noise(h: float) -> np.ndarray:
    sp, sv = _position_stds(h)
    return np.diag(np.square([sp, sp, ASPECT_STD, sp, sv, sv, ASPECT_VELOCITY_STD, sv]))


def _measurement_noise(h: float) -> np.ndarray:
    sp, _ = _position_stds(h)
    return np.diag(np.square([sp, sp, ASPECT_MEASUREMENT_STD, sp]))


def init_state(b: BBox) -> KalmanState:
    """Start a filter at a detection with zero velocity and diagonal covariance."""
    mean = np.zeros(8)
    mean[:4] = _measurement_from_box(b)
    sp, sv = _position_stds(b.h)
    cov = np.diag(np.square([sp, sp, ASPECT_STD, sp, sv, sv, ASPECT_VELOCITY_STD, sv]))
    return KalmanState(mean, cov)


def predict(s: KalmanState) -> KalmanState:
    """Advance one frame under the constant-velocity transition."""
    mean = _F @ s.mean
    cov = _F @ s.cov @ _F.T + _process_noise(s.mean[3])
    return KalmanState(mean, cov)


def update(s: KalmanState, measurement: BBox, r_scale: float = 1.0) -> KalmanState:
    """Standard Kalman measurement update with noise R scaled by `r_scale`.

    Uses the Joseph-form covariance update, which preserves symmetry and
    positive semidefiniteness under roundoff.

    Args:
        s: prior state (typically the output of `predict`).
        measurement: observed box.
        r_scale: multiplier applied to the base measurement noise.

    Raises:
        numpy.linalg.LinAlgError: innovation covariance not positive definite.
    """
    z = _measurement_from_box(measurement)
    r = r_scale * _measurement_noise(s.mean[3])
    innovation_cov = _H @ s.cov @ _H.T + r
    chol = cho_factor(innovation_cov, lower=True)
    gain = cho_solve(chol, (_H @ s.cov)).T  # (8, 4)
    mean = s.mean + gain @ (z - _H @ s.mean)
    ikh = np.eye(8) - gain @ _H
    cov = ikh @ s.cov @ ikh.T + gain @ r @ gain.T
    return KalmanState(mean, (cov + cov.T) / 2.0)


def update_nsa(s: KalmanState, measurement: BBox, confidence: float) -> KalmanState:
    """Noise-scale-adaptive update: measurement noise becomes (1 - confidence) * R.

    At confidence 0 this is exactly the standard update with full R; at
    confidence 1 the scale bottoms out at the 1e-6 floor, pinning the
    posterior position to the measurement.
    """
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence must be in [0, 1], got {confidence}")
    return update(s, measurement, r_scale=max(1.0 - confidence, NSA_FLOOR))
