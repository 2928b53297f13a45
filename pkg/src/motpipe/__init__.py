"""Detector-agnostic multi-object tracking pipeline.

Submodules: geometry (boxes, IoU, NMS), mot_io (file formats, config),
fusion (multi-scale ensemble), kalman (NSA motion model), tracker (two-stage
association), gsi (gap interpolation and smoothing), evaluation (CLEAR-MOT),
simulate (synthetic scenarios), adaptation (pseudo-label loop), report and
cli (table/figure emission, command line).
"""

__version__ = "0.1.0"
