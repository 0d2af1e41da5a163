"""Comparison helpers for analytic-vs-numeric gradient checks.

Acceptance rule: coordinates with |analytic| > 1e-8 must agree to relative
error < 1e-5; smaller coordinates must agree to absolute error < 1e-8.
"""

from __future__ import annotations

import numpy as np

from .nn import ParamSet

REL_TOL = 1e-5
ABS_TOL = 1e-8
SMALL = 1e-8


def array_mismatch(analytic: np.ndarray, numeric: np.ndarray, rel: float = REL_TOL, absolute: float = ABS_TOL):
    """Worst offending (kind, value) pair, or None if within tolerance."""
    diff = np.abs(analytic - numeric)
    big = np.abs(analytic) > SMALL
    worst = None
    if big.any():
        rel_err = (diff[big] / np.abs(analytic[big])).max()
        if rel_err >= rel:
            worst = ("relative", float(rel_err))
    if (~big).any():
        abs_err = diff[~big].max()
        if abs_err >= absolute and (worst is None or worst[0] != "relative"):
            worst = ("absolute", float(abs_err))
    return worst


def grads_close(analytic: ParamSet, numeric: ParamSet, rel: float = REL_TOL, absolute: float = ABS_TOL) -> bool:
    return not any(array_mismatch(analytic[k], numeric[k], rel, absolute) for k in analytic)


def assert_grads_close(analytic: ParamSet, numeric: ParamSet, rel: float = REL_TOL, absolute: float = ABS_TOL):
    assert analytic.keys() == numeric.keys(), "gradient key mismatch"
    for key in analytic:
        bad = array_mismatch(analytic[key], numeric[key], rel, absolute)
        assert bad is None, f"{key}: {bad[0]} error {bad[1]:.3e} exceeds tolerance"


def assert_arrays_close(analytic: np.ndarray, numeric: np.ndarray, rel: float = REL_TOL, absolute: float = ABS_TOL):
    bad = array_mismatch(analytic, numeric, rel, absolute)
    assert bad is None, f"{bad[0]} error {bad[1]:.3e} exceeds tolerance"
