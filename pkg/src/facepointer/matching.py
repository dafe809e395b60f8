"""Normalized cross-correlation over small search windows."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput


def ncc_map(region: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Zero-mean NCC of template against every placement inside region.

    Output shape is (region_h - th + 1, region_w - tw + 1), values in
    [-1, 1]. Placements with zero variance (flat window or flat template)
    score 0.
    """
    region = np.asarray(region, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    th, tw = template.shape
    if region.shape[0] < th or region.shape[1] < tw:
        raise InvalidInput(
            f"search region {region.shape} smaller than template {template.shape}"
        )
    t = template - template.mean()
    t_norm = float(np.sqrt((t * t).sum()))
    wins = np.lib.stride_tricks.sliding_window_view(region, (th, tw))
    # sum t'*W equals sum t'*(W - mean W) because t' is zero-mean
    cross = np.einsum("yxhw,hw->yx", wins, t)
    wsum = wins.sum(axis=(2, 3))
    wsq = np.einsum("yxhw,yxhw->yx", wins, wins)
    wvar = wsq - wsum * wsum / (th * tw)
    denom = np.sqrt(np.clip(wvar, 0.0, None)) * t_norm
    with np.errstate(invalid="ignore", divide="ignore"):
        ncc = np.where(denom > 1e-12, cross / denom, 0.0)
    return np.clip(ncc, -1.0, 1.0)


def best_match(region: np.ndarray, template: np.ndarray) -> tuple[int, int, float]:
    """(dx, dy, score) of the best placement's top-left corner in region.

    Ties resolve to the first placement in row-major order.
    """
    scores = ncc_map(region, template)
    flat = int(np.argmax(scores))
    dy, dx = divmod(flat, scores.shape[1])
    return dx, dy, float(scores[dy, dx])
