"""Classical disparity estimation via horizontal 1D correlation: patch
features, a one-sided cost volume (displacements to the left only),
winner-take-all with parabola sub-pixel refinement."""

from __future__ import annotations

import numpy as np

from .errors import ContractError

__all__ = [
    "extract_features", "correlate_1d", "wta_disparity", "subpixel_refine",
    "estimate_disparity", "DEFAULT_MAX_DISPARITY",
]

DEFAULT_MAX_DISPARITY = 160  # hypotheses at full resolution for 960-wide input


def _to_gray(image):
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 3:
        a = a @ np.array([0.299, 0.587, 0.114])
    if a.ndim != 2:
        raise ContractError(f"expected HxW or HxWx3 image, got shape {a.shape}")
    return a


def extract_features(image, patch=3) -> np.ndarray:
    """Per-pixel grayscale patch vector (H, W, patch**2), mean-subtracted
    and L2-normalized, so the correlation of two patches is their cosine
    similarity and self-correlation is the strict maximum.

    Border pixels sample with edge clamping; textureless patches stay
    all-zero.
    """
    gray = _to_gray(image)
    r = patch // 2
    padded = np.pad(gray, r, mode="edge")
    h, w = gray.shape
    feats = np.empty((h, w, patch * patch), dtype=np.float64)
    c = 0
    for dy in range(patch):
        for dx in range(patch):
            feats[..., c] = padded[dy:dy + h, dx:dx + w]
            c += 1
    feats -= feats.mean(axis=-1, keepdims=True)
    norm = np.linalg.norm(feats, axis=-1, keepdims=True)
    feats /= np.where(norm > 0, norm, 1.0)
    return feats


def correlate_1d(a: np.ndarray, b: np.ndarray, max_disp: int) -> np.ndarray:
    """Cost volume (H, W, D): cost[y, x, d] = <a[y, x], b[y, x - d]>.

    Entries with x - d < 0 are NaN (explicitly invalid), never zero.
    """
    if a.shape != b.shape:
        raise ContractError(f"feature shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3:
        raise ContractError(f"expected HxWxC features, got shape {a.shape}")
    h, w, _ = a.shape
    if not 1 <= max_disp <= w:
        raise ContractError(f"max_disp {max_disp} outside [1, {w}]")
    cv = np.full((h, w, max_disp), np.nan, dtype=np.float64)
    for d in range(max_disp):
        # channel-sequential accumulation: bit-identical to a scalar loop
        acc = np.zeros((h, w - d), dtype=np.float64)
        for c in range(a.shape[-1]):
            acc += a[:, d:, c] * b[:, :w - d, c]
        cv[:, d:, d] = acc
    return cv


def wta_disparity(cv: np.ndarray):
    """Per-pixel argmax over valid disparity hypotheses.

    Ties break toward the smaller disparity. Returns (disparity int map,
    confidence), where confidence is the margin between the best and
    second-best valid cost (0 where only one hypothesis is valid).
    """
    masked = np.nan_to_num(cv, nan=-np.inf)
    best = np.argmax(masked, axis=-1)  # np.argmax takes the first maximum
    h, w, n_d = cv.shape
    top = np.take_along_axis(masked, best[..., None], axis=-1)[..., 0]
    second = np.where(
        np.arange(n_d) == best[..., None], -np.inf, masked
    ).max(axis=-1)
    confidence = np.where(np.isfinite(second), top - second, 0.0)
    return best.astype(np.int64), confidence


def subpixel_refine(cv: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Parabola fit through the three costs around each winner.

    The offset is clamped to (-0.5, 0.5); winners at the hypothesis range
    boundary (or next to an invalid entry) are returned unrefined.
    """
    n_d = cv.shape[-1]
    interior = (disp >= 1) & (disp <= n_d - 2)
    di = np.clip(disp, 1, n_d - 2)
    c0 = np.take_along_axis(cv, (di - 1)[..., None], axis=-1)[..., 0]
    c1 = np.take_along_axis(cv, di[..., None], axis=-1)[..., 0]
    c2 = np.take_along_axis(cv, (di + 1)[..., None], axis=-1)[..., 0]
    denom = c0 - 2 * c1 + c2
    with np.errstate(invalid="ignore", divide="ignore"):
        offset = (c0 - c2) / (2 * denom)
    usable = interior & np.isfinite(offset)
    offset = np.where(usable, np.clip(offset, -0.4999999, 0.4999999), 0.0)
    return disp.astype(np.float64) + offset


def estimate_disparity(left_image, right_image,
                       max_disp=DEFAULT_MAX_DISPARITY, patch=3):
    """Full matcher pipeline on a rectified pair -> (disparity, confidence)."""
    a = extract_features(left_image, patch)
    b = extract_features(right_image, patch)
    cv = correlate_1d(a, b, max_disp)
    disp, confidence = wta_disparity(cv)
    return subpixel_refine(cv, disp), confidence
