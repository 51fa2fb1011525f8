"""Histogram entropies, mutual information and normalized information distance.

A spectrum is treated as ``M`` paired samples: the values of each spectrum
are discretized into ``bins`` equal-width bins over ``[0, max]`` (its own
maximum), and the joint statistics come from the 2-D histogram of the
paired bin codes. Marginals use the same codes, so ``I >= 0`` and
``0 <= NID <= 1`` hold up to rounding.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError

DEFAULT_VALUE_BINS = 16


def _check_bins(bins: int) -> int:
    if int(bins) != bins or bins < 2:
        raise ParameterError(f"value bin count must be an integer >= 2, got {bins}")
    return int(bins)


def value_codes(z: np.ndarray, bins: int = DEFAULT_VALUE_BINS) -> np.ndarray:
    """Equal-width bin index of every entry, per row, over ``[0, row max]``."""
    bins = _check_bins(bins)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ParameterError("spectrum has negative entries")
    top = z.max(axis=-1, keepdims=True) if z.size else np.ones(z.shape[:-1] + (1,))
    scale = np.where(top > 0, bins / np.where(top > 0, top, 1.0), 0.0)
    return np.minimum((z * scale).astype(np.int64), bins - 1)


def _entropy_from_counts(counts: np.ndarray, total: int) -> float:
    # sorted so that permuted histograms sum in the same order
    c = np.sort(counts[counts > 0]).astype(float)
    p = c / total
    return float(-(p * np.log2(p)).sum())


def _pair_codes(zi, zj, bins):
    zi = np.asarray(zi, dtype=float)
    zj = np.asarray(zj, dtype=float)
    if zi.ndim != 1 or zi.shape != zj.shape:
        raise ParameterError(f"spectra must be 1-D with equal length, got {zi.shape} and {zj.shape}")
    if zi.size == 0:
        raise ParameterError("empty spectra")
    return value_codes(zi, bins), value_codes(zj, bins)


def marginal_entropy(z: np.ndarray, bins: int = DEFAULT_VALUE_BINS) -> float:
    """Entropy (bits) of the value histogram of one spectrum."""
    z = np.asarray(z, dtype=float)
    codes = value_codes(z, bins)
    return _entropy_from_counts(np.bincount(codes, minlength=bins), len(codes))


def joint_entropy(zi: np.ndarray, zj: np.ndarray, bins: int = DEFAULT_VALUE_BINS) -> float:
    """Entropy (bits) of the joint value histogram of two spectra."""
    ci, cj = _pair_codes(zi, zj, bins)
    counts = np.bincount(ci * bins + cj, minlength=bins * bins)
    return _entropy_from_counts(counts, len(ci))


def _information(zi, zj, bins):
    ci, cj = _pair_codes(zi, zj, bins)
    m = len(ci)
    hi = _entropy_from_counts(np.bincount(ci, minlength=bins), m)
    hj = _entropy_from_counts(np.bincount(cj, minlength=bins), m)
    hij = _entropy_from_counts(np.bincount(ci * bins + cj, minlength=bins * bins), m)
    mi = min(max(hi + hj - hij, 0.0), min(hi, hj))
    return hi, hj, mi


def mutual_information(zi: np.ndarray, zj: np.ndarray, bins: int = DEFAULT_VALUE_BINS) -> float:
    """``H_i + H_j - H_ij`` with histogram-consistent marginals, in bits."""
    return _information(zi, zj, bins)[2]


def nid(zi: np.ndarray, zj: np.ndarray, bins: int = DEFAULT_VALUE_BINS) -> float:
    """Normalized information distance ``1 - I / max(H_i, H_j)``.

    Two zero-entropy (constant) spectra are maximally similar and give 0.
    """
    hi, hj, mi = _information(zi, zj, bins)
    top = max(hi, hj)
    if top == 0:
        return 0.0
    return 1.0 - mi / top


def pairwise_nid(spectra: np.ndarray, pairs: np.ndarray, bins: int = DEFAULT_VALUE_BINS) -> np.ndarray:
    """NID for each ``(i, j)`` row of ``pairs`` over rows of ``spectra``.

    Vectorized equivalent of calling :func:`nid` per pair; entries agree
    with the scalar version to floating-point rounding.
    """
    bins = _check_bins(bins)
    spectra = np.asarray(spectra, dtype=float)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return np.zeros(0)
    n, m = spectra.shape
    codes = value_codes(spectra, bins)

    # marginal entropies, one per spectrum
    flat = (np.arange(n)[:, None] * bins + codes).ravel()
    marg_counts = np.bincount(flat, minlength=n * bins).reshape(n, bins)
    h = _row_entropy(marg_counts, m)

    i, j = pairs[:, 0], pairs[:, 1]
    # order pair codes so (i, j) and (j, i) produce identical joint keys
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    keys = np.sort(codes[lo] * bins + codes[hi], axis=1)
    new_run = np.ones_like(keys, dtype=bool)
    new_run[:, 1:] = keys[:, 1:] != keys[:, :-1]
    run_id = np.cumsum(new_run, axis=1) - 1
    flat_runs = (np.arange(len(pairs))[:, None] * m + run_id).ravel()
    run_counts = np.bincount(flat_runs, minlength=len(pairs) * m).reshape(len(pairs), m)
    h_joint = _row_entropy(run_counts, m)

    hi_, hj_ = h[i], h[j]
    mi = np.clip(hi_ + hj_ - h_joint, 0.0, np.minimum(hi_, hj_))
    top = np.maximum(hi_, hj_)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(top > 0, 1.0 - mi / np.where(top > 0, top, 1.0), 0.0)
    return out


def _row_entropy(counts: np.ndarray, total: int) -> np.ndarray:
    c = np.sort(counts, axis=1).astype(float)
    p = c / total
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=1)
