"""Pure-numpy reference kernel for batched exhaustive decision enumeration.

With the closed-form edge-CPU split, the cost of a decision mask m is

    cost(m) = sum_i [(1-b_i)*local_i + b_i*off_base_i]
              + (w_t/F) * (sum_{i in m} sqrt(C_i))^2

so enumerating all 2^N masks only needs per-vehicle precomputed terms.
Masks are ordered so that the integer value equals the lexicographic order
of the decision bit-vector (vehicle 0 is the most significant bit);
argmin with first-hit tie-breaking then matches the contract's
"lexicographically smallest decision" rule.
"""
from __future__ import annotations

import numpy as np


def mask_matrix(n: int) -> np.ndarray:
    """(2^n, n) 0/1 matrix; row m holds the bit-vector of mask m (MSB first)."""
    masks = np.arange(1 << n, dtype=np.uint32)
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint32)
    return ((masks[:, None] >> shifts[None, :]) & 1).astype(np.float64)


def exhaustive_costs(
    local: np.ndarray,
    off_base: np.ndarray,
    sqrt_cycles: np.ndarray,
    wt_over_f: np.ndarray,
) -> np.ndarray:
    """Cost of every decision mask for every instance, shape (n_inst, 2^N)."""
    local = np.atleast_2d(local)
    off_base = np.atleast_2d(off_base)
    sqrt_cycles = np.atleast_2d(sqrt_cycles)
    wt_over_f = np.asarray(wt_over_f, dtype=np.float64).reshape(-1)
    n = local.shape[1]
    bits = mask_matrix(n)  # (2^n, n)
    base = local.sum(axis=1)[:, None] + (off_base - local) @ bits.T
    sums = sqrt_cycles @ bits.T
    return base + wt_over_f[:, None] * sums**2


def exhaustive_argmin(
    local: np.ndarray,
    off_base: np.ndarray,
    sqrt_cycles: np.ndarray,
    wt_over_f: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Best mask and its cost per instance; ties go to the smallest mask."""
    costs = exhaustive_costs(local, off_base, sqrt_cycles, wt_over_f)
    best = costs.argmin(axis=1)
    return best.astype(np.int64), costs[np.arange(costs.shape[0]), best]
