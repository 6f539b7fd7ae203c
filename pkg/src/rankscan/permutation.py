"""Permutation-based p-values with reproducible counter-based streams.

The permutation null keeps the weight matrix fixed and redraws the
*order* of the observations, which amounts to relabelling the matrix's
rows and columns jointly.  Each permutation is generated from its own
Philox stream keyed by ``(seed, permutation_index)``, so parallel and
serial runs (and any chunking) produce bit-identical results.

Per-permutation scan maxima are computed by two numba kernels: one
produces the within-window prefix profile ``U(0, t)`` for all ``t`` in
one ``O(n^2)`` sweep (single change-point alternative), the other scans
all candidate intervals per permutation (changed-interval alternative).
Everything downstream of the kernels is plain vectorized numpy.
"""

from dataclasses import dataclass, field
from itertools import permutations as _iter_permutations
from math import factorial

import numpy as np
from numba import njit, prange

from .errors import EmptyDraws, ExhaustiveTooLarge, InvalidSampleCount
from .rank_graph import RankMatrix
from .scan import (
    ScanResult,
    _t_params,
    _t_values,
    _z_params,
    default_interval_window,
    default_single_window,
    scan_interval,
    scan_single,
    z_arrays,
)

__all__ = [
    "PermPlan",
    "PermResult",
    "permutation_orders",
    "permuted_matrix",
    "permutation_pvalue",
    "empirical_critical_value",
    "enumerate_null",
    "null_scan_maxima",
    "null_third_moments",
    "null_z_draws",
    "EXHAUSTIVE_LIMIT",
]

#: largest n for which exhaustive enumeration over n! orders is allowed
EXHAUSTIVE_LIMIT = 9


@dataclass(frozen=True)
class PermPlan:
    """How to draw permutations: sample ``n_perm`` of them, or enumerate."""

    n_perm: int = 1000
    seed: int = 0
    mode: str = "sampled"

    def __post_init__(self):
        if self.mode not in ("sampled", "exhaustive"):
            raise ValueError(f"mode must be 'sampled' or 'exhaustive', "
                             f"got {self.mode!r}")
        if self.mode == "sampled" and self.n_perm < 1:
            raise InvalidSampleCount(f"n_perm must be >= 1, "
                                     f"got {self.n_perm}")


@dataclass
class PermResult:
    """Observed statistic, null draws, and the resulting p-value."""

    observed: float
    null_draws: np.ndarray
    p_value: float
    mode: str
    seed: int = 0
    scan: ScanResult = None

    def critical_value(self, alpha):
        """Empirical ``1 - alpha`` quantile of the null draws."""
        return empirical_critical_value(self.null_draws, alpha)

    def critical_values(self, alphas):
        """Map each significance level to its empirical critical value."""
        return {a: self.critical_value(a) for a in alphas}


def permutation_orders(n, n_perm, seed):
    """Draw ``n_perm`` permutations of ``0..n-1``, one Philox stream each.

    Stream ``i`` is keyed by ``(seed, i)``; the result is independent of
    how the work is later chunked or parallelized.
    """
    out = np.empty((n_perm, n), dtype=np.int64)
    for i in range(n_perm):
        rng = np.random.Generator(np.random.Philox(key=[seed, i]))
        out[i] = rng.permutation(n)
    return out


def permuted_matrix(r, order):
    """Relabel the nodes of a weight matrix by the given order."""
    order = np.asarray(order, dtype=np.int64)
    return RankMatrix(r.matrix[np.ix_(order, order)], offset=r.offset)


def _exhaustive_orders(n):
    if n > EXHAUSTIVE_LIMIT:
        raise ExhaustiveTooLarge(
            f"exhaustive enumeration supports n <= {EXHAUSTIVE_LIMIT}, "
            f"got n={n}"
        )
    return np.array(list(_iter_permutations(range(n))), dtype=np.int64)


# ---------------------------------------------------------------------------
# numba kernels

@njit(cache=True, parallel=True)
def _prefix_profile_kernel(mat, orders, out):
    # out[p, t-1] = sum of mat over the first t entries of permutation p
    n_perm, n = orders.shape
    for p in prange(n_perm):
        acc = np.zeros(n)
        tot = 0.0
        for t in range(n):
            v = orders[p, t]
            tot += 2.0 * acc[v]
            out[p, t] = tot
            row = mat[v]
            for j in range(n):
                acc[j] += row[j]


@njit(cache=True, parallel=True)
def _interval_max_kernel_m(mat, orders, row_sums, l0, l1,
                           c1, c2, mean_w, sd_w, mean_d, sd_d, skip, out):
    # per-length parameter arrays are indexed by (length - l0)
    n_perm, n = orders.shape
    for p in prange(n_perm):
        pref = np.zeros((n + 1, n + 1))
        for i in range(n):
            oi = orders[p, i]
            row = mat[oi]
            for j in range(n):
                pref[i + 1, j + 1] = (pref[i, j + 1] + pref[i + 1, j]
                                      - pref[i, j] + row[orders[p, j]])
        cr = np.zeros(n + 1)
        for i in range(n):
            cr[i + 1] = cr[i] + row_sums[orders[p, i]]
        total = cr[n]
        best = -np.inf
        for t1 in range(1, n - l0 + 1):
            hi = t1 + l1
            if hi > n:
                hi = n
            for t2 in range(t1 + l0, hi + 1):
                ell = t2 - t1 - l0
                if skip[ell]:
                    continue
                u1 = pref[t2, t2] - 2.0 * pref[t1, t2] + pref[t1, t1]
                u2 = total - 2.0 * (cr[t2] - cr[t1]) + u1
                zw = (c1[ell] * u1 + c2[ell] * u2 - mean_w[ell]) / sd_w[ell]
                zd = (u1 - u2 - mean_d[ell]) / sd_d[ell]
                if zd < 0.0:
                    zd = -zd
                v = zw if zw > zd else zd
                if v > best:
                    best = v
        out[p] = best


@njit(cache=True, parallel=True)
def _interval_max_kernel_t(mat, orders, row_sums, l0, l1,
                           e1, e2, v1, v2, cov, det, skip, out):
    n_perm, n = orders.shape
    for p in prange(n_perm):
        pref = np.zeros((n + 1, n + 1))
        for i in range(n):
            oi = orders[p, i]
            row = mat[oi]
            for j in range(n):
                pref[i + 1, j + 1] = (pref[i, j + 1] + pref[i + 1, j]
                                      - pref[i, j] + row[orders[p, j]])
        cr = np.zeros(n + 1)
        for i in range(n):
            cr[i + 1] = cr[i] + row_sums[orders[p, i]]
        total = cr[n]
        best = -np.inf
        for t1 in range(1, n - l0 + 1):
            hi = t1 + l1
            if hi > n:
                hi = n
            for t2 in range(t1 + l0, hi + 1):
                ell = t2 - t1 - l0
                if skip[ell]:
                    continue
                u1 = pref[t2, t2] - 2.0 * pref[t1, t2] + pref[t1, t1]
                u2 = total - 2.0 * (cr[t2] - cr[t1]) + u1
                d1 = u1 - e1[ell]
                d2 = u2 - e2[ell]
                v = (d1 * d1 * v2[ell] - 2.0 * d1 * d2 * cov[ell]
                     + d2 * d2 * v1[ell]) / det[ell]
                if v > best:
                    best = v
        out[p] = best


# ---------------------------------------------------------------------------
# per-permutation scan maxima

def _chunks(total, size):
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))


def _single_profiles(r, orders, ts):
    """Within/outside sums at prefixes ``ts`` for a block of permutations."""
    mat = np.ascontiguousarray(r.matrix)
    profiles = np.empty((orders.shape[0], r.n))
    _prefix_profile_kernel(mat, np.ascontiguousarray(orders), profiles)
    u_in = profiles[:, ts - 1]
    touched = np.cumsum(r.row_sums[orders], axis=1)[:, ts - 1]
    total = float(r.row_sums.sum())
    u_out = total - 2.0 * touched + u_in
    return u_in, u_out


def _single_maxima(r, kind, n0, n1, orders):
    ts = np.arange(n0, n1 + 1)
    out = np.empty(orders.shape[0])
    chunk = max(1, int(4e6 // max(r.n, 1)))
    for s in _chunks(orders.shape[0], chunk):
        u_in, u_out = _single_profiles(r, orders[s], ts)
        if kind == "T":
            vals, skip = _t_values(r, ts, u_in, u_out)
        else:
            z_w, z_d, skip = z_arrays(r, ts, u_in, u_out)
            vals = np.maximum(z_w, np.abs(z_d))
        out[s] = np.where(skip, -np.inf, vals).max(axis=1)
    return out


def _interval_maxima(r, kind, l0, l1, orders):
    lengths = np.arange(l0, l1 + 1)
    mat = np.ascontiguousarray(r.matrix)
    orders = np.ascontiguousarray(orders)
    out = np.empty(orders.shape[0])
    if kind == "T":
        e1, e2, v1, v2, cov, det, singular = _t_params(r, lengths)
        _interval_max_kernel_t(
            mat, orders, r.row_sums, l0, l1,
            *(np.ascontiguousarray(a, dtype=float)
              for a in (e1, e2, v1, v2, cov, det)),
            np.ascontiguousarray(singular), out,
        )
    else:
        c1, c2, mean_w, sd_w, mean_d, sd_d, skip = _z_params(r, lengths)
        _interval_max_kernel_m(
            mat, orders, r.row_sums, l0, l1,
            *(np.ascontiguousarray(np.broadcast_to(a, lengths.shape),
                                   dtype=float)
              for a in (c1, c2, mean_w, sd_w, mean_d, sd_d)),
            np.ascontiguousarray(skip), out,
        )
    return out


def null_scan_maxima(r, kind, alternative, window, orders):
    """Scan maximum per permutation; the workhorse behind the p-values."""
    lo, hi = window
    if alternative == "single":
        return _single_maxima(r, kind, lo, hi, orders)
    if alternative == "interval":
        return _interval_maxima(r, kind, lo, hi, orders)
    raise ValueError(f"unknown alternative {alternative!r}")


# ---------------------------------------------------------------------------
# public operations

def permutation_pvalue(r, kind="M", alternative="single", window=None,
                       plan=None):
    """Permutation p-value of the scan maximum.

    Parameters
    ----------
    r : RankMatrix
    kind : {"T", "M"}
    alternative : {"single", "interval"}
    window : tuple, optional
        ``(n0, n1)`` or ``(l0, l1)``; defaults as in the scans.
    plan : PermPlan, optional
        Sampled mode draws ``n_perm`` permutations and reports
        ``(1 + #{draws >= observed}) / (n_perm + 1)``; exhaustive mode
        (``n <= 9``) enumerates all ``n!`` orders and reports the exact
        fraction ``#{draws >= observed} / n!``.
    """
    plan = plan or PermPlan()
    n = r.n
    if window is None:
        window = (default_single_window(n) if alternative == "single"
                  else default_interval_window(n))

    if alternative == "single":
        observed_scan = scan_single(r, kind, *window)
    elif alternative == "interval":
        observed_scan = scan_interval(r, kind, *window)
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    observed = observed_scan.max_value

    if plan.mode == "exhaustive":
        orders = _exhaustive_orders(n)
        draws = null_scan_maxima(r, kind, alternative, window, orders)
        p = float(np.count_nonzero(draws >= observed)) / factorial(n)
    else:
        orders = permutation_orders(n, plan.n_perm, plan.seed)
        draws = null_scan_maxima(r, kind, alternative, window, orders)
        p = (1.0 + np.count_nonzero(draws >= observed)) / (plan.n_perm + 1.0)

    return PermResult(
        observed=observed,
        null_draws=draws,
        p_value=float(p),
        mode=plan.mode,
        seed=plan.seed,
        scan=observed_scan,
    )


def empirical_critical_value(null_draws, alpha):
    """Empirical ``(1 - alpha)`` quantile with linear interpolation."""
    draws = np.asarray(null_draws, dtype=float)
    if draws.size == 0:
        raise EmptyDraws("no null draws supplied")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
    return float(np.quantile(draws, 1.0 - alpha, method="linear"))


def null_z_draws(r, ts, plan=None):
    """Null draws of both standardized statistics at fixed prefix lengths.

    Returns ``(z_weighted, z_diff)`` of shape ``(B, len(ts))`` — the raw
    material for empirical covariance/correlation checks against the
    limiting Gaussian processes.
    """
    plan = plan or PermPlan()
    ts = np.asarray(ts, dtype=np.int64)
    if plan.mode == "exhaustive":
        orders = _exhaustive_orders(r.n)
    else:
        orders = permutation_orders(r.n, plan.n_perm, plan.seed)
    z_w = np.empty((orders.shape[0], ts.size))
    z_d = np.empty((orders.shape[0], ts.size))
    chunk = max(1, int(4e6 // max(r.n, 1)))
    for s in _chunks(orders.shape[0], chunk):
        u_in, u_out = _single_profiles(r, orders[s], ts)
        z_w[s], z_d[s], _ = z_arrays(r, ts, u_in, u_out)
    return z_w, z_d


def null_third_moments(r, ts, plan=None):
    """Null third moments ``E[z^3]`` of both statistics at each prefix length.

    Used to build the skewness-correction tables: the standardizations
    subtract the exact null mean and divide by the exact null standard
    deviation, so the mean cube over permutations *is* the skewness.

    Parameters
    ----------
    r : RankMatrix
    ts : array_like of int
        Prefix lengths (single-alternative candidate change-points).
    plan : PermPlan, optional
        Sampled mode averages over ``n_perm`` Monte Carlo permutations;
        exhaustive mode (``n <= 9``) averages over all ``n!``.

    Returns
    -------
    gamma_weighted, gamma_diff : ndarray
        Arrays matching ``ts``.
    """
    plan = plan or PermPlan()
    ts = np.asarray(ts, dtype=np.int64)
    if plan.mode == "exhaustive":
        orders = _exhaustive_orders(r.n)
    else:
        orders = permutation_orders(r.n, plan.n_perm, plan.seed)
    acc_w = np.zeros(ts.shape, dtype=float)
    acc_d = np.zeros(ts.shape, dtype=float)
    chunk = max(1, int(4e6 // max(r.n, 1)))
    for s in _chunks(orders.shape[0], chunk):
        u_in, u_out = _single_profiles(r, orders[s], ts)
        z_w, z_d, _ = z_arrays(r, ts, u_in, u_out)
        acc_w += (z_w ** 3).sum(axis=0)
        acc_d += (z_d ** 3).sum(axis=0)
    return acc_w / orders.shape[0], acc_d / orders.shape[0]


_POINTWISE = ("within_sum", "outside_sum", "weighted", "diff", "T", "M")


def enumerate_null(r, statistic, t1=None, t2=None, alternative=None,
                   window=None):
    """Exact null distribution over all ``n!`` permutations (``n <= 9``).

    Two usages:

    * pointwise -- ``statistic`` in ``{"within_sum", "outside_sum",
      "weighted", "diff", "T", "M"}`` with a fixed window ``(t1, t2)``;
    * scan maxima -- ``statistic`` in ``{"T", "M"}`` with
      ``alternative`` in ``{"single", "interval"}`` and an optional
      ``window``.

    This is the oracle the analytic moment formulas and the sampled
    p-values are validated against.
    """
    n = r.n
    orders = _exhaustive_orders(n)
    if alternative is not None:
        if window is None:
            window = (default_single_window(n) if alternative == "single"
                      else default_interval_window(n))
        return null_scan_maxima(r, statistic, alternative, window, orders)

    if statistic not in _POINTWISE:
        raise ValueError(f"unknown statistic {statistic!r}")
    if t1 is None or t2 is None:
        raise ValueError("pointwise enumeration needs t1 and t2")

    length = t2 - t1
    sub = orders[:, t1:t2]
    out = np.empty(orders.shape[0])
    chunk = max(1, int(2e6 // max(length * length, 1)))
    total = float(r.row_sums.sum())
    for s in _chunks(orders.shape[0], chunk):
        block = sub[s]
        u_in = r.matrix[block[:, :, None], block[:, None, :]].sum(axis=(1, 2))
        u_out = total - 2.0 * r.row_sums[block].sum(axis=1) + u_in
        if statistic == "within_sum":
            out[s] = u_in
        elif statistic == "outside_sum":
            out[s] = u_out
        elif statistic == "T":
            vals, _ = _t_values(r, length, u_in, u_out)
            out[s] = vals
        else:
            z_w, z_d, _ = z_arrays(r, length, u_in, u_out)
            if statistic == "weighted":
                out[s] = z_w
            elif statistic == "diff":
                out[s] = z_d
            else:  # M
                out[s] = np.maximum(z_w, np.abs(z_d))
    return out
