"""Two-sample window sums, permutation-null moments, and scan statistics.

For a candidate window ``(t1, t2]`` the basic quantities are the sum of
weights over ordered pairs with both endpoints inside the window and the
sum over ordered pairs with both endpoints outside it (pairs straddling
the window belong to neither).  Their exact means, variances and
covariance under the permutation null -- the uniform distribution over
all ``n!`` orderings of the observations, conditional on the weight
matrix -- are closed-form in the cached summaries of the
:class:`~rankscan.rank_graph.RankMatrix`.

Two standardized statistics are formed per window: a pooled "weighted"
sum whose weights make it powerful against location-type changes, and
the inside-minus-outside difference which reacts to scale-type changes.
``T`` is the Mahalanobis quadratic form of the two raw sums (equal to
the sum of the two squared z-scores), ``M`` is ``max(z_weighted,
|z_diff|)``.  Scans maximize either statistic over all candidate
change-points or candidate changed intervals.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllCandidatesDegenerate,
    DegenerateVariance,
    IndexOutOfRange,
    SingularCovariance,
    TooFewObservations,
    WindowEmpty,
)
from .rank_graph import round_half_away

__all__ = [
    "NullMoments",
    "ZPair",
    "ScanResult",
    "window_sums",
    "null_moments",
    "null_moment_arrays",
    "z_stats",
    "z_arrays",
    "t_statistic",
    "m_statistic",
    "scan_single",
    "scan_interval",
    "condition_diagnostics",
    "default_single_window",
    "default_interval_window",
]

#: relative tolerance defining a numerically degenerate variance
VAR_TOLERANCE = 1e-10
#: condition-number limit for the 2x2 null covariance
COND_LIMIT = 1e12


@dataclass(frozen=True)
class NullMoments:
    """Permutation-null moments of the window sums at a fixed window."""

    mean_within: float
    mean_outside: float
    var_within: float
    var_outside: float
    cov: float


@dataclass(frozen=True)
class ZPair:
    """Standardized weighted and difference statistics at a fixed window."""

    weighted: float
    diff: float


@dataclass
class ScanResult:
    """Outcome of a scan over candidate windows.

    ``candidates`` holds the scanned windows (change-points ``t`` for the
    single alternative, ``(t1, t2)`` rows for the interval alternative),
    ``values`` the statistic at each (NaN where skipped), and ``skipped``
    marks candidates dropped for numerical degeneracy.  ``tau_hat`` is
    the first candidate attaining the maximum.
    """

    statistic: str
    alternative: str
    max_value: float
    tau_hat: object
    candidates: np.ndarray
    values: np.ndarray
    skipped: np.ndarray
    window: tuple

    def __repr__(self):
        return (f"ScanResult({self.statistic}, {self.alternative}, "
                f"max={self.max_value:.4f}, tau_hat={self.tau_hat})")


def default_single_window(n):
    """Default scan window ``[max(2, [0.05 n]), n - n0]``."""
    n0 = max(2, round_half_away(0.05 * n))
    return n0, n - n0


def default_interval_window(n):
    """Default interval-length window ``[max(5, [0.05 n]), n - l0]``."""
    l0 = max(5, round_half_away(0.05 * n))
    return l0, n - l0


def window_sums(r, t1, t2):
    """Within-window and outside-window pair sums.

    Both directions of every pair are counted.  The outside sum runs over
    ordered pairs with *both* endpoints at positions ``<= t1`` or
    ``> t2``, including pairs with one endpoint on each side of the
    window.
    """
    n = r.n
    t1, t2 = int(t1), int(t2)
    if not (0 <= t1 < t2 <= n):
        raise IndexOutOfRange(f"need 0 <= t1 < t2 <= {n}, got ({t1}, {t2})")
    m = r.matrix
    within = float(m[t1:t2, t1:t2].sum())
    touched = float(r.row_sums[t1:t2].sum())
    total = float(r.row_sums.sum())
    outside = total - 2.0 * touched + within
    return within, outside


def _ab_coefficients(n, t):
    """The two quadratic coefficient polynomials of the null variances."""
    t = np.asarray(t, dtype=float)
    denom = (n - 2.0) * (n - 3.0)
    a = 2.0 * t * (t - 1.0) * (n - t) * (n - t - 1.0) / denom
    b = 4.0 * t * (n - t) * (t - 1.0) * (t - 2.0) * (n - 1.0) / denom
    return a, b


def null_moment_arrays(r, lengths):
    """Null moments for windows of the given lengths, vectorized.

    The moments depend on the window only through its length
    ``t = t2 - t1``, which makes them shareable across all windows of a
    scan and across permutations.

    Returns
    -------
    (mean_within, mean_outside, var_within, var_outside, cov)
        Arrays broadcast against ``lengths``.
    """
    n = r.n
    if n < 4:
        raise TooFewObservations(f"need n >= 4, got n={n}")
    r0 = r.mean_weight
    spread_w = r.mean_sq_weight - r0 ** 2      # weight dispersion
    spread_r = r.mean_sq_row_mean - r0 ** 2    # row-mean dispersion
    t = np.asarray(lengths, dtype=float)
    mean_within = t * (t - 1.0) * r0
    mean_outside = (n - t) * (n - t - 1.0) * r0
    a_t, b_t = _ab_coefficients(n, t)
    a_c, b_c = _ab_coefficients(n, n - t)
    var_within = a_t * spread_w + b_t * spread_r
    var_outside = a_c * spread_w + b_c * spread_r
    cov = a_t * (spread_w - 2.0 * (n - 1.0) * spread_r)
    return mean_within, mean_outside, var_within, var_outside, cov


def null_moments(r, t1, t2):
    """Exact permutation-null moments of the window sums at ``(t1, t2]``."""
    n = r.n
    t1, t2 = int(t1), int(t2)
    if not (0 <= t1 < t2 <= n):
        raise IndexOutOfRange(f"need 0 <= t1 < t2 <= {n}, got ({t1}, {t2})")
    e1, e2, v1, v2, c = null_moment_arrays(r, t2 - t1)
    return NullMoments(float(e1), float(e2), float(v1), float(v2), float(c))


def _weighted_coeffs(n, t):
    """Coefficients combining the two window sums into the pooled sum."""
    t = np.asarray(t, dtype=float)
    return (n - t - 1.0) / (n - 2.0), (t - 1.0) / (n - 2.0)


def _z_params(r, lengths):
    """Standardization parameters for the given window lengths.

    Returns ``(c1, c2, mean_w, sd_w, mean_d, sd_d, degenerate)``: the
    pooling coefficients, the null means and standard deviations of the
    pooled and difference sums, and the degeneracy mask (sd set to 1
    where degenerate so downstream arithmetic stays finite).
    """
    n = r.n
    t = np.asarray(lengths, dtype=float)
    e1, e2, v1, v2, c = null_moment_arrays(r, t)
    c1, c2 = _weighted_coeffs(n, t)
    mean_w = c1 * e1 + c2 * e2
    var_w = c1 ** 2 * v1 + c2 ** 2 * v2 + 2.0 * c1 * c2 * c
    mean_d = e1 - e2
    var_d = v1 + v2 - 2.0 * c
    eps = VAR_TOLERANCE * np.maximum(1.0, e1 ** 2)
    degenerate = (var_w <= eps) | (var_d <= eps)
    sd_w = np.sqrt(np.where(var_w > 0, var_w, 1.0))
    sd_d = np.sqrt(np.where(var_d > 0, var_d, 1.0))
    return c1, c2, mean_w, sd_w, mean_d, sd_d, degenerate


def z_arrays(r, lengths, u_within, u_outside):
    """Standardized statistics for many windows at once.

    Parameters
    ----------
    r : RankMatrix
    lengths : array_like
        Window lengths ``t2 - t1``, broadcast against the sums.
    u_within, u_outside : array_like
        The raw window sums.

    Returns
    -------
    z_weighted, z_diff : ndarray
        Standardized values; arbitrary (unusable) where degenerate.
    degenerate : ndarray of bool
        True where either null variance falls below the tolerance
        ``1e-10 * max(1, mean_within**2)``.
    """
    c1, c2, mean_w, sd_w, mean_d, sd_d, degenerate = _z_params(r, lengths)
    u1 = np.asarray(u_within, dtype=float)
    u2 = np.asarray(u_outside, dtype=float)
    z_w = (c1 * u1 + c2 * u2 - mean_w) / sd_w
    z_d = (u1 - u2 - mean_d) / sd_d
    return z_w, z_d, degenerate


def z_stats(r, t1, t2):
    """Standardized statistics at a single window.

    Raises
    ------
    DegenerateVariance
        If either null variance is below tolerance; scan callers skip
        such candidates instead.
    """
    u1, u2 = window_sums(r, t1, t2)
    z_w, z_d, degenerate = z_arrays(r, t2 - t1, u1, u2)
    if degenerate:
        raise DegenerateVariance(f"window ({t1}, {t2}] has a null variance "
                                 "below tolerance")
    return ZPair(float(z_w), float(z_d))


def _t_params(r, lengths):
    """Quadratic-form parameters for the given window lengths.

    Returns ``(e1, e2, v1, v2, cov, safe_det, singular)`` where
    ``singular`` marks lengths whose 2x2 null covariance has condition
    number at or above :data:`COND_LIMIT` (det replaced by 1 there).
    """
    t = np.asarray(lengths, dtype=float)
    e1, e2, v1, v2, c = null_moment_arrays(r, t)
    # eigenvalues of the symmetric 2x2 covariance
    half_tr = 0.5 * (v1 + v2)
    gap = np.sqrt(0.25 * (v1 - v2) ** 2 + c ** 2)
    lo, hi = half_tr - gap, half_tr + gap
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lo > 0, hi / lo, np.inf)
    singular = ~(np.asarray(cond) < COND_LIMIT)
    det = v1 * v2 - c ** 2
    safe_det = np.where(det > 0, det, 1.0)
    return e1, e2, v1, v2, c, safe_det, singular


def _t_values(r, lengths, u_within, u_outside):
    """Quadratic-form statistic for many windows; returns (values, singular)."""
    e1, e2, v1, v2, c, safe_det, singular = _t_params(r, lengths)
    d1 = np.asarray(u_within, dtype=float) - e1
    d2 = np.asarray(u_outside, dtype=float) - e2
    vals = (d1 ** 2 * v2 - 2.0 * d1 * d2 * c + d2 ** 2 * v1) / safe_det
    return vals, singular


def t_statistic(r, t1, t2):
    """Mahalanobis quadratic form of the two window sums.

    Equals ``z_weighted**2 + z_diff**2`` whenever both are defined (the
    pooled and difference sums are exactly uncorrelated under the
    permutation null).
    """
    u1, u2 = window_sums(r, t1, t2)
    vals, singular = _t_values(r, t2 - t1, u1, u2)
    if singular:
        raise SingularCovariance(f"null covariance at ({t1}, {t2}] is "
                                 "numerically singular")
    return float(vals)


def m_statistic(r, t1, t2):
    """Max-type statistic ``max(z_weighted, |z_diff|)``."""
    z = z_stats(r, t1, t2)
    return max(z.weighted, abs(z.diff))


def _prefix_sums(r):
    """Padded 2-D prefix sums: ``p[a, b] = sum(matrix[:a, :b])``."""
    n = r.n
    p = np.zeros((n + 1, n + 1))
    np.cumsum(np.cumsum(r.matrix, axis=0), axis=1, out=p[1:, 1:])
    return p


def scan_single(r, kind="M", n0=None, n1=None):
    """Scan the statistic over candidate change-points ``t in [n0, n1]``.

    Candidates whose null variances (for ``M``) or null covariance (for
    ``T``) are numerically degenerate are skipped; if every candidate is
    skipped, :class:`AllCandidatesDegenerate` is raised.  Ties at the
    maximum resolve to the earliest candidate.
    """
    n = r.n
    kind = _check_kind(kind)
    d0, d1 = default_single_window(n)
    n0 = d0 if n0 is None else int(n0)
    n1 = d1 if n1 is None else int(n1)
    if not (1 <= n0 <= n - 1 and 1 <= n1 <= n - 1):
        raise IndexOutOfRange(f"window [{n0}, {n1}] outside 1..{n - 1}")
    if n0 > n1:
        raise WindowEmpty(f"n0={n0} exceeds n1={n1}")

    ts = np.arange(n0, n1 + 1)
    p = _prefix_sums(r)
    diag = np.diagonal(p)
    u_in = diag[ts]
    touched = np.concatenate(([0.0], np.cumsum(r.row_sums)))[ts]
    total = float(r.row_sums.sum())
    u_out = total - 2.0 * touched + u_in

    values, skipped = _statistic_values(r, kind, ts, u_in, u_out)
    return _finish_single(kind, ts, values, skipped, (n0, n1))


def _check_kind(kind):
    kind = str(kind).upper()
    if kind not in ("T", "M"):
        raise ValueError(f"statistic must be 'T' or 'M', got {kind!r}")
    return kind


def _statistic_values(r, kind, lengths, u_in, u_out):
    if kind == "T":
        values, skipped = _t_values(r, lengths, u_in, u_out)
    else:
        z_w, z_d, skipped = z_arrays(r, lengths, u_in, u_out)
        values = np.maximum(z_w, np.abs(z_d))
    return np.asarray(values, dtype=float), np.asarray(skipped, dtype=bool)


def _finish_single(kind, ts, values, skipped, window):
    if skipped.all():
        raise AllCandidatesDegenerate("every candidate in the scan window "
                                      "was numerically degenerate")
    masked = np.where(skipped, -np.inf, values)
    best = int(np.argmax(masked))
    trace_values = np.where(skipped, np.nan, values)
    return ScanResult(
        statistic=kind,
        alternative="single",
        max_value=float(masked[best]),
        tau_hat=int(ts[best]),
        candidates=ts,
        values=trace_values,
        skipped=skipped,
        window=window,
    )


def scan_interval(r, kind="M", l0=None, l1=None):
    """Scan over changed intervals ``(t1, t2]`` with length in [l0, l1].

    Ties at the maximum resolve to the lexicographically first
    ``(t1, t2)``.
    """
    n = r.n
    kind = _check_kind(kind)
    d0, d1 = default_interval_window(n)
    l0 = d0 if l0 is None else int(l0)
    l1 = d1 if l1 is None else int(l1)
    if not (1 <= l0 <= n - 1 and 1 <= l1 <= n - 1):
        raise IndexOutOfRange(f"lengths [{l0}, {l1}] outside 1..{n - 1}")
    if l0 > l1:
        raise WindowEmpty(f"l0={l0} exceeds l1={l1}")

    p = _prefix_sums(r)
    diag = np.diagonal(p)
    cum_rows = np.concatenate(([0.0], np.cumsum(r.row_sums)))
    total = float(r.row_sums.sum())

    best_val = -np.inf
    best_pair = None
    cands, vals, skips = [], [], []
    any_candidate = False
    for t1 in range(1, n - l0 + 1):
        t2 = np.arange(t1 + l0, min(n, t1 + l1) + 1)
        if t2.size == 0:
            continue
        any_candidate = True
        lengths = t2 - t1
        u_in = diag[t2] - 2.0 * p[t1, t2] + p[t1, t1]
        u_out = total - 2.0 * (cum_rows[t2] - cum_rows[t1]) + u_in
        values, skipped = _statistic_values(r, kind, lengths, u_in, u_out)
        masked = np.where(skipped, -np.inf, values)
        i = int(np.argmax(masked))
        if masked[i] > best_val:
            best_val = float(masked[i])
            best_pair = (t1, int(t2[i]))
        cands.append(np.column_stack((np.full(t2.size, t1), t2)))
        vals.append(np.where(skipped, np.nan, values))
        skips.append(skipped)

    if not any_candidate:
        raise WindowEmpty("no candidate interval satisfies the length bounds")
    if best_pair is None:
        raise AllCandidatesDegenerate("every candidate interval was "
                                      "numerically degenerate")
    return ScanResult(
        statistic=kind,
        alternative="interval",
        max_value=best_val,
        tau_hat=best_pair,
        candidates=np.concatenate(cands),
        values=np.concatenate(vals),
        skipped=np.concatenate(skips),
        window=(l0, l1),
    )


def condition_diagnostics(r):
    """Advisory finite-n ratios for the asymptotic regularity conditions.

    Each entry maps a condition name to ``(ratio, flag)`` where the ratio
    divides the finite-n left-hand side by the right-hand side of the
    corresponding asymptotic smallness condition.  There is no universal
    pass threshold for conditions 1-5 (they are ``o(.)`` statements);
    condition 6 compares two summary scales and lives in ``[0, 1]``, so
    values near 1 are flagged ``high``.  Degenerate 0/0 ratios are
    flagged ``undefined``.
    """
    m = r.matrix
    n = r.n
    r0 = r.mean_weight
    msq = r.mean_sq_weight
    root_msq = np.sqrt(msq)
    root_row = np.sqrt(r.mean_sq_row_mean)
    spread_r = r.mean_sq_row_mean - r0 ** 2
    q = (m ** 2).sum(axis=1)
    c = r.row_means - r0

    def ratio(num, den):
        if den <= 0 or not np.isfinite(den):
            return (np.nan, "undefined")
        value = float(num / den)
        return (value, "ok" if np.isfinite(value) else "undefined")

    out = {}
    out["condition_1"] = ratio((q ** 2).sum(), n ** 3 * msq ** 2)
    out["condition_2"] = ratio((np.abs(c) ** 3).sum(),
                               max(n * spread_r, 0.0) ** 1.5)
    out["condition_3"] = ratio(abs((c ** 3).sum()),
                               n * root_msq * spread_r)
    rc = m @ c
    four = (rc ** 2).sum() - (m ** 2 @ c ** 2).sum()
    out["condition_4"] = ratio(abs(four), n ** 3 * msq * spread_r)
    five = 2.0 * (float((m * (m @ m @ m)).sum())
                  - 2.0 * float((q ** 2).sum())
                  + float((m ** 4).sum()))
    out["condition_5"] = ratio(abs(five), n ** 4 * msq ** 2)
    if root_msq > 0:
        val = float(root_row / root_msq)
        out["condition_6"] = (val, "high" if val >= 0.9 else "ok")
    else:
        out["condition_6"] = (np.nan, "undefined")
    return out
