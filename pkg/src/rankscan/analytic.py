"""Analytic tail probabilities and critical values for the scan statistics.

The scan maxima converge (after time rescaling) to functionals of a pair
of independent Gaussian processes whose covariance functions are free of
the weight matrix, so their boundary-crossing probabilities can be
approximated by explicit integrals.  The integrands combine two shape
functions of the rescaled change-point location ``x = t/n`` with
Siegmund's overshoot function ``nu``; the quadratic statistic ``T``
additionally integrates over a mixing angle.

An optional skewness correction multiplies the integrands by a tilted
Gaussian factor built from the exact null third moments of the
standardized statistics; the moments are estimated by permutation
(exact enumeration for tiny ``n``, Monte Carlo otherwise) and fitted
smoothly across window lengths.

All tails are certified by one quadrature refinement (node counts
doubled) and clamped to ``[0, 1]``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import (
    ArgumentAtPole,
    BracketFailure,
    EnumerationTooLarge,
    IndexOutOfRange,
    NegativeArgument,
    QuadratureFailure,
    WindowEmpty,
)
from .permutation import EXHAUSTIVE_LIMIT, PermPlan, null_third_moments
from .scan import default_interval_window, default_single_window

__all__ = [
    "TailConfig",
    "SkewnessTable",
    "nu_approx",
    "h_functions",
    "tail_T",
    "tail_M",
    "tail_probability",
    "critical_value",
    "skewness_table",
]

#: skewness below this magnitude is treated as zero (no correction)
GAMMA_TOLERANCE = 1e-12
#: bisection bracket for critical values
BRACKET = (0.1, 300.0)
#: critical values solve |tail(b) - alpha| <= this
ROOT_TOLERANCE = 1e-4


@dataclass(frozen=True)
class TailConfig:
    """What to approximate: statistic, alternative, window, quadrature.

    ``window`` is ``(n0, n1)`` for the single-change alternative and
    ``(l0, l1)`` for the changed-interval alternative; ``None`` picks
    the same defaults as the scans.
    """

    n: int
    statistic: str = "M"
    alternative: str = "single"
    window: tuple = None
    skewness: bool = False
    omega_nodes: int = 64
    x_nodes: int = 256
    tolerance: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "statistic", str(self.statistic).upper())
        if self.statistic not in ("T", "M"):
            raise ValueError(f"statistic must be 'T' or 'M', "
                             f"got {self.statistic!r}")
        if self.alternative not in ("single", "interval"):
            raise ValueError(f"alternative must be 'single' or 'interval', "
                             f"got {self.alternative!r}")
        if self.skewness and self.statistic != "M":
            raise ValueError("the skewness correction applies to the M "
                             "statistic only")
        if self.tolerance <= 0:
            raise ValueError("quadrature tolerance must be positive")
        if self.omega_nodes < 2 or self.x_nodes < 2:
            raise ValueError("need at least 2 quadrature nodes per axis")
        n = self.n
        if self.window is None:
            default = (default_single_window(n)
                       if self.alternative == "single"
                       else default_interval_window(n))
            object.__setattr__(self, "window", default)
        lo, hi = (int(self.window[0]), int(self.window[1]))
        object.__setattr__(self, "window", (lo, hi))
        if not (1 <= lo <= n - 1 and 1 <= hi <= n - 1):
            raise IndexOutOfRange(f"window [{lo}, {hi}] outside 1..{n - 1}")
        if lo > hi:
            raise WindowEmpty(f"window lower bound {lo} exceeds upper "
                              f"bound {hi}")


@dataclass(frozen=True)
class SkewnessTable:
    """Null third moments of both standardized statistics per window length.

    The null law of the window sums depends on the window only through
    its length, so one table serves every window of a scan (and both
    alternatives).  ``source`` records how the moments were obtained.
    """

    lengths: np.ndarray
    gamma_weighted: np.ndarray
    gamma_diff: np.ndarray
    source: str

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=np.int64)
        gw = np.asarray(self.gamma_weighted, dtype=float)
        gd = np.asarray(self.gamma_diff, dtype=float)
        if not (lengths.shape == gw.shape == gd.shape):
            raise ValueError("lengths and moment arrays must match in shape")
        if not (np.isfinite(gw).all() and np.isfinite(gd).all()):
            raise ValueError("skewness table entries must be finite")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "gamma_weighted", gw)
        object.__setattr__(self, "gamma_diff", gd)


def nu_approx(x):
    """Siegmund's overshoot function ``nu`` (rational approximation).

    ``nu(0) = 1`` by continuous extension; decreases towards 0.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise NegativeArgument("nu is defined for nonnegative arguments")
    tiny = arr < 1e-8
    safe = np.where(tiny, 1.0, arr)
    half = safe / 2.0
    num = (2.0 / safe) * (norm.cdf(half) - 0.5)
    den = half * norm.cdf(half) + norm.pdf(half)
    out = np.where(tiny, 1.0, num / den)
    return float(out) if np.ndim(x) == 0 else out


def h_functions(n, x):
    """The two variance-shape functions of the rescaled location ``x``.

    Valid for ``x`` strictly inside ``(1/n, 1 - 1/n)``; both functions
    are positive there and blow up at the endpoints.
    """
    arr = np.asarray(x, dtype=float)
    nx = n * arr
    if np.any(nx <= 1.0) or np.any(nx >= n - 1.0):
        raise ArgumentAtPole(f"x must lie strictly inside (1/{n}, 1 - 1/{n})")
    h_w = ((n - 1.0) * (2.0 * n * arr ** 2 - 2.0 * n * arr + 1.0)
           / (2.0 * arr * (1.0 - arr) * (nx - 1.0) * (nx - n + 1.0)))
    h_d = 1.0 / (2.0 * arr * (1.0 - arr))
    if np.ndim(x) == 0:
        return float(h_w), float(h_d)
    return h_w, h_d


def _gauss_nodes(lo, hi, m):
    base, weights = np.polynomial.legendre.leggauss(int(m))
    half = 0.5 * (hi - lo)
    return lo + half * (base + 1.0), half * weights


class _GammaFit:
    """Smooth evaluation of a per-length moment table at real lengths.

    Monte-Carlo tables carry O(1/sqrt(B)) noise from one integer length
    to the next; a least-squares Chebyshev fit removes the resulting
    kinks (the underlying moment curve is smooth in the length) so the
    certified quadrature converges.  Evaluation clips to the table's
    range rather than extrapolating.
    """

    def __init__(self, lengths, gamma):
        ts = np.asarray(lengths, dtype=float)
        gs = np.asarray(gamma, dtype=float)
        self.lo, self.hi = float(ts[0]), float(ts[-1])
        if ts.size == 1:
            self.fit = np.polynomial.Chebyshev([float(gs[0])])
        else:
            degree = min(10, ts.size - 1)
            self.fit = np.polynomial.Chebyshev.fit(ts, gs, degree)

    def __call__(self, t):
        return self.fit(np.clip(t, self.lo, self.hi))

    def crossings(self, level):
        """Lengths inside the table range where the fit crosses ``level``."""
        shifted = self.fit - float(level)
        roots = shifted.roots()
        real = roots.real[np.abs(roots.imag) < 1e-9]
        inside = real[(real > self.lo) & (real < self.hi)]
        return np.sort(inside)


#: the tilt argument 1 + 2*gamma*b is kept at or above this value
TILT_FLOOR = 0.05


def _gamma_floor(b):
    """Most negative skewness for which the correction stays regular.

    The tilt used by the correction requires ``1 + 2*gamma*b > 0`` and
    blows up like ``(1 + 2*gamma*b)**-0.25`` at the boundary; clamping
    the skewness so the tilt argument stays at least :data:`TILT_FLOOR`
    keeps the correction factor continuous and bounded where the tilt
    would be undefined.
    """
    return (TILT_FLOOR - 1.0) / (2.0 * b)


def _log_k_factor(gamma, b):
    """Log of the tilted-Gaussian marginal correction per window length.

    Zero (no correction) where the skewness is numerically zero;
    ``gamma`` is expected to be pre-clamped to ``>= _gamma_floor(b)``.
    Working in logs lets the caller combine the correction with the
    Gaussian density without overflow at large thresholds.
    """
    gamma = np.asarray(gamma, dtype=float)
    out = np.zeros_like(gamma)
    ok = np.abs(gamma) >= GAMMA_TOLERANCE
    g = gamma[ok]
    theta = (-1.0 + np.sqrt(1.0 + 2.0 * g * b)) / g
    out[ok] = (0.5 * (b - theta) ** 2 + g * theta ** 3 / 6.0
               - 0.5 * np.log1p(g * theta))
    return out


def _tail_t_raw(cfg, b, x_nodes, omega_nodes):
    lo, hi = cfg.window
    n = cfg.n
    xs, wx = _gauss_nodes(lo / n, hi / n, x_nodes)
    oms, wo = _gauss_nodes(0.0, 2.0 * np.pi, omega_nodes)
    h_w, h_d = h_functions(n, xs)
    mix = (np.outer(np.sin(oms) ** 2, h_w)
           + np.outer(np.cos(oms) ** 2, h_d))
    overshoot = nu_approx(np.sqrt(2.0 * b * mix / n))
    if cfg.alternative == "single":
        prefactor = b * np.exp(-0.5 * b) / (2.0 * np.pi)
        integrand = mix * overshoot
    else:
        prefactor = b * b * np.exp(-0.5 * b) / (2.0 * np.pi)
        integrand = mix * overshoot ** 2 * (1.0 - xs)
    return prefactor * float(wo @ integrand @ wx)


def _x_pieces(cfg, b, gamma_fit):
    """Sub-intervals of the x-integration range with analytic integrands.

    The clamped skewness curve has kinks where the fit crosses the
    clamp level and where evaluation starts clipping to the table
    range; splitting there keeps every Gauss-Legendre piece smooth so
    the refinement certification stays meaningful.
    """
    lo, hi = cfg.window
    n = cfg.n
    if gamma_fit is None:
        return [(lo / n, hi / n)]
    knots = list(gamma_fit.crossings(_gamma_floor(b)))
    knots += [gamma_fit.lo, gamma_fit.hi]
    cuts = sorted(t / n for t in knots if lo < t < hi)
    edges = [lo / n] + cuts + [hi / n]
    return list(zip(edges[:-1], edges[1:]))


def _component_raw(cfg, b, shape, gamma_fit, x_nodes):
    """One-sided tail of a single standardized-statistic maximum.

    The Gaussian density prefactor and the skewness correction are
    combined in log space so extreme thresholds underflow to 0 instead
    of producing inf * 0.
    """
    n = cfg.n
    total = 0.0
    for piece_lo, piece_hi in _x_pieces(cfg, b, gamma_fit):
        xs, wx = _gauss_nodes(piece_lo, piece_hi, x_nodes)
        h_w, h_d = h_functions(n, xs)
        h = h_w if shape == "weighted" else h_d
        if gamma_fit is None:
            log_k = 0.0
        else:
            gamma = np.maximum(gamma_fit(n * xs), _gamma_floor(b))
            log_k = _log_k_factor(gamma, b)
        density = np.exp(log_k - 0.5 * b * b - 0.5 * np.log(2.0 * np.pi))
        base = h * nu_approx(b * np.sqrt(2.0 * h / n))
        if cfg.alternative == "single":
            total += b * float(wx @ (density * base))
        else:
            total += b ** 3 * float(wx @ (density * base ** 2 * (1.0 - xs)))
    return total


def _tail_m_raw(cfg, b, skew, x_nodes):
    gamma_w = gamma_d = None
    if cfg.skewness:
        gamma_w = _GammaFit(skew.lengths, skew.gamma_weighted)
        gamma_d = _GammaFit(skew.lengths, skew.gamma_diff)
    p_w = _component_raw(cfg, b, "weighted", gamma_w, x_nodes)
    p_d = _component_raw(cfg, b, "diff", gamma_d, x_nodes)
    p_w = min(max(p_w, 0.0), 1.0)
    p_abs = min(max(2.0 * p_d, 0.0), 1.0)  # symmetric two-sided tail
    return 1.0 - (1.0 - p_w) * (1.0 - p_abs)


def _certify(cfg, base, refined):
    if not (np.isfinite(base) and np.isfinite(refined)):
        raise QuadratureFailure("tail quadrature produced a non-finite value")
    if abs(refined - base) > cfg.tolerance:
        raise QuadratureFailure(
            f"tail quadrature not converged: refinement moved the value by "
            f"{abs(refined - base):.3e} (> {cfg.tolerance:.1e})"
        )
    return float(min(max(refined, 0.0), 1.0))


def tail_T(cfg, b):
    """Upper tail of the scanned quadratic statistic at threshold ``b``."""
    if cfg.statistic != "T":
        raise ValueError("tail_T needs a config with statistic 'T'")
    b = float(b)
    if b <= 0:
        raise ValueError(f"threshold must be positive, got {b!r}")
    base = _tail_t_raw(cfg, b, cfg.x_nodes, cfg.omega_nodes)
    refined = _tail_t_raw(cfg, b, 2 * cfg.x_nodes, 2 * cfg.omega_nodes)
    return _certify(cfg, base, refined)


def tail_M(cfg, b, skew=None):
    """Upper tail of the scanned max statistic at threshold ``b``.

    The weighted and difference maxima are asymptotically independent,
    so their tails combine as ``1 - (1 - p_w) (1 - p_|d|)`` with the
    difference tail doubled for two-sidedness.  With ``cfg.skewness``
    a :class:`SkewnessTable` must be supplied.
    """
    if cfg.statistic != "M":
        raise ValueError("tail_M needs a config with statistic 'M'")
    b = float(b)
    if b <= 0:
        raise ValueError(f"threshold must be positive, got {b!r}")
    if cfg.skewness and skew is None:
        raise ValueError("cfg.skewness is on but no SkewnessTable was given")
    base = _tail_m_raw(cfg, b, skew, cfg.x_nodes)
    refined = _tail_m_raw(cfg, b, skew, 2 * cfg.x_nodes)
    return _certify(cfg, base, refined)


def tail_probability(cfg, b, skew=None):
    """Dispatch to :func:`tail_T` or :func:`tail_M` by the config."""
    if cfg.statistic == "T":
        return tail_T(cfg, b)
    return tail_M(cfg, b, skew)


def critical_value(cfg, alpha, skew=None):
    """Threshold whose analytic tail equals ``alpha`` (bisection).

    Exploits that the tails decrease in ``b``; stops when the tail is
    within 1e-4 of ``alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha!r}")
    lo, hi = BRACKET
    if tail_probability(cfg, lo, skew) < alpha:
        raise BracketFailure(f"tail at b={lo} already below alpha={alpha}")
    if tail_probability(cfg, hi, skew) > alpha:
        raise BracketFailure(f"tail at b={hi} still above alpha={alpha}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = tail_probability(cfg, mid, skew)
        if abs(value - alpha) <= ROOT_TOLERANCE:
            return float(mid)
        if value > alpha:
            lo = mid
        else:
            hi = mid
    raise BracketFailure("bisection did not reach the tail tolerance")


def skewness_table(r, window=None, source="monte_carlo", n_perm=10000,
                   seed=0):
    """Estimate the null third moments of both statistics per length.

    Parameters
    ----------
    r : RankMatrix
    window : tuple, optional
        Length range ``(lo, hi)``; defaults to the single-change scan
        window.
    source : {"monte_carlo", "enumeration"}
        Enumeration is exact but only feasible for ``n <= 9``.
    n_perm, seed : int
        Monte-Carlo sample size and stream seed (ignored for
        enumeration).
    """
    n = r.n
    if window is None:
        window = default_single_window(n)
    lo, hi = int(window[0]), int(window[1])
    if not (1 <= lo <= n - 1 and 1 <= hi <= n - 1):
        raise IndexOutOfRange(f"window [{lo}, {hi}] outside 1..{n - 1}")
    if lo > hi:
        raise WindowEmpty(f"window lower bound {lo} exceeds upper bound {hi}")
    lengths = np.arange(lo, hi + 1)
    if source == "enumeration":
        if n > EXHAUSTIVE_LIMIT:
            raise EnumerationTooLarge(
                f"enumeration supports n <= {EXHAUSTIVE_LIMIT}, got n={n}"
            )
        plan = PermPlan(mode="exhaustive")
        label = "enumeration"
    elif source == "monte_carlo":
        plan = PermPlan(n_perm=n_perm, seed=seed)
        label = f"monte_carlo(B={n_perm}, seed={seed})"
    else:
        raise ValueError(f"unknown source {source!r}")
    gamma_w, gamma_d = null_third_moments(r, lengths, plan)
    return SkewnessTable(lengths=lengths, gamma_weighted=gamma_w,
                         gamma_diff=gamma_d, source=label)
