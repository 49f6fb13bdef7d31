"""Hot numeric kernels.

Each kernel has a numba ``@njit`` implementation and a pure-numpy one with
identical semantics. The numba path is used when numba imports and the
environment variable ``METRIC_FORGE_NUMBA`` is not set to ``0``/``false``/``no``.
The flag is read at import time; :func:`set_backend` switches at runtime
(tests and the benchmark use it to compare both paths).
"""

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is installed in CI
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return decorator


def _flag_enabled():
    value = os.environ.get("METRIC_FORGE_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "no", "off")


_use_numba = NUMBA_AVAILABLE and _flag_enabled()

# numpy fallback processes the 2^S policy index space in blocks of this many rows
_CHUNK = 1 << 15


def backend():
    return "numba" if _use_numba else "numpy"


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend name."""
    global _use_numba
    previous = backend()
    if name == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


# ---------------------------------------------------------------------------
# vertex enumeration: value of every policy with treat_prob in {lo, hi}
# ---------------------------------------------------------------------------


@njit(cache=True)
def _vertex_values_numba(num, den, lo, hi, average, scale):
    size = num.shape[0]
    total = 1 << size
    out = np.empty(total, dtype=np.float64)
    for mask in range(total):
        top = 0.0
        bottom = 0.0
        for i in range(size):
            if (mask >> i) & 1:
                pi = hi
            else:
                pi = lo
            top += num[i] * pi
            bottom += den[i] * pi
        if average:
            out[mask] = top / bottom if bottom > 0.0 else 0.0
        else:
            out[mask] = scale * top
    return out


def _vertex_values_numpy(num, den, lo, hi, average, scale):
    size = num.shape[0]
    total = 1 << size
    out = np.empty(total, dtype=np.float64)
    shifts = np.arange(size, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = (masks[:, None] >> shifts) & 1
        pi = np.where(bits == 1, hi, lo)
        # accumulate in index order so results match the sequential kernel
        top = np.zeros(masks.shape[0])
        bottom = np.zeros(masks.shape[0])
        for i in range(size):
            top += num[i] * pi[:, i]
            bottom += den[i] * pi[:, i]
        if average:
            safe = np.where(bottom > 0.0, bottom, 1.0)
            out[start : start + masks.shape[0]] = np.where(bottom > 0.0, top / safe, 0.0)
        else:
            out[start : start + masks.shape[0]] = scale * top
    return out


def vertex_values(num, den, lo, hi, average, scale=1.0):
    """Reward of every policy whose treatment probabilities are ``lo`` or ``hi``.

    Bit ``i`` of the returned array's index selects ``hi`` for support point
    ``i``. Totals are ``scale * sum(num * pi)``; averages are
    ``sum(num * pi) / sum(den * pi)``, or 0 when the denominator is 0.
    """
    num = np.ascontiguousarray(num, dtype=np.float64)
    den = np.ascontiguousarray(den, dtype=np.float64)
    args = (num, den, float(lo), float(hi), bool(average), float(scale))
    if _use_numba:
        return _vertex_values_numba(*args)
    return _vertex_values_numpy(*args)


# ---------------------------------------------------------------------------
# asymmetry statistics for a grouping of support points into principal cells
# ---------------------------------------------------------------------------


@njit(cache=True)
def _asym_stats_numba(groups, n_groups, probs, mu0, mu1):
    mass = np.zeros(n_groups)
    weighted = np.zeros(n_groups)
    lo = np.full(n_groups, np.inf)
    hi = np.full(n_groups, -np.inf)
    live = np.zeros(n_groups, dtype=np.int64)
    for i in range(groups.shape[0]):
        g = groups[i]
        mass[g] += probs[i]
        weighted[g] += probs[i] * mu0[i]
        if probs[i] > 0.0:
            live[g] += 1
            if mu0[i] < lo[g]:
                lo[g] = mu0[i]
            if mu0[i] > hi[g]:
                hi[g] = mu0[i]
    cond = np.zeros(n_groups)
    for g in range(n_groups):
        if live[g] == 1:
            cond[g] = lo[g]  # single point: its own value, no rounding
        elif mass[g] > 0.0:
            cond[g] = weighted[g] / mass[g]
    gamma_marg = 0.0
    gamma_max = 0.0
    utility = 0.0
    optimal = 0.0
    rate = 0.0
    for i in range(groups.shape[0]):
        g = groups[i]
        p = probs[i]
        if p <= 0.0:
            continue
        gamma_marg += p * abs(cond[g] - mu0[i])
        gamma_max += p * max(abs(mu0[i] - lo[g]), abs(hi[g] - mu0[i]))
        tau = mu1[i] - mu0[i]
        if tau > 0.0:
            optimal += p * tau
        if mu1[i] - cond[g] > 0.0:
            utility += p * tau
            rate += p
    return cond, gamma_marg, gamma_max, utility, optimal, rate


def _asym_stats_numpy(groups, n_groups, probs, mu0, mu1):
    mass = np.bincount(groups, weights=probs, minlength=n_groups)
    weighted = np.bincount(groups, weights=probs * mu0, minlength=n_groups)
    cond = np.zeros(n_groups)
    np.divide(weighted, mass, out=cond, where=mass > 0.0)
    live = probs > 0.0
    lo = np.full(n_groups, np.inf)
    hi = np.full(n_groups, -np.inf)
    np.minimum.at(lo, groups[live], mu0[live])
    np.maximum.at(hi, groups[live], mu0[live])
    single = np.bincount(groups[live], minlength=n_groups) == 1
    cond[single] = lo[single]
    g = groups[live]
    p = probs[live]
    m0 = mu0[live]
    m1 = mu1[live]
    tau = m1 - m0
    treat = (m1 - cond[g]) > 0.0
    gamma_marg = float(np.sum(p * np.abs(cond[g] - m0)))
    gamma_max = float(np.sum(p * np.maximum(np.abs(m0 - lo[g]), np.abs(hi[g] - m0))))
    utility = float(np.sum(np.where(treat, p * tau, 0.0)))
    optimal = float(np.sum(np.where(tau > 0.0, p * tau, 0.0)))
    rate = float(np.sum(np.where(treat, p, 0.0)))
    return cond, gamma_marg, gamma_max, utility, optimal, rate


def asym_stats(groups, n_groups, probs, mu0, mu1):
    """Information-asymmetry summary for one grouping of support points.

    ``groups[i]`` is the principal-visible cell of support point ``i``. Returns
    ``(cond_mu0, gamma_marg, gamma_max, utility, optimal_utility, treat_rate)``
    where ``cond_mu0`` is the probability-weighted mean of ``mu0`` per cell and
    the agent treats a point when ``mu1 - cond_mu0[cell] > 0``.
    """
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    mu0 = np.ascontiguousarray(mu0, dtype=np.float64)
    mu1 = np.ascontiguousarray(mu1, dtype=np.float64)
    if _use_numba:
        cond, *rest = _asym_stats_numba(groups, int(n_groups), probs, mu0, mu1)
        return (cond, *(float(v) for v in rest))
    return _asym_stats_numpy(groups, int(n_groups), probs, mu0, mu1)
