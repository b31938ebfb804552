"""Branch-indexed enumeration of preimages on the cylinder.

A preimage of w under the cylinder map solves

    ell*x - e^x = w + 2*pi*i*k - A,     A = c - (ell-1)*log(c),

with x in the canonical strip, one equation per lift index k.  Period-1
points solve the same kind of equation with ell replaced by ell-1.  The
solver below handles both through the linear coefficient ``a``:

* log regime (every k):  fixed-point iteration x <- Log(a*x - B) seeded at
  Log(-B), polished by Newton.  For |k| beyond a structural cutoff this is
  provably the only strip solution.
* strip regime (small |k|): extra seeds at the fold of a*x - e^x (x = log a),
  at the linear root B/a, and optionally a dense rectangular Newton grid.

Roots are canonicalised into the strip, re-assigned to their true lift index
(a canonical shift by 2*pi*i*m moves index k to k - a*m), validated against
the residual tolerance, and deduplicated in the cylinder metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import defaults
from .cylinder import (TWO_PI, CylinderPoint, MapParams, PeriodicPoint,
                       canonical, cylinder_distance)
from .errors import BranchMiss, InvalidTol, TNotSummable

import logging

log = logging.getLogger(__name__)


# ----------------------------------------------------------------- kernels

_RE_LO, _RE_HI = -200.0, 60.0  # no relevant roots outside this band


def _newton_batch(a, B, x0, iters, step_tol=1e-12):
    """Vectorised Newton on g(x) = a*x - e^x - B.

    Runs until every entry either converged (last step below step_tol) or
    the iteration cap is hit.  Divergent entries become NaN.  Plain Newton
    also handles double roots (linear convergence, rate 1/2), which is why
    the default iteration counts upstream are generous.
    """
    x = np.array(x0, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    active = np.isfinite(x)
    x[~active] = np.nan
    idx = np.flatnonzero(active)
    xa = x[idx]
    Ba = B[idx] if B.shape == x.shape else np.broadcast_to(B, x.shape)[idx]
    for _ in range(iters):
        if idx.size == 0:
            break
        e = np.exp(xa)
        g = a * xa - e - Ba
        gp = a - e
        bad = np.abs(gp) < 1e-290
        if bad.any():
            gp = np.where(bad, 1e-290, gp)
        step = g / gp
        mag = np.abs(step)
        big = mag > 1.5
        if big.any():
            step = np.where(big, step * (1.5 / np.where(mag == 0, 1, mag)), step)
        xa = xa - step
        out = (xa.real < _RE_LO) | (xa.real > _RE_HI) | ~np.isfinite(xa)
        done = (mag < step_tol) & ~out
        if out.any():
            xa[out] = np.nan
        finished = done | out
        if finished.any():
            x[idx[finished]] = xa[finished]
            keep = ~finished
            idx, xa, Ba = idx[keep], xa[keep], Ba[keep]
    if idx.size:
        # iteration cap: keep the last iterate; residual validation decides.
        # Near a double root Newton random-walks at the sqrt(eps) scale and
        # the step criterion is unreachable, yet |g| certifies the root.
        x[idx] = xa
    return x


def _log_seed(a, B, rounds=4):
    """Seed for the asymptotic branch: iterate x <- Log(a*x - B) from Log(-B)."""
    with np.errstate(all="ignore"):
        x = np.log(-np.asarray(B, dtype=np.complex128))
        for _ in range(rounds):
            x = np.log(a * x - B)
    return x


def _robust_seed_block(a, B):
    """Seeds covering fold and linear roots of a*x - e^x = B.

    Returns an array of shape (n_seeds, B.size).
    """
    B = np.asarray(B, dtype=np.complex128)
    vc = a - a * math.log(a)  # critical value of a*x - e^x at x = log(a)
    with np.errstate(all="ignore"):
        sq = np.sqrt(2.0 * a * (-B - vc))
        fold_p = np.log(a + sq)
        fold_m = np.log(a - sq)
    linear = B / a
    crit = math.log(a)
    static = np.array([crit + 0.7, crit - 0.7, crit + 0.7j, crit - 0.7j,
                       crit + 1.4j, crit - 1.4j], dtype=np.complex128)
    seeds = [fold_p, fold_m, linear]
    seeds += [np.full(B.shape, s) for s in static]
    return np.stack(seeds)


def k_secondary(a, max_abs_rhs):
    """Largest |k| that can carry strip roots beyond the asymptotic branch."""
    k_left = math.ceil((a + 1) / 2)
    fold_reach = a * (math.log(2 * a * math.e) + math.pi) + 2 * a * math.e
    k_fold = math.ceil((fold_reach + max_abs_rhs) / TWO_PI)
    return max(k_left, k_fold, 3)


def _grid_seeds(a, spacing, re_lo=None, re_hi=None):
    re_lo = -2.0 * (a + 1) - 2.0 if re_lo is None else re_lo
    re_hi = defaults.M0 if re_hi is None else re_hi
    nre = max(2, int(math.ceil((re_hi - re_lo) / spacing)))
    nim = max(2, int(math.ceil(TWO_PI / spacing)))
    res = np.linspace(re_lo, re_hi, nre)
    ims = -math.pi + (np.arange(nim) + 0.5) * TWO_PI / nim
    return (res[:, None] + 1j * ims[None, :]).ravel()


def _dedupe_sorted(i_idx, ks, xs, exs, radius):
    """Deduplicate per-target roots within a cylinder-metric radius."""
    if xs.size == 0:
        return i_idx, ks, xs, exs
    radius = max(radius, 1e-14)  # below fp resolution dedup is meaningless
    # quantised pass on exact integer cell coordinates
    re_q = np.round(xs.real / radius).astype(np.int64)
    im_q = np.round(xs.imag / radius).astype(np.int64)
    order = np.lexsort((ks, im_q, re_q, i_idx))
    i_s, k_s, x_s, e_s = i_idx[order], ks[order], xs[order], exs[order]
    rq, iq = re_q[order], im_q[order]
    keep = np.ones(x_s.size, dtype=bool)
    keep[1:] = ~((i_s[1:] == i_s[:-1]) & (rq[1:] == rq[:-1]) & (iq[1:] == iq[:-1]))
    i_s, k_s, x_s, e_s = i_s[keep], k_s[keep], x_s[keep], e_s[keep]
    # exact pass for cell-boundary stragglers, sorted by real part
    order = np.lexsort((x_s.imag, x_s.real, i_s))
    i_s, k_s, x_s, e_s = i_s[order], k_s[order], x_s[order], e_s[order]
    keep = np.ones(x_s.size, dtype=bool)
    for off in (1, 2):
        if x_s.size > off:
            close = (i_s[off:] == i_s[:-off]) \
                & (cylinder_distance(x_s[off:], x_s[:-off]) < radius)
            keep[off:] &= ~close
    return i_s[keep], k_s[keep], x_s[keep], e_s[keep]


def cluster_first(points, radius):
    """Indices keeping one representative per cylinder-metric cluster."""
    points = np.asarray(points, dtype=np.complex128)
    if points.size == 0:
        return np.empty(0, dtype=np.int64)
    radius = max(radius, 1e-14)
    re_q = np.round(points.real / radius).astype(np.int64)
    im_q = np.round(points.imag / radius).astype(np.int64)
    order = np.lexsort((im_q, re_q))
    keep = np.ones(points.size, dtype=bool)
    rq, iq = re_q[order], im_q[order]
    keep[1:] = ~((rq[1:] == rq[:-1]) & (iq[1:] == iq[:-1]))
    idx = order[keep]
    # boundary stragglers: scan by real part
    sub = idx[np.lexsort((points[idx].imag, points[idx].real))]
    keep2 = np.ones(sub.size, dtype=bool)
    for off in (1, 2):
        if sub.size > off:
            close = cylinder_distance(points[sub[off:]], points[sub[:-off]]) < radius
            keep2[off:] &= ~close
    return np.sort(sub[keep2])


def solve_strip_equations(a, rhs_base, pair_i, pair_k, kmax_by_i, *,
                          tol=defaults.TOL, fast_iters=12, robust_iters=40,
                          dense_spacing=None, dense_k=None, track_misses=False):
    """Solve a*x - e^x = rhs_base[i] + 2*pi*i*k for the given (i, k) pairs.

    Returns (i, k, x, e^x[, miss_i, miss_k]) flat arrays of validated strip
    roots, deduplicated per target and re-indexed after canonicalisation.
    ``kmax_by_i`` bounds the lift indices kept per target.  Robust seeds are
    added for |k| up to the structural cutoff; a dense rectangular grid
    (module-grade completeness) is added when dense_spacing is given.
    """
    rhs_base = np.asarray(rhs_base, dtype=np.complex128)
    pair_i = np.asarray(pair_i, dtype=np.int64)
    pair_k = np.asarray(pair_k, dtype=np.int64)
    if tol <= 0:
        raise InvalidTol(f"tol must be positive, got {tol}")
    a = int(a)
    k_sec = k_secondary(a, float(np.max(np.abs(rhs_base))) if rhs_base.size else 0.0)

    B = rhs_base[pair_i] + (TWO_PI * 1j) * pair_k
    cand_x = [_newton_batch(a, B, _log_seed(a, B), fast_iters)]
    cand_i = [pair_i]
    cand_k = [pair_k]

    small = np.abs(pair_k) <= k_sec
    if small.any():
        Bs = B[small]
        for seed in _robust_seed_block(a, Bs):
            cand_x.append(_newton_batch(a, Bs, seed, robust_iters))
            cand_i.append(pair_i[small])
            cand_k.append(pair_k[small])
        if dense_spacing is not None:
            dk = k_sec + 2 if dense_k is None else dense_k
            dsub = small & (np.abs(pair_k) <= dk)
            grid = _grid_seeds(a, dense_spacing)
            Bd = np.repeat(B[dsub], grid.size)
            seeds = np.tile(grid, int(dsub.sum()))
            cand_x.append(_newton_batch(a, Bd, seeds, robust_iters))
            cand_i.append(np.repeat(pair_i[dsub], grid.size))
            cand_k.append(np.repeat(pair_k[dsub], grid.size))

    xs = np.concatenate(cand_x)
    is_ = np.concatenate(cand_i)
    ks = np.concatenate(cand_k)
    good = np.isfinite(xs)
    xs, is_, ks = xs[good], is_[good], ks[good]

    xc = canonical(xs)
    m = np.round((xs.imag - xc.imag) / TWO_PI).astype(np.int64)
    ks = ks - a * m
    ex = np.exp(xc)
    # Fold snap: near a double root the accepted iterates scatter over the
    # region where |g| < tol (radius ~ sqrt(2 tol)), but the critical point
    # x = log(a) itself satisfies the residual there; replacing the cluster
    # by it keeps counts and positions deterministic.  Root pairs whose
    # separation exceeds ~sqrt(8 tol) stay resolved (the residual gate at
    # the critical point fails for them).
    fold = np.abs(a - ex) < 3e-5
    if fold.any():
        crit = math.log(a)
        crit_resid = np.abs(a * crit - a - (rhs_base[is_[fold]]
                                            + (TWO_PI * 1j) * ks[fold]))
        snap = np.flatnonzero(fold)[crit_resid < tol]
        xc[snap] = crit
        ex[snap] = np.exp(crit)
    resid = np.abs(a * xc - ex - (rhs_base[is_] + (TWO_PI * 1j) * ks))
    kmax_arr = np.asarray(kmax_by_i, dtype=np.int64)
    ok = (resid < tol) & (np.abs(ks) <= kmax_arr[is_])
    xc, is_, ks, ex = xc[ok], is_[ok], ks[ok], ex[ok]

    is_, ks, xc, ex = _dedupe_sorted(is_, ks, xc, ex, defaults.DEDUP_FACTOR * tol)
    if not track_misses:
        return is_, ks, xc, ex

    # fast-path pairs beyond the structural cutoff must each own one root
    fast = np.abs(pair_k) > k_sec
    want = pair_i[fast] * np.int64(1 << 22) + pair_k[fast]
    have = is_ * np.int64(1 << 22) + ks
    missed = ~np.isin(want, have)
    return is_, ks, xc, ex, pair_i[fast][missed], pair_k[fast][missed]


def _uniform_pairs(n_targets, kmax):
    """(i, k) pairs for k in [-kmax_i, kmax_i] per target."""
    kmax = np.asarray(kmax, dtype=np.int64)
    if kmax.ndim == 0:
        kmax = np.full(n_targets, int(kmax), dtype=np.int64)
    counts = 2 * kmax + 1
    total = int(counts.sum())
    pair_i = np.repeat(np.arange(n_targets, dtype=np.int64), counts)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    pair_k = np.arange(total, dtype=np.int64) - offsets[pair_i] - kmax[pair_i]
    return pair_i, pair_k, kmax


def preimage_arrays(params: MapParams, targets, kmax, *, tol=defaults.TOL,
                    dense_spacing=None, track_misses=False):
    """Flat preimage enumeration used by the transfer machinery.

    targets: complex array of canonical cylinder points.
    kmax: scalar or per-target truncation half-width.
    Returns (parent_index, k, x, f'(x)) plus miss pairs when requested.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=np.complex128))
    pair_i, pair_k, kmax_arr = _uniform_pairs(targets.size, kmax)
    rhs = targets - params.affine_term
    out = solve_strip_equations(params.ell, rhs, pair_i, pair_k, kmax_arr,
                                tol=tol, dense_spacing=dense_spacing,
                                track_misses=track_misses)
    if track_misses:
        is_, ks, xc, ex, mi, mk = out
        return is_, ks, xc, params.ell - ex, mi, mk
    is_, ks, xc, ex = out
    return is_, ks, xc, params.ell - ex


# ---------------------------------------------------------------- tail bound

@dataclass(frozen=True)
class TailBound:
    """Closed-form bound on the branch weights omitted beyond index K."""

    K: int
    t: float
    bound: float


def tail_bound_value(K, t, c_geo=defaults.C_GEO):
    """Vectorised value of the omitted-weight bound (no validation)."""
    K = np.asarray(K, dtype=float)
    return 2.0 * c_geo * TWO_PI ** (-t) * K ** (1.0 - t) / (t - 1.0)


def tail_weight_bound(K: int, t: float, *, c_geo=defaults.C_GEO,
                      k_min=defaults.K_MIN_FLOOR) -> TailBound:
    """Upper bound for sum_{|k|>K} |F'(x_k)|^(-t).

    Uses |F'(x_k)| >= 2*pi*|k| / c_geo for |k| >= k_min, which the
    enumeration validates at run time.  Finite only for t > 1.
    """
    if t <= 1.0:
        raise TNotSummable(t)
    if K < k_min:
        raise ValueError(f"tail bound requires K >= {k_min}, got {K}")
    return TailBound(int(K), float(t), float(tail_bound_value(K, t, c_geo)))


# ---------------------------------------------------------------- public API

class Branch(NamedTuple):
    k: int
    x: CylinderPoint
    deriv: complex


@dataclass(frozen=True)
class PreimageSet:
    """Validated, branch-indexed preimages of one target point."""

    target: CylinderPoint
    branches: tuple
    K: int
    tol: float
    misses: tuple = ()
    derivative_bound_ok: bool = True

    def __len__(self):
        return len(self.branches)

    def points(self):
        return np.array([b.x.z for b in self.branches], dtype=np.complex128)

    def ks(self):
        return np.array([b.k for b in self.branches], dtype=np.int64)

    def derivs(self):
        return np.array([b.deriv for b in self.branches], dtype=np.complex128)


def preimages(params: MapParams, w, K: int, tol: float = defaults.TOL,
              *, seed_spacing: float = defaults.SEED_SPACING) -> PreimageSet:
    """Enumerate F^{-1}(w) on the cylinder for lift indices |k| <= K.

    Entries are sorted by |k|, then by real part.  Missing asymptotic
    branches (no root found where exactly one must exist) are recorded in
    ``misses``; completeness at small |k| is audited by the test oracles.
    """
    if tol <= 0:
        raise InvalidTol(f"tol must be positive, got {tol}")
    if K < 1:
        raise ValueError("K must be >= 1")
    wt = canonical(complex(_as_c(w)))
    is_, ks, xs, ders, mi, mk = preimage_arrays(
        params, np.array([wt]), K, tol=tol, dense_spacing=seed_spacing,
        track_misses=True)
    order = np.lexsort((ks, xs.imag, xs.real, np.abs(ks)))
    ks, xs, ders = ks[order], xs[order], ders[order]

    km = defaults.k_min(params.ell, params.c)
    sel = np.abs(ks) >= km
    bound_ok = True
    if sel.any():
        bound_ok = bool(np.all(np.abs(ders[sel])
                               >= TWO_PI * np.abs(ks[sel]) / defaults.C_GEO))
    branches = tuple(Branch(int(k), CylinderPoint.from_complex(x), complex(d))
                     for k, x, d in zip(ks, xs, ders))
    miss = tuple(sorted(int(k) for k in mk))
    if miss:
        log.warning("preimages: no root found for branch indices %s", miss)
    return PreimageSet(CylinderPoint.from_complex(wt), branches, int(K),
                       float(tol), miss, bound_ok)


def _as_c(z):
    if isinstance(z, CylinderPoint):
        return z.z
    return complex(z)


def _branch_roots_single(params: MapParams, target: complex, k: int, tol):
    """All validated roots of one branch equation for one target."""
    rhs = np.array([target - params.affine_term])
    pair_i = np.zeros(1 + 0, dtype=np.int64)
    pair_k = np.array([k], dtype=np.int64)
    kmax = np.array([abs(k)], dtype=np.int64)
    is_, ks, xs, ex = solve_strip_equations(params.ell, rhs, pair_i, pair_k,
                                            kmax, tol=tol)
    keep = ks == k
    return xs[keep]


def inverse_branch(params: MapParams, w, branch_word, tol: float = defaults.TOL
                   ) -> CylinderPoint:
    """Depth-n preimage along a symbolic word of lift indices.

    Each letter applies one more inverse branch; when a branch index carries
    several strip roots the principal one (largest real part, the asymptotic
    branch) is taken.  Raises BranchMiss at the failing depth.
    """
    if not len(branch_word):
        raise ValueError("branch_word must be nonempty")
    if tol <= 0:
        raise InvalidTol(f"tol must be positive, got {tol}")
    v = canonical(_as_c(w))
    for depth, k in enumerate(branch_word):
        roots = _branch_roots_single(params, v, int(k), tol)
        if roots.size == 0:
            raise BranchMiss(int(k), depth)
        v = complex(roots[np.argmax(roots.real)])
    return CylinderPoint.from_complex(v)


def fixed_points(params: MapParams, k_range, tol: float = defaults.TOL,
                 *, seed_spacing: float = defaults.SEED_SPACING):
    """All period-1 points of the cylinder map for lift indices in k_range.

    k_range is an inclusive (lo, hi) pair or an explicit iterable of ints.
    The k=0 list always contains log(c).  Non-convergent indices are logged,
    not fatal; completeness is audited by the seed-grid oracle in the tests.
    """
    if tol <= 0:
        raise InvalidTol(f"tol must be positive, got {tol}")
    if isinstance(k_range, tuple) and len(k_range) == 2:
        ks_wanted = np.arange(k_range[0], k_range[1] + 1, dtype=np.int64)
    else:
        ks_wanted = np.asarray(sorted(set(int(k) for k in k_range)), dtype=np.int64)
    a = params.ell - 1
    rhs = np.array([-params.affine_term])
    pair_i = np.zeros(ks_wanted.size, dtype=np.int64)
    kmax = np.array([int(np.max(np.abs(ks_wanted))) if ks_wanted.size else 0])
    is_, ks, xs, ex = solve_strip_equations(
        a, rhs, pair_i, ks_wanted, kmax, tol=tol, dense_spacing=seed_spacing)
    keep = np.isin(ks, ks_wanted)
    ks, xs, ex = ks[keep], xs[keep], ex[keep]
    order = np.lexsort((ks, xs.imag, xs.real, np.abs(ks)))
    pts = []
    for k, x, e in zip(ks[order], xs[order], ex[order]):
        mult = params.ell - e
        pts.append(PeriodicPoint(CylinderPoint.from_complex(x), 1,
                                 complex(mult), (int(k),)))
    found = set(int(k) for k in ks)
    missing = [int(k) for k in ks_wanted
               if int(k) not in found and abs(int(k)) > k_secondary(a, float(abs(rhs[0])))]
    if missing:
        log.warning("fixed_points: no solution found for k in %s", missing)
    return pts
