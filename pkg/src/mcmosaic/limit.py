"""Diffusion-limit path sampling and finite-size convergence experiments.

The limit object is a Brownian path with parabolic drift plus an optional
compensated jump part, reflected at its running minimum.  Excursion lengths
of the reflected path play the role of component masses; mark counts are
Poisson in the area under each excursion.

Grid discretization: drift and jump terms are evaluated exactly at grid
times (jump times are inserted into the grid), only the Brownian increments
are approximate.  An excursion closes when the reflected path spends two
consecutive grid points at or below epsilon = 10*sqrt(kappa*h).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RngStream
from .stats import ks_distance
from .walk import WalkPath, bulk_component_stats, decompose

__all__ = [
    "LimitParams",
    "VPath",
    "GridPath",
    "ExcursionMarks",
    "sample_Vc",
    "sample_limit_path",
    "excursions_and_marks",
    "hypothesis_report",
    "sample_limit_reference",
    "scaling_experiment",
]

_trapz = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class LimitParams:
    """Parameter triple (kappa, tau, t) plus the truncated jump-size list c.

    kappa = 0 is allowed but flagged approximate: a finite c is always
    square-summable, which that regime formally excludes.
    """

    kappa: float
    tau: float = 0.0
    t: float = 0.0
    c: tuple[float, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa >= 0.0):
            raise ValueError("kappa must be finite and nonnegative")
        if any(cj < 0 or not math.isfinite(cj) for cj in self.c):
            raise ValueError("c entries must be finite and nonnegative")
        for prev, cur in zip(self.c, self.c[1:]):
            if cur > prev + 1e-12:
                raise ValueError("c must be nonincreasing")

    @property
    def approximate(self) -> bool:
        return self.kappa == 0.0

    def default_horizon(self) -> float:
        if self.kappa > 0.0:
            return 4.0 * (abs(self.t) + abs(self.tau) + 1.0) / self.kappa
        raise ValueError("kappa=0 requires an explicit horizon")

    def epsilon(self, h: float) -> float:
        return 10.0 * math.sqrt(self.kappa * h)


@dataclass(frozen=True)
class VPath:
    """Compensated jump part: jumps c_j at Exp(c_j) times minus linear drift."""

    jump_times: tuple[float, ...]
    jump_sizes: tuple[float, ...]
    drift: float

    def eval(self, s: float) -> float:
        tot = 0.0
        for t, x in zip(self.jump_times, self.jump_sizes):
            if t > s:
                break
            tot += x
        return tot - self.drift * s


def sample_Vc(c: tuple[float, ...], rng: RngStream, horizon: float) -> VPath:
    """One jump-time draw per positive entry of c; drift is sum of c_j**2.

    The horizon only bounds which jumps can matter downstream; times beyond
    it are kept so the path object stays exact.
    """
    gen = rng.named("limit-vjumps").generator()
    pairs = []
    for cj in c:
        if cj > 0.0:
            pairs.append((float(gen.exponential(1.0 / cj)), cj))
    pairs.sort()
    return VPath(
        jump_times=tuple(t for t, _ in pairs),
        jump_sizes=tuple(x for _, x in pairs),
        drift=math.fsum(cj * cj for cj in c),
    )


@dataclass(frozen=True, eq=False)
class GridPath:
    h: float
    kappa: float
    epsilon: float
    times: np.ndarray
    w: np.ndarray
    b: np.ndarray


def sample_limit_path(
    params: LimitParams,
    rng: RngStream,
    h: float,
    horizon: float | None = None,
    *,
    vc: VPath | None = None,
    normals=None,
) -> GridPath:
    """Reflected limit path on a step-h grid with exact jump insertion.

    normals, when given, supplies the per-segment standard normal draws
    (one per merged-grid step) — the hook for common-random-number
    discretization checks.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    S = params.default_horizon() if horizon is None else horizon
    if S <= 0:
        raise ValueError("horizon must be positive")
    steps = int(math.ceil(S / h - 1e-9))
    base = h * np.arange(steps + 1)
    if vc is None:
        vc = sample_Vc(params.c, rng, S)
    jt = np.asarray([t for t in vc.jump_times if 0.0 < t <= base[-1]])
    times = np.union1d(base, jt) if jt.size else base
    dt = np.diff(times)
    if normals is None:
        z = rng.named("limit-brownian").generator().standard_normal(len(dt))
    else:
        z = np.asarray(normals, dtype=float)
        if z.shape != dt.shape:
            raise ValueError(f"need {len(dt)} normals, got {z.shape}")
    bm = np.concatenate([[0.0], np.cumsum(np.sqrt(params.kappa * dt) * z)])

    if vc.jump_times:
        jtimes = np.asarray(vc.jump_times)
        csizes = np.concatenate([[0.0], np.cumsum(vc.jump_sizes)])
        jump_part = csizes[np.searchsorted(jtimes, times, side="right")]
    else:
        jump_part = 0.0
    w = (
        bm
        + (params.t - params.tau) * times
        - 0.5 * params.kappa * times * times
        + jump_part
        - vc.drift * times
    )
    b = w - np.minimum.accumulate(w)
    return GridPath(
        h=h, kappa=params.kappa, epsilon=params.epsilon(h), times=times, w=w, b=b
    )


@dataclass(frozen=True, eq=False)
class ExcursionMarks:
    """Excursion lengths sorted descending, with aligned mark counts and areas."""

    lengths: np.ndarray
    counts: np.ndarray
    areas: np.ndarray


def excursions_and_marks(path: GridPath, rng) -> ExcursionMarks:
    """Excursions of the reflected path and Poisson(area) mark draws.

    Detection uses epsilon: an excursion is seen when b exceeds epsilon and
    closes once b drops back below it for two consecutive grid points.  Its
    endpoints are then widened to the nearest exact zeros of b — the
    running-minimum epochs, where the reflection construction yields 0.0
    exactly — so reported lengths estimate the underlying excursion rather
    than its above-epsilon core.  Bumps never reaching epsilon are noise by
    assumption and are dropped; detections sharing the same zero-to-zero
    interval collapse into one excursion.

    rng may be an RngStream or a numpy Generator; pass a Generator when
    calling repeatedly so the mark stream advances across calls.
    """
    gen = rng.named("limit-marks").generator() if isinstance(rng, RngStream) else rng
    b = path.b
    times = path.times
    eps = path.epsilon
    n = len(b)
    below = b <= eps
    two_below = (
        np.flatnonzero(below[:-1] & below[1:]) if n > 1 else np.empty(0, dtype=int)
    )
    zeros = np.flatnonzero(b == 0.0)  # index 0 is always a zero
    intervals: dict[tuple[int, int], None] = {}
    i = 0
    while i < n:
        if below[i]:
            i += 1
            continue
        start = i
        k = np.searchsorted(two_below, start)
        j = int(two_below[k]) if k < len(two_below) else n - 1
        zl = int(zeros[np.searchsorted(zeros, start, side="right") - 1])
        kr = np.searchsorted(zeros, j)
        zr = int(zeros[kr]) if kr < len(zeros) else n - 1
        intervals[(zl, zr)] = None
        i = j + 1
    if not intervals:
        return ExcursionMarks(
            np.empty(0), np.empty(0, dtype=np.int64), np.empty(0)
        )
    len_arr = np.asarray([times[r] - times[l] for l, r in intervals])
    area_arr = np.asarray(
        [float(_trapz(b[l : r + 1], times[l : r + 1])) for l, r in intervals]
    )
    counts = gen.poisson(area_arr)
    order = np.argsort(-len_arr, kind="stable")
    return ExcursionMarks(len_arr[order], counts[order], area_arr[order])


def hypothesis_report(masses, kappa: float = 1.0, c: tuple[float, ...] = (), rtol: float = 0.05) -> dict:
    """Moment checks a finite configuration should satisfy to approach the limit.

    Reports sigma moments, the third-to-second-cubed ratio against
    kappa + sum(c_j^3), and the leading scaled masses against c.
    """
    m = np.sort(np.asarray(masses, dtype=float))[::-1]
    s1 = float(m.sum())
    s2 = float((m**2).sum())
    s3 = float((m**3).sum())
    target = kappa + math.fsum(cj**3 for cj in c)
    ratio = s3 / s2**3
    warnings = []
    if abs(ratio - target) > rtol * max(target, 1e-12):
        warnings.append(
            f"third-moment ratio {ratio:.6g} is far from its target {target:.6g}"
        )
    lead = c if c else (0.0,)
    for j, cj in enumerate(lead):
        if j >= len(m):
            break
        scaled = float(m[j] / s2)
        if abs(scaled - cj) > rtol * (1.0 + cj):
            warnings.append(
                f"scaled mass #{j + 1} is {scaled:.6g}, target {cj:.6g}"
            )
    return {
        "sigma1": s1,
        "sigma2": s2,
        "sigma3": s3,
        "ratio": ratio,
        "ratio_target": target,
        "c_truncation_cubed": float(math.fsum(cj**3 for cj in c)),
        "warnings": warnings,
    }


def sample_limit_reference(
    params: LimitParams,
    rng: RngStream,
    h: float,
    reps: int,
    horizon: float | None = None,
    chunk: int = 1000,
) -> dict:
    """Largest-excursion length and mark count over many limit paths.

    Vectorized across paths for c = (); falls back to one path at a time
    otherwise.  Paths with no excursion contribute length 0 and count 0.
    """
    marks_gen = rng.named("limit-marks").generator()
    largest = np.zeros(reps)
    second = np.zeros(reps)
    marks = np.zeros(reps, dtype=np.int64)
    if params.c:
        for r in range(reps):
            path = sample_limit_path(
                params, rng.indexed(r), h, horizon
            )
            em = excursions_and_marks(path, marks_gen)
            if em.lengths.size:
                largest[r] = em.lengths[0]
                marks[r] = em.counts[0]
            if em.lengths.size > 1:
                second[r] = em.lengths[1]
        return {"largest": largest, "second": second, "marks": marks}

    S = params.default_horizon() if horizon is None else horizon
    steps = int(math.ceil(S / h - 1e-9))
    times = h * np.arange(steps + 1)
    drift = (params.t - params.tau) * times - 0.5 * params.kappa * times * times
    eps = params.epsilon(h)
    gen = rng.named("limit-brownian").generator()
    scale = math.sqrt(params.kappa * h)
    done = 0
    while done < reps:
        rows = min(chunk, reps - done)
        z = gen.standard_normal((rows, steps))
        w = np.concatenate(
            [np.zeros((rows, 1)), np.cumsum(scale * z, axis=1)], axis=1
        )
        w += drift
        b = w - np.minimum.accumulate(w, axis=1)
        for r in range(rows):
            path = GridPath(
                h=h, kappa=params.kappa, epsilon=eps, times=times, w=w[r], b=b[r]
            )
            em = excursions_and_marks(path, marks_gen)
            if em.lengths.size:
                largest[done + r] = em.lengths[0]
                marks[done + r] = em.counts[0]
            if em.lengths.size > 1:
                second[done + r] = em.lengths[1]
        done += rows
    return {"largest": largest, "second": second, "marks": marks}


def _coupled_component_stats(n_values, t, reps, gen, want_areas):
    """Finite-n statistics for the standard profile, coupled across n.

    One shared matrix of Exp(1) draws per chunk; the sample for each n uses
    its first n columns, so the three empirical laws ride on common noise
    while every marginal stays exact.  The common noise cancels out of
    distance differences, which is what makes the convergence ordering
    resolvable at moderate replication counts.
    """
    n_max = max(n_values)
    out = {
        n: {
            "largest": np.empty(reps),
            "second": np.empty(reps),
            "largest_area": np.empty(reps) if want_areas else None,
        }
        for n in n_values
    }
    chunk = max(1, int(2e7 // n_max))
    done = 0
    while done < reps:
        rows = min(chunk, reps - done)
        E = gen.exponential(size=(rows, n_max))
        for n in n_values:
            mass = n ** (-2.0 / 3.0)
            q = t + 1.0 / (n * mass * mass)
            xi = np.sort(E[:, :n], axis=1)
            np.divide(xi, mass, out=xi)
            tmat = xi / q
            offsets = np.arange(1, n + 1, dtype=float) * mass
            trough = np.empty_like(tmat)
            trough[:, 0] = -tmat[:, 0]
            trough[:, 1:] = offsets[:-1] - tmat[:, 1:]
            run = np.minimum.accumulate(trough, axis=1)
            is_root = np.empty(tmat.shape, dtype=bool)
            is_root[:, 0] = True
            is_root[:, 1:] = trough[:, 1:] < run[:, :-1]
            slot = out[n]
            for i in range(rows):
                roots = np.flatnonzero(is_root[i])
                bounds = np.append(roots, n)
                sizes = np.diff(bounds) * mass
                order = np.argsort(sizes)
                slot["largest"][done + i] = sizes[order[-1]]
                slot["second"][done + i] = sizes[order[-2]] if len(sizes) > 1 else 0.0
                if want_areas:
                    k = roots[order[-1]]
                    k_end = bounds[order[-1] + 1]
                    ti = tmat[i, k:k_end]
                    cm_local = offsets[k:k_end] - (offsets[k - 1] if k else 0.0)
                    start = ti[0]
                    bvals = cm_local - (ti - start)
                    seg = np.append(ti[1:], start + cm_local[-1]) - ti
                    slot["largest_area"][done + i] = float(
                        np.sum(bvals * seg - seg * seg / 2.0)
                    )
        done += rows
    return out


def _component_stats_generic(masses, q, gen, reps, want_areas):
    # per-rep walk construction for non-uniform mass sequences
    from .core import ClockAssignment, WeightedConfig
    from .walk import area_under_reflection

    config = WeightedConfig(tuple(masses))
    m = config.as_array()
    largest = np.zeros(reps)
    second = np.zeros(reps)
    areas = np.zeros(reps)
    for r in range(reps):
        xi = gen.exponential(1.0 / m)
        xi = np.where(xi <= 0, np.finfo(float).tiny, xi)
        clocks = ClockAssignment.from_xi(tuple(float(v) for v in xi))
        path = WalkPath.from_clocks(config, clocks, q)
        dec = decompose(path)
        sizes = sorted((e.mass for e in dec.excursions), reverse=True)
        largest[r] = sizes[0]
        if len(sizes) > 1:
            second[r] = sizes[1]
        if want_areas:
            big = max(dec.excursions, key=lambda e: e.mass)
            areas[r] = area_under_reflection(path, big.start, big.end)
    out = {"largest": largest, "second": second}
    if want_areas:
        out["largest_area"] = areas
    return out


def scaling_experiment(
    n_values,
    t: float,
    reps: int,
    rng: RngStream,
    *,
    h: float = 1e-3,
    limit_reps: int | None = None,
    include_marks: bool = True,
    sequences: dict | None = None,
    reference: dict | None = None,
    couple: bool = True,
) -> dict:
    """Compare finite-n component laws at the critical horizon to the limit.

    For each n the walk runs at horizon t + 1/sigma2; the largest component
    mass (and, via the area shortcut, its surplus count) is compared by
    two-sample sup-distance to the limit reference with kappa=1, tau=0,
    c=().  Mass sequences default to the standard n**(-2/3) profile.

    ``reference`` may carry a precomputed sample_limit_reference result; the
    finite-n side is the noisy one at usual sizes, so a single large shared
    reference sharpens every comparison at no per-call cost.

    With ``couple`` (standard profile only), all n share one pool of unit
    exponential draws; see _coupled_component_stats.
    """
    params = LimitParams(kappa=1.0, tau=0.0, t=t, c=())
    if reference is not None:
        ref = reference
        lref = len(ref["largest"])
    else:
        lref = limit_reps if limit_reps is not None else reps
        ref = sample_limit_reference(params, rng, h, lref)

    shared = None
    if couple and not sequences:
        for n in n_values:
            if t + n ** (1.0 / 3.0) <= 0:
                raise ValueError(f"horizon t + 1/sigma2 is not positive for n={n}")
        shared = _coupled_component_stats(
            n_values, t, reps, rng.named("scaling-coupled").generator(), include_marks
        )

    rows = []
    prev = None
    decreasing = True
    for n in n_values:
        if sequences and n in sequences:
            masses = tuple(sequences[n])
            s2 = float(sum(x * x for x in masses))
            hyp = hypothesis_report(masses, kappa=1.0, c=())
        else:
            mass = n ** (-2.0 / 3.0)
            masses = None
            s2 = n * mass * mass
            hyp = {
                "sigma2": s2,
                "ratio": 1.0,
                "ratio_target": 1.0,
                "warnings": [],
            }
        q = t + 1.0 / s2
        if q <= 0:
            raise ValueError(f"horizon t + 1/sigma2 = {q} is not positive for n={n}")
        gen = rng.named(f"scaling-{n}").generator()
        if shared is not None and masses is None:
            d = shared[n]
        elif masses is None:
            d = bulk_component_stats(n, mass, q, gen, reps, want_areas=include_marks)
        else:
            d = _component_stats_generic(masses, q, gen, reps, include_marks)
        row = {
            "n": n,
            "sigma2": s2,
            "q": q,
            "ks_largest": ks_distance(d["largest"], ref["largest"]),
            "ks_second": ks_distance(d["second"], ref["second"]),
            "warnings": hyp["warnings"],
        }
        if include_marks:
            counts = gen.poisson(q * d["largest_area"])
            row["ks_marks"] = ks_distance(counts, ref["marks"])
        if prev is not None and row["ks_largest"] >= prev:
            decreasing = False
        prev = row["ks_largest"]
        rows.append(row)
    return {
        "t": t,
        "h": h,
        "reps": reps,
        "limit_reps": lref,
        "epsilon": params.epsilon(h),
        "rows": rows,
        "ks_decreasing": decreasing,
    }
