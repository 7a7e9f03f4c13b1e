"""Lower/upper barrier evaluation and floating-point sign certification.

The barriers are perturbations of the quasi-steady profile in the inner
variable y = a(t) x:

    lower:  1 - 1/(y+1) + b f(y) - b^2 g(y)
    upper:  1 - 1/(y+1) + b f(y) - (1+eps) b^2 h(y),   eps = gamma

with a, b, gamma from a MatchingPath and f, g, h from a SpecialTable.
Applying the parabolic operator P v = v_t - x v_xx - 2 v v_x and using
L f = w0, L g = tilde_f, L h = tilde_f + M phi collapses the residual to
a * b^2 * A (lower) resp. a * b^2 * B (upper), with only first derivatives
of the tabulated functions:

    A = -gamma f + b [2 f' g + 2 f g' - y g' + 2(1+gamma) g] - 2 b^2 g g'
    B = gamma (2 f f' - y f') + M (1+eps) phi - (gamma'/a) h
        + (1+eps) b [2 f' h + 2 f h' - y h' + 2(1+gamma) h]
        - 2 (1+eps)^2 b^2 h h'

Certification is a dense scan, not a proof: the reported thresholds are
empirical onsets and carry no claim of matching any analytic constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, OrderingFailureError, RangeError, ResolutionError
from .grids import Snapshot
from .matching import MatchingPath
from .specialfn import SpecialFunctions, SpecialTable

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True)
class BarrierSpec:
    """One barrier: which side, which path (K), which function table."""

    kind: str
    path: MatchingPath
    table: SpecialTable
    funcs: SpecialFunctions | None = None   # exact evaluators, for FD checks
    time_shift: float = 0.0

    def __post_init__(self):
        if self.kind not in (LOWER, UPPER):
            raise ConstructionError(f"kind must be '{LOWER}' or '{UPPER}'")
        if self.time_shift < 0.0:
            raise ConstructionError("time_shift must be >= 0")

    @property
    def M(self) -> float:
        return self.table.M


def _table_terms(spec: BarrierSpec, y):
    return spec.table.eval(y)


def _exact_terms(spec: BarrierSpec, y):
    fn = spec.funcs
    return {
        "f": fn.f(y), "f_prime": fn.f_prime(y),
        "g": fn.g(y), "g_prime": fn.g_prime(y),
        "h": fn.h(y), "h_prime": fn.h_prime(y),
        "phi": fn.phi(y),
    }


def eval_barrier(spec: BarrierSpec, x, t: float, exact: bool = False):
    """Barrier value and x-slope at (x, t); x may be an array.

    Raises RangeError when y = a(t) x exceeds the table range (rebuild the
    table with a larger y_max).
    """
    x = np.asarray(x, dtype=float)
    a = float(spec.path.a_at(t))
    b = float(spec.path.b_at(t))
    y = a * x
    T = _exact_terms(spec, y) if exact else _table_terms(spec, y)
    base = 1.0 - 1.0 / (y + 1.0)
    dbase = 1.0 / (y + 1.0) ** 2
    if spec.kind == LOWER:
        value = base + b * T["f"] - b * b * T["g"]
        slope = a * (dbase + b * T["f_prime"] - b * b * T["g_prime"])
    else:
        eps = float(spec.path.epsilon_at(t))
        value = base + b * T["f"] - (1.0 + eps) * b * b * T["h"]
        slope = a * (dbase + b * T["f_prime"] - (1.0 + eps) * b * b * T["h_prime"])
    return value, slope


def residual_reduced(spec: BarrierSpec, y, t: float, exact: bool = False):
    """The grouped residual factor A (lower) or B (upper) at inner points y.

    The full parabolic residual is a(t) * b(t)^2 times this value.
    """
    y = np.asarray(y, dtype=float)
    b = float(spec.path.b_at(t))
    gam = float(spec.path.gamma_at(t))
    T = _exact_terms(spec, y) if exact else _table_terms(spec, y)
    f, fp = T["f"], T["f_prime"]
    if spec.kind == LOWER:
        g, gp = T["g"], T["g_prime"]
        bracket = 2.0 * fp * g + 2.0 * f * gp - y * gp + 2.0 * (1.0 + gam) * g
        return -gam * f + b * bracket - 2.0 * b * b * g * gp
    a = float(spec.path.a_at(t))
    gamp = float(spec.path.gamma_prime_at(t))
    eps = gam
    h, hp = T["h"], T["h_prime"]
    bracket = 2.0 * fp * h + 2.0 * f * hp - y * hp + 2.0 * (1.0 + gam) * h
    return (gam * (2.0 * f * fp - y * fp) + spec.M * (1.0 + eps) * T["phi"]
            - (gamp / a) * h
            + (1.0 + eps) * b * bracket
            - 2.0 * (1.0 + eps) ** 2 * b * b * h * hp)


def residual_full(spec: BarrierSpec, y, t: float, exact: bool = False):
    """a b^2 A (resp. a b^2 B): the parabolic residual itself."""
    a = float(spec.path.a_at(t))
    b = float(spec.path.b_at(t))
    return a * b * b * residual_reduced(spec, y, t, exact=exact)


def residual_fd(spec: BarrierSpec, x: float, t: float,
                dx_rel: float = 5e-4, dt_rel: float = 1e-3,
                check_tol: float | None = None) -> float:
    """P(barrier) = u_t - x u_xx - 2 u u_x by central differences.

    This is the independence check between the grouped algebra of
    residual_reduced and the raw operator: it uses only barrier VALUES.
    Steps are relative (dx = dx_rel * x), so the stencil stays inside the
    layer whenever x does.  With ``check_tol`` set, raises ResolutionError
    when the result disagrees with a b^2 * residual_reduced by more than
    check_tol relative.
    """
    if x <= 0.0 or x > 1.0:
        raise RangeError("x must lie in (0, 1]")
    exact = spec.funcs is not None
    dx = dx_rel * x
    dt = dt_rel * max(float(spec.path.loga_at(t)), 1.0)
    if t - dt < 0.0:
        dt = 0.5 * t

    def val(xx, tt):
        v, _ = eval_barrier(spec, np.asarray([xx]), tt, exact=exact)
        return float(v[0])

    um, u0, up = val(x - dx, t), val(x, t), val(x + dx, t)
    u_t = (val(x, t + dt) - val(x, t - dt)) / (2.0 * dt)
    u_xx = (up - 2.0 * u0 + um) / dx ** 2
    u_x = (up - um) / (2.0 * dx)
    fd = u_t - x * u_xx - 2.0 * u0 * u_x
    if check_tol is not None:
        a = float(spec.path.a_at(t))
        ref = float(residual_full(spec, np.asarray([a * x]), t, exact=exact)[0])
        scale = max(abs(ref), a * float(spec.path.b_at(t)) ** 2 * 1e-6)
        if abs(fd - ref) > check_tol * scale:
            raise ResolutionError(
                f"finite differences disagree with the grouped residual "
                f"({fd:.3e} vs {ref:.3e}); refine the steps")
    return fd


# ---------------------------------------------------------------------------
# certification scans


@dataclass
class ResidualReport:
    """Result of a sign scan of A (lower) / B (upper) over an (x, t) box."""

    kind: str
    K: float
    M: float
    x_range: tuple
    t_range: tuple
    threshold_T: float | None
    worst_value: float
    worst_location: tuple   # (x, t)
    sign_ok: bool


def _scan_grid(a: float, per_decade: int) -> np.ndarray:
    y_floor = min(1e-6, a * 1e-9)
    decades = max(1.0, np.log10(a / y_floor))
    ys = np.geomspace(y_floor, a, max(16, int(decades * per_decade)))
    return np.concatenate([np.linspace(y_floor / 8.0, y_floor, 8), ys])


def certify_sign(spec: BarrierSpec, t_range: tuple, y_resolution: int = 40,
                 n_t: int = 48, tol: float = 1e-11) -> ResidualReport:
    """Scan the required residual sign over y in (0, a(t)], t in t_range.

    The scan skips y = 0, where both A and B vanish identically by the
    anchoring f(0) = g(0) = h(0) = phi(0) = 0 (asserted in the test suite).
    threshold_T is the first lattice time from which the sign holds at all
    later lattice times.
    """
    t0, t1 = float(t_range[0]), float(t_range[1])
    if t0 <= 0.0 or t1 <= t0:
        raise RangeError("t_range must satisfy 0 < t0 < t1")
    ts = np.geomspace(t0, t1, n_t)
    ok = np.zeros(n_t, dtype=bool)
    worst = []
    for j, t in enumerate(ts):
        a = float(spec.path.a_at(t))
        ys = _scan_grid(a, y_resolution)
        vals = residual_reduced(spec, ys, float(t))
        if spec.kind == LOWER:
            i = int(np.argmax(vals))
            ok[j] = vals[i] <= tol
        else:
            i = int(np.argmin(vals))
            ok[j] = vals[i] >= -tol
        worst.append((float(vals[i]), float(ys[i] / a), float(t)))

    threshold = None
    for j in range(n_t):
        if np.all(ok[j:]):
            threshold = float(ts[j])
            break
    if threshold is not None:
        region = [w for w, t in zip(worst, ts) if t >= threshold]
    else:
        region = worst
    if spec.kind == LOWER:
        wv, wx, wt = max(region, key=lambda r: r[0])
    else:
        wv, wx, wt = min(region, key=lambda r: r[0])
    return ResidualReport(kind=spec.kind, K=spec.path.K, M=spec.M,
                          x_range=(0.0, 1.0), t_range=(t0, t1),
                          threshold_T=threshold, worst_value=wv,
                          worst_location=(wx, wt),
                          sign_ok=threshold is not None)


def check_lower_monotone(spec: BarrierSpec, t_range: tuple, n_t: int = 24,
                         y_resolution: int = 40) -> bool:
    """True iff the lower-barrier slope is > 0 on a dense (x, t) sample."""
    if spec.kind != LOWER:
        raise ConstructionError("monotonicity check applies to the lower barrier")
    ts = np.geomspace(max(t_range[0], 1e-6), t_range[1], n_t)
    for t in ts:
        a = float(spec.path.a_at(t))
        ys = np.concatenate([[0.0], _scan_grid(a, y_resolution)])
        _, slope = eval_barrier(spec, ys / a, float(t))
        if np.any(slope <= 0.0):
            return False
    return True


@dataclass
class BoundaryReport:
    """Matching of the barrier against the fixed boundary value at x = 1."""

    kind: str
    K: float
    onset_t: float | None
    ok_beyond: bool
    margins: np.ndarray     # relative margins, scaled by (a+1)
    times: np.ndarray


def boundary_margin(spec: BarrierSpec, t) -> np.ndarray:
    """Signed margin of the x = 1 matching inequality, scaled by (a+1).

    lower: requires b f(a) - b^2 g(a) < 1/(a+1)         (value at 1 below 1)
    upper: requires b (f(a) - b (1+eps) h(a)) >= 1/(a+1) (value at 1 >= 1)
    Positive margin means the inequality holds.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    for i, tv in enumerate(t):
        a = float(spec.path.a_at(tv))
        b = float(spec.path.b_at(tv))
        T = spec.table.eval(np.asarray([a]))
        fa = float(T["f"][0])
        if spec.kind == LOWER:
            ga = float(T["g"][0])
            m = 1.0 / (a + 1.0) - (b * fa - b * b * ga)
        else:
            eps = float(spec.path.epsilon_at(tv))
            ha = float(T["h"][0])
            m = b * (fa - b * (1.0 + eps) * ha) - 1.0 / (a + 1.0)
        out[i] = m * (a + 1.0)
    return out


def check_boundary_matching(spec: BarrierSpec, t_range: tuple,
                            n_t: int = 64) -> BoundaryReport:
    """Find the onset time from which the x = 1 matching inequality holds."""
    ts = np.geomspace(max(t_range[0], 1e-3), t_range[1], n_t)
    margins = boundary_margin(spec, ts)
    onset = None
    for j in range(n_t):
        if np.all(margins[j:] > 0.0):
            onset = float(ts[j])
            break
    if onset is not None and onset > ts[0]:
        # refine between the last failing and first passing lattice time
        lo = float(ts[max(0, np.searchsorted(ts, onset) - 1)])
        hi = onset
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if float(boundary_margin(spec, mid)[0]) > 0.0:
                hi = mid
            else:
                lo = mid
        onset = hi
    return BoundaryReport(kind=spec.kind, K=spec.path.K, onset_t=onset,
                          ok_beyond=onset is not None, margins=margins, times=ts)


# ---------------------------------------------------------------------------
# time shifts against a computed trajectory


@dataclass
class ShiftReport:
    T1: float
    T2: float
    slack: float
    lower_onset: float      # barrier times below this are uncertified
    upper_onset: float
    n_times_lower: int
    n_times_upper: int
    worst_lower: float      # max of (barrier - u); <= slack when ordered
    worst_upper: float      # max of (u - barrier); <= slack when ordered


def _lower_violation(spec: BarrierSpec, snaps: list[Snapshot], T1: float,
                     onset: float = 0.0) -> float:
    worst = -np.inf
    n = 0
    for s in snaps:
        if s.time - T1 < onset:
            continue
        v, _ = eval_barrier(spec, s.grid.nodes, s.time - T1)
        worst = max(worst, float(np.max(v - s.values)))
        n += 1
    return worst if n else -np.inf


def _upper_violation(spec: BarrierSpec, snaps: list[Snapshot], T2: float,
                     t_min: float) -> float:
    worst = -np.inf
    for s in snaps:
        if s.time < t_min:
            continue
        v, _ = eval_barrier(spec, s.grid.nodes, s.time + T2)
        worst = max(worst, float(np.max(s.values - v)))
    return worst


def _search_shift(violation, shift_max: float, lattice: float,
                  slack: float, start: float = 0.0) -> float:
    """Smallest lattice shift with violation <= slack (coarse, then refine)."""
    if violation(start) <= slack:
        return start
    probe = max(lattice, start if start > 0 else lattice)
    lo = start
    hi = None
    while probe <= shift_max:
        if violation(probe) <= slack:
            hi = probe
            break
        lo = probe
        probe = max(probe * 2.0, probe + lattice)
    if hi is None:
        raise OrderingFailureError(
            f"no shift <= {shift_max} restores the ordering "
            "(solver or barrier inconsistency)")
    while hi - lo > lattice:
        mid = lattice * round(0.5 * (lo + hi) / lattice)
        if mid in (lo, hi):
            break
        if violation(mid) <= slack:
            hi = mid
        else:
            lo = mid
    return hi


def find_time_shifts(lower_spec: BarrierSpec, upper_spec: BarrierSpec,
                     snapshots: list[Snapshot], shift_max: float = 2000.0,
                     lattice: float = 0.25, slack: float = 1e-9,
                     t_min_upper: float | None = None,
                     lower_onset: float | None = None,
                     upper_onset: float | None = None) -> ShiftReport:
    """Smallest lattice shifts (T1, T2) ordering the trajectory:

        lower(x, t - T1) <= u(x, t)  whenever t - T1 >= lower_onset,
        u(x, t) <= upper(x, t + T2)  for sampled t >= t_min_upper.

    A barrier only orders against the solution where it is a genuine sub-/
    supersolution, i.e. beyond its certified onset (residual sign and the
    x = 1 matching inequality); comparisons below the onset are excluded,
    which is the time-shift normalization in its discrete form.  Onsets
    default to the boundary-matching onsets computed on the needed windows.
    The upper search is additionally seeded so that t + T2 clears the
    upper onset at every compared time (the numeric solution equals the
    boundary value at x = 1 exactly, so no smaller T2 can work).  Raises
    OrderingFailureError when no shift <= shift_max orders the trajectory.
    """
    snaps = sorted(snapshots, key=lambda s: s.time)
    if not snaps:
        raise ConstructionError("no snapshots to order against")
    t_hi = snaps[-1].time
    if lower_spec.path.t_end < t_hi:
        raise RangeError("lower path must cover the trajectory horizon")
    if upper_spec.path.t_end < t_hi + shift_max:
        raise RangeError("upper path must cover t_end + shift_max")
    if t_min_upper is None:
        t_min_upper = snaps[0].time

    if lower_onset is None:
        rep = check_boundary_matching(lower_spec, (min(0.5, t_hi / 4), t_hi))
        lower_onset = rep.onset_t if rep.onset_t is not None else np.inf

    T1 = _search_shift(
        lambda s: _lower_violation(lower_spec, snaps, s, lower_onset),
        shift_max, lattice, slack)

    if upper_onset is None:
        bnd = check_boundary_matching(
            upper_spec, (max(t_min_upper, 1e-3), t_hi + shift_max), n_t=96)
        if bnd.onset_t is None:
            raise OrderingFailureError(
                "upper boundary matching never holds within the path range; "
                "increase shift_max")
        upper_onset = bnd.onset_t
    start = max(0.0, lattice * np.ceil((upper_onset - t_min_upper) / lattice))
    T2 = _search_shift(
        lambda s: _upper_violation(upper_spec, snaps, s, t_min_upper),
        shift_max, lattice, slack, start=start)

    return ShiftReport(
        T1=T1, T2=T2, slack=slack,
        lower_onset=float(lower_onset), upper_onset=float(upper_onset),
        n_times_lower=sum(1 for s in snaps if s.time - T1 >= lower_onset),
        n_times_upper=sum(1 for s in snaps if s.time >= t_min_upper),
        worst_lower=_lower_violation(lower_spec, snaps, T1, lower_onset),
        worst_upper=_upper_violation(upper_spec, snaps, T2, t_min_upper))
