"""Random walk in a solid cylinder B_r(0) x [0, r] driven by three streams.

Per composite step: with probability alpha a fair vertical move of +-eps,
with probability beta = 1 - alpha a horizontal move uniform in the open
eps-ball of R^n. Equivalently, a Bernoulli(alpha) clock U_j interleaves an
independent vertical +-eps walk t~ and an independent horizontal walk x~:
t_j = t~_{U_j} and x_j = x~_{j - U_j}. The walk stops at tau_g, the first
time the vertical component leaves (0, r); tau_b (first time the horizontal
norm reaches r) is monitored but does not stop the walk.

run_cylinder_walk is the faithful per-step composite simulator and can log
every stream for audits. The batch estimators sample the same law directly
from the decomposition: the vertical exit (time and side) comes from the
+-1 ruin walk, and the number of horizontal moves before the exit is
negative-binomial (failures before the tau~_g-th clock success), which is
exactly the interleaving law. Horizontal paths are then drawn only when an
estimator needs them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bounds import gaussian_tail, nu_from_probs
from .constants import CLOCK_BAND_HIGH, CLOCK_BAND_LOW
from .errors import EstimationFailureError, ParameterError, TruncationError
from .geometry import Domain
from .rngutil import make_np_rng, uniform_ball_batch

_BATCH_ELEMENT_BUDGET = 4_000_000  # per-chunk element cap for vectorized walks
_TRUNCATION_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class CylinderParams:
    """n is the horizontal dimension; the cylinder lives in R^(n+1)."""

    n: int
    r: float
    eps: float
    t0: float
    alpha: float
    max_steps: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"horizontal dimension must be >= 1, got {self.n}")
        if not (0.0 < self.eps < self.r):
            raise ParameterError("need 0 < eps < r")
        if not (0.0 < self.t0 < self.r):
            raise ParameterError("start height t0 must lie in (0, r)")
        if not (0.0 <= self.alpha <= 1.0):
            raise ParameterError("alpha must lie in [0, 1]")
        if self.max_steps < 1:
            raise ParameterError("max_steps must be >= 1")

    @classmethod
    def from_np(cls, n: int, p: float, r: float, eps: float, t0: float,
                max_steps: int | None = None) -> "CylinderParams":
        if p <= 2:
            raise ParameterError(f"p must exceed 2, got {p}")
        alpha = (p - 2) / (p + n)
        if max_steps is None:
            max_steps = default_horizon(r, eps)
        return cls(n=n, r=r, eps=eps, t0=t0, alpha=alpha, max_steps=max_steps)

    @classmethod
    def diagnostic_alpha(cls, n: int, r: float, eps: float, t0: float, alpha: float,
                         max_steps: int | None = None) -> "CylinderParams":
        if max_steps is None:
            max_steps = default_horizon(r, eps)
        return cls(n=n, r=r, eps=eps, t0=t0, alpha=alpha, max_steps=max_steps)

    @property
    def bottom_gap_steps(self) -> int:
        """Vertical +-1 steps from t0 down to leaving (0, r) at the bottom."""
        return math.ceil(self.t0 / self.eps)

    @property
    def top_gap_steps(self) -> int:
        return math.ceil((self.r - self.t0) / self.eps)


def default_horizon(r: float, eps: float) -> int:
    return int(math.ceil(100.0 * (r / eps) ** 2))


class CylinderOutcome(NamedTuple):
    tau_g: int
    tau_tilde_g: int
    tau_b: int | None
    bottom_exit: bool
    horizontal_exit_position: tuple
    U_at_tau_g: int


@dataclass
class CylinderAudit:
    """Raw streams plus the composite path, for identity checks.

    clock_bits[j] is 1 when composite step j+1 was vertical. vertical_steps
    holds the +-eps increments in draw order; horizontal_moves the ball
    increments in draw order. composite_t / composite_x include the start.
    """

    clock_bits: list[int]
    vertical_steps: list[float]
    horizontal_moves: list[tuple]
    composite_t: list[float]
    composite_x: list[tuple]

    def lines(self) -> list[str]:
        out = []
        for j in range(len(self.clock_bits)):
            branch = "V" if self.clock_bits[j] else "H"
            t = self.composite_t[j + 1]
            x = self.composite_x[j + 1]
            out.append(
                f"j={j + 1} branch={branch} t={t:.9g} "
                f"|x|={math.sqrt(sum(c * c for c in x)):.9g}"
            )
        return out


def run_cylinder_walk(params: CylinderParams, rng: np.random.Generator,
                      audit: bool = False):
    """Faithful composite walk. Returns CylinderOutcome, or (outcome, audit).

    Raises TruncationError carrying the partial outcome when the horizon is
    reached before the vertical exit.
    """
    n, r, eps, alpha = params.n, params.r, params.eps, params.alpha
    t = params.t0
    x = [0.0] * n
    successes = 0
    vertical_count = 0
    tau_b = None
    j = 0
    log = CylinderAudit([], [], [], [params.t0], [tuple(x)]) if audit else None

    while 0.0 < t < r:
        if j >= params.max_steps:
            partial = CylinderOutcome(j, vertical_count, tau_b, False, tuple(x),
                                      successes)
            raise TruncationError(
                f"cylinder walk exceeded horizon {params.max_steps}", partial=partial
            )
        j += 1
        if rng.random() < alpha:
            successes += 1
            vertical_count += 1
            dstep = eps if rng.random() < 0.5 else -eps
            t += dstep
            if log is not None:
                log.clock_bits.append(1)
                log.vertical_steps.append(dstep)
        else:
            move = uniform_ball_batch(rng, 1, n, eps)[0]
            for i in range(n):
                x[i] += float(move[i])
            if tau_b is None and math.sqrt(sum(c * c for c in x)) >= r:
                tau_b = j
            if log is not None:
                log.clock_bits.append(0)
                log.horizontal_moves.append(tuple(float(m) for m in move))
        if log is not None:
            log.composite_t.append(t)
            log.composite_x.append(tuple(x))

    outcome = CylinderOutcome(
        tau_g=j,
        tau_tilde_g=vertical_count,
        tau_b=tau_b,
        bottom_exit=t <= 0.0,
        horizontal_exit_position=tuple(x),
        U_at_tau_g=successes,
    )
    return (outcome, log) if audit else outcome


def _vertical_exit_batch(rng: np.random.Generator, down: int, up: int,
                         episodes: int, step_cap: int):
    """+-1 ruin from 0 with absorbing barriers -down and +up, vectorized.

    Returns (tau, bottom, truncated) int64/bool arrays. Truncated walks get
    tau = step_cap.
    """
    pos = np.zeros(episodes, dtype=np.int32)
    tau = np.full(episodes, step_cap, dtype=np.int64)
    bottom = np.zeros(episodes, dtype=bool)
    truncated = np.ones(episodes, dtype=bool)
    active = np.arange(episodes)
    done_steps = 0
    while active.size and done_steps < step_cap:
        chunk = int(min(max(_BATCH_ELEMENT_BUDGET // max(active.size, 1), 64),
                        step_cap - done_steps, 16384))
        steps = rng.integers(0, 2, size=(active.size, chunk), dtype=np.int8)
        paths = (steps.astype(np.int32) * 2 - 1).cumsum(axis=1, dtype=np.int32)
        paths += pos[active][:, None]
        hit_bot = paths <= -down
        hit_top = paths >= up
        hit = hit_bot | hit_top
        any_hit = hit.any(axis=1)
        first = hit.argmax(axis=1)
        exited = active[any_hit]
        f = first[any_hit]
        tau[exited] = done_steps + f + 1
        bottom[exited] = hit_bot[any_hit, f]
        truncated[exited] = False
        keep = ~any_hit
        pos[active[keep]] = paths[keep, -1]
        active = active[keep]
        done_steps += chunk
    return tau, bottom, truncated


def _clock_failures(rng: np.random.Generator, tau_tilde: np.ndarray, alpha: float):
    """Horizontal-move count before the tau~-th vertical move: failures
    before the tau~-th success of the Bernoulli(alpha) clock."""
    if alpha >= 1.0:
        return np.zeros_like(tau_tilde)
    return rng.negative_binomial(tau_tilde, alpha)


def _horizontal_final_and_max(rng: np.random.Generator, counts: np.ndarray,
                              n: int, eps: float, radius: float):
    """Run counts[i] uniform-ball steps per episode. Returns (reached, final):
    reached[i] is True when max_m |x~_m| >= radius along the path."""
    episodes = counts.shape[0]
    pos = np.zeros((episodes, n))
    reached = np.zeros(episodes, dtype=bool)
    remaining = counts.astype(np.int64).copy()
    active = np.nonzero(remaining > 0)[0]
    while active.size:
        block = int(min(max(_BATCH_ELEMENT_BUDGET // max(active.size * n, 1), 8),
                        int(remaining[active].max()), 4096))
        moves = uniform_ball_batch(rng, active.size * block, n, eps)
        moves = moves.reshape(active.size, block, n)
        # steps beyond an episode's own count must not perturb it
        steg = np.minimum(remaining[active], block)
        mask = np.arange(block)[None, :] < steg[:, None]
        moves *= mask[:, :, None]
        paths = moves.cumsum(axis=1) + pos[active][:, None, :]
        norms = np.linalg.norm(paths, axis=2)
        norms = np.where(mask, norms, 0.0)
        reached[active] |= (norms >= radius).any(axis=1)
        pos[active] = paths[np.arange(active.size), steg - 1, :]
        remaining[active] -= steg
        active = active[remaining[active] > 0]
    return reached, pos


class BottomExitEstimate(NamedTuple):
    prob_bottom: float
    std_error: float
    episodes: int
    truncated: int
    warning: str | None


def _binomial_se(p: float, m: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / m) if m > 0 else float("nan")


def _truncation_warning(truncated: int, episodes: int) -> str | None:
    if truncated > _TRUNCATION_WARN_FRACTION * episodes:
        return (
            f"{truncated}/{episodes} walks truncated at the horizon; "
            "estimate may be unreliable"
        )
    return None


def estimate_bottom_exit(params: CylinderParams, episodes: int,
                         seed: int) -> BottomExitEstimate:
    """P(the walk leaves through the bottom), Monte Carlo with derived seeds."""
    if episodes < 1:
        raise ParameterError("episodes must be >= 1")
    if params.alpha == 0.0:
        raise EstimationFailureError(
            "alpha = 0: the vertical component never moves, every walk truncates"
        )
    rng = make_np_rng(seed, "cylinder-bottom")
    tau, bottom, trunc_v = _vertical_exit_batch(
        rng, params.bottom_gap_steps, params.top_gap_steps, episodes,
        params.max_steps,
    )
    failures = _clock_failures(rng, np.where(trunc_v, 1, tau), params.alpha)
    truncated = trunc_v | (tau + failures > params.max_steps)
    ok = ~truncated
    m = int(ok.sum())
    if m == 0:
        raise EstimationFailureError("all cylinder walks truncated")
    prob = float(bottom[ok].mean())
    return BottomExitEstimate(
        prob_bottom=prob,
        std_error=_binomial_se(prob, m),
        episodes=m,
        truncated=int(truncated.sum()),
        warning=_truncation_warning(int(truncated.sum()), episodes),
    )


class ClockWindowEstimate(NamedTuple):
    prob: float
    std_error: float
    analytic_lower: float
    episodes: int
    truncated: int
    warning: str | None


def estimate_clock_window(params: CylinderParams, a: float, episodes: int,
                          seed: int) -> ClockWindowEstimate:
    """P(a/eps <= tau_g - tau~_g < a/eps^2), with the Gaussian-tail reference
    lower bound evaluated at min(t0, r - t0) * nu / sqrt(a)."""
    if a <= 0:
        raise ParameterError("window scale a must be positive")
    if episodes < 1:
        raise ParameterError("episodes must be >= 1")
    if params.alpha in (0.0,):
        raise EstimationFailureError("alpha = 0: no vertical exit, no window")
    rng = make_np_rng(seed, "cylinder-clock")
    tau, bottom, trunc_v = _vertical_exit_batch(
        rng, params.bottom_gap_steps, params.top_gap_steps, episodes,
        params.max_steps,
    )
    failures = _clock_failures(rng, np.where(trunc_v, 1, tau), params.alpha)
    truncated = trunc_v | (tau + failures > params.max_steps)
    ok = ~truncated
    m = int(ok.sum())
    if m == 0:
        raise EstimationFailureError("all cylinder walks truncated")
    lo = a / params.eps
    hi = a / params.eps**2
    w = failures[ok]
    prob = float(((w >= lo) & (w < hi)).mean())
    nu = nu_from_probs(params.alpha)
    analytic = gaussian_tail(min(params.t0, params.r - params.t0) * nu / math.sqrt(a))
    return ClockWindowEstimate(
        prob=prob,
        std_error=_binomial_se(prob, m),
        analytic_lower=analytic,
        episodes=m,
        truncated=int(truncated.sum()),
        warning=_truncation_warning(int(truncated.sum()), episodes),
    )


class EventBEstimate(NamedTuple):
    prob: float
    std_error: float
    episodes: int
    truncated: int
    warning: str | None


def estimate_event_B(params: CylinderParams, episodes: int,
                     seed: int) -> EventBEstimate:
    """P(0.99 * alpha * tau_g < tau~_g < 1.01 * alpha * tau_g)."""
    if episodes < 1:
        raise ParameterError("episodes must be >= 1")
    if params.alpha == 0.0:
        raise EstimationFailureError("alpha = 0: no vertical exit")
    rng = make_np_rng(seed, "cylinder-eventb")
    tau, bottom, trunc_v = _vertical_exit_batch(
        rng, params.bottom_gap_steps, params.top_gap_steps, episodes,
        params.max_steps,
    )
    failures = _clock_failures(rng, np.where(trunc_v, 1, tau), params.alpha)
    truncated = trunc_v | (tau + failures > params.max_steps)
    ok = ~truncated
    m = int(ok.sum())
    if m == 0:
        raise EstimationFailureError("all cylinder walks truncated")
    tau_g = (tau + failures)[ok]
    tt = tau[ok]
    in_band = (CLOCK_BAND_LOW * params.alpha * tau_g < tt) & (
        tt < CLOCK_BAND_HIGH * params.alpha * tau_g
    )
    prob = float(in_band.mean())
    return EventBEstimate(
        prob=prob,
        std_error=_binomial_se(prob, m),
        episodes=m,
        truncated=int(truncated.sum()),
        warning=_truncation_warning(int(truncated.sum()), episodes),
    )


class CnpEstimate(NamedTuple):
    c_hat: float
    points: list[tuple]  # ((t0 + eps)/r, 1 - prob_bottom, std_error)
    r_squared: float
    slope: float


def estimate_c_np(n: int, p: float, r: float, eps: float, episodes: int, seed: int,
                  t0_values=(0.02, 0.04, 0.06, 0.08)) -> CnpEstimate:
    """Empirical constant for the bottom-exit bound 1 - C * (t0 + eps) / r.

    Weighted least squares of (1 - prob_bottom) against (t0 + eps) / r,
    forced through the origin; the plain-regression R^2 is reported for the
    fit-quality check. Needs at least 3 start heights.
    """
    t0s = [float(t) for t in t0_values]
    if len(t0s) < 4:
        raise ParameterError("need at least 4 start heights for the fit")
    xs, ys, ses = [], [], []
    for i, t0 in enumerate(t0s):
        params = CylinderParams.from_np(n, p, r, eps, t0)
        est = estimate_bottom_exit(params, episodes, seed + i)
        xs.append((t0 + eps) / r)
        ys.append(1.0 - est.prob_bottom)
        ses.append(max(est.std_error, 1e-12))
    x = np.asarray(xs)
    y = np.asarray(ys)
    w = 1.0 / np.asarray(ses) ** 2
    c_hat = float(np.sum(w * x * y) / np.sum(w * x * x))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return CnpEstimate(
        c_hat=c_hat,
        points=list(zip(xs, ys, ses)),
        r_squared=r2,
        slope=float(slope),
    )


def _complement_density(domain: Domain, y, radii, samples: int,
                        rng: np.random.Generator) -> float:
    """Smallest complement volume fraction of B_rho(y) over the radii grid."""
    y = np.asarray([float(c) for c in y])
    n = y.shape[0]
    best = 1.0
    for rho in radii:
        pts = uniform_ball_batch(rng, samples, n, rho) + y
        frac = float((~domain.contains_many(pts)).mean())
        best = min(best, frac)
    return best


def vertical_exit_times(params: CylinderParams, episodes: int, seed: int):
    """Samples of tau~_g with exit side, straight from the vertical ruin walk.

    Returns (tau_tilde, bottom, truncated) arrays; the cap is max_steps.
    """
    rng = make_np_rng(seed, "cylinder-vertical")
    return _vertical_exit_batch(rng, params.bottom_gap_steps,
                                params.top_gap_steps, episodes,
                                params.max_steps)


class Theorem3Result(NamedTuple):
    prob_bad: float
    theta_reference: float
    std_error: float
    c_hat: float
    t0: float
    c_density: float
    episodes: int
    truncated: int


def theorem3_experiment(game_params, domain: Domain, boundary_point,
                        delta: float, lam: float, episodes: int, seed: int,
                        c_density: float | None = None,
                        c_hat: float | None = None) -> Theorem3Result:
    """End-to-end bad-event probability for the cylinder comparison.

    The cylinder has radius and height delta / 3; the start height is
    delta * lam / (3 * c_hat) with c_hat from the bottom-exit regression.
    Bad means: the horizontal walk reaches radius delta/3 before the
    vertical exit, or the exit is through the top, or the exit point fails
    to land in the complement patch B_{delta/3}(y) \\ domain. The reference
    value theta/2 is computed from the closed-form constant chain using the
    measured c_hat and the complement density at y (estimated here when not
    supplied).
    """
    from .bounds import compute_paper_constants

    n, p, eps = game_params.n, game_params.p, game_params.eps
    if math.isnan(p):
        raise ParameterError("theorem3_experiment needs a real exponent p")
    if delta <= 0 or not (0 < lam <= 1):
        raise ParameterError("need delta > 0 and lambda in (0, 1]")
    r_cyl = delta / 3.0
    if eps >= r_cyl:
        raise ParameterError("eps must be smaller than delta / 3")

    rng = make_np_rng(seed, "theorem3")
    if c_hat is None:
        grid = tuple(f * r_cyl for f in (0.02, 0.04, 0.06, 0.08))
        c_est = estimate_c_np(n, p, r_cyl, eps, max(episodes // 2, 10_000),
                              seed + 101, t0_values=grid)
        c_hat = c_est.c_hat
    if c_density is None:
        radii = [r_cyl * f for f in (0.25, 0.5, 0.75, 1.0)]
        c_density = _complement_density(domain, boundary_point, radii,
                                        200_000, rng)

    t0 = delta * lam / (3.0 * c_hat)
    t0 = min(t0, r_cyl * 0.5)  # keep the start inside the cylinder
    params = CylinderParams.from_np(n, p, r_cyl, eps, t0)

    tau, bottom, trunc_v = _vertical_exit_batch(
        rng, params.bottom_gap_steps, params.top_gap_steps, episodes,
        params.max_steps,
    )
    failures = _clock_failures(rng, np.where(trunc_v, 1, tau), params.alpha)
    truncated = trunc_v | (tau + failures > params.max_steps)
    ok = ~truncated
    m = int(ok.sum())
    if m == 0:
        raise EstimationFailureError("all cylinder walks truncated")

    reached, final = _horizontal_final_and_max(
        rng, np.where(ok, failures, 0), n, eps, r_cyl
    )
    y = np.asarray([float(c) for c in boundary_point])
    landing = final + y
    inside_patch = (np.linalg.norm(final, axis=1) < r_cyl) & (
        ~domain.contains_many(landing)
    )
    bad = (~bottom) | reached | (~inside_patch)
    prob_bad = float(bad[ok].mean())

    pc = compute_paper_constants(n, p, c_density, c_hat)
    return Theorem3Result(
        prob_bad=prob_bad,
        std_error=_binomial_se(prob_bad, m),
        theta_reference=pc.theta,
        c_hat=float(c_hat),
        t0=t0,
        c_density=float(c_density),
        episodes=m,
        truncated=int(truncated.sum()),
    )
