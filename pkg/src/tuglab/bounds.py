"""Closed-form inequality right-hand sides and exact identities.

Everything here is a pure formula evaluator: Hoeffding-style exit bounds
for bounded-increment walks, the two-sided Gaussian tail, the reflection
identity for the running maximum of a +/-1 walk (exact rationals), the
sin-ratio inequality scan, and the derived constant chain
nu -> C-tilde -> theta that the regularity experiments report against.

Empirical counterparts live in `cylinder`; the cross checks pairing them
with these bounds are wired as tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.special import erfc

from .constants import CLOCK_BAND_LOW, CLOCK_SLACK, CLOCK_SERIES_SCALE
from .density import h_cos_ratio, paper_constants
from .errors import EnumerationSizeError, ParameterError
from .game import compute_probabilities

_ENUMERATION_MAX_N = 24
_SIN_GRID_STEP = 1e-4


def hoeffding_bound(N: int, b: float, n: int, lam: float) -> float:
    """Exit-probability bound for an n-dimensional walk of N centered
    increments with per-coordinate range b: 4n exp(-lam^2/(2 N b^2 n)).

    The factor 4n covers the union over coordinates and both signs of the
    running-maximum reduction. The value may exceed 1 (vacuous regime);
    callers clamp only for display.
    """
    if N < 1:
        raise ParameterError(f"N must be >= 1, got {N}")
    if b <= 0:
        raise ParameterError(f"b must be positive, got {b}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if lam < 0:
        raise ParameterError(f"lambda must be nonnegative, got {lam}")
    return 4.0 * n * math.exp(-(lam * lam) / (2.0 * N * b * b * n))


def gaussian_tail(l: float) -> float:
    """Two-sided standard normal tail (2/sqrt(2 pi)) int_l^inf e^{-s^2/2} ds,
    i.e. erfc(l/sqrt(2)). Maps 0 -> 1, 1.96 -> ~0.05, inf -> 0."""
    if l < 0:
        raise ParameterError(f"l must be nonnegative, got {l}")
    return float(erfc(l / math.sqrt(2.0)))


def reflection_identity_check(N: int, l: int):
    """Exact check of P(max_{m<=N} S_m >= l) = 2 P(S_N >= l) - P(S_N = l)
    for the simple +/-1 walk, by full enumeration of all 2^N paths.

    Returns (lhs, rhs, equal) with both sides as Fractions.
    """
    if N < 1 or N != int(N):
        raise ParameterError(f"N must be a positive integer, got {N}")
    if l < 1 or l != int(l):
        raise ParameterError(f"l must be a positive integer, got {l}")
    if N > _ENUMERATION_MAX_N:
        raise EnumerationSizeError(
            f"N = {N} needs 2^{N} paths; enumeration is capped at "
            f"N = {_ENUMERATION_MAX_N}"
        )
    N, l = int(N), int(l)
    total = 1 << N
    shifts = np.arange(N, dtype=np.uint32)
    chunk = 1 << min(N, 18)
    count_max = count_ge = count_eq = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.uint32)
        incr = (((idx[:, None] >> shifts[None, :]) & 1) * 2 - 1).astype(np.int8)
        sums = np.cumsum(incr, axis=1, dtype=np.int32)
        count_max += int(np.count_nonzero(sums.max(axis=1) >= l))
        final = sums[:, -1]
        count_ge += int(np.count_nonzero(final >= l))
        count_eq += int(np.count_nonzero(final == l))
    lhs = Fraction(count_max, total)
    rhs = 2 * Fraction(count_ge, total) - Fraction(count_eq, total)
    return lhs, rhs, lhs == rhs


def sin_inequality_check(m: float) -> float:
    """Grid scan of the slack (1 - h(m) z^2 / 6) - sin(z)/z on [0, m],
    h(z) = 2(1 - cos z)/z^2, at step 1e-4.

    Returns the most negative slack seen (>= -1e-12 when the inequality
    holds up to float rounding; the slack is 0 in the z -> 0 limit).
    """
    if not (0.0 < m <= 2.0 * math.pi):
        raise ParameterError(f"m must lie in (0, 2 pi], got {m}")
    z = np.arange(0.0, m + _SIN_GRID_STEP / 2.0, _SIN_GRID_STEP)
    z[-1] = min(z[-1], m)
    ratio = np.sinc(z / math.pi)  # sin(z)/z with the limit value 1 at 0
    slack = (1.0 - h_cos_ratio(m) * z * z / 6.0) - ratio
    return float(slack.min())


def nu_from_probs(alpha: float, beta: float) -> float:
    """The clock-speed constant 2 sqrt((beta + 0.01 alpha)/(0.99 alpha))."""
    if not (0.0 < alpha <= 1.0):
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    if beta < 0:
        raise ParameterError(f"beta must be nonnegative, got {beta}")
    return 2.0 * math.sqrt(
        (beta + CLOCK_SLACK * alpha) / (CLOCK_BAND_LOW * alpha)
    )


@dataclass(frozen=True)
class PaperConstants:
    """Derived constant chain for one (n, p, domain) configuration.

    ctilde_np and theta_np inherit the empirical exit-rate constant, so
    their provenance is 'empirical'; nu_np is closed-form.
    """

    nu_np: float
    ctilde_np: float
    theta_np: float
    theta: float
    c_density: float
    provenance: dict = field(default_factory=dict)
    cstar: float = 0.0

    def report_lines(self) -> list[str]:
        rows = [
            ("nu_np", self.nu_np),
            ("ctilde_np", self.ctilde_np),
            ("theta_np", self.theta_np),
            ("theta", self.theta),
            ("c_density", self.c_density),
            ("cstar", self.cstar),
        ]
        out = []
        for name, val in rows:
            tag = self.provenance.get(name, "analytic")
            out.append(f"{name} = {val!r}  [{tag}]")
        return out


def compute_paper_constants(
    n: int,
    p: float,
    c_density: float,
    C_np_empirical: float,
    cstar: float | None = None,
    c_density_provenance: str = "empirical",
) -> PaperConstants:
    """Assemble nu, C-tilde and theta for dimension n and exponent p.

    theta_np = omega_n c (C*/C1)^n (0.99/omega_n - C_n C*^n) gaussian_tail(C~/3)
    with C~ = nu / C_hat; theta = theta_np / 2. C* defaults to half its
    admissible maximum. A C* at or beyond cstar_max drives the middle
    factor nonpositive, which is rejected rather than clamped.
    """
    if p <= 2:
        raise ParameterError(f"p must exceed 2, got {p}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not (0.0 < c_density <= 1.0):
        raise ParameterError(f"c_density must lie in (0, 1], got {c_density}")
    if C_np_empirical <= 0:
        raise ParameterError("empirical exit-rate constant must be positive")
    if c_density_provenance not in ("analytic", "empirical"):
        raise ParameterError(f"bad provenance tag {c_density_provenance!r}")
    alpha, beta = compute_probabilities(n, p)
    dens = paper_constants(n)
    if cstar is None:
        cstar = dens.cstar_max / 2.0
    if not (0.0 < cstar < dens.C1):
        raise ParameterError(f"cstar must lie in (0, C1={dens.C1:.4g})")
    nu = nu_from_probs(alpha, beta)
    ctilde = nu / C_np_empirical
    inner = CLOCK_BAND_LOW / dens.omega_n - dens.C_n * cstar**n
    theta_np = (
        dens.omega_n
        * c_density
        * (cstar / dens.C1) ** n
        * inner
        * gaussian_tail(ctilde / 3.0)
    )
    if theta_np <= 0.0:
        raise ParameterError(
            f"theta_np = {theta_np:.4g} <= 0; C* = {cstar:.4g} is too large "
            f"(admissible maximum {dens.cstar_max:.4g})"
        )
    provenance = {
        "nu_np": "analytic",
        "ctilde_np": "empirical",
        "theta_np": "empirical",
        "theta": "empirical",
        "c_density": c_density_provenance,
        "cstar": "analytic",
    }
    return PaperConstants(
        nu_np=nu,
        ctilde_np=ctilde,
        theta_np=theta_np,
        theta=theta_np / 2.0,
        c_density=c_density,
        provenance=provenance,
        cstar=cstar,
    )


class ClockLowerBound(NamedTuple):
    """Descriptor of the 1 - O(eps) lower bound on the composite clock lag.

    value = 1 - series_term - vertical_term; the additional O(eps) slack
    has no explicit constant and is carried symbolically in `slack_note`.
    """

    value: float
    series_term: float
    vertical_term: float
    start_index: int
    slack_note: str


def clock_series_tail(gamma: float, J: int) -> float:
    """Closed form of sum_{j >= J} exp(-gamma j) = e^{-gamma J}/(1 - e^{-gamma})."""
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if J < 0:
        raise ParameterError(f"J must be nonnegative, got {J}")
    return math.exp(-gamma * J) / (-math.expm1(-gamma))


def lemmaA_clock_bounds(n: int, p: float, r: float, t0: float, eps: float,
                        a: float, d: float):
    """Explicit pieces of the clock-lag bounds.

    Lower side: P(composite lag >= a/eps) >= 1 - sum_{j >= a/eps}
    8 exp(-alpha^2 j / (2*10^4)) - 4 exp(-min(t0, r-t0)^2/(2 a eps)),
    returned as a descriptor (the remaining O(eps) term is symbolic).
    Upper side: P(vertical exit count >= d eps^-2) <=
    1 - gaussian_tail(2 min(t0, r-t0)/sqrt(d)) plus symbolic O(eps).
    """
    if a <= 0 or d <= 0:
        raise ParameterError("a and d must be positive")
    if not (0.0 < t0 < r):
        raise ParameterError(f"t0 must lie in (0, r), got t0={t0}, r={r}")
    if eps <= 0 or eps >= r:
        raise ParameterError(f"eps must lie in (0, r), got {eps}")
    alpha, _ = compute_probabilities(n, p)
    gap = min(t0, r - t0)
    gamma = alpha * alpha / (2.0 * CLOCK_SERIES_SCALE)
    start = int(math.ceil(a / eps))
    series = 8.0 * clock_series_tail(gamma, start)
    vertical = 4.0 * math.exp(-(gap * gap) / (2.0 * a * eps))
    lower = ClockLowerBound(
        value=1.0 - series - vertical,
        series_term=series,
        vertical_term=vertical,
        start_index=start,
        slack_note="minus an O(eps) remainder with no explicit constant",
    )
    upper_eps2 = 1.0 - gaussian_tail(2.0 * gap / math.sqrt(d))
    return lower, upper_eps2
