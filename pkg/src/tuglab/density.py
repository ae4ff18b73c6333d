"""Density of a sum of k independent uniform draws from the open eps-ball.

Three evaluation routes, used to cross-check each other:
  * exact 1D formula (alternating binomial sum, exact rationals for
    moderate k, a stable positive-weight recurrence beyond),
  * radial Fourier inversion through the ball's characteristic function
    (2/z)^{n/2} Gamma(n/2+1) J_{n/2}(z), with analytic tail bounds,
  * Monte Carlo shell histograms.

The module also carries the Bessel-zero table, the truncated Rayleigh sum
Sigma j_{nu,l}^{-2}, and the derived constants (C_n, C1, k0, C*-range,
omega_n) that the bound formulas consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, jv, sici

from .constants import CLOCK_BAND_LOW
from .errors import AccuracyError, NumericError, ParameterError
from .rngutil import make_np_rng, uniform_ball_batch

EXACT_K_CUTOFF = 64  # rational arithmetic up to here; see decisions ledger
MAX_K_1D = 170  # factorial/normalization overflows float beyond this
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_Z_CAP = 2.0e5  # quadrature upper-limit cap before declaring the target unreachable
_RAYLEIGH_L = 10_000


@dataclass(frozen=True)
class UniformBallSumSpec:
    n: int
    eps: float
    k: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.n}")
        if self.eps <= 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if self.k < 1 or self.k != int(self.k):
            raise ParameterError(f"k must be a positive integer, got {self.k}")


def h_cos_ratio(z: float) -> float:
    """h(z) = 2(1 - cos z)/z^2, continuously extended to h(0) = 1."""
    z = float(z)
    if abs(z) < 1e-4:
        z2 = z * z
        return 1.0 - z2 / 12.0 + z2 * z2 / 360.0
    return 2.0 * (1.0 - math.cos(z)) / (z * z)


def _density1d_rational(k: int, t: Fraction) -> Fraction:
    """Irwin-Hall density of k uniforms on (0,1)-width-2 cells, in t units:
    g_k(t) = (1/(k-1)!) sum_j (-1)^j C(k,j) (t-j)^{k-1}, 0 < t < k."""
    total = Fraction(0)
    jmax = int(t) if t != int(t) else int(t) - 1
    for j in range(min(jmax, k) + 1):
        term = Fraction(math.comb(k, j)) * (t - j) ** (k - 1)
        total += -term if j % 2 else term
    return total / math.factorial(k - 1)


def _density1d_recurrence(k: int, t: float) -> float:
    """Same value via the spline-order recurrence
    M_m(t) = ((t)M_{m-1}(t) + (m-t)M_{m-1}(t-1))/(m-1).

    Every contributing weight is nonnegative on the support, so the float
    error grows only polynomially in k (no alternating-sum cancellation);
    relative error is bounded by ~10*k*2^-52.
    """
    vals = [1.0 if 0.0 <= t - i < 1.0 else 0.0 for i in range(k)]
    for m in range(2, k + 1):
        for i in range(k - m + 1):
            a = t - i
            vals[i] = (a * vals[i] + (m - a) * vals[i + 1]) / (m - 1)
    return vals[0]


def density1d_exact(k: int, eps: float, x: float) -> float:
    """f_k(x) for n = 1: density at x of a sum of k uniforms on (-eps, eps).

    Exact rational arithmetic for k <= 64 (the alternating sum loses about
    one digit per summand in floating point, so the float path would break
    the 1e-8 agreement contract well before k = 50); a numerically stable
    positive-weight recurrence beyond. Zero outside (-k eps, k eps).
    """
    if k < 1 or k != int(k):
        raise ParameterError(f"k must be a positive integer, got {k}")
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if k > MAX_K_1D:
        raise NumericError(
            f"k = {k} exceeds {MAX_K_1D}: the 1D normalization overflows float "
            "range; use density_origin_inversion or mc_radial_profile"
        )
    k = int(k)
    if abs(x) >= k * eps:
        return 0.0
    if k <= EXACT_K_CUTOFF:
        fe = Fraction(float(eps))
        t = (Fraction(float(x)) + k * fe) / (2 * fe)
        g = _density1d_rational(k, t)
        return float(g / (2 * fe))
    t = (x + k * eps) / (2.0 * eps)
    return _density1d_recurrence(k, t) / (2.0 * eps)


def char_fn(n: int, eps: float, s):
    """Characteristic function of the uniform law on B_eps(0) in R^n at
    radial frequency s: (2/z)^{n/2} Gamma(n/2+1) J_{n/2}(z) with z = eps*s.

    Accepts scalars or arrays; continuous at 0 with value 1 (series there).
    """
    if n < 1:
        raise ParameterError(f"dimension must be >= 1, got {n}")
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    z = np.asarray(s, dtype=float) * eps
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(z < 0):
        raise ParameterError("radial frequency must be nonnegative")
    out = np.empty_like(z)
    small = z < 0.5
    if small.any():
        zz = z[small] ** 2
        acc = np.ones_like(zz)
        term = np.ones_like(zz)
        for m in range(1, 12):
            term = term * (-zz) / (2 * m * (n + 2 * m))
            acc += term
        out[small] = acc
    big = ~small
    if big.any():
        zb = z[big]
        nu = n / 2.0
        out[big] = (2.0 / zb) ** nu * math.gamma(nu + 1.0) * jv(nu, zb)
    return float(out[0]) if scalar else out


class InversionResult(NamedTuple):
    value: float
    error_bound: float
    cutoff: float
    panels: int


def _surface_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _panel_quadrature(breaks: np.ndarray):
    """Gauss-Legendre nodes/weights across consecutive panels."""
    lo = breaks[:-1]
    hi = breaks[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    weights = half[:, None] * _GL_WEIGHTS[None, :]
    return nodes.ravel(), weights.ravel()


def density_origin_inversion(n: int, eps: float, k: int,
                             tol: float = 1e-8) -> InversionResult:
    """f_k(0) by radial inversion: (2pi)^{-n} |S^{n-1}| eps^{-n}
    int_0^inf phi(u)^k u^{n-1} du, phi the unit-ball characteristic function.

    The integral is cut at Z with an analytic tail bound: |J_{n/2}| <= 1
    gives the generic bound; for n = 1 the sharper |sin u / u| <= 1/u is
    used, and the k = 2, n = 1 case adds the exact Si-based tail value
    instead of a bound. tol is the absolute accuracy target; the chosen
    tail contributes at most tol/2 and the reported error_bound covers it.
    """
    if n < 1:
        raise ParameterError(f"dimension must be >= 1, got {n}")
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    k = int(k)
    if n == 1:
        if k < 2:
            raise ParameterError("inversion needs k >= 2 for n = 1")
    elif k < 3:
        raise ParameterError("inversion needs k >= 3 for n >= 2")

    prefac = (2.0 * math.pi) ** (-n) * _surface_area(n) * eps ** (-n)
    budget = tol / 2.0
    exact_tail = None
    if n == 1 and k == 2:
        z_cut = 64.0 * math.pi
    elif n == 1:
        # eps^{-1} Z^{1-k} / (pi (k-1)) <= budget
        z_cut = (1.0 / (eps * math.pi * (k - 1) * budget)) ** (1.0 / (k - 1))
        z_cut = max(z_cut, 12.0)
    else:
        nu = n / 2.0
        base = math.log(prefac) + k * (nu * math.log(2.0) + math.lgamma(nu + 1.0))
        # two rigorous tails; take whichever needs the smaller cutoff:
        #   |J_nu| <= 1:                       decay kn/2 - n
        #   |J_nu(u)| <= sqrt(2/pi)(u^2-nu^2)^{-1/4}, u >= 2 nu:
        #                                      decay k(n+1)/2 - n
        candidates = []
        decay = 0.5 * k * n - n
        candidates.append((base - math.log(decay), decay, 12.0))
        sharp_decay = 0.5 * k * (n + 1) - n
        sharp_base = base + 0.5 * k * math.log(2.0 / math.pi) \
            + 0.25 * k * math.log(4.0 / 3.0) - math.log(sharp_decay)
        candidates.append((sharp_base, sharp_decay, max(12.0, 2.0 * nu)))
        z_cut = math.inf
        best_achievable = math.inf
        for log_amp, dec, floor in candidates:
            need = max(floor, math.exp((log_amp - math.log(budget)) / dec))
            z_cut = min(z_cut, need)
            best_achievable = min(
                best_achievable,
                2.0 * math.exp(log_amp - dec * math.log(_Z_CAP)),
            )
        if z_cut > _Z_CAP:
            raise AccuracyError(
                f"tail bound cannot reach tol={tol:g} below the quadrature cap; "
                f"achievable ~ {best_achievable:.3g}",
                achievable=best_achievable,
            )

    # fine panels across the central peak (width ~ sqrt((n+2)/k)), then
    # half-period panels out to the cutoff
    scale = math.sqrt((n + 2) / k)
    fine_end = min(10.0 * scale, z_cut)
    fine = np.linspace(0.0, fine_end, max(int(math.ceil(fine_end / (scale / 4))), 2))
    n_coarse = int(math.ceil((z_cut - fine_end) / (math.pi / 2)))
    breaks = fine
    if n_coarse > 0:
        coarse = np.linspace(fine_end, z_cut, n_coarse + 1)
        breaks = np.concatenate([fine, coarse[1:]])
    nodes, weights = _panel_quadrature(breaks)

    phi = char_fn(n, 1.0, nodes)
    integrand = phi**k * nodes ** (n - 1)
    value = prefac * float(np.sum(weights * integrand))

    if n == 1 and k == 2:
        si, _ = sici(2.0 * z_cut)
        exact_tail = (math.pi / 2.0 - si + math.sin(z_cut) ** 2 / z_cut) / (
            math.pi * eps
        )
        value += exact_tail
        err = 1e-13 * max(abs(value), 1.0)
    else:
        err = budget + 1e-13 * max(abs(value), 1.0)
    return InversionResult(value=value, error_bound=err,
                           cutoff=z_cut, panels=len(breaks) - 1)


def density1d_origin_bound(k: int, eps: float) -> float:
    """Upper bound on f_k(0) for n = 1:
    sqrt(3/(2 pi h(1)))/(sqrt(k) eps) + 1/(pi eps (k-1))."""
    if k < 2:
        raise ParameterError("the origin bound needs k >= 2")
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    lead = math.sqrt(3.0 / (2.0 * math.pi * h_cos_ratio(1.0)))
    return lead / (math.sqrt(k) * eps) + 1.0 / (math.pi * eps * (k - 1))


@dataclass(frozen=True)
class BesselTable:
    """First L positive zeros of J_nu, increasing."""

    nu: float
    zeros: np.ndarray
    L: int

    def __post_init__(self):
        if self.L != len(self.zeros):
            raise ParameterError("zero count mismatch")
        object.__setattr__(self, "zeros", np.asarray(self.zeros, dtype=float))
        self.zeros.setflags(write=False)

    def validate(self, residual_tol: float = 1e-12) -> None:
        resid = np.abs(jv(self.nu, self.zeros))
        if not np.all(resid < residual_tol):
            worst = int(np.argmax(resid))
            raise NumericError(
                f"zero #{worst + 1} of J_{self.nu} has residual {resid[worst]:.3g}"
            )
        if not np.all(np.diff(self.zeros) > 0):
            raise NumericError("zeros are not strictly increasing")
        if not self.zeros[0] > self.nu + 2.0:
            raise NumericError(
                f"first zero {self.zeros[0]} violates the bound nu + 2"
            )
        partial = np.cumsum(self.zeros**-2)
        limit = 1.0 / (4.0 * (self.nu + 1.0))
        if not np.all(np.diff(partial) > 0):
            raise NumericError("partial Rayleigh sums are not increasing")
        if partial[-1] > limit + 1e-9:
            raise NumericError(
                f"truncated Rayleigh sum {partial[-1]} exceeds {limit}"
            )


@lru_cache(maxsize=32)
def bessel_zeros(nu: float, L: int) -> BesselTable:
    """First L positive zeros of J_nu via bracketed root refinement seeded
    by the asymptotic spacing (zeros approach (l + nu/2 - 1/4) pi)."""
    if L < 1:
        raise ParameterError("need at least one zero")
    if nu <= 0 or (2 * nu) != int(2 * nu):
        raise ParameterError(f"order must be a positive half-integer, got {nu}")
    mu = 4.0 * nu * nu
    zeros = np.empty(L)
    prev = 0.0
    for idx in range(1, L + 1):
        b = (idx + nu / 2.0 - 0.25) * math.pi
        guess = b - (mu - 1.0) / (8.0 * b)
        lo = max(guess - 0.4 * math.pi, prev + 1e-9, nu)
        hi = guess + 0.4 * math.pi
        flo, fhi = jv(nu, lo), jv(nu, hi)
        widen = 0
        while flo * fhi > 0:
            widen += 1
            if widen > 8:
                raise NumericError(
                    f"could not bracket zero #{idx} of J_{nu}"
                )
            lo = max(lo - 0.1 * math.pi, prev + 1e-9)
            hi += 0.1 * math.pi
            flo, fhi = jv(nu, lo), jv(nu, hi)
        root = brentq(lambda z: jv(nu, z), lo, hi, xtol=1e-13, rtol=8.9e-16)
        zeros[idx - 1] = root
        prev = root
    table = BesselTable(nu=nu, zeros=zeros, L=L)
    table.validate()
    return table


def rayleigh_sum(nu: float, L: int = _RAYLEIGH_L) -> tuple[float, float]:
    """Truncated Sigma_l j_{nu,l}^{-2} plus an integral tail estimate.

    The classical closed form of the full sum is 1/(4(nu+1)); the tail
    estimate integrates the asymptotic spacing (l + nu/2 - 1/4) pi.
    """
    table = bessel_zeros(nu, L)
    partial = float(np.sum(table.zeros**-2.0))
    tail = 1.0 / (math.pi**2 * (L + nu / 2.0 - 0.25))
    return partial, tail


def bessel_product_check(nu: float, z: float, L: int):
    """Truncated product form (z/2)^nu/Gamma(nu+1) prod(1 - z^2/j_l^2)
    against direct J_nu(z). Returns (product_value, direct_value, rel_err).

    At z = 0 both normalized forms equal 1 (empty-product limit)."""
    if z == 0.0:
        return 1.0, 1.0, 0.0
    table = bessel_zeros(nu, L)
    if abs(z) >= table.zeros[-1]:
        raise ParameterError(
            f"|z| = {abs(z)} reaches the truncation point j_{nu},{L}"
        )
    prod = float(np.prod(1.0 - (z / table.zeros) ** 2))
    product_value = (z / 2.0) ** nu / math.gamma(nu + 1.0) * prod
    direct_value = float(jv(nu, z))
    denom = max(abs(direct_value), 1e-300)
    return product_value, direct_value, abs(product_value - direct_value) / denom


class DensityConstants(NamedTuple):
    C_n: float
    C1: float
    k0: int
    cstar_max: float
    omega_n: float
    c1: float
    c2: float
    rayleigh: float


@lru_cache(maxsize=16)
def paper_constants(n: int) -> DensityConstants:
    """The constant chain for dimension n.

    c1 is the origin-density coefficient driven by the Rayleigh sum of
    Bessel-zero reciprocal squares; c2 comes from the first zero; C_n is
    twice their max and bounds f_k(0)(sqrt(k) eps)^n above. C1 solves
    4n exp(-C^2/(2n)) = 0.01; k0 is the first k > 2 with
    q^k/(k-2) <= k^{-n/2}; cstar_max keeps the lower-bound coefficient
    positive; omega_n is the unit-ball volume.
    """
    if n < 1:
        raise ParameterError(f"dimension must be >= 1, got {n}")
    nu = n / 2.0
    gamma_half = math.gamma(nu + 1.0)
    omega_n = math.pi**nu / gamma_half
    partial, tail = rayleigh_sum(nu)
    ssum = partial + tail
    moment = n * math.gamma(nu) / 2.0  # n * int_0^inf e^{-t^2} t^{n-1} dt
    c1 = moment / (gamma_half * math.pi**nu * 2.0**n * ssum**nu)
    j1 = float(bessel_zeros(nu, 1).zeros[0])
    c2 = j1**n / (2.0 ** (n - 1) * gamma_half * math.pi**nu)
    C_n = 2.0 * max(c1, c2)
    C1 = math.sqrt(2.0 * n * math.log(400.0 * n))
    q = (2.0 / j1) ** nu * gamma_half
    k0 = 3
    while q**k0 / (k0 - 2) > k0 ** (-nu):
        k0 += 1
        if k0 > 10**6:
            raise NumericError("k0 search did not terminate")
    cstar_max = (CLOCK_BAND_LOW / (omega_n * C_n)) ** (1.0 / n)
    return DensityConstants(C_n=C_n, C1=C1, k0=k0, cstar_max=cstar_max,
                            omega_n=omega_n, c1=c1, c2=c2, rayleigh=ssum)


def _sample_sum_norms(n: int, eps: float, k: int, samples: int,
                      rng: np.random.Generator, chunk: int = 250_000):
    """Norms of k-fold uniform-ball sums, streamed in chunks."""
    out = np.empty(samples)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        acc = np.zeros((m, n))
        for _ in range(k):
            acc += uniform_ball_batch(rng, m, n, eps)
        out[done:done + m] = np.linalg.norm(acc, axis=1)
        done += m
    return out


class LowerBoundCheck(NamedTuple):
    mc_value: float
    bound: float
    passed: bool
    std_error: float
    samples: int


def lower_bound_check(n: int, eps: float, k: int, cstar: float,
                      samples: int, seed: int) -> LowerBoundCheck:
    """Monte Carlo density at radius cstar sqrt(k) eps against the closed
    lower bound (1/C1)^n (0.99/omega_n - C_n cstar^n) (sqrt(k) eps)^{-n}.

    The density is estimated on a spherical shell of width 0.05 sqrt(k) eps
    centered on that radius; passed means mc >= bound - 3 std errors.
    """
    consts = paper_constants(n)
    if k < consts.k0:
        raise ParameterError(f"lower bound needs k >= k0 = {consts.k0}")
    limit = min(consts.cstar_max, consts.C1)
    if not (0.0 < cstar < limit):
        raise ParameterError(
            f"cstar must lie in (0, {limit:.6g}) (C* constraint), got {cstar}"
        )
    scale = math.sqrt(k) * eps
    radius = cstar * scale
    width = 0.05 * scale
    lo = max(radius - width / 2.0, 0.0)
    hi = radius + width / 2.0
    rng = make_np_rng(seed, "lower-bound", n, k)
    norms = _sample_sum_norms(n, eps, k, samples, rng)
    count = int(np.count_nonzero((norms >= lo) & (norms < hi)))
    shell_vol = consts.omega_n * (hi**n - lo**n)
    p_hat = count / samples
    mc_value = p_hat / shell_vol
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / samples) / shell_vol
    bound = (
        (1.0 / consts.C1) ** n
        * (CLOCK_BAND_LOW / consts.omega_n - consts.C_n * cstar**n)
        * scale ** (-n)
    )
    return LowerBoundCheck(mc_value=mc_value, bound=bound,
                           passed=mc_value >= bound - 3.0 * se,
                           std_error=se, samples=samples)


@dataclass
class RadialDensityProfile:
    """f_k sampled on a radius grid. radii are bin centers for histogram
    methods; values are densities in R^n (per unit n-volume)."""

    radii: np.ndarray
    values: np.ndarray
    method: str
    mass_check: float
    std_errors: np.ndarray | None = None

    def validate(self) -> None:
        if self.method not in ("exact1d", "inversion", "monte_carlo"):
            raise ParameterError(f"unknown method {self.method!r}")
        if np.any(self.values < 0):
            raise NumericError("negative density value in profile")
        diffs = np.diff(self.values)
        if self.method == "monte_carlo":
            if self.std_errors is None:
                raise NumericError("monte_carlo profile lacks std errors")
            comb = 3.0 * np.hypot(self.std_errors[1:], self.std_errors[:-1])
            if np.any(diffs > comb + 1e-15):
                raise NumericError("profile increases beyond 3-sigma bin noise")
            tol = 1e-2
        else:
            if np.any(diffs > 1e-12):
                raise NumericError("exact profile is not nonincreasing")
            tol = 1e-8
        if not (1.0 - tol <= self.mass_check <= 1.0 + tol):
            raise NumericError(f"profile mass {self.mass_check} outside tolerance")


def mc_radial_profile(n: int, eps: float, k: int, samples: int, bins: int,
                      seed: int) -> RadialDensityProfile:
    """Shell-histogram estimate of the radial density profile on [0, k eps].

    Empty bins get value 0 with std error 0; their relative error is
    infinite, flagged via std_errors (0/0), and they only occur in the far
    tail where the true density underflows.
    """
    if samples < 10**4:
        raise ParameterError("need at least 1e4 samples")
    if bins < 10:
        raise ParameterError("need at least 10 bins")
    rng = make_np_rng(seed, "mc-profile", n, k, bins)
    norms = _sample_sum_norms(n, eps, k, samples, rng)
    edges = np.linspace(0.0, k * eps, bins + 1)
    counts, _ = np.histogram(norms, bins=edges)
    vols = paper_constants(n).omega_n * (edges[1:] ** n - edges[:-1] ** n)
    values = counts / (samples * vols)
    ses = np.sqrt(counts) / (samples * vols)
    centers = 0.5 * (edges[1:] + edges[:-1])
    mass = float(counts.sum()) / samples  # support lies inside the grid
    return RadialDensityProfile(radii=centers, values=values,
                                method="monte_carlo", mass_check=mass,
                                std_errors=ses)
