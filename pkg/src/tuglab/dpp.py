"""Grid value iteration for the eps-game value.

The operator is the one induced by the game's transition kernel,

    (T u)(x) = (alpha/2) [ max_{B_eps(x)} u + min_{B_eps(x)} u ]
             + beta * mean_{B_eps(x)} u,

discretized on a uniform lattice with the closed grid ball
{nodes at distance <= eps}. Strip nodes (outside the domain but within
eps of an interior node) carry the boundary payoff and never update;
exterior nodes are ignored. Sweeps are synchronous (Jacobi), so a run is
reproducible regardless of iteration order.

The open-ball sup/inf of the continuum operator differs from the closed
grid ball by O(h); that discretization bias is accepted and the contract
tolerances account for it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .errors import NonConvergenceError, ParameterError
from .game import GameParams, ValueEstimate, estimate_value
from .geometry import Domain
from .strategies import Strategy

EXTERIOR, INTERIOR, STRIP = 0, 1, 2
DEFAULT_MAX_ITERS = 10**6


def _ball_footprint(ndim: int, eps: float, h: float) -> np.ndarray:
    """Boolean stencil of lattice offsets with euclidean length <= eps."""
    reach = int(math.floor(eps / h + 1e-9))
    rng = np.arange(-reach, reach + 1)
    grids = np.meshgrid(*([rng] * ndim), indexing="ij")
    dist2 = sum((g * h) ** 2 for g in grids)
    return dist2 <= eps * eps * (1.0 + 1e-12)


@dataclass
class GridValueField:
    """Converged (or partially converged) value field on the lattice.

    axes: per-dimension node coordinates; values: field (NaN on exterior
    nodes); classification: 0 exterior, 1 interior, 2 strip.
    """

    axes: tuple
    values: np.ndarray
    classification: np.ndarray
    eps: float
    alpha: float
    beta: float
    h: float
    iterations: int
    final_residual: float
    residual_history: np.ndarray

    def interpolate(self, x) -> float:
        """Multilinear interpolation of the field at x."""
        interp = RegularGridInterpolator(self.axes, self.values, method="linear",
                                         bounds_error=True)
        val = float(interp(np.asarray(x, dtype=float))[0])
        if math.isnan(val):
            raise ParameterError(
                f"point {tuple(x)} touches exterior nodes; move it inside"
            )
        return val

    def dpp_residual(self) -> float:
        """Sup over interior nodes of |T u - u| for the converged field."""
        new = _apply_operator(self.values, self.classification, self.eps,
                              self.alpha, self.beta, self.h)
        mask = self.classification == INTERIOR
        return float(np.max(np.abs(new[mask] - self.values[mask])))

    def node_count(self, kind: int) -> int:
        return int(np.count_nonzero(self.classification == kind))

    def to_csv(self, path) -> None:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        names = {EXTERIOR: "exterior", INTERIOR: "interior", STRIP: "strip"}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [f"x{i}" for i in range(len(self.axes))] + ["class", "value"]
            )
            flat_class = self.classification.ravel()
            flat_vals = self.values.ravel()
            coords = [m.ravel() for m in mesh]
            for idx in range(flat_vals.size):
                row = [f"{c[idx]:.12g}" for c in coords]
                row.append(names[int(flat_class[idx])])
                v = flat_vals[idx]
                row.append("nan" if math.isnan(v) else f"{v:.12g}")
                writer.writerow(row)


def _apply_operator(values, classification, eps, alpha, beta, h):
    """One synchronous sweep; strip and exterior nodes pass through."""
    fp = _ball_footprint(values.ndim, eps, h)
    active = classification != EXTERIOR
    vals = np.where(active, values, 0.0)
    neg = np.where(active, values, -np.inf)
    pos = np.where(active, values, np.inf)
    vmax = ndimage.maximum_filter(neg, footprint=fp, mode="constant", cval=-np.inf)
    vmin = ndimage.minimum_filter(pos, footprint=fp, mode="constant", cval=np.inf)
    kern = fp.astype(float)
    sums = ndimage.correlate(vals, kern, mode="constant", cval=0.0)
    counts = ndimage.correlate(active.astype(float), kern, mode="constant", cval=0.0)
    # far-exterior nodes see no active neighbors (inf - inf, 0/0); they are
    # masked out below, so the invalid values never propagate
    with np.errstate(invalid="ignore"):
        mean = sums / counts
        new = 0.5 * alpha * (vmax + vmin) + beta * mean
    return np.where(classification == INTERIOR, new, values)


def build_grid(domain: Domain, eps: float, h: float):
    """Lattice covering the eps-fattened bounding box, with classification."""
    lo = np.asarray(domain.lo, dtype=float)
    hi = np.asarray(domain.hi, dtype=float)
    pad = eps + h
    axes = []
    for a, b in zip(lo, hi):
        count = int(math.ceil((b - a + 2 * pad) / h)) + 1
        axes.append((a - pad) + h * np.arange(count))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    interior = domain.contains_many(points).reshape(mesh[0].shape)
    fp = _ball_footprint(len(axes), eps, h)
    near = ndimage.binary_dilation(interior, structure=fp)
    classification = np.full(interior.shape, EXTERIOR, dtype=np.int8)
    classification[near & ~interior] = STRIP
    classification[interior] = INTERIOR
    return tuple(axes), classification


def solve_dpp(params: GameParams, domain: Domain, payoff, h: float,
              tol_dpp: float | None = None,
              max_iters: int = DEFAULT_MAX_ITERS) -> GridValueField:
    """Fixed-point iteration from 0 on the interior, strip held at the payoff.

    Stops when the sup-norm update drops below tol_dpp (default
    1e-9 * payoff range, floored at 1e-12 for constant payoffs). Raises
    NonConvergenceError carrying the residual history if max_iters hits.
    """
    if h <= 0 or h > params.eps / 4.0:
        raise ParameterError(
            f"grid step h = {h} must satisfy 0 < h <= eps/4 = {params.eps / 4.0}"
        )
    axes, classification = build_grid(domain, params.eps, h)
    mesh = np.meshgrid(*axes, indexing="ij")
    values = np.full(mesh[0].shape, np.nan)
    strip_mask = classification == STRIP
    strip_points = np.stack([m[strip_mask] for m in mesh], axis=1)
    strip_vals = np.array([float(payoff(pt)) for pt in strip_points])
    if strip_vals.size and not np.all(np.isfinite(strip_vals)):
        raise ParameterError("payoff must be finite on the boundary strip")
    values[strip_mask] = strip_vals
    values[classification == INTERIOR] = 0.0
    if tol_dpp is None:
        rng_f = float(strip_vals.max() - strip_vals.min()) if strip_vals.size else 0.0
        tol_dpp = max(1e-9 * rng_f, 1e-12)

    interior_mask = classification == INTERIOR
    history = []
    residual = math.inf
    for it in range(1, max_iters + 1):
        new = _apply_operator(values, classification, params.eps,
                              params.alpha, params.beta, h)
        residual = float(np.max(np.abs(new[interior_mask] - values[interior_mask])))
        history.append(residual)
        values = new
        if residual < tol_dpp:
            return GridValueField(
                axes=axes, values=values, classification=classification,
                eps=params.eps, alpha=params.alpha, beta=params.beta, h=h,
                iterations=it, final_residual=residual,
                residual_history=np.asarray(history),
            )
    raise NonConvergenceError(
        f"value iteration still moving {residual:.3e} > tol {tol_dpp:.3e} "
        f"after {max_iters} sweeps",
        residuals=history,
    )


class GridGreedyStrategy(Strategy):
    """Plays the argmax (or argmin) of a converged field over lattice nodes
    strictly inside the open eps-ball around the current position.

    Reading strategies off the field is how the solver's fixed point is
    certified against direct play.
    """

    def __init__(self, fld: GridValueField, mode: str):
        if mode not in ("max", "min"):
            raise ParameterError(f"mode must be max or min, got {mode!r}")
        self.field = fld
        self.mode = mode
        self.name = f"grid-greedy-{mode}"

    def decide(self, params, domain, history):
        positions, _ = history
        cur = np.asarray(positions[-1], dtype=float)
        fld = self.field
        slices, coords = [], []
        for axis_vals, c in zip(fld.axes, cur):
            lo = np.searchsorted(axis_vals, c - params.eps, side="left")
            hi = np.searchsorted(axis_vals, c + params.eps, side="right")
            slices.append(slice(lo, hi))
            coords.append(axis_vals[lo:hi])
        block = fld.values[tuple(slices)]
        cls = fld.classification[tuple(slices)]
        mesh = np.meshgrid(*coords, indexing="ij")
        dist2 = sum((m - c) ** 2 for m, c in zip(mesh, cur))
        ok = (dist2 < params.eps**2 * (1.0 - 1e-12)) & (cls != EXTERIOR)
        if not ok.any():
            return tuple(cur)
        vals = np.where(ok, block, -np.inf if self.mode == "max" else np.inf)
        idx = np.unravel_index(
            np.argmax(vals) if self.mode == "max" else np.argmin(vals),
            vals.shape,
        )
        return tuple(float(m[idx]) for m in mesh)


def compare_mc_vs_dpp(params: GameParams, domain: Domain, payoff, x0,
                      episodes: int, h: float, seed: int,
                      tol_dpp: float | None = None):
    """Monte Carlo value under field-greedy play vs the interpolated field.

    Returns (mc: ValueEstimate, dpp: float, gap: float). The MC side uses
    Player 1 = argmax greedy, Player 2 = argmin greedy over the same field.
    """
    fld = solve_dpp(params, domain, payoff, h, tol_dpp=tol_dpp)
    s1 = GridGreedyStrategy(fld, "max")
    s2 = GridGreedyStrategy(fld, "min")
    mc: ValueEstimate = estimate_value(
        params, domain, x0, s1, s2, payoff, episodes, seed
    )
    dpp = fld.interpolate(x0)
    return mc, dpp, abs(mc.mean - dpp)
