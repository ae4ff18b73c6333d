"""Core two-player tug-of-war game with noise.

Each round an unfair three-way coin is tossed: with probability alpha/2
player 1 picks the next position, with alpha/2 player 2 picks it, and with
beta = 1 - alpha the next position is uniform in the open eps-ball around
the current one, where alpha = (p - 2) / (p + n). Chosen targets must lie
strictly inside the same ball. The game stops the first time the position
leaves the open domain; the exit point then sits in the closed eps-strip
outside the boundary and the payoff is evaluated there.

Coin coding: 0 = player-1 win, 1 = player-2 win, 2 = random move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, NamedTuple, Sequence

from .errors import (
    EstimationFailureError,
    ParameterError,
    StrategyViolationError,
    TruncationError,
)
from .geometry import Domain
from .rngutil import make_rng, uniform_ball_point


class CoinOutcome(IntEnum):
    P1_WIN = 0
    P2_WIN = 1
    RANDOM = 2


@dataclass(frozen=True)
class GameParams:
    """Game parameters. Use from_np for the canonical (n, p, eps) build.

    diagnostic=True marks parameter sets whose alpha was forced by hand
    (pure-noise or pure-tug limits used in oracle tests); those do not
    correspond to any admissible p.
    """

    n: int
    p: float
    eps: float
    alpha: float
    beta: float
    diagnostic: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.n}")
        if self.eps <= 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ParameterError("alpha + beta must equal 1")

    @classmethod
    def from_np(cls, n: int, p: float, eps: float) -> "GameParams":
        if p <= 2:
            raise ParameterError(f"p must exceed 2, got {p}")
        if n < 1:
            raise ParameterError(f"dimension must be >= 1, got {n}")
        alpha = (p - 2) / (p + n)
        return cls(n=n, p=p, eps=eps, alpha=alpha, beta=1.0 - alpha)

    @classmethod
    def diagnostic_alpha(cls, n: int, eps: float, alpha: float) -> "GameParams":
        """Parameter set with alpha forced; p is recorded as NaN."""
        return cls(
            n=n,
            p=float("nan"),
            eps=eps,
            alpha=float(alpha),
            beta=1.0 - float(alpha),
            diagnostic=True,
        )


def compute_probabilities(n: int, p: float) -> tuple[float, float]:
    """(alpha, beta) for the three-way coin: alpha = (p-2)/(p+n)."""
    if p <= 2:
        raise ParameterError(f"p must exceed 2, got {p}")
    if n < 1:
        raise ParameterError(f"dimension must be >= 1, got {n}")
    alpha = (p - 2) / (p + n)
    return alpha, (n + 2) / (p + n)


class MoveDecomposition(NamedTuple):
    p1: list[tuple]
    p2: list[tuple]
    random: list[tuple]


@dataclass
class GameTrace:
    """Full record of one episode.

    positions[0] is the start, positions[tau] the exit point (the first
    position outside the domain). coins[j] produced the move from
    positions[j] to positions[j+1], so len(coins) == tau.
    """

    positions: list[tuple]
    coins: list[int]
    tau: int
    exit_point: tuple
    payoff: float

    @property
    def move_decomposition(self) -> MoveDecomposition:
        dec = MoveDecomposition([], [], [])
        for j, c in enumerate(self.coins):
            prev = self.positions[j]
            nxt = self.positions[j + 1]
            move = tuple(b - a for a, b in zip(prev, nxt))
            dec[c].append(move)
        return dec

    def validate(self, params: GameParams, domain: Domain, tol: float = 1e-9):
        """Assert the structural trace invariants; raises AssertionError."""
        assert len(self.positions) == self.tau + 1
        assert len(self.coins) == self.tau
        for j in range(self.tau):
            assert domain.contains(self.positions[j]), f"position {j} not interior"
            step_len = math.dist(self.positions[j], self.positions[j + 1])
            assert step_len < params.eps + tol, f"move {j} too long: {step_len}"
        assert not domain.contains(self.positions[self.tau])
        assert self.exit_point == self.positions[self.tau]
        # decomposition identity: x_j = x_0 + sum of the three move groups
        run = list(self.positions[0])
        for j, c in enumerate(self.coins):
            prev = self.positions[j]
            nxt = self.positions[j + 1]
            for i in range(len(run)):
                run[i] += nxt[i] - prev[i]
            drift = math.dist(run, self.positions[j + 1])
            assert drift <= tol * (j + 1) + 1e-12, f"decomposition drift {drift} at {j}"


def _validate_target(player: str, current, target, eps: float) -> tuple:
    target = tuple(float(t) for t in target)
    d = math.dist(current, target)
    if d >= eps:
        raise StrategyViolationError(player, d, eps)
    return target


def draw_coin(params: GameParams, rng) -> CoinOutcome:
    """The three-way coin: P1 with alpha/2, P2 with alpha/2, random with beta."""
    u = rng.random()
    half = params.alpha / 2.0
    if u < half:
        return CoinOutcome.P1_WIN
    if u < params.alpha:
        return CoinOutcome.P2_WIN
    return CoinOutcome.RANDOM


def step(params: GameParams, domain: Domain, current, s1, s2, history, rng):
    """One round from `current`. Returns (next_position, coin).

    history is the (positions, coins) pair accumulated so far; it is passed
    through to the deciding strategy untouched. The rng needs .random() and
    .gauss() (random.Random interface).
    """
    coin = draw_coin(params, rng)
    if coin == CoinOutcome.P1_WIN:
        target = _validate_target(
            "player1", current, s1.decide(params, domain, history), params.eps
        )
    elif coin == CoinOutcome.P2_WIN:
        target = _validate_target(
            "player2", current, s2.decide(params, domain, history), params.eps
        )
    else:
        move = uniform_ball_point(rng, params.n, params.eps)
        target = tuple(c + m for c, m in zip(current, move))
    return target, int(coin)


def default_max_steps(params: GameParams, domain: Domain) -> int:
    """Step budget: 50 * (diam / eps)^2, the diffusive scale with headroom."""
    diam = domain.diameter()
    return int(math.ceil(50.0 * (diam / params.eps) ** 2))


def play_episode(
    params: GameParams,
    domain: Domain,
    x0,
    s1,
    s2,
    payoff: Callable,
    rng,
    max_steps: int | None = None,
    payoff_bound: float | None = None,
) -> GameTrace:
    """Play one episode to the exit and evaluate the payoff there.

    Raises TruncationError (carrying the partial trace) if the budget runs
    out, and StrategyViolationError on an illegal target.
    """
    x0 = tuple(float(c) for c in x0)
    if not domain.contains(x0):
        raise ParameterError(f"start {x0} is not an interior point")
    if max_steps is None:
        max_steps = default_max_steps(params, domain)

    positions = [x0]
    coins: list[int] = []
    s1.reset(params, domain, x0)
    s2.reset(params, domain, x0)

    current = x0
    while domain.contains(current):
        if len(coins) >= max_steps:
            raise TruncationError(
                f"episode exceeded {max_steps} steps",
                partial=GameTrace(positions, coins, len(coins), current, float("nan")),
            )
        nxt, coin = step(params, domain, current, s1, s2, (positions, coins), rng)
        positions.append(nxt)
        coins.append(coin)
        s1.observe(params, domain, coin, current, nxt)
        s2.observe(params, domain, coin, current, nxt)
        current = nxt

    value = float(payoff(current))
    if payoff_bound is not None and abs(value) > payoff_bound:
        raise ParameterError(
            f"payoff {value} exceeds the declared bound {payoff_bound}"
        )
    return GameTrace(positions, coins, len(coins), current, value)


class ValueEstimate(NamedTuple):
    mean: float
    std_error: float
    episodes: int
    truncated: int


def estimate_value(
    params: GameParams,
    domain: Domain,
    x0,
    s1,
    s2,
    payoff: Callable,
    episodes: int,
    seed: int,
    max_steps: int | None = None,
    payoff_bound: float | None = None,
) -> ValueEstimate:
    """Monte Carlo value estimate over independently seeded episodes.

    Episode k runs on a seed derived from (seed, "episode", k), so the
    result is reproducible and independent of any execution interleaving.
    Truncated episodes are excluded from the mean and counted.
    """
    if episodes < 1:
        raise ParameterError("episodes must be >= 1")
    values = []
    truncated = 0
    for k in range(episodes):
        rng = make_rng(seed, "episode", k)
        try:
            trace = play_episode(
                params, domain, x0, s1, s2, payoff, rng,
                max_steps=max_steps, payoff_bound=payoff_bound,
            )
        except TruncationError:
            truncated += 1
            continue
        values.append(trace.payoff)
    if not values:
        raise EstimationFailureError(
            f"all {episodes} episodes truncated; no estimate available"
        )
    m = len(values)
    mean = math.fsum(values) / m
    if m > 1:
        var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
        std_error = math.sqrt(var / m)
    else:
        std_error = float("nan")
    return ValueEstimate(mean, std_error, m, truncated)
