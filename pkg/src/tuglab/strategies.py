"""Strategies: decision functions plus per-episode internal state.

A strategy exposes reset/decide/observe. decide is called only on the
rounds this player wins and must return a target strictly inside the open
eps-ball around the current position; observe is called after every round
(whoever moved), which is how stateful strategies track the history.

The cancellation strategy is the interesting one: it undoes the opponent's
moves first-in-first-out, spends surplus wins on a fixed inward drift of
length eps/2, and on reaching a surplus of M = 2*ceil(|x0 - anchor| / eps)
it jumps so the position equals anchor plus the accumulated random noise.
The M arithmetic guarantees that jump is legal.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .errors import InternalInvariantError, ParameterError
from .game import CoinOutcome, GameParams
from .geometry import Domain


class Strategy:
    """Base strategy: stand still (legal: the current point is in the open ball)."""

    name = "stand-still"

    def reset(self, params: GameParams, domain: Domain, x0) -> None:
        pass

    def decide(self, params: GameParams, domain: Domain, history):
        positions, _ = history
        return positions[-1]

    def observe(self, params: GameParams, domain: Domain, coin, prev, new) -> None:
        pass


class PullStrategy(Strategy):
    """Move a fixed fraction of eps straight toward a target point, without
    overshooting. fraction must be < 1 so the move stays strictly inside."""

    def __init__(self, target, fraction: float = 0.5, name: str | None = None):
        if not (0.0 < fraction < 1.0):
            raise ParameterError("pull fraction must lie in (0, 1)")
        self.target = tuple(float(t) for t in target)
        self.fraction = float(fraction)
        self.name = name or "pull"

    def decide(self, params, domain, history):
        positions, _ = history
        cur = positions[-1]
        d = tuple(t - c for t, c in zip(self.target, cur))
        dist = math.sqrt(sum(x * x for x in d))
        if dist == 0.0:
            return cur
        length = min(self.fraction * params.eps, dist)
        return tuple(c + length * x / dist for c, x in zip(cur, d))


@dataclass
class CancellationState:
    """Bookkeeping for the cancellation strategy.

    uncancelled: opponent move vectors not yet undone, oldest first.
    net_wins: this player's toss wins minus the opponent's, frozen once
    it reaches M.
    random_sum: running sum of the noise moves.
    """

    x0: tuple
    anchor: tuple
    M: int
    net_wins: int = 0
    uncancelled: deque = field(default_factory=deque)
    random_sum: list = field(default_factory=list)
    reached_M: bool = False
    reached_M_at: int | None = None
    steps_seen: int = 0


class CancellationStrategy(Strategy):
    """Undo opponent moves FIFO; drift inward on surplus wins; on the win
    that brings the surplus to M, jump so position = anchor + random_sum.

    A degenerate start x0 == anchor has M = 0: the surplus target counts as
    already met and the strategy plays pure cancellation from the start.
    After the surplus target is met the strategy also falls back to pure
    cancellation (stand still when there is nothing to cancel).
    """

    name = "cancellation"

    def __init__(self, anchor=None):
        self.anchor = None if anchor is None else tuple(float(a) for a in anchor)
        self.state: CancellationState | None = None

    def reset(self, params, domain, x0):
        x0 = tuple(float(c) for c in x0)
        anchor = self.anchor if self.anchor is not None else tuple(0.0 for _ in x0)
        dist0 = math.dist(x0, anchor)
        M = 2 * math.ceil(dist0 / params.eps)
        st = CancellationState(
            x0=x0,
            anchor=anchor,
            M=M,
            random_sum=[0.0] * len(x0),
        )
        if M == 0:
            st.reached_M = True
            st.reached_M_at = 0
        else:
            rel = tuple(a - b for a, b in zip(x0, anchor))
            self._drift_dir = tuple(c / dist0 for c in rel)
        self.state = st

    def decide(self, params, domain, history):
        st = self.state
        positions, _ = history
        cur = positions[-1]
        if st.uncancelled:
            v = st.uncancelled[0]
            return tuple(c - vi for c, vi in zip(cur, v))
        if st.reached_M:
            return cur
        if st.net_wins < st.M - 1:
            step_len = params.eps / 2.0
            return tuple(c - step_len * d for c, d in zip(cur, self._drift_dir))
        # this win brings the surplus to M: jump onto anchor + random noise sum
        target = tuple(a + s for a, s in zip(st.anchor, st.random_sum))
        jump = math.dist(cur, target)
        if jump >= params.eps:
            raise InternalInvariantError(
                f"final jump of length {jump} >= eps={params.eps}; "
                "cancellation bookkeeping is broken"
            )
        return target

    def observe(self, params, domain, coin, prev, new):
        st = self.state
        st.steps_seen += 1
        if coin == CoinOutcome.P1_WIN:
            if st.uncancelled:
                st.uncancelled.popleft()
                if not st.reached_M:
                    st.net_wins += 1
            elif not st.reached_M:
                st.net_wins += 1
                if st.net_wins == st.M:
                    st.reached_M = True
                    st.reached_M_at = st.steps_seen
        elif coin == CoinOutcome.P2_WIN:
            move = tuple(b - a for a, b in zip(prev, new))
            st.uncancelled.append(move)
            if not st.reached_M:
                st.net_wins -= 1
        else:
            for i in range(len(st.random_sum)):
                st.random_sum[i] += new[i] - prev[i]


class MirrorStrategy(Strategy):
    """Repeats the opponent's most recent move direction at a fixed fraction
    of eps; stands still until the opponent has moved."""

    name = "mirror"

    def __init__(self, fraction: float = 0.5):
        if not (0.0 < fraction < 1.0):
            raise ParameterError("mirror fraction must lie in (0, 1)")
        self.fraction = float(fraction)
        self._last = None

    def reset(self, params, domain, x0):
        self._last = None

    def decide(self, params, domain, history):
        positions, _ = history
        cur = positions[-1]
        if self._last is None:
            return cur
        d = self._last
        norm = math.sqrt(sum(x * x for x in d))
        if norm == 0.0:
            return cur
        length = min(self.fraction * params.eps, norm)
        return tuple(c + length * x / norm for c, x in zip(cur, d))

    def observe(self, params, domain, coin, prev, new):
        if coin == CoinOutcome.P1_WIN:
            self._last = tuple(b - a for a, b in zip(prev, new))


class FarthestCornerStrategy(Strategy):
    """Pulls toward the bounding-box corner farthest from the start point."""

    name = "pull-farthest-boundary"

    def __init__(self, fraction: float = 0.5):
        if not (0.0 < fraction < 1.0):
            raise ParameterError("fraction must lie in (0, 1)")
        self.fraction = float(fraction)
        self._target = None

    def reset(self, params, domain, x0):
        best, best_d = None, -1.0
        n = len(x0)
        for mask in range(1 << n):
            corner = tuple(
                domain.hi[i] if (mask >> i) & 1 else domain.lo[i] for i in range(n)
            )
            d = math.dist(corner, x0)
            if d > best_d:
                best, best_d = corner, d
        self._target = best

    def decide(self, params, domain, history):
        positions, _ = history
        cur = positions[-1]
        d = tuple(t - c for t, c in zip(self._target, cur))
        dist = math.sqrt(sum(x * x for x in d))
        if dist == 0.0:
            return cur
        length = min(self.fraction * params.eps, dist)
        return tuple(c + length * x / dist for c, x in zip(cur, d))


class PushAwayStrategy(Strategy):
    """Moves directly away from a configured point (the boundary point under
    study). Unconfigured, it moves away from the episode's start point.
    Each of its own moves strictly increases the distance to that point."""

    name = "push-away"

    def __init__(self, away_from=None, fraction: float = 0.5):
        if not (0.0 < fraction < 1.0):
            raise ParameterError("fraction must lie in (0, 1)")
        self.fraction = float(fraction)
        self.away_from = (
            None if away_from is None else tuple(float(a) for a in away_from)
        )
        self._ref = None

    def reset(self, params, domain, x0):
        self._ref = self.away_from if self.away_from is not None else tuple(x0)

    def decide(self, params, domain, history):
        positions, _ = history
        cur = positions[-1]
        d = tuple(c - r for c, r in zip(cur, self._ref))
        dist = math.sqrt(sum(x * x for x in d))
        length = self.fraction * params.eps
        if dist == 0.0:
            return (cur[0] + length,) + tuple(cur[1:])
        return tuple(c + length * x / dist for c, x in zip(cur, d))


class StayNearStartStrategy(Strategy):
    """Pulls back toward the episode's start point."""

    name = "stay-near-start"

    def __init__(self, fraction: float = 0.5):
        if not (0.0 < fraction < 1.0):
            raise ParameterError("fraction must lie in (0, 1)")
        self.fraction = float(fraction)
        self._x0 = None

    def reset(self, params, domain, x0):
        self._x0 = tuple(x0)

    def decide(self, params, domain, history):
        positions, _ = history
        cur = positions[-1]
        d = tuple(t - c for t, c in zip(self._x0, cur))
        dist = math.sqrt(sum(x * x for x in d))
        if dist == 0.0:
            return cur
        length = min(self.fraction * params.eps, dist)
        return tuple(c + length * x / dist for c, x in zip(cur, d))


def cancellation_strategy(x0, params: GameParams, anchor=None) -> CancellationStrategy:
    """Cancellation strategy primed for a start at x0.

    The state (M in particular) is derived immediately so callers can
    inspect it; play_episode's reset re-derives the same state for the
    same start.
    """
    s = CancellationStrategy(anchor=anchor)
    s.reset(params, None, x0)
    return s


def pull_strategy(target, fraction: float = 0.5) -> PullStrategy:
    return PullStrategy(target, fraction)


def adversary_roster(away_from=None) -> list[Strategy]:
    """The fixed opponent lineup used by the regularity experiments.

    away_from configures the push-away member with the boundary point under
    study; left unset, it pushes away from wherever the episode starts.
    """
    return [
        PushAwayStrategy(away_from=away_from, fraction=0.5),
        FarthestCornerStrategy(0.5),
        MirrorStrategy(0.5),
        StayNearStartStrategy(0.5),
    ]
