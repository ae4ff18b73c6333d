"""Experiment orchestration: config files, seeding, result records, and the
top-level regularity experiments.

Config format is flat key=value text (one pair per line, # comments). The
schema is strict: unknown keys are rejected, vectors are space-separated
floats, and strategy names must exist in the adversary roster. Records
serialize to JSONL (fixed schema) or CSV; reruns with the same config and
master seed are byte-identical because timing is opt-out (seconds stays
null) and every episode derives its seed from (master, experiment id,
episode index) rather than from shared stream state.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cylinder as cyl
from .errors import ConfigError, ParameterError, TruncationError
from .game import CoinOutcome, GameParams, default_max_steps, play_episode
from .geometry import Domain, from_descriptor
from .rngutil import make_np_rng, make_rng, uniform_ball_batch
from .strategies import CancellationStrategy, adversary_roster

# ---------------------------------------------------------------------------
# configuration

_SCALAR_KEYS = {
    "experiment": str,
    "n": int,
    "p": float,
    "eps": float,
    "delta": float,
    "delta0": float,
    "lambda": float,
    "a": float,
    "d": float,
    "r": float,
    "t0": float,
    "k": int,
    "episodes": int,
    "samples": int,
    "seed": int,
    "max_steps": int,
    "h": float,
    "out": str,
    "format": str,
    "threads": int,
    "payoff": str,
    "strategy1": str,
    "strategy2": str,
    "domain.kind": str,
    "domain.radius": float,
    "domain.r_inner": float,
    "domain.r_outer": float,
    "domain.half_angle": float,
}
_VECTOR_KEYS = {
    "y",
    "inward",
    "x0",
    "eps_ladder",
    "radii",
    "domain.center",
    "domain.low",
    "domain.high",
    "domain.vertex",
    "domain.axis",
    "domain.normal",
}
_LIST_KEYS = {"adversaries"}
# outputs and scheduling hints do not change results, so they stay out of
# the config hash
_HASH_EXEMPT = {"out", "format", "threads"}

_KNOWN_KINDS = (
    "regularity",
    "cylinder-bottom",
    "cylinder-clock",
    "cylinder-eventb",
    "theorem3",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated flat config. `raw` keeps the original strings for hashing."""

    raw: dict
    values: dict

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"line {lineno}: expected key=value, got {body!r}")
            key, val = body.split("=", 1)
            key, val = key.strip(), val.strip()
            if key in raw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = val
        return cls.from_mapping(raw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        values: dict = {}
        for key, val in raw.items():
            sval = str(val)
            if key in _SCALAR_KEYS:
                typ = _SCALAR_KEYS[key]
                try:
                    values[key] = typ(sval)
                except ValueError as exc:
                    raise ConfigError(f"key {key!r}: {exc}") from None
            elif key in _VECTOR_KEYS:
                try:
                    values[key] = tuple(float(tok) for tok in sval.split())
                except ValueError as exc:
                    raise ConfigError(f"key {key!r}: {exc}") from None
                if not values[key]:
                    raise ConfigError(f"key {key!r}: empty vector")
            elif key in _LIST_KEYS:
                values[key] = tuple(sval.split())
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if "adversaries" in values:
            known = {s.name for s in adversary_roster()}
            bad = [a for a in values["adversaries"] if a not in known]
            if bad:
                raise ConfigError(
                    f"unknown adversaries {bad}; roster: {sorted(known)}"
                )
        kind = values.get("experiment")
        if kind is not None and kind not in _KNOWN_KINDS:
            raise ConfigError(
                f"unknown experiment kind {kind!r}; known: {_KNOWN_KINDS}"
            )
        raw_str = {k: str(v) for k, v in raw.items()}
        return cls(raw=raw_str, values=values)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, *keys):
        missing = [k for k in keys if k not in self.values]
        if missing:
            raise ConfigError(f"missing required config keys: {missing}")
        return [self.values[k] for k in keys]

    def with_values(self, **overrides) -> "ExperimentConfig":
        raw = dict(self.raw)
        for key, val in overrides.items():
            if (
                key not in _SCALAR_KEYS
                and key not in _VECTOR_KEYS
                and key not in _LIST_KEYS
            ):
                raise ConfigError(f"unknown config key {key!r}")
            if key in _VECTOR_KEYS or key in _LIST_KEYS:
                raw[key] = " ".join(str(v) for v in val)
            else:
                raw[key] = str(val)
        return ExperimentConfig.from_mapping(raw)

    def canonical(self) -> str:
        rows = [
            f"{k}={self.raw[k]}"
            for k in sorted(self.raw)
            if k not in _HASH_EXEMPT
        ]
        return "\n".join(rows)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def domain(self) -> Domain:
        desc = {
            k.split(".", 1)[1]: v
            for k, v in self.values.items()
            if k.startswith("domain.")
        }
        if "kind" not in desc:
            raise ConfigError("config has no domain.kind")
        return from_descriptor(desc)

    def game_params(self) -> GameParams:
        n, p, eps = self.require("n", "p", "eps")
        return GameParams.from_np(n, p, eps)


# ---------------------------------------------------------------------------
# result records

@dataclass(frozen=True)
class ResultRecord:
    experiment_id: str
    config_hash: str
    metric: str
    value: float
    std_error: float
    episodes: int
    truncated: int
    seconds: float | None = None
    provenance: str = "simulated"

    def json_obj(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "config_hash": self.config_hash,
            "metric": self.metric,
            "value": self.value,
            "std_error": self.std_error,
            "episodes": self.episodes,
            "truncated": self.truncated,
            "seconds": self.seconds,
        }

    def json_line(self) -> str:
        return json.dumps(self.json_obj())

    def csv_row(self) -> list:
        return [
            self.experiment_id, self.config_hash, self.metric,
            repr(self.value), repr(self.std_error), self.episodes,
            self.truncated, "" if self.seconds is None else repr(self.seconds),
            self.provenance,
        ]


CSV_HEADER = [
    "experiment_id", "config_hash", "metric", "value", "std_error",
    "episodes", "truncated", "seconds", "provenance",
]


def write_records(records, path, fmt: str = "jsonl", append: bool = True) -> None:
    """Append records to path. Appending never rewrites earlier lines."""
    mode = "a" if append else "w"
    if fmt == "jsonl":
        with open(path, mode) as fh:
            for rec in records:
                fh.write(rec.json_line() + "\n")
    elif fmt == "csv":
        import csv as _csv
        import os

        fresh = mode == "w" or not os.path.exists(path) or os.path.getsize(path) == 0
        with open(path, mode, newline="") as fh:
            writer = _csv.writer(fh)
            if fresh:
                writer.writerow(CSV_HEADER)
            for rec in records:
                writer.writerow(rec.csv_row())
    else:
        raise ConfigError(f"unknown output format {fmt!r}")


# ---------------------------------------------------------------------------
# payoff registry

def payoff_from_name(name: str) -> Callable:
    """Named payoffs for configs and the CLI.

    constant:c      -> c
    coordinate:i    -> x_i
    norm            -> |x|
    indicator-right:t -> 1 if x_0 >= t else 0
    radial:p        -> |x|^((p-n)/(p-1)) with n = len(x)
    """
    head, _, arg = name.partition(":")
    if head == "constant":
        c = float(arg or 0.0)
        return lambda x: c
    if head == "coordinate":
        i = int(arg or 0)
        return lambda x: float(x[i])
    if head == "norm":
        return lambda x: float(np.linalg.norm(np.asarray(x, dtype=float)))
    if head == "indicator-right":
        thr = float(arg) if arg else 1.0
        return lambda x: 1.0 if float(x[0]) >= thr else 0.0
    if head == "radial":
        p = float(arg)
        def _radial(x):
            arr = np.asarray(x, dtype=float)
            expo = (p - arr.size) / (p - 1.0)
            return float(np.linalg.norm(arr) ** expo)
        return _radial
    raise ConfigError(f"unknown payoff {name!r}")


def strategy_from_name(name: str, y=None):
    if name == "cancellation":
        return CancellationStrategy(anchor=y)
    for s in adversary_roster(away_from=y):
        if s.name == name:
            return s
    from .strategies import Strategy
    if name == "stand-still":
        return Strategy()
    raise ConfigError(f"unknown strategy {name!r}")


# ---------------------------------------------------------------------------
# trace monitors

@dataclass
class TraceMonitors:
    """Per-episode outcomes of the three race conditions plus locality.

    first_condition: which of the toss-surplus target (A), the opponent
    lead threshold (B), or the noise drift threshold (C) fired first, if
    any. event_x: condition (A) fired first and the winning jump ended the
    game outside the domain at that very step.
    """

    ended_inside: bool
    exit_near: bool
    first_condition: str | None
    event_x: bool


def analyze_trace(trace, domain: Domain, y, delta: float, eps: float,
                  M: int) -> TraceMonitors:
    """Walk a finished trace and evaluate the monitors.

    The (B) threshold ceil(delta/(3 eps)) is rounded up: toss counts are
    integers and rounding up only strengthens the event. At most one
    condition can fire at a given step (each coin outcome feeds exactly
    one monitor), so "first" is unambiguous.
    """
    y = tuple(float(c) for c in y)
    thresh_b = math.ceil(delta / (3.0 * eps))
    thresh_c = delta / 3.0
    surplus = 0
    noise = [0.0] * len(y)
    first = None
    event_x = False
    positions, coins = trace.positions, trace.coins
    for j, coin in enumerate(coins):
        prev, new = positions[j], positions[j + 1]
        if coin == CoinOutcome.P1_WIN:
            surplus += 1
            if first is None and surplus >= M:
                first = "A"
                ended_now = (j + 1 == len(coins)) and not domain.contains(new)
                event_x = ended_now
        elif coin == CoinOutcome.P2_WIN:
            surplus -= 1
            if first is None and -surplus >= thresh_b:
                first = "B"
        else:
            for i in range(len(noise)):
                noise[i] += new[i] - prev[i]
            if first is None and math.hypot(*noise) >= thresh_c:
                first = "C"
    dists = [math.dist(pos, y) for pos in positions]
    return TraceMonitors(
        ended_inside=max(dists) < delta,
        exit_near=dists[-1] < delta,
        first_condition=first,
        event_x=event_x,
    )


# ---------------------------------------------------------------------------
# measure density

@dataclass(frozen=True)
class MeasureDensityEstimate:
    radii: tuple
    ratios: tuple
    std_errors: tuple
    c_hat: float
    warning: str | None

    def rows(self):
        return list(zip(self.radii, self.ratios, self.std_errors))


def estimate_measure_density(domain: Domain, y, radii, samples: int,
                             seed: int) -> MeasureDensityEstimate:
    """Complement volume fractions |B_r(y) \\ domain| / |B_r(y)| per radius.

    c_hat is the minimum over the grid. Ratios collapsing toward zero mean
    y sees no complement mass at that scale (an interior point, typically);
    that is flagged as a density-violation warning, not an error.
    """
    y = np.asarray([float(c) for c in y])
    radii = tuple(float(r) for r in radii)
    if not radii or any(r <= 0 for r in radii):
        raise ParameterError("radii must be positive")
    if samples < 1000:
        raise ParameterError("need at least 1000 samples per radius")
    rng = make_np_rng(seed, "measure-density")
    ratios, ses = [], []
    for r in radii:
        pts = uniform_ball_batch(rng, samples, y.size, r) + y
        outside = ~domain.contains_many(pts)
        ratio = float(outside.mean())
        ratios.append(ratio)
        ses.append(math.sqrt(max(ratio * (1 - ratio), 0.0) / samples))
    c_hat = min(ratios)
    warning = None
    if c_hat < 0.05:
        worst = radii[ratios.index(c_hat)]
        warning = (
            f"density-violation: complement fraction {c_hat:.4g} at radius "
            f"{worst:g}; the reference point may not satisfy the measure "
            "density condition"
        )
    return MeasureDensityEstimate(
        radii=radii, ratios=tuple(ratios), std_errors=tuple(ses),
        c_hat=c_hat, warning=warning,
    )


# ---------------------------------------------------------------------------
# regularity experiment

def _binom_se(p: float, m: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / m) if m > 0 else float("nan")


def run_regularity_experiment(config: ExperimentConfig) -> list[ResultRecord]:
    """Play the cancellation strategy against each configured adversary and
    estimate, per adversary: the probability the game ends before leaving
    B_delta(y), the probability the exit lands in B_delta(y) outside the
    domain, and the probability the toss-surplus condition wins the race
    and ends the game (event X).
    """
    kind = config.get("experiment")
    if kind != "regularity":
        raise ConfigError(f"run_regularity_experiment got kind {kind!r}")
    (delta, delta0, episodes, seed) = config.require(
        "delta", "delta0", "episodes", "seed"
    )
    y, = config.require("y")
    domain = config.domain()
    params = config.game_params()
    if delta0 > delta:
        raise ConfigError(f"delta0 = {delta0} must not exceed delta = {delta}")
    if config.get("x0") is not None:
        x0 = config.get("x0")
    else:
        inward, = config.require("inward")
        norm = math.hypot(*inward)
        if norm == 0:
            raise ConfigError("inward direction must be nonzero")
        x0 = tuple(yi + delta0 * c / norm for yi, c in zip(y, inward))
    if not domain.contains(x0):
        raise ConfigError(f"start point {x0} is not inside the domain")

    density = estimate_measure_density(
        domain, y, radii=[delta0, delta], samples=20_000, seed=seed
    )
    if density.warning is not None:
        raise ConfigError(density.warning)

    adversaries = config.get("adversaries")
    roster = {s.name: s for s in adversary_roster(away_from=y)}
    names = list(adversaries) if adversaries else list(roster)
    max_steps = config.get("max_steps") or default_max_steps(params, domain)
    payoff = lambda x: 0.0

    records = [
        ResultRecord(
            experiment_id="regularity-domain",
            config_hash=config.config_hash,
            metric="c_density_min",
            value=density.c_hat,
            std_error=max(density.std_errors),
            episodes=20_000,
            truncated=0,
        )
    ]
    for name in names:
        s2 = roster[name]
        s1 = CancellationStrategy(anchor=y)
        experiment_id = f"regularity-{name}"
        counts = {"end_before_exit": 0, "exit_in_patch": 0, "event_X": 0}
        done = truncated = 0
        for ep in range(episodes):
            rng = make_rng(seed, experiment_id, ep)
            try:
                trace = play_episode(params, domain, x0, s1, s2, payoff, rng,
                                     max_steps=max_steps)
            except TruncationError:
                truncated += 1
                continue
            mon = analyze_trace(trace, domain, y, delta, params.eps,
                                s1.state.M)
            done += 1
            counts["end_before_exit"] += mon.ended_inside
            counts["exit_in_patch"] += mon.exit_near
            counts["event_X"] += mon.event_x
        if done == 0:
            raise TruncationError(
                f"all {episodes} episodes against {name} truncated"
            )
        for metric, cnt in counts.items():
            val = cnt / done
            records.append(
                ResultRecord(
                    experiment_id=experiment_id,
                    config_hash=config.config_hash,
                    metric=metric,
                    value=val,
                    std_error=_binom_se(val, done),
                    episodes=done,
                    truncated=truncated,
                )
            )
    return records


# ---------------------------------------------------------------------------
# cylinder experiment dispatch

def _cylinder_params(config: ExperimentConfig) -> cyl.CylinderParams:
    n, p, eps, r, t0 = config.require("n", "p", "eps", "r", "t0")
    max_steps = config.get("max_steps")
    return cyl.CylinderParams.from_np(n, p, r, eps, t0, max_steps=max_steps)


def run_single_experiment(config: ExperimentConfig) -> list[ResultRecord]:
    """Dispatch one config to its experiment; returns its records."""
    kind = config.get("experiment")
    if kind is None:
        raise ConfigError("config has no experiment kind")
    h = config.config_hash
    if kind == "regularity":
        return run_regularity_experiment(config)
    if kind == "cylinder-bottom":
        episodes, seed = config.require("episodes", "seed")
        est = cyl.estimate_bottom_exit(_cylinder_params(config), episodes, seed)
        return [
            ResultRecord("cylinder-bottom", h, "bottom_exit", est.prob_bottom,
                         est.std_error, est.episodes, est.truncated)
        ]
    if kind == "cylinder-clock":
        episodes, seed, a = config.require("episodes", "seed", "a")
        est = cyl.estimate_clock_window(_cylinder_params(config), a, episodes,
                                        seed)
        return [
            ResultRecord("cylinder-clock", h, "clock_window", est.prob,
                         est.std_error, est.episodes, est.truncated),
            ResultRecord("cylinder-clock", h, "clock_window_analytic_lower",
                         est.analytic_lower, 0.0, est.episodes, est.truncated,
                         provenance="analytic"),
        ]
    if kind == "cylinder-eventb":
        episodes, seed = config.require("episodes", "seed")
        est = cyl.estimate_event_B(_cylinder_params(config), episodes, seed)
        return [
            ResultRecord("cylinder-eventb", h, "event_B", est.prob,
                         est.std_error, est.episodes, est.truncated)
        ]
    if kind == "theorem3":
        episodes, seed, delta, lam, y = config.require(
            "episodes", "seed", "delta", "lambda", "y"
        )
        res = cyl.theorem3_experiment(
            config.game_params(), config.domain(), y, delta, lam, episodes,
            seed,
        )
        return [
            ResultRecord("theorem3", h, "prob_bad", res.prob_bad,
                         res.std_error, res.episodes, res.truncated),
            ResultRecord("theorem3", h, "theta_reference",
                         res.theta_reference, 0.0, res.episodes,
                         res.truncated, provenance="analytic"),
        ]
    raise ConfigError(f"unknown experiment kind {kind!r}")


# ---------------------------------------------------------------------------
# eps ladder

@dataclass(frozen=True)
class LadderVerdict:
    metric: str
    eps_values: tuple
    values: tuple
    std_errors: tuple
    nondecreasing_within_error: bool
    stable_within_error: bool


@dataclass(frozen=True)
class LadderReport:
    eps_values: tuple
    records: tuple  # flattened ResultRecords from every level
    verdicts: dict  # metric name -> LadderVerdict


def run_eps_ladder(config: ExperimentConfig) -> LadderReport:
    """Run the configured experiment once per ladder level (descending eps)
    and report per-metric trend verdicts with 3-sigma combined uncertainty.
    """
    ladder = config.get("eps_ladder")
    if ladder is None or len(ladder) < 3:
        raise ConfigError("eps_ladder needs at least 3 levels")
    eps_values = tuple(sorted(ladder, reverse=True))
    if len(set(eps_values)) != len(eps_values):
        raise ConfigError("eps_ladder levels must be distinct")
    all_records: list[ResultRecord] = []
    series: dict[str, list] = {}
    for eps in eps_values:
        level = config.with_values(eps=eps)
        recs = run_single_experiment(level)
        all_records.extend(recs)
        for rec in recs:
            if rec.provenance != "simulated":
                continue
            series.setdefault(f"{rec.experiment_id}/{rec.metric}", []).append(rec)
    verdicts = {}
    for key, recs in series.items():
        if len(recs) != len(eps_values):
            continue
        vals = tuple(r.value for r in recs)
        ses = tuple(r.std_error for r in recs)
        nondec = all(
            vals[i + 1] >= vals[i] - 3.0 * math.hypot(ses[i], ses[i + 1])
            for i in range(len(vals) - 1)
        )
        stable = all(
            abs(vals[i + 1] - vals[i]) <= 3.0 * math.hypot(ses[i], ses[i + 1])
            for i in range(len(vals) - 1)
        )
        verdicts[key] = LadderVerdict(
            metric=key,
            eps_values=eps_values,
            values=vals,
            std_errors=ses,
            nondecreasing_within_error=nondec,
            stable_within_error=stable,
        )
    return LadderReport(eps_values=eps_values, records=tuple(all_records),
                        verdicts=verdicts)
