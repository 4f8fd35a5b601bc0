"""Deterministic, seedable Monte Carlo driver.

The central contract: the record of trial i is a pure function of
(seed, i, config), so runs are reproducible bit for bit regardless of block
size, execution order or worker count. Randomness is counter-based (see
:mod:`eprsim.kernels`); workers only ever partition the trial-index range and
write into disjoint slices.

Geometry (arm length, inter-measurement delay) is bookkeeping: it sets the
space-like-separation flag on records and never influences outcomes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import kernels
from .models import (
    DefiniteCircular,
    HypothesisModel,
    Lhv,
    NdvNonlocal,
    Ordering,
    QMFormal,
    RAnalyzer,
    TrialDraws,
)
from .stats import ChainCounts, CoincidenceCounts
from .twophoton import Arm, ChannelOutcome

SPEED_OF_LIGHT_M_PER_S = 299_792_458.0
BLOCK_SIZE = 1 << 16

MAX_WORKERS_ENV = "EPR_MAX_WORKERS"


@dataclass(frozen=True)
class Geometry:
    """Distance between the measurement stations and their timing offset."""

    arm_separation_m: float = 0.0
    inter_measurement_delay_s: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.arm_separation_m) and self.arm_separation_m >= 0.0):
            raise ValueError("arm separation must be finite and nonnegative")
        if not (
            math.isfinite(self.inter_measurement_delay_s)
            and self.inter_measurement_delay_s >= 0.0
        ):
            raise ValueError("inter-measurement delay must be finite and nonnegative")

    @property
    def spacelike(self) -> bool:
        """True when no light-speed signal can link the two measurements."""
        return self.arm_separation_m > SPEED_OF_LIGHT_M_PER_S * self.inter_measurement_delay_s


@dataclass(frozen=True)
class FixedSettings:
    """One analyzer orientation pair (radians, shared coordinates)."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("analyzer settings must be finite")


@dataclass(frozen=True)
class RandomizedSettings:
    """Per-trial choice from a finite weighted list of orientation pairs."""

    pairs: tuple[tuple[float, float], ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.pairs) < 1:
            raise ValueError("need at least one settings pair")
        pairs = tuple((float(a), float(b)) for a, b in self.pairs)
        for a, b in pairs:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError("analyzer settings must be finite")
        if self.weights is None:
            weights = tuple(1.0 / len(pairs) for _ in pairs)
        else:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != len(pairs):
                raise ValueError("weights must match the settings pairs one to one")
            if any(w < 0.0 for w in weights):
                raise ValueError("weights must be nonnegative")
            if abs(sum(weights) - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {sum(weights)!r}, not 1 within 1e-12")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "weights", weights)


SettingsPolicy = FixedSettings | RandomizedSettings


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run, and therefore every record in it."""

    model: HypothesisModel
    trials: int
    settings: SettingsPolicy = FixedSettings(0.0, 0.0)
    ordering: Ordering = Ordering.ARM1_FIRST
    seed: int = 1
    geometry: Geometry = field(default_factory=Geometry)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass(frozen=True)
class TwoChannelProtocol:
    """Two-channel analyzers on both arms, oriented per the settings policy."""


@dataclass(frozen=True)
class QwpChainProtocol:
    """Right-helicity analyzer chains (plate + polarizer) on both arms.

    Fast axes are quoted in each arm's own frame. Detection statistics do not
    depend on them for any model: the chains always certify right helicity.
    """

    fast_axis_a: float = 0.0
    fast_axis_b: float = 0.0

    def chain_a(self) -> RAnalyzer:
        return RAnalyzer(self.fast_axis_a)

    def chain_b(self) -> RAnalyzer:
        return RAnalyzer(self.fast_axis_b)


Protocol = TwoChannelProtocol | QwpChainProtocol


@dataclass(frozen=True)
class TwoChannelRecord:
    trial_index: int
    a: float
    b: float
    first_arm: Arm
    outcome_a: ChannelOutcome
    outcome_b: ChannelOutcome
    spacelike: bool


@dataclass(frozen=True)
class ChainRecord:
    trial_index: int
    first_arm: Arm
    detected_a: bool
    detected_b: bool
    spacelike: bool


_ORDER_CODES = {
    Ordering.ARM1_FIRST: kernels.ORDER_ARM1_FIRST,
    Ordering.ARM2_FIRST: kernels.ORDER_ARM2_FIRST,
    Ordering.RANDOM_PER_TRIAL: kernels.ORDER_RANDOM,
}


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else EPR_MAX_WORKERS, else CPU-based."""
    if workers is not None:
        if workers < 1:
            raise ValueError("workers must be at least 1")
        return workers
    env = os.environ.get(MAX_WORKERS_ENV)
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ValueError(f"{MAX_WORKERS_ENV} must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ValueError(f"{MAX_WORKERS_ENV} must be at least 1")
        return cap
    return min(4, os.cpu_count() or 1)


def _block_ranges(start: int, trials: int) -> list[tuple[int, int]]:
    edges = list(range(start, start + trials, BLOCK_SIZE)) + [start + trials]
    return [(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]


def _run_blocks(fn, start: int, trials: int, workers: int) -> None:
    ranges = _block_ranges(start, trials)
    if workers <= 1 or len(ranges) <= 1:
        for lo, hi in ranges:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda r: fn(*r), ranges))


def _first_arm_flags(seed: int, start: int, trials: int, ordering: Ordering) -> np.ndarray:
    """Per-trial flag: True when arm 2 is measured first."""
    if ordering is Ordering.ARM1_FIRST:
        return np.zeros(trials, dtype=bool)
    if ordering is Ordering.ARM2_FIRST:
        return np.ones(trials, dtype=bool)
    return kernels.uniform_block(seed, start, trials, kernels.SLOT_ORDERING) >= 0.5


@dataclass(frozen=True, eq=False)
class TwoChannelRun:
    """Raw per-trial outcomes of a two-channel run, plus exact counts."""

    config: RunConfig
    start_index: int
    pair_table: tuple[tuple[float, float], ...]
    pair_index: np.ndarray
    outcome_a: np.ndarray
    outcome_b: np.ndarray

    @property
    def spacelike(self) -> bool:
        return self.config.geometry.spacelike

    def counts_for_pair(self, pair: int) -> CoincidenceCounts:
        mask = self.pair_index == pair
        return CoincidenceCounts.from_outcomes(self.outcome_a[mask], self.outcome_b[mask])

    def counts(self) -> list[CoincidenceCounts]:
        return [self.counts_for_pair(j) for j in range(len(self.pair_table))]

    def records(self) -> Iterator[TwoChannelRecord]:
        arm2_first = _first_arm_flags(
            self.config.seed, self.start_index, self.config.trials, self.config.ordering
        )
        spacelike = self.spacelike
        for i in range(self.config.trials):
            a, b = self.pair_table[int(self.pair_index[i])]
            yield TwoChannelRecord(
                trial_index=self.start_index + i,
                a=a,
                b=b,
                first_arm=Arm.TWO if arm2_first[i] else Arm.ONE,
                outcome_a=ChannelOutcome.PLUS if self.outcome_a[i] > 0 else ChannelOutcome.MINUS,
                outcome_b=ChannelOutcome.PLUS if self.outcome_b[i] > 0 else ChannelOutcome.MINUS,
                spacelike=spacelike,
            )


@dataclass(frozen=True, eq=False)
class QwpChainRun:
    """Raw per-trial detection flags of a chain-protocol run."""

    config: RunConfig
    protocol: QwpChainProtocol
    start_index: int
    detected_a: np.ndarray
    detected_b: np.ndarray

    @property
    def spacelike(self) -> bool:
        return self.config.geometry.spacelike

    def chain_counts(self) -> ChainCounts:
        return ChainCounts.from_flags(self.detected_a, self.detected_b)

    def records(self) -> Iterator[ChainRecord]:
        arm2_first = _first_arm_flags(
            self.config.seed, self.start_index, self.config.trials, self.config.ordering
        )
        spacelike = self.spacelike
        for i in range(self.config.trials):
            yield ChainRecord(
                trial_index=self.start_index + i,
                first_arm=Arm.TWO if arm2_first[i] else Arm.ONE,
                detected_a=bool(self.detected_a[i]),
                detected_b=bool(self.detected_b[i]),
                spacelike=spacelike,
            )


def _settings_tables(policy: SettingsPolicy) -> tuple[tuple, np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(policy, FixedSettings):
        pairs = ((policy.a, policy.b),)
        weights = np.array([1.0])
    elif isinstance(policy, RandomizedSettings):
        pairs = policy.pairs
        weights = np.array(policy.weights)
    else:
        raise TypeError(f"not a settings policy: {policy!r}")
    pair_a = np.array([p[0] for p in pairs], dtype=np.float64)
    pair_b = np.array([p[1] for p in pairs], dtype=np.float64)
    cumw = np.cumsum(weights)
    cumw[-1] = 1.0  # guard float drift; weights already sum to 1 within 1e-12
    return pairs, pair_a, pair_b, cumw


def run_experiment(
    config: RunConfig,
    protocol: Protocol = TwoChannelProtocol(),
    *,
    start_index: int = 0,
    workers: int | None = None,
) -> TwoChannelRun | QwpChainRun:
    """Run `config.trials` trials of the given protocol.

    ``start_index`` offsets the trial-index range so that disjoint blocks of
    one experiment draw from disjoint counter ranges (hence independent
    streams). Worker count never changes results.
    """
    if isinstance(protocol, TwoChannelProtocol):
        return _run_two_channel(config, start_index, resolve_workers(workers))
    if isinstance(protocol, QwpChainProtocol):
        return _run_qwp_chain(config, protocol, start_index, resolve_workers(workers))
    raise TypeError(f"not a protocol: {protocol!r}")


def _run_two_channel(config: RunConfig, start_index: int, workers: int) -> TwoChannelRun:
    pairs, pair_a, pair_b, cumw = _settings_tables(config.settings)
    order_code = _ORDER_CODES[config.ordering]
    pair_index = np.empty(config.trials, dtype=np.int32)
    out_a = np.empty(config.trials, dtype=np.int8)
    out_b = np.empty(config.trials, dtype=np.int8)
    kernel_id = getattr(config.model, "kernel_id", None)

    if kernel_id is not None:
        code = kernels.MODEL_CODES[kernel_id]

        def block(lo: int, hi: int) -> None:
            sl = slice(lo - start_index, hi - start_index)
            pair_index[sl], out_a[sl], out_b[sl] = kernels.two_channel_block(
                config.seed, lo, hi - lo, code, pair_a, pair_b, cumw, order_code
            )

    elif isinstance(config.model, Lhv):
        lhv = config.model.model

        def block(lo: int, hi: int) -> None:
            sl = slice(lo - start_index, hi - start_index)
            pair_index[sl], out_a[sl], out_b[sl] = kernels.two_channel_block_lhv(
                config.seed,
                lo,
                hi - lo,
                lhv.sample,
                lhv.response_a,
                lhv.response_b,
                pair_a,
                pair_b,
                cumw,
                order_code,
            )

    else:
        raise TypeError(f"no trial kernel for model {config.model!r}")

    _run_blocks(block, start_index, config.trials, workers)
    return TwoChannelRun(
        config=config,
        start_index=start_index,
        pair_table=pairs,
        pair_index=pair_index,
        outcome_a=out_a,
        outcome_b=out_b,
    )


def _run_qwp_chain(
    config: RunConfig, protocol: QwpChainProtocol, start_index: int, workers: int
) -> QwpChainRun:
    protocol.chain_a()  # validates the chain specs up front
    protocol.chain_b()
    order_code = _ORDER_CODES[config.ordering]
    qwp_code = kernels.qwp_code_for(getattr(config.model, "kernel_id", None))
    if not isinstance(config.model, (QMFormal, NdvNonlocal, DefiniteCircular, Lhv)):
        raise TypeError(f"no chain kernel for model {config.model!r}")
    det_a = np.empty(config.trials, dtype=np.uint8)
    det_b = np.empty(config.trials, dtype=np.uint8)

    def block(lo: int, hi: int) -> None:
        sl = slice(lo - start_index, hi - start_index)
        det_a[sl], det_b[sl] = kernels.qwp_block(config.seed, lo, hi - lo, qwp_code, order_code)

    _run_blocks(block, start_index, config.trials, workers)
    return QwpChainRun(
        config=config,
        protocol=protocol,
        start_index=start_index,
        detected_a=det_a,
        detected_b=det_b,
    )


@dataclass(frozen=True, eq=False)
class MalusRun:
    """Single-photon polarizer transmissions at one relative angle."""

    seed: int
    theta: float
    start_index: int
    passed: np.ndarray

    @property
    def n_total(self) -> int:
        return int(self.passed.size)

    @property
    def n_pass(self) -> int:
        return int(np.count_nonzero(self.passed))


def run_malus(
    seed: int,
    theta: float,
    trials: int,
    *,
    start_index: int = 0,
    workers: int | None = None,
) -> MalusRun:
    """Send `trials` photons polarized at 0 through a polarizer at `theta`."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    passed = np.empty(trials, dtype=np.uint8)

    def block(lo: int, hi: int) -> None:
        passed[lo - start_index : hi - start_index] = kernels.malus_block(seed, lo, hi - lo, theta)

    _run_blocks(block, start_index, trials, resolve_workers(workers))
    return MalusRun(seed=seed, theta=theta, start_index=start_index, passed=passed)


class TrialStream:
    """Sequential view of one trial's uniform draw stream.

    Draw j of trial i is philox(seed, counter=(i, j)); the stream just walks
    j upward, so it can be re-created and replayed at will.
    """

    def __init__(self, seed: int, trial_index: int) -> None:
        self.seed = seed
        self.trial_index = trial_index
        self._next_slot = 0

    def uniforms(self, count: int) -> np.ndarray:
        out = kernels.trial_uniforms(self.seed, self.trial_index, self._next_slot, count)
        self._next_slot += count
        return out

    def next_uniform(self) -> float:
        return float(self.uniforms(1)[0])


def trial_stream(seed: int, trial_index: int) -> TrialStream:
    """The per-trial random stream; same (seed, index) always replays identically."""
    return TrialStream(seed, trial_index)


def trial_draws(seed: int, trial_index: int) -> TrialDraws:
    """The five named draws of one trial, in the documented slot order."""
    u = kernels.trial_uniforms(seed, trial_index, 0, kernels.DRAWS_PER_TRIAL)
    return TrialDraws(
        settings=float(u[kernels.SLOT_SETTINGS]),
        ordering=float(u[kernels.SLOT_ORDERING]),
        emission=float(u[kernels.SLOT_EMISSION]),
        arm_a=float(u[kernels.SLOT_ARM_A]),
        arm_b=float(u[kernels.SLOT_ARM_B]),
    )
