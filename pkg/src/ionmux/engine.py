"""Pulse-program execution, emission profiles, and verification oracles.

The attempt sequence is a finite Markov chain: each primitive is a
row-stochastic map and the collected-emission statistics fall out of the
metastable tallies.  An exact linear-algebra absorbing analysis and a
seeded Monte Carlo path sampler provide two independent routes to every
number the chain produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .atomic import (
    BASIS,
    AtomicParams,
    ExcitationMap,
    LevelState,
    PopulationVector,
    PumpMap,
    ShelveMap,
    TransitionMap,
    WaitMap,
    excitation_map,
    pump_map,
    shelve_map,
)
from .errors import AnalysisError, ParameterError, ProtocolError

MASS_ATOL = 1e-9

# primitive kinds that affect the population; the rest are timeline-only
_POPULATION_KINDS = {"init_pump", "excite", "pump", "shelve_to", "shelve_from"}
_TIMELINE_KINDS = {"shuttle", "cool", "wait"}


@dataclass(frozen=True)
class Strategy:
    """A pump-insertion strategy: N pulses with pumpings after the listed
    pulse indices, each mode read out in a window of the given length."""

    pulse_count: int
    pump_after: frozenset = frozenset()
    window: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "pump_after", frozenset(self.pump_after))
        if self.pulse_count < 1:
            raise ParameterError("pulse_count must be >= 1")
        bad = [i for i in self.pump_after
               if not 1 <= i <= self.pulse_count]
        if bad:
            raise ParameterError(
                f"pump_after indices {sorted(bad)} outside 1..{self.pulse_count}")
        if not (self.window > 0.0):
            raise ParameterError("window must be positive")

    @classmethod
    def named(cls, name: str, pulse_count: Optional[int] = None,
              window: float = math.inf) -> "Strategy":
        """Canonical strategies: 'none', 'every', 'paper-3m', 'paper-1km'."""
        if name == "none":
            return cls(pulse_count or 200, frozenset(), window)
        if name == "every":
            n = pulse_count or 200
            return cls(n, frozenset(range(1, n + 1)), window)
        if name == "paper-3m":
            return cls(8, frozenset({4}), window if window != math.inf else 13e-9)
        if name == "paper-1km":
            return cls(12, frozenset({3, 6, 8, 10}), window)
        raise ParameterError(f"unknown strategy name {name!r}")

    def truncated(self, n: int) -> "Strategy":
        """First n pulses of this strategy (pumps after pulse n dropped)."""
        return Strategy(n, frozenset(i for i in self.pump_after if i < n),
                        self.window)


@dataclass(frozen=True)
class Primitive:
    """One timestamped protocol primitive."""

    kind: str
    t_start: float
    duration: float
    ion: int = 0
    mode: Optional[int] = None
    window: Optional[float] = None

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


@dataclass(frozen=True)
class PulseProgram:
    """Timestamped primitive sequence for one or more ions."""

    primitives: tuple
    params: AtomicParams = AtomicParams()

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        self._validate()

    def _validate(self):
        last_end = -math.inf
        last_mode = -1
        shelf_depth: dict[int, int] = {}
        for p in self.primitives:
            if p.t_start < last_end - 1e-15:
                raise ProtocolError(
                    f"overlapping primitives at t={p.t_start}")
            last_end = p.t_end
            if p.kind == "excite":
                if p.mode is None or p.window is None:
                    raise ProtocolError("excite primitive needs mode and window")
                if p.mode <= last_mode:
                    raise ProtocolError(
                        f"mode indices must be strictly increasing "
                        f"(got {p.mode} after {last_mode})")
                last_mode = p.mode
            elif p.kind == "shelve_to":
                shelf_depth[p.ion] = shelf_depth.get(p.ion, 0) + 1
            elif p.kind == "shelve_from":
                depth = shelf_depth.get(p.ion, 0)
                if depth == 0:
                    raise ProtocolError(
                        f"from_shelf without matching to_shelf on ion {p.ion}")
                shelf_depth[p.ion] = depth - 1
            elif p.kind not in _POPULATION_KINDS | _TIMELINE_KINDS:
                raise ProtocolError(f"unknown primitive kind {p.kind!r}")

    @property
    def t_end(self) -> float:
        return self.primitives[-1].t_end if self.primitives else 0.0

    @property
    def mode_indices(self) -> tuple:
        return tuple(p.mode for p in self.primitives if p.kind == "excite")

    def for_ion(self, ion: int) -> "PulseProgram":
        return PulseProgram(
            tuple(p for p in self.primitives if p.ion == ion), self.params)

    def transition_map(self, prim: Primitive) -> TransitionMap:
        if prim.kind == "excite":
            return excitation_map(self.params, prim.window, prim.mode)
        if prim.kind in ("pump", "init_pump"):
            return pump_map(self.params)
        if prim.kind == "shelve_to":
            return shelve_map("to_shelf")
        if prim.kind == "shelve_from":
            return shelve_map("from_shelf")
        return WaitMap(self.params)


def program_from_strategy(strategy: Strategy, params: AtomicParams = AtomicParams(),
                          pulse_interval: Optional[float] = None,
                          pump_duration: float = 100e-9,
                          initial_pump: bool = False,
                          init_pump_duration: float = 100e-9,
                          start_mode: int = 1, ion: int = 0,
                          t0: float = 0.0) -> PulseProgram:
    """Compile a strategy into a flat single-ion pulse program.

    ``pulse_interval`` defaults to the strategy window when that is
    finite, else to 200 ns.
    """
    if pulse_interval is None:
        pulse_interval = strategy.window if math.isfinite(strategy.window) else 200e-9
    prims = []
    t = t0
    if initial_pump:
        prims.append(Primitive("init_pump", t, init_pump_duration, ion))
        t += init_pump_duration
    for k in range(1, strategy.pulse_count + 1):
        prims.append(Primitive("excite", t, pulse_interval, ion,
                               mode=start_mode + k - 1, window=strategy.window))
        t += pulse_interval
        if k in strategy.pump_after:
            prims.append(Primitive("pump", t, pump_duration, ion))
            t += pump_duration
    return PulseProgram(tuple(prims), params)


@dataclass(frozen=True)
class EmissionProfile:
    """Per-mode collected-emission probabilities plus residual populations."""

    per_mode: tuple                 # ordered (mode index, probability) pairs
    residuals: dict = field(default_factory=dict)
    std_errors: Optional[tuple] = None
    samples: Optional[int] = None

    @property
    def probabilities(self) -> tuple:
        return tuple(p for _, p in self.per_mode)

    @property
    def total(self) -> float:
        return float(sum(p for _, p in self.per_mode))

    @property
    def grand_total(self) -> float:
        return self.total + float(sum(self.residuals.values()))


def _profile_from_population(pop: PopulationVector,
                             modes: Sequence[int]) -> EmissionProfile:
    tally = dict(pop.d_photon)
    for mode, p in pop.shelf_photon.items():
        tally[mode] = tally.get(mode, 0.0) + p
    per_mode = tuple((m, tally.get(m, 0.0)) for m in modes)
    residuals = {
        "S_up": pop.s_up,
        "S_down": pop.s_down,
        "P": pop.p_exc,
        "D_leak": pop.d_leak + pop.shelf_leak,
        "D_shelf": 0.0,
    }
    return EmissionProfile(per_mode=per_mode, residuals=residuals)


def run_program(initial: PopulationVector, program: PulseProgram,
                keep_trajectory: bool = True):
    """Apply each primitive's map in order.

    Returns ``(trajectory, profile)``; the trajectory starts with the
    initial vector.  Population conservation is enforced to 1e-9 at every
    step.
    """
    initial.check_normalized()
    pop = initial
    trajectory = [pop] if keep_trajectory else None
    for prim in program.primitives:
        pop = program.transition_map(prim).apply(pop)
        if abs(pop.total - 1.0) > MASS_ATOL:
            raise AnalysisError(
                f"population conservation violated at {prim.kind} "
                f"t={prim.t_start}: total={pop.total!r}")
        if keep_trajectory:
            trajectory.append(pop)
    profile = _profile_from_population(pop, program.mode_indices)
    if keep_trajectory:
        return trajectory, profile
    return [initial, pop], profile


def effective_branching_ratio(strategy: Strategy,
                              params: AtomicParams = AtomicParams()) -> float:
    """Total collected-emission probability starting from the initial
    sublevel under the given strategy."""
    program = program_from_strategy(strategy, params)
    _, profile = run_program(PopulationVector.pure(LevelState.S_UP), program,
                             keep_trajectory=False)
    return profile.total


def branching_ratio_curve(strategy: Strategy,
                          params: AtomicParams = AtomicParams()) -> np.ndarray:
    """Cumulative collected emission after each pulse of the strategy.

    Returns an array of length ``pulse_count``; entry k-1 is the
    effective branching ratio of the first k pulses.
    """
    program = program_from_strategy(strategy, params)
    pop = PopulationVector.pure(LevelState.S_UP)
    out = []
    for prim in program.primitives:
        pop = program.transition_map(prim).apply(pop)
        if prim.kind == "excite":
            out.append(pop.d_photon_total + sum(pop.shelf_photon.values()))
    return np.array(out)


def absorbing_distribution(tmap: TransitionMap, start: LevelState) -> dict:
    """Exact absorbing probabilities of the chain generated by ``tmap``.

    Solves the fundamental-matrix system on the aggregated basis; raises
    if the transient sub-chain does not contract.
    """
    T = tmap.matrix()
    n = len(BASIS)
    absorbing = [i for i in range(n)
                 if abs(T[i, i] - 1.0) < 1e-12 and
                 np.all(np.abs(np.delete(T[i], i)) < 1e-12)]
    start_i = BASIS.index(start)
    if start_i in absorbing:
        return {start: 1.0}
    transient = [i for i in range(n) if i not in absorbing]
    Q = T[np.ix_(transient, transient)]
    R = T[np.ix_(transient, absorbing)]
    radius = max(abs(np.linalg.eigvals(Q)))
    if radius >= 1.0 - 1e-12:
        raise AnalysisError(
            f"transient chain does not contract (spectral radius {radius})")
    B = np.linalg.solve(np.eye(len(transient)) - Q, R)
    row = B[transient.index(start_i)]
    return {BASIS[a]: float(row[j]) for j, a in enumerate(absorbing)}


def absorbing_distribution_power(tmap: TransitionMap, start: LevelState,
                                 tol: float = 1e-14,
                                 max_iter: int = 100000) -> dict:
    """Power-iteration oracle for :func:`absorbing_distribution`."""
    T = tmap.matrix()
    v = np.zeros(len(BASIS))
    v[BASIS.index(start)] = 1.0
    for _ in range(max_iter):
        nxt = v @ T
        if np.max(np.abs(nxt - v)) < tol:
            v = nxt
            break
        v = nxt
    return {s: float(v[i]) for i, s in enumerate(BASIS)}


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------

_MC_S_UP, _MC_S_DOWN, _MC_P, _MC_D_PHOTON, _MC_D_LEAK = range(5)


def _mc_sample_paths(program: PulseProgram, init_state: int, n: int,
                     rng: np.random.Generator):
    """Sample n trajectories; returns (final states, emitted mode per
    sample, -1 when none)."""
    pr = program.params
    state = np.full(n, init_state, dtype=np.int8)
    emitted_mode = np.full(n, -1, dtype=np.int64)
    shelved = np.zeros(n, dtype=bool)
    q = pr.pump_split_to_initial

    def resolve_carry(mask):
        if not mask.any():
            return
        u = rng.random(mask.sum())
        branch = np.select(
            [u < pr.p_br_D, u < pr.p_br_D + pr.p_br_S * pr.w_up],
            [_MC_D_LEAK, _MC_S_UP], default=_MC_S_DOWN)
        state[mask] = branch

    for prim in program.primitives:
        if prim.kind == "excite":
            tmap = program.transition_map(prim)
            d = tmap.decayed
            was_p = (state == _MC_P) & ~shelved
            was_up = (state == _MC_S_UP) & ~shelved
            # flipped-back carry sits in the ground state until next pulse
            state[was_p] = _MC_S_UP
            idx = np.flatnonzero(was_up)
            if idx.size:
                u = rng.random(idx.size)
                decayed = u < d
                u2 = rng.random(idx.size)
                branch = np.select(
                    [u2 < pr.p_br_D, u2 < pr.p_br_D + pr.p_br_S * pr.w_up],
                    [_MC_D_PHOTON, _MC_S_UP], default=_MC_S_DOWN)
                new_state = np.where(decayed, branch, _MC_P)
                state[idx] = new_state
                emit = idx[decayed & (branch == _MC_D_PHOTON)]
                emitted_mode[emit] = prim.mode
        elif prim.kind in ("pump", "init_pump"):
            resolve_carry((state == _MC_P) & ~shelved)
            dn = np.flatnonzero((state == _MC_S_DOWN) & ~shelved)
            if dn.size:
                u = rng.random(dn.size)
                state[dn] = np.where(u < q, _MC_S_UP, _MC_D_LEAK)
        elif prim.kind == "shelve_to":
            sel = (state == _MC_D_PHOTON) | (state == _MC_D_LEAK)
            shelved |= sel
        elif prim.kind == "shelve_from":
            shelved[:] = False
        else:  # wait / shuttle / cool
            resolve_carry((state == _MC_P) & ~shelved)

    return state, emitted_mode


def _mc_run_shard(program: PulseProgram, init_state: int, n: int,
                  rng: np.random.Generator):
    """Sample n trajectories; returns (per-mode counts, residual counts)."""
    state, emitted_mode = _mc_sample_paths(program, init_state, n, rng)
    modes = program.mode_indices
    mode_counts = {m: int(np.count_nonzero(emitted_mode == m)) for m in modes}
    residual_counts = {
        "S_up": int(np.count_nonzero(state == _MC_S_UP)),
        "S_down": int(np.count_nonzero(state == _MC_S_DOWN)),
        "P": int(np.count_nonzero(state == _MC_P)),
        "D_leak": int(np.count_nonzero(state == _MC_D_LEAK)),
        "D_shelf": 0,
    }
    return mode_counts, residual_counts


def monte_carlo_emission_modes(program: PulseProgram, samples: int,
                               seed: int) -> np.ndarray:
    """Per-sample emitted mode index (-1 when no collected emission),
    starting from the pure initial sublevel.  Deterministic per seed."""
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    _, emitted = _mc_sample_paths(program, _MC_S_UP, samples,
                                  np.random.default_rng(
                                      np.random.SeedSequence(seed)))
    return emitted


def monte_carlo_oracle(initial: PopulationVector, program: PulseProgram,
                       samples: int, seed: int,
                       shards: int = 1) -> EmissionProfile:
    """Seeded path-sampling estimate of the emission profile.

    Deterministic for a fixed seed; shard results are integer counts so
    the merge is order-independent.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    if abs(initial.s_up - 1.0) < 1e-12:
        init_state = _MC_S_UP
    elif abs(initial.s_down - 1.0) < 1e-12:
        init_state = _MC_S_DOWN
    else:
        raise ParameterError(
            "Monte Carlo oracle supports pure S_up or S_down starts")

    seqs = np.random.SeedSequence(seed).spawn(shards)
    per_shard = [samples // shards] * shards
    per_shard[-1] += samples - sum(per_shard)
    modes = program.mode_indices
    mode_counts = {m: 0 for m in modes}
    residual_counts = {"S_up": 0, "S_down": 0, "P": 0, "D_leak": 0,
                       "D_shelf": 0}
    for sub, n in zip(seqs, per_shard):
        mc, rc = _mc_run_shard(program, init_state, n,
                               np.random.default_rng(sub))
        for m, c in mc.items():
            mode_counts[m] += c
        for k, c in rc.items():
            residual_counts[k] += c

    per_mode = tuple((m, mode_counts[m] / samples) for m in modes)
    errs = tuple(math.sqrt(max(p * (1.0 - p), 1.0 / samples) / samples)
                 for _, p in per_mode)
    residuals = {k: c / samples for k, c in residual_counts.items()}
    return EmissionProfile(per_mode=per_mode, residuals=residuals,
                           std_errors=errs, samples=samples)
