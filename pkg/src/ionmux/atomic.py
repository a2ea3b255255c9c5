"""Level scheme and primitive transition maps of the multiple-excitation cycle.

The communication qubit is reduced to the manifolds that matter for rate
modeling: the two ground Zeeman sublevels, the short-lived excited level,
and three metastable sinks which differ only in bookkeeping (photon
collected during an excitation window, photon lost during a pumping, or
population parked on the shelf level).  All primitives are row-stochastic
maps on this state space; per-mode photon tallies ride along so a single
pass through a pulse program yields the full emission profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ParameterError, ProtocolError

PROB_ATOL = 1e-12
MASS_ATOL = 1e-9


class LevelState(Enum):
    """Aggregated level set of the communication qubit."""

    S_UP = "S_up"          # initial ground sublevel, excited by the pulse train
    S_DOWN = "S_down"      # other ground sublevel, cleaned by intermediate pumping
    P = "P"                # short-lived excited level (carry-over channel)
    D_PHOTON = "D_photon"  # metastable, reached inside a detection window
    D_LEAK = "D_leak"      # metastable, reached during a pumping (photon lost)
    D_SHELF = "D_shelf"    # second metastable shelf protecting parked population


# Fixed basis order used whenever a map is expressed as a matrix.
BASIS = (
    LevelState.S_UP,
    LevelState.S_DOWN,
    LevelState.P,
    LevelState.D_PHOTON,
    LevelState.D_LEAK,
    LevelState.D_SHELF,
)
_IDX = {s: i for i, s in enumerate(BASIS)}


@dataclass(frozen=True)
class AtomicParams:
    """Branching and decay parameters of the excitation cycle.

    p_br_D : probability of decaying from the excited level into the
        photon-emitting metastable level.
    w_up / w_down : decay weights within the ground manifold back to the
        initial sublevel and to the other Zeeman sublevel.
    tau_P : 1/e lifetime of the excited level in seconds.
    """

    p_br_D: float = 0.06
    w_up: float = 2.0 / 3.0
    tau_P: float = 7e-9

    def __post_init__(self):
        for name in ("p_br_D", "w_up"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name}={v} outside [0, 1]")
        if self.tau_P <= 0.0:
            raise ParameterError(f"tau_P={self.tau_P} must be positive")

    @property
    def p_br_S(self) -> float:
        return 1.0 - self.p_br_D

    @property
    def w_down(self) -> float:
        return 1.0 - self.w_up

    @property
    def pump_split_to_initial(self) -> float:
        """Closed-form absorbing split of the intermediate pumping:
        probability that cycled dark-sublevel population ends in the
        initial sublevel rather than leaking to the metastable level."""
        a = self.p_br_S * self.w_down
        return a / (a + self.p_br_D)


def _freeze(d: Mapping[int, float]) -> Mapping[int, float]:
    return MappingProxyType(dict(d))


@dataclass(frozen=True)
class PopulationVector:
    """Probability distribution over the level set with per-mode tallies.

    ``d_photon`` maps mode index -> collected-emission probability; the
    shelf keeps its own split so shelving can be inverted exactly.
    """

    s_up: float = 0.0
    s_down: float = 0.0
    p_exc: float = 0.0
    d_leak: float = 0.0
    d_photon: Mapping[int, float] = field(default_factory=dict)
    shelf_photon: Mapping[int, float] = field(default_factory=dict)
    shelf_leak: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "d_photon", _freeze(self.d_photon))
        object.__setattr__(self, "shelf_photon", _freeze(self.shelf_photon))

    @classmethod
    def pure(cls, state: LevelState, mode: int = 0) -> "PopulationVector":
        if state is LevelState.S_UP:
            return cls(s_up=1.0)
        if state is LevelState.S_DOWN:
            return cls(s_down=1.0)
        if state is LevelState.P:
            return cls(p_exc=1.0)
        if state is LevelState.D_PHOTON:
            return cls(d_photon={mode: 1.0})
        if state is LevelState.D_LEAK:
            return cls(d_leak=1.0)
        return cls(shelf_leak=1.0)

    @property
    def d_photon_total(self) -> float:
        return float(sum(self.d_photon.values()))

    @property
    def d_shelf(self) -> float:
        return float(sum(self.shelf_photon.values())) + self.shelf_leak

    @property
    def total(self) -> float:
        return (self.s_up + self.s_down + self.p_exc + self.d_leak
                + self.d_photon_total + self.d_shelf)

    def as_array(self) -> np.ndarray:
        """Aggregate view in the fixed BASIS order (mode tallies summed)."""
        return np.array([
            self.s_up, self.s_down, self.p_exc,
            self.d_photon_total, self.d_leak, self.d_shelf,
        ])

    def check_normalized(self, atol: float = MASS_ATOL) -> None:
        if abs(self.total - 1.0) > atol:
            raise ParameterError(
                f"population not normalized: total={self.total!r}")


class TransitionMap:
    """One primitive operation as a row-stochastic map.

    Subclasses implement ``apply`` on full population vectors (with mode
    tallies) and ``matrix`` on the aggregated six-state basis for
    absorbing-chain analysis.
    """

    label = "identity"

    def apply(self, pop: PopulationVector) -> PopulationVector:
        return pop

    def matrix(self) -> np.ndarray:
        return np.eye(len(BASIS))


def _merge_mode(d: Mapping[int, float], mode: int, amount: float) -> dict:
    out = dict(d)
    if amount != 0.0:
        out[mode] = out.get(mode, 0.0) + amount
    return out


class ExcitationMap(TransitionMap):
    """One excitation pulse followed by a decay window.

    The pulse swaps the initial sublevel with the excited level: fresh
    ground population is promoted, while residual excited population from
    the previous window is flipped back down without emission.  During the
    window the promoted population decays with probability
    ``1 - exp(-window/tau_P)``; the undecayed remainder is kept in the
    carry-over channel so that composition of consecutive pulses is exact.
    """

    def __init__(self, params: AtomicParams, window: float, mode_index: int):
        if not (window > 0.0):
            raise ParameterError(f"window={window} must be positive")
        self.params = params
        self.window = window
        self.mode_index = mode_index
        self.decayed = 1.0 - math.exp(-window / params.tau_P) \
            if math.isfinite(window) else 1.0
        self.label = f"excite[{mode_index}]"

    def apply(self, pop: PopulationVector) -> PopulationVector:
        if self.mode_index in pop.d_photon or self.mode_index in pop.shelf_photon:
            raise ProtocolError(
                f"mode index {self.mode_index} already carries a tally")
        pr = self.params
        dec = pop.s_up * self.decayed
        return PopulationVector(
            s_up=pop.p_exc + dec * pr.p_br_S * pr.w_up,
            s_down=pop.s_down + dec * pr.p_br_S * pr.w_down,
            p_exc=pop.s_up * (1.0 - self.decayed),
            d_leak=pop.d_leak,
            d_photon=_merge_mode(pop.d_photon, self.mode_index, dec * pr.p_br_D),
            shelf_photon=pop.shelf_photon,
            shelf_leak=pop.shelf_leak,
        )

    def matrix(self) -> np.ndarray:
        pr = self.params
        d = self.decayed
        m = np.eye(len(BASIS))
        i = _IDX
        m[i[LevelState.S_UP], i[LevelState.S_UP]] = d * pr.p_br_S * pr.w_up
        m[i[LevelState.S_UP], i[LevelState.S_DOWN]] = d * pr.p_br_S * pr.w_down
        m[i[LevelState.S_UP], i[LevelState.P]] = 1.0 - d
        m[i[LevelState.S_UP], i[LevelState.D_PHOTON]] = d * pr.p_br_D
        m[i[LevelState.P], i[LevelState.P]] = 0.0
        m[i[LevelState.P], i[LevelState.S_UP]] = 1.0
        return m


def _resolve_carry(pop: PopulationVector, pr: AtomicParams):
    """Decay any residual excited population with the photon uncollected.

    Used when a non-excitation primitive (pump, wait, shuttle, cooling)
    follows a truncated window: the wavepacket tail falls outside every
    detection window, so the branch lands in the leak sink.
    """
    dec = pop.p_exc
    return (pop.s_up + dec * pr.p_br_S * pr.w_up,
            pop.s_down + dec * pr.p_br_S * pr.w_down,
            pop.d_leak + dec * pr.p_br_D)


class PumpMap(TransitionMap):
    """Intermediate optical pumping, fully absorbed.

    Dark-sublevel population is cycled through the excited level until it
    either lands back in the initial sublevel or leaks to the metastable
    level; the split is the closed-form absorbing probability.  The
    initial sublevel is a fixed point (the sigma+ light does not couple
    it), and the metastable sinks are untouched because no repump light is
    applied during the pumping.
    """

    label = "pump"

    def __init__(self, params: AtomicParams):
        self.params = params

    def apply(self, pop: PopulationVector) -> PopulationVector:
        pr = self.params
        s_up, s_down, d_leak = _resolve_carry(pop, pr)
        q = pr.pump_split_to_initial
        return PopulationVector(
            s_up=s_up + s_down * q,
            s_down=0.0,
            p_exc=0.0,
            d_leak=d_leak + s_down * (1.0 - q),
            d_photon=pop.d_photon,
            shelf_photon=pop.shelf_photon,
            shelf_leak=pop.shelf_leak,
        )

    def matrix(self) -> np.ndarray:
        pr = self.params
        q = pr.pump_split_to_initial
        m = np.eye(len(BASIS))
        i = _IDX
        m[i[LevelState.S_DOWN], i[LevelState.S_DOWN]] = 0.0
        m[i[LevelState.S_DOWN], i[LevelState.S_UP]] = q
        m[i[LevelState.S_DOWN], i[LevelState.D_LEAK]] = 1.0 - q
        # carry-over channel resolves without collection
        m[i[LevelState.P], i[LevelState.P]] = 0.0
        m[i[LevelState.P], i[LevelState.S_UP]] = (
            pr.p_br_S * pr.w_up + pr.p_br_S * pr.w_down * q)
        m[i[LevelState.P], i[LevelState.D_LEAK]] = (
            pr.p_br_D + pr.p_br_S * pr.w_down * (1.0 - q))
        return m


class PumpCycleMap(TransitionMap):
    """A single internal cycle of the intermediate pumping.

    Exposed so the absorbing split can be cross-checked against the
    fundamental-matrix solution and a power iteration; programs use the
    fully absorbed :class:`PumpMap` instead.
    """

    label = "pump-cycle"

    def __init__(self, params: AtomicParams):
        self.params = params

    def apply(self, pop: PopulationVector) -> PopulationVector:
        pr = self.params
        cyc = pop.s_down
        return PopulationVector(
            s_up=pop.s_up + cyc * pr.p_br_S * pr.w_down,
            s_down=cyc * pr.p_br_S * pr.w_up,
            p_exc=pop.p_exc,
            d_leak=pop.d_leak + cyc * pr.p_br_D,
            d_photon=pop.d_photon,
            shelf_photon=pop.shelf_photon,
            shelf_leak=pop.shelf_leak,
        )

    def matrix(self) -> np.ndarray:
        pr = self.params
        m = np.eye(len(BASIS))
        i = _IDX
        m[i[LevelState.S_DOWN], i[LevelState.S_DOWN]] = pr.p_br_S * pr.w_up
        m[i[LevelState.S_DOWN], i[LevelState.S_UP]] = pr.p_br_S * pr.w_down
        m[i[LevelState.S_DOWN], i[LevelState.D_LEAK]] = pr.p_br_D
        return m


class ShelveMap(TransitionMap):
    """Move metastable population to the shelf level, or bring it back.

    Idealized as lossless and instantaneous in population space; the
    tally split is preserved so to_shelf followed by from_shelf is the
    identity.  Any timeline cost is carried by the enclosing primitive.
    """

    def __init__(self, direction: str):
        if direction not in ("to_shelf", "from_shelf"):
            raise ParameterError(f"unknown shelve direction {direction!r}")
        self.direction = direction
        self.label = f"shelve:{direction}"

    def apply(self, pop: PopulationVector) -> PopulationVector:
        if self.direction == "to_shelf":
            merged = dict(pop.shelf_photon)
            for mode, p in pop.d_photon.items():
                merged[mode] = merged.get(mode, 0.0) + p
            return PopulationVector(
                s_up=pop.s_up, s_down=pop.s_down, p_exc=pop.p_exc,
                d_leak=0.0, d_photon={},
                shelf_photon=merged,
                shelf_leak=pop.shelf_leak + pop.d_leak,
            )
        merged = dict(pop.d_photon)
        for mode, p in pop.shelf_photon.items():
            merged[mode] = merged.get(mode, 0.0) + p
        return PopulationVector(
            s_up=pop.s_up, s_down=pop.s_down, p_exc=pop.p_exc,
            d_leak=pop.d_leak + pop.shelf_leak,
            d_photon=merged, shelf_photon={}, shelf_leak=0.0,
        )

    def matrix(self) -> np.ndarray:
        m = np.eye(len(BASIS))
        i = _IDX
        if self.direction == "to_shelf":
            src, dst = (LevelState.D_PHOTON, LevelState.D_LEAK), LevelState.D_SHELF
            for s in src:
                m[i[s], i[s]] = 0.0
                m[i[s], i[dst]] = 1.0
        else:
            m[i[LevelState.D_SHELF], i[LevelState.D_SHELF]] = 0.0
            m[i[LevelState.D_SHELF], i[LevelState.D_LEAK]] = 1.0
        return m


class WaitMap(TransitionMap):
    """Timeline-only primitive (wait, shuttle, cooling block).

    Identical to the identity except that residual excited population is
    resolved without collection, since its detection window has closed.
    """

    label = "wait"

    def __init__(self, params: AtomicParams):
        self.params = params

    def apply(self, pop: PopulationVector) -> PopulationVector:
        s_up, s_down, d_leak = _resolve_carry(pop, self.params)
        return PopulationVector(
            s_up=s_up, s_down=s_down, p_exc=0.0, d_leak=d_leak,
            d_photon=pop.d_photon,
            shelf_photon=pop.shelf_photon, shelf_leak=pop.shelf_leak,
        )

    def matrix(self) -> np.ndarray:
        pr = self.params
        m = np.eye(len(BASIS))
        i = _IDX
        m[i[LevelState.P], i[LevelState.P]] = 0.0
        m[i[LevelState.P], i[LevelState.S_UP]] = pr.p_br_S * pr.w_up
        m[i[LevelState.P], i[LevelState.S_DOWN]] = pr.p_br_S * pr.w_down
        m[i[LevelState.P], i[LevelState.D_LEAK]] = pr.p_br_D
        return m


def excitation_map(params: AtomicParams, window: float,
                   mode_index: int) -> ExcitationMap:
    """Map for one pulse plus a decay window of the given length
    (``math.inf`` for a fully resolved decay)."""
    return ExcitationMap(params, window, mode_index)


def pump_map(params: AtomicParams) -> PumpMap:
    """Fully absorbed intermediate-pumping map."""
    return PumpMap(params)


def shelve_map(direction: str) -> ShelveMap:
    """Shelving map; ``direction`` is ``to_shelf`` or ``from_shelf``."""
    return ShelveMap(direction)
