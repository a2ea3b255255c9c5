"""Two-node coincidence heralding over aligned multiplexed trains.

Each node runs the same pulse-train geometry; a photonic Bell-state
measurement heralds ion-ion entanglement on a two-photon coincidence
inside one detection window.  Every window splits the joint attempt into
three exhaustive cases: both ions emit (coincidence possible), neither
emits (the train continues), or exactly one emits (the attempt is dead
from then on).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .atomic import LevelState, PopulationVector
from .engine import Strategy
from .errors import ParameterError, ProtocolError
from .protocol import ProtocolSpec, compile as compile_spec, active_span, \
    link_params_for, run_program
from .timing import LinkParams, EnhancementCurve, enhancement, n_half_duty


@dataclass(frozen=True)
class NodePair:
    """Two protocol specs heralded by a shared Bell-state measurement."""

    spec_a: ProtocolSpec
    spec_b: ProtocolSpec
    bsm_efficiency: float = 0.5     # fraction of both-photon events accepted
    window_alignment: float = 0.0   # residual time offset, must be ~0

    def __post_init__(self):
        if not 0.0 <= self.bsm_efficiency <= 1.0:
            raise ParameterError("bsm_efficiency outside [0, 1]")
        if self.spec_a.mode_count != self.spec_b.mode_count:
            raise ProtocolError(
                f"mode counts differ: {self.spec_a.mode_count} vs "
                f"{self.spec_b.mode_count}")
        wa = self.spec_a.per_ion_strategy.window
        wb = self.spec_b.per_ion_strategy.window
        if wa != wb:
            raise ProtocolError("detection windows must be identical")


def window_coincidence(p_a: float, p_b: float, pair: NodePair) -> float:
    """Accepted-coincidence probability of one window given per-side
    detected-photon probabilities (efficiencies already applied)."""
    for p in (p_a, p_b):
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"probability {p} outside [0, 1]")
    return p_a * p_b * pair.bsm_efficiency


@dataclass(frozen=True)
class WindowTable:
    """Per-window joint-attempt masses; each row balances to 1 together
    with everything absorbed before it."""

    modes: tuple
    heralded: tuple        # accepted coincidence in this window
    both_emit: tuple       # both ions emit here (before BSM acceptance)
    one_emits: tuple       # exactly one side emits here (attempt dead)
    terminated: tuple      # cumulative dead mass after this window
    continuing: tuple      # neither side has emitted yet


@dataclass(frozen=True)
class IonIonReport:
    pair_name: str
    table: WindowTable
    p_coincidence: float   # per round
    t_round: float
    rate: float
    quality_preserved: bool = True   # heralded state unaffected by later pulses

    def to_dict(self) -> dict:
        return {
            "pair": self.pair_name,
            "p_coincidence": self.p_coincidence,
            "t_round_s": self.t_round,
            "rate_per_s": self.rate,
            "quality_preserved": self.quality_preserved,
        }


def _side_emissions(spec: ProtocolSpec):
    """Raw per-mode emission probabilities of one node, grouped per
    communication ion (each ion starts its train in the initial state)."""
    program = compile_spec(spec)
    segments = []
    for ion in spec.shuttle_plan:
        sub = program.for_ion(ion)
        _, profile = run_program(PopulationVector.pure(LevelState.S_UP), sub,
                                 keep_trajectory=False)
        segments.append(profile.per_mode)
    segments.sort(key=lambda seg: seg[0][0])
    return program, segments


def simulate_ion_ion(pair: NodePair) -> IonIonReport:
    """Joint evolution of both nodes with the three-case classification.

    Within one ion's train the two chains are independent until the first
    emission: a lone emission kills that train for coincidences, a joint
    emission heralds (with the BSM acceptance factor), and anything else
    continues.  A later shuttled ion starts a fresh train, discounted by
    the probability that no earlier window heralded.
    """
    prog_a, segs_a = _side_emissions(pair.spec_a)
    prog_b, segs_b = _side_emissions(pair.spec_b)
    if [len(s) for s in segs_a] != [len(s) for s in segs_b]:
        raise ProtocolError("mode trains differ between the two nodes")
    eff_a = pair.spec_a.efficiencies.product
    eff_b = pair.spec_b.efficiencies.product

    modes, heralded, both, one, terminated, continuing = \
        [], [], [], [], [], []
    no_herald = 1.0      # probability no earlier window heralded
    for seg_a, seg_b in zip(segs_a, segs_b):
        p_a = np.array([p for _, p in seg_a])
        p_b = np.array([p for _, p in seg_b])
        surv_a = 1.0 - np.concatenate(([0.0], np.cumsum(p_a)))
        surv_b = 1.0 - np.concatenate(([0.0], np.cumsum(p_b)))
        h = p_a * eff_a * p_b * eff_b * pair.bsm_efficiency
        b = p_a * p_b
        o = p_a * surv_b[1:] + surv_a[1:] * p_b
        cont = surv_a[1:] * surv_b[1:]
        modes.extend(m for m, _ in seg_a)
        heralded.extend(no_herald * h)
        both.extend(no_herald * b)
        one.extend(no_herald * o)
        continuing.extend(no_herald * cont)
        no_herald *= (1.0 - float(np.sum(h)))
    # whatever is neither heralded yet nor alive in the current train
    cum_h = np.cumsum(heralded)
    terminated = [1.0 - c - hh for c, hh in zip(continuing, cum_h)]

    table = WindowTable(
        modes=tuple(modes),
        heralded=tuple(float(x) for x in heralded),
        both_emit=tuple(float(x) for x in both),
        one_emits=tuple(float(x) for x in one),
        terminated=tuple(float(x) for x in terminated),
        continuing=tuple(float(x) for x in continuing),
    )
    t_round = max(prog_a.t_end, prog_b.t_end)
    p_c = float(sum(heralded))
    return IonIonReport(
        pair_name=f"{pair.spec_a.name}|{pair.spec_b.name}",
        table=table, p_coincidence=p_c, t_round=t_round,
        rate=p_c / t_round)


def monte_carlo_ion_ion(pair: NodePair, samples: int, seed: int):
    """Independent two-ion path-sampling oracle.

    Samples both nodes' emission modes per ion train, thins by detection
    efficiency, applies the BSM acceptance, and heralds on the first
    joint window.  Returns (per-window heralded estimates, standard
    errors, total estimate).
    """
    from .engine import _MC_S_UP, _mc_sample_paths  # shared sampler

    prog_a, segs_a = _side_emissions(pair.spec_a)
    prog_b, segs_b = _side_emissions(pair.spec_b)
    eff_a = pair.spec_a.efficiencies.product
    eff_b = pair.spec_b.efficiencies.product
    seq = np.random.SeedSequence(seed)
    rng = np.random.default_rng(seq)

    herald_mode = np.full(samples, -1, dtype=np.int64)
    for ion_a, ion_b in zip(pair.spec_a.shuttle_plan,
                            pair.spec_b.shuttle_plan):
        sub_a = prog_a.for_ion(ion_a)
        sub_b = prog_b.for_ion(ion_b)
        _, em_a = _mc_sample_paths(sub_a, _MC_S_UP, samples, rng)
        _, em_b = _mc_sample_paths(sub_b, _MC_S_UP, samples, rng)
        det_a = (em_a >= 0) & (rng.random(samples) < eff_a)
        det_b = (em_b >= 0) & (rng.random(samples) < eff_b)
        coinc = det_a & det_b & (em_a == em_b) & \
            (rng.random(samples) < pair.bsm_efficiency)
        fresh = coinc & (herald_mode < 0)
        herald_mode[fresh] = em_a[fresh]

    all_modes = [m for seg in segs_a for m, _ in seg]
    counts = np.array([int(np.count_nonzero(herald_mode == m))
                       for m in all_modes], dtype=np.int64)
    est = counts / samples
    err = np.sqrt(np.maximum(est * (1.0 - est), 1.0 / samples) / samples)
    return est, err, float(np.sum(est))


def _resize(spec: ProtocolSpec, pulses: int) -> ProtocolSpec:
    """Same spec with a different per-ion pulse count; the pump pattern of
    canonical strategies extends with its period, others truncate."""
    s = spec.per_ion_strategy
    n_old = s.pulse_count
    if s.pump_after == frozenset(range(1, n_old + 1)):
        pumps = frozenset(range(1, pulses + 1))
    elif s.pump_after:
        period = min(s.pump_after)
        pumps = frozenset(range(period, pulses + 1, period))
    else:
        pumps = frozenset()
    return replace(spec, per_ion_strategy=Strategy(pulses, pumps, s.window))


def _with_ions(spec: ProtocolSpec, ions: int) -> ProtocolSpec:
    return replace(spec, ions=ions, shuttle_plan=None)


def sweep_enhancement(base: NodePair, axis: str,
                      grid: Sequence[int]):
    """Ion-ion enhancement versus total mode count.

    ``axis`` is ``mode_count`` (vary pulses per ion) or ``ion_count``
    (fixed pulses per ion, vary ions and shuttles).  Returns the
    probability-corrected curve and the homogeneous timing-only curve as
    ``(corrected, uncorrected)`` EnhancementCurve pair.
    """
    if axis not in ("mode_count", "ion_count"):
        raise ParameterError(f"unknown sweep axis {axis!r}")
    if len(grid) == 0 or list(grid) != sorted(set(grid)):
        raise ParameterError("grid must be non-empty and increasing")

    def pair_at(n: int) -> NodePair:
        if axis == "mode_count":
            return replace(base, spec_a=_resize(base.spec_a, n),
                           spec_b=_resize(base.spec_b, n))
        return replace(base, spec_a=_with_ions(base.spec_a, n),
                       spec_b=_with_ions(base.spec_b, n))

    # true single-mode baseline: one ion, one pulse, no shuttles
    single = replace(base,
                     spec_a=_resize(_with_ions(base.spec_a, 1), 1),
                     spec_b=_resize(_with_ions(base.spec_b, 1), 1))
    ref = simulate_ion_ion(single)
    r0 = ref.rate
    t0 = ref.t_round
    corrected = []
    uncorrected = []
    link_last: Optional[LinkParams] = None
    for n in grid:
        p = pair_at(int(n))
        rep = simulate_ion_ion(p)
        corrected.append((p.spec_a.mode_count, rep.rate / r0))
        prog = compile_spec(p.spec_a)
        link_last = link_params_for(p.spec_a, prog)
        uncorrected.append((p.spec_a.mode_count,
                            t0 / (prog.t_end / p.spec_a.mode_count)))
    n0 = n_half_duty(link_last) if link_last is not None else math.inf
    msat = (n0 + 1.0) / 2.0 if math.isfinite(n0) else math.inf
    return (EnhancementCurve(points=tuple(corrected), n_half=n0,
                             m_saturated=msat),
            EnhancementCurve(points=tuple(uncorrected), n_half=n0,
                             m_saturated=msat))
