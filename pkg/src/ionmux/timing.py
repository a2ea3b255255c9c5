"""Multiplexed-link timing algebra.

Effective attempt time, enhancement factor, the inhomogeneous-probability
correction, and the 50% duty-cycle saturation point.  Pure arithmetic in
SI seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ParameterError


@dataclass(frozen=True)
class LinkParams:
    """Timing parameters of one multiplexed link round."""

    L: float                 # fiber length, meters
    T_ovh: float             # averaged per-round overhead, seconds
    dt: float                # interval between successive modes, seconds
    N: int = 1               # mode count per round
    c_fiber: float = 2.0e8   # light speed in fiber, m/s

    def __post_init__(self):
        if self.L < 0.0:
            raise ParameterError("fiber length must be >= 0")
        if self.c_fiber <= 0.0:
            raise ParameterError("fiber light speed must be > 0")
        if self.T_ovh < 0.0:
            raise ParameterError("overhead must be >= 0")
        if self.dt < 0.0:
            raise ParameterError("mode interval must be >= 0")
        if self.N < 1:
            raise ParameterError("mode count must be >= 1")

    @property
    def round_trip(self) -> float:
        return 2.0 * self.L / self.c_fiber

    @property
    def t_single(self) -> float:
        """Averaged attempt time of the single-mode reference."""
        return self.round_trip + self.T_ovh + self.dt


def t_eff(link: LinkParams) -> float:
    """Averaged time cost per entangling attempt with N modes."""
    return (link.round_trip + link.T_ovh + link.N * link.dt) / link.N


def enhancement(link: LinkParams) -> float:
    """Rate enhancement over the single-mode reference (equal per-mode
    success probabilities assumed)."""
    return link.t_single / t_eff(link)


def enhancement_inhomogeneous(link: LinkParams, p: Sequence[float],
                              p0: float) -> float:
    """Enhancement corrected for unequal per-mode success probabilities.

    ``p`` holds the per-mode probabilities of the multiplexed train and
    ``p0`` the single-mode reference probability.
    """
    if len(p) == 0:
        raise ParameterError("per-mode probability list must be non-empty")
    if p0 <= 0.0:
        raise ParameterError("single-mode reference probability must be > 0")
    n = len(p)
    link_n = LinkParams(L=link.L, T_ovh=link.T_ovh, dt=link.dt, N=n,
                        c_fiber=link.c_fiber)
    return enhancement(link_n) * (sum(p) / n) / p0


def n_half_duty(link: LinkParams) -> float:
    """Mode count at which active emission time equals the waiting time
    (50% duty cycle).  Real-valued; infinite when dt = 0."""
    if link.dt == 0.0:
        return math.inf
    return (link.round_trip + link.T_ovh) / link.dt


@dataclass(frozen=True)
class EnhancementCurve:
    """Enhancement versus mode count with its saturation landmarks."""

    points: tuple            # (N, M) pairs
    n_half: float
    m_saturated: float

    @classmethod
    def sample(cls, link: LinkParams, grid: Sequence[int]) -> "EnhancementCurve":
        pts = []
        for n in grid:
            ln = LinkParams(L=link.L, T_ovh=link.T_ovh, dt=link.dt, N=int(n),
                            c_fiber=link.c_fiber)
            pts.append((int(n), enhancement(ln)))
        n0 = n_half_duty(link)
        return cls(points=tuple(pts), n_half=n0,
                   m_saturated=(n0 + 1.0) / 2.0 if math.isfinite(n0) else math.inf)
