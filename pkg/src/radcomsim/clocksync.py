"""Residual clock errors of the access points.

Only the residual offsets left after synchronization are modeled; offsets
are constant over a frame. Each node draws its offsets from its own
generator keyed by ``(seed, node_id)``, and always consumes the same three
variates in the same order, so changing a spread parameter rescales the
draw instead of reshuffling it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .errors import InvalidParameterError

_CLOCK_STREAM = 0xC10C

TimeDist = Literal["zero", "gaussian", "uniform"]
PhaseDist = Literal["zero", "uniform"]
CfoDist = Literal["zero", "gaussian"]

SCENARIOS = ("perfect", "time-only", "free-running")


@dataclass(frozen=True)
class ClockModel:
    """Distributions of the per-node offsets.

    ``sigma_t`` is the standard deviation of the time offset in seconds for
    both the Gaussian and the uniform law (the uniform law spans
    ``+-sqrt(3)*sigma_t``). Phases are uniform on ``[0, 2*pi)`` when enabled.
    """

    time_dist: TimeDist = "zero"
    sigma_t: float = 0.0
    phase_dist: PhaseDist = "zero"
    cfo_dist: CfoDist = "zero"
    sigma_cfo: float = 0.0
    kind: str = "custom"

    def __post_init__(self):
        if self.time_dist not in ("zero", "gaussian", "uniform"):
            raise InvalidParameterError(f"unknown time-offset law {self.time_dist!r}")
        if self.phase_dist not in ("zero", "uniform"):
            raise InvalidParameterError(f"unknown phase-offset law {self.phase_dist!r}")
        if self.cfo_dist not in ("zero", "gaussian"):
            raise InvalidParameterError(f"unknown CFO law {self.cfo_dist!r}")
        for name in ("sigma_t", "sigma_cfo"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class ClockState:
    node_id: int
    time_offset: float = 0.0
    phase: float = 0.0
    cfo: float = 0.0


def clock_scenario(kind: str, sigma_t: float = 0.0, sigma_cfo: float = 0.0) -> ClockModel:
    """Clock model for one of the synchronization regimes.

    perfect       all offsets zero
    time-only     zero time offset, independent uniform phases
    free-running  Gaussian time offsets with std ``sigma_t``, uniform phases
    """
    cfo_dist = "gaussian" if sigma_cfo > 0 else "zero"
    if kind == "perfect":
        return ClockModel(kind=kind)
    if kind == "time-only":
        return ClockModel(phase_dist="uniform", cfo_dist=cfo_dist, sigma_cfo=sigma_cfo, kind=kind)
    if kind == "free-running":
        return ClockModel("gaussian", sigma_t, "uniform", cfo_dist, sigma_cfo, kind=kind)
    raise InvalidParameterError(f"unknown clock scenario {kind!r}; expected one of {SCENARIOS}")


def sample_clocks(model: ClockModel, node_ids: Iterable[int], seed: int,
                  pin_reference: bool = False) -> dict[int, ClockState]:
    """One state per node id. With ``pin_reference`` the first listed node gets zero offsets."""
    node_ids = list(node_ids)
    if not node_ids:
        raise InvalidParameterError("node list is empty")
    states = {}
    for i, nid in enumerate(node_ids):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([int(seed), _CLOCK_STREAM, int(nid)])))
        z_t, u_phi, z_f = rng.standard_normal(), rng.random(), rng.standard_normal()
        if pin_reference and i == 0:
            states[nid] = ClockState(nid)
            continue
        if model.time_dist == "gaussian":
            eps = model.sigma_t * z_t
        elif model.time_dist == "uniform":
            # Map the normal draw to a uniform one so the stream layout is unchanged.
            u = 0.5 * math.erfc(-z_t / math.sqrt(2.0))
            eps = model.sigma_t * math.sqrt(3.0) * (2.0 * u - 1.0)
        else:
            eps = 0.0
        phi = 2.0 * math.pi * u_phi if model.phase_dist == "uniform" else 0.0
        cfo = model.sigma_cfo * z_f if model.cfo_dist == "gaussian" else 0.0
        states[nid] = ClockState(nid, float(eps), float(phi), float(cfo))
    return states


def perfect_clocks(node_ids: Iterable[int]) -> dict[int, ClockState]:
    return {nid: ClockState(nid) for nid in node_ids}
