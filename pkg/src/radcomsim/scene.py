"""Network geometry: access points, point targets and clutter scatterers.

All geometry is two-dimensional (x, y) in meters. Value types are frozen
dataclasses holding tuples, so a built scene can be shared freely between
worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Literal

from .errors import InvalidParameterError, SceneValidationError

Point = tuple[float, float]
Role = Literal["transmitter", "receiver"]
Reflectivity = Literal["normalized", "rcs-random"]

DEFAULT_CARRIER = 26e9


def _point(p) -> Point:
    x, y = p
    return (float(x), float(y))


@dataclass(frozen=True)
class AccessPoint:
    id: int
    position: Point
    role: Role
    serving_area: str = "SA1"
    carrier: float = DEFAULT_CARRIER

    def __post_init__(self):
        object.__setattr__(self, "position", _point(self.position))


@dataclass(frozen=True)
class Target:
    """Point target.

    ``amplitude`` is the complex link amplitude in "normalized" mode. In
    "rcs-random" mode each link draws an independent circular Gaussian
    amplitude with mean power ``abs(amplitude)**2``.
    """

    position: Point
    velocity: Point = (0.0, 0.0)
    amplitude: complex = 1.0 + 0.0j
    reflectivity: Reflectivity = "normalized"

    def __post_init__(self):
        object.__setattr__(self, "position", _point(self.position))
        object.__setattr__(self, "velocity", _point(self.velocity))
        object.__setattr__(self, "amplitude", complex(self.amplitude))


@dataclass(frozen=True)
class Scatterer:
    """Static clutter point with a fixed complex amplitude."""

    position: Point
    amplitude: complex

    def __post_init__(self):
        object.__setattr__(self, "position", _point(self.position))
        object.__setattr__(self, "amplitude", complex(self.amplitude))


@dataclass(frozen=True)
class Scene:
    transmitters: tuple[AccessPoint, ...]
    receivers: tuple[AccessPoint, ...]
    targets: tuple[Target, ...] = ()
    clutter: tuple[Scatterer, ...] = ()
    allow_colocated: bool = False

    def __post_init__(self):
        for name in ("transmitters", "receivers", "targets", "clutter"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def P(self) -> int:
        return len(self.transmitters)

    @property
    def Q(self) -> int:
        return len(self.receivers)

    @property
    def nodes(self) -> tuple[AccessPoint, ...]:
        return self.transmitters + self.receivers

    @property
    def node_ids(self) -> list[int]:
        return [ap.id for ap in self.nodes]

    def links(self) -> list[tuple[int, int]]:
        """All (p, q) index pairs in transmitter-major order."""
        return [(p, q) for p in range(self.P) for q in range(self.Q)]

    def with_targets(self, targets: Iterable[Target]) -> Scene:
        return replace(self, targets=tuple(targets))

    def translated(self, offset) -> Scene:
        dx, dy = _point(offset)

        def mv(p):
            return (p[0] + dx, p[1] + dy)

        return replace(
            self,
            transmitters=tuple(replace(a, position=mv(a.position)) for a in self.transmitters),
            receivers=tuple(replace(a, position=mv(a.position)) for a in self.receivers),
            targets=tuple(replace(t, position=mv(t.position)) for t in self.targets),
            clutter=tuple(replace(s, position=mv(s.position)) for s in self.clutter),
        )


def build_fig3_network(P: int = 8, Q: int = 8, spacing: float = 2.0,
                       carrier: float = DEFAULT_CARRIER) -> Scene:
    """Transmitters along the x-axis from the origin, receivers along the y-axis.

    Receivers start one spacing above the origin so no two nodes coincide.
    Transmitter ids are ``0..P-1`` and receiver ids ``P..P+Q-1``.
    """
    if not (spacing > 0 and math.isfinite(spacing)):
        raise InvalidParameterError(f"spacing must be positive, got {spacing}")
    if P < 1 or Q < 1:
        raise InvalidParameterError(f"P and Q must be >= 1, got P={P}, Q={Q}")
    txs = tuple(AccessPoint(i, (i * spacing, 0.0), "transmitter", "SA1", carrier)
                for i in range(P))
    rxs = tuple(AccessPoint(P + j - 1, (0.0, j * spacing), "receiver", "SA1", carrier)
                for j in range(1, Q + 1))
    return Scene(txs, rxs)


def _finite(p) -> bool:
    return all(math.isfinite(v) for v in p)


def scene_errors(scene: Scene) -> list[str]:
    errors = []
    if not scene.transmitters:
        errors.append("no transmitters")
    if not scene.receivers:
        errors.append("no receivers")
    seen: dict[int, int] = {}
    for ap in scene.nodes:
        seen[ap.id] = seen.get(ap.id, 0) + 1
        if not _finite(ap.position):
            errors.append(f"node {ap.id}: non-finite position {ap.position}")
        if not (ap.carrier > 0 and math.isfinite(ap.carrier)):
            errors.append(f"node {ap.id}: carrier must be positive")
    for ap in scene.transmitters:
        if ap.role != "transmitter":
            errors.append(f"node {ap.id}: listed as transmitter but role is {ap.role!r}")
    for ap in scene.receivers:
        if ap.role != "receiver":
            errors.append(f"node {ap.id}: listed as receiver but role is {ap.role!r}")
    for node_id, count in sorted(seen.items()):
        if count > 1:
            errors.append(f"duplicate node id {node_id}")
    if not scene.allow_colocated:
        for tx in scene.transmitters:
            for rx in scene.receivers:
                if tx.position == rx.position:
                    errors.append(f"transmitter {tx.id} co-positioned with receiver {rx.id}")
    for i, t in enumerate(scene.targets):
        if not (_finite(t.position) and _finite(t.velocity)):
            errors.append(f"target {i}: non-finite position or velocity")
        if not (abs(t.amplitude) > 0 and math.isfinite(abs(t.amplitude))):
            errors.append(f"target {i}: reflectivity magnitude must be > 0")
        if t.reflectivity not in ("normalized", "rcs-random"):
            errors.append(f"target {i}: unknown reflectivity mode {t.reflectivity!r}")
    for i, s in enumerate(scene.clutter):
        if not _finite(s.position) or not math.isfinite(abs(s.amplitude)):
            errors.append(f"clutter {i}: non-finite position or amplitude")
    return errors


def validate_scene(scene: Scene) -> Scene:
    """Return ``scene`` unchanged, or raise with every violated invariant."""
    errors = scene_errors(scene)
    if errors:
        raise SceneValidationError(errors)
    return scene


def _complex_to_list(z: complex) -> list[float]:
    return [z.real, z.imag]


def scene_to_dict(scene: Scene) -> dict:
    def ap(a: AccessPoint):
        return {"id": a.id, "position": list(a.position), "role": a.role,
                "serving_area": a.serving_area, "carrier": a.carrier}

    return {
        "transmitters": [ap(a) for a in scene.transmitters],
        "receivers": [ap(a) for a in scene.receivers],
        "targets": [{"position": list(t.position), "velocity": list(t.velocity),
                     "amplitude": _complex_to_list(t.amplitude),
                     "reflectivity": t.reflectivity} for t in scene.targets],
        "clutter": [{"position": list(s.position), "amplitude": _complex_to_list(s.amplitude)}
                    for s in scene.clutter],
        "allow_colocated": scene.allow_colocated,
    }


def _parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        re, im = v
        return complex(float(re), float(im))
    return complex(float(v))


def scene_from_dict(d: dict) -> Scene:
    def ap(a, role):
        return AccessPoint(int(a["id"]), _point(a["position"]), a.get("role", role),
                           str(a.get("serving_area", "SA1")),
                           float(a.get("carrier", DEFAULT_CARRIER)))

    return Scene(
        transmitters=tuple(ap(a, "transmitter") for a in d.get("transmitters", [])),
        receivers=tuple(ap(a, "receiver") for a in d.get("receivers", [])),
        targets=tuple(Target(_point(t["position"]), _point(t.get("velocity", (0, 0))),
                             _parse_complex(t.get("amplitude", 1.0)),
                             t.get("reflectivity", "normalized"))
                      for t in d.get("targets", [])),
        clutter=tuple(Scatterer(_point(s["position"]), _parse_complex(s["amplitude"]))
                      for s in d.get("clutter", [])),
        allow_colocated=bool(d.get("allow_colocated", False)),
    )
