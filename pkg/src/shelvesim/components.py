"""Wavefunction components and the interaction graph between them.

A *component* is one basis term of the joint atom+field state, labeled by
atomic level, how many photons it has taken from each drive field, and the
ordered list of photons it has spontaneously emitted. Components are either
*realized* (they evolve coherently and can source probability current) or
*ready* (created by an irreversible interaction, they only accumulate square
modulus until one of them is stochastically selected).

The central structural rule: no interaction edge ever carries amplitude out
of a ready component. ``truncate`` enforces it on any scope.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .records import Channel
from .schemes import LevelScheme, RabiOnset


class Status(str, enum.Enum):
    READY = "ready"
    REALIZED = "realized"


class EdgeKind(str, enum.Enum):
    """Interaction taxonomy.

    Spontaneous emission is irreversible (the emitted photon never comes
    back); laser absorption and stimulated exchange are the two directions
    of the reversible coupling to a drive field.
    """

    SPONTANEOUS_EMISSION = "spontaneous_emission"
    LASER_ABSORPTION = "laser_absorption"
    STIMULATED_EXCHANGE = "stimulated_exchange"


@dataclass(frozen=True)
class BasisLabel:
    level: int
    strong_absorbed: int = 0
    weak_absorbed: int = 0
    emitted: tuple = ()

    def text(self) -> str:
        em = "".join("s" if ch is Channel.STRONG else "w" for ch in self.emitted) or "-"
        return f"a{self.level}[s={self.strong_absorbed},w={self.weak_absorbed},em={em}]"

    def with_emission(self, level: int, channel: Channel) -> "BasisLabel":
        return replace(self, level=level, emitted=self.emitted + (channel,))

    def with_absorption(self, level: int, budget: int, count: int = 1) -> "BasisLabel":
        if budget == 0:
            return replace(self, level=level, strong_absorbed=self.strong_absorbed + count)
        return replace(self, level=level, weak_absorbed=self.weak_absorbed + count)


@dataclass(frozen=True)
class Component:
    label: BasisLabel
    amplitude: complex
    status: Status
    gap_id: str | None = None

    @property
    def is_ready(self) -> bool:
        return self.status is Status.READY

    def text(self) -> str:
        amp = self.amplitude
        gap = f" gap={self.gap_id}" if self.gap_id else ""
        return f"{self.status.value:9s} {self.label.text()} amp={amp.real:.6g}{amp.imag:+.6g}j{gap}"


@dataclass(frozen=True)
class Edge:
    """One interaction link between two components.

    ``coupling`` is an angular Rabi frequency when ``feed`` is
    ``"coherent"`` and a plain rate (1/time) when ``feed`` is ``"rate"``.
    Spontaneous emission is always a rate feed; a drive edge is coherent
    unless the builder downgraded it to an effective pump rate.
    """

    source: int
    target: int
    kind: EdgeKind
    coupling: float
    channel: Channel | None = None
    feed: str = ""

    def __post_init__(self):
        if not self.feed:
            default = "rate" if self.kind is EdgeKind.SPONTANEOUS_EMISSION else "coherent"
            object.__setattr__(self, "feed", default)
        if self.feed not in ("rate", "coherent"):
            raise ValueError(f"unknown feed style {self.feed!r}")


@dataclass
class HamiltonianScope:
    """The set of components currently in play plus their interaction edges."""

    components: list
    edges: list

    def realized_indices(self) -> list:
        return [i for i, c in enumerate(self.components) if not c.is_ready]

    def ready_indices(self) -> list:
        return [i for i, c in enumerate(self.components) if c.is_ready]

    def edges_from(self, index: int) -> list:
        return [e for e in self.edges if e.source == index]


def classify(parent: Component, candidate_label: BasisLabel, kind: EdgeKind,
             onset: RabiOnset = RabiOnset.DELAYED) -> Status:
    """Decide whether a freshly created component is ready or realized.

    Irreversible interactions (spontaneous emission) always produce ready
    components. Laser absorption produces a ready component in delayed-onset
    mode only; with immediate onset the absorbed component joins the coherent
    evolution straight away. Stimulated exchange partners are always realized.
    """
    if kind is EdgeKind.SPONTANEOUS_EMISSION:
        if len(candidate_label.emitted) <= len(parent.label.emitted):
            raise ValueError("spontaneous emission must grow the emitted-photon record")
        return Status.READY
    if kind is EdgeKind.LASER_ABSORPTION:
        if candidate_label.level == parent.label.level:
            raise ValueError("absorption must change the atomic level")
        return Status.READY if onset is RabiOnset.DELAYED else Status.REALIZED
    if kind is EdgeKind.STIMULATED_EXCHANGE:
        return Status.REALIZED
    raise ValueError(f"unknown edge kind: {kind!r}")


def truncate(scope: HamiltonianScope) -> HamiltonianScope:
    """Remove every edge that originates at a ready component.

    Edges into ready components and edges between realized components are
    kept. Idempotent; scopes without ready components pass through
    unchanged.
    """
    ready = set(scope.ready_indices())
    kept = [e for e in scope.edges if e.source not in ready]
    return HamiltonianScope(list(scope.components), kept)


def launch(chosen: Component, scheme: LevelScheme, time: float = 0.0, seed: int = 0):
    """Realize a stochastically selected ready component.

    Returns a fresh (SystemState, HamiltonianScope) pair: the chosen label
    becomes the sole component, renormalized to unit square modulus, and a
    new scope is built around it from the scheme's configuration.
    """
    if not chosen.is_ready:
        raise ValueError("only ready components can be launched")
    from .engine import launch_state
    from .programs import build_configuration

    program = build_configuration(scheme)
    state = launch_state(program, chosen.label, time=time, seed=seed)
    return state, state.scope()


def dump_scope(scope: HamiltonianScope) -> str:
    """Deterministic text adjacency listing for golden-file comparison."""
    lines = [f"scope: {len(scope.components)} components, {len(scope.edges)} edges"]
    for i, comp in enumerate(scope.components):
        lines.append(f"[{i}] {comp.text()}")
    if scope.edges:
        lines.append("edges:")
        for e in scope.edges:
            arrow = "<->" if e.kind is EdgeKind.STIMULATED_EXCHANGE else "-->"
            tail = f" channel={e.channel.value}" if e.channel is not None else ""
            name = "omega" if e.feed == "coherent" else "rate"
            lines.append(
                f"[{e.source}] {arrow} [{e.target}]  {e.kind.value}  {name}={e.coupling:.6g}{tail}"
            )
    return "\n".join(lines) + "\n"
