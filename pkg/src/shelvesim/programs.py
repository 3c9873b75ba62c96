"""Model programs: the scopes each configuration can occupy and the
relaunch moves between them.

A program compiles a level scheme into a small set of *scope specs*. Each
spec fixes, for one anchor label, the realized slots (atomic level plus
photon-bookkeeping offsets), the coherent couplings among them, and the
ready sinks that drain them. Running a trajectory is then a walk over these
specs: integrate, fire a sink, relaunch at the sink's label, look up the
next spec.

Two onset modes share this machinery. With immediate onset every anchor
expands into the full coherent chain reachable through the drive fields,
and the only sinks are spontaneous decays. With delayed onset, absorption
out of the anchor is itself a sink (a passive accumulator filled at the
pump rate of the driven pair), the fluorescence step keeps the bare excited
level, and only the metastable branch expands into the three-state
resonance chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .components import (
    BasisLabel,
    Component,
    Edge,
    EdgeKind,
    HamiltonianScope,
    Status,
    truncate,
)
from .errors import SchemeError
from .records import Channel
from .schemes import ConfigurationKind, LevelScheme, RabiOnset, effective_pump_rate

STRONG_FIELD = 0
WEAK_FIELD = 1


@dataclass(frozen=True)
class DriveSpec:
    """One laser field coupling a lower and an upper level."""

    lower: int
    upper: int
    omega: float
    budget: int  # STRONG_FIELD or WEAK_FIELD


@dataclass(frozen=True)
class DecaySpec:
    src: int
    dst: int
    rate: float
    channel: Channel


@dataclass(frozen=True)
class LevelGraph:
    """Configuration geometry: drives, decays, and the resting level."""

    drives: tuple
    decays: tuple
    rest_level: int
    shelf_level: int  # -1 when the model has no metastable branch
    expected_ordering: str | None  # side of a dark period holding the weak photon

    def loss_rate(self, level: int) -> float:
        return sum(d.rate for d in self.decays if d.src == level)


def configuration_graph(scheme: LevelScheme) -> LevelGraph:
    """Geometry for each of the four three-level configurations.

    Level 0 is always the level shared by both drive fields; level 1 is the
    strong partner, level 2 the weak (metastable) partner. What differs is
    which side of each drive is energetically lower and where the
    spontaneous decays point, and that fixes whether the weak photon is
    emitted on the way into a dark period or on the way out.
    """
    gs, gw = scheme.gamma_strong, scheme.gamma_weak
    ws, ww = scheme.omega_strong, scheme.omega_weak
    cfg = scheme.config
    if cfg is ConfigurationKind.V:
        return LevelGraph(
            drives=(DriveSpec(0, 1, ws, STRONG_FIELD), DriveSpec(0, 2, ww, WEAK_FIELD)),
            decays=(DecaySpec(1, 0, gs, Channel.STRONG), DecaySpec(2, 0, gw, Channel.WEAK)),
            rest_level=0,
            shelf_level=2,
            expected_ordering="after",
        )
    if cfg is ConfigurationKind.LAMBDA:
        return LevelGraph(
            drives=(DriveSpec(1, 0, ws, STRONG_FIELD), DriveSpec(2, 0, ww, WEAK_FIELD)),
            decays=(DecaySpec(0, 1, gs, Channel.STRONG), DecaySpec(0, 2, gw, Channel.WEAK)),
            rest_level=1,
            shelf_level=2,
            expected_ordering="before",
        )
    if cfg is ConfigurationKind.CASCADE_E1_ABOVE_E0:
        return LevelGraph(
            drives=(DriveSpec(0, 1, ws, STRONG_FIELD), DriveSpec(2, 0, ww, WEAK_FIELD)),
            decays=(DecaySpec(1, 0, gs, Channel.STRONG), DecaySpec(0, 2, gw, Channel.WEAK)),
            rest_level=0,
            shelf_level=2,
            expected_ordering="before",
        )
    if cfg is ConfigurationKind.CASCADE_E1_BELOW_E0:
        return LevelGraph(
            drives=(DriveSpec(1, 0, ws, STRONG_FIELD), DriveSpec(0, 2, ww, WEAK_FIELD)),
            decays=(DecaySpec(0, 1, gs, Channel.STRONG), DecaySpec(2, 0, gw, Channel.WEAK)),
            rest_level=1,
            shelf_level=2,
            expected_ordering="after",
        )
    raise SchemeError(f"unknown configuration {cfg!r}", field="config")


def two_level_graph(scheme: LevelScheme) -> LevelGraph:
    """Single drive, single decay; the weak channel is ignored entirely."""
    return LevelGraph(
        drives=(DriveSpec(0, 1, scheme.omega_strong, STRONG_FIELD),),
        decays=(DecaySpec(1, 0, scheme.gamma_strong, Channel.STRONG),),
        rest_level=0,
        shelf_level=-1,
        expected_ordering=None,
    )


# ---------------------------------------------------------------------------
# Compiled scopes


@dataclass(frozen=True)
class SinkSpec:
    """A ready component: which slot feeds it and where it relaunches."""

    source_slot: int
    rate: float
    emit: bool
    channel: Channel | None  # None for absorption (pump) sinks
    level: int  # relaunch anchor level
    d_strong: int  # absorbed-count offsets relative to the scope anchor
    d_weak: int
    gap_id: str


@dataclass(frozen=True)
class ScopeSpec:
    """One compiled scope: realized slots, couplings, ready sinks."""

    kind: str
    strong_on: bool
    weak_on: bool
    levels: tuple  # slot index -> atomic level; slot 0 is the anchor
    slot_d: tuple  # slot index -> (d_strong, d_weak) relative to anchor
    couplings: tuple  # (slot_i, slot_j, omega, EdgeKind as built from i)
    sinks: tuple
    terminal: bool

    @property
    def n_slots(self) -> int:
        return len(self.levels)


def _chain_slots(graph: LevelGraph, anchor_level: int, strong_on: bool, weak_on: bool,
                 follow_anchor_absorption: bool):
    """Breadth-first expansion of the coherent chain around an anchor.

    Stimulated (downward) links are always followed; absorption (upward)
    links are followed except out of the anchor when
    ``follow_anchor_absorption`` is false (those become ready sinks
    instead). Each atomic level appears at most once, which caps the chain
    at the three physical levels.
    """
    slots = [(anchor_level, 0, 0)]
    seen = {anchor_level}
    couplings = []
    queue = [0]
    while queue:
        i = queue.pop(0)
        level = slots[i][0]
        for drive in graph.drives:
            on = strong_on if drive.budget == STRONG_FIELD else weak_on
            if not on:
                continue
            if level == drive.lower:
                if i == 0 and not follow_anchor_absorption:
                    continue
                target, delta, kind = drive.upper, +1, EdgeKind.LASER_ABSORPTION
            elif level == drive.upper:
                target, delta, kind = drive.lower, -1, EdgeKind.STIMULATED_EXCHANGE
            else:
                continue
            if target in seen:
                continue
            seen.add(target)
            ds = slots[i][1] + (delta if drive.budget == STRONG_FIELD else 0)
            dw = slots[i][2] + (delta if drive.budget == WEAK_FIELD else 0)
            slots.append((target, ds, dw))
            couplings.append((i, len(slots) - 1, drive.omega, kind))
            queue.append(len(slots) - 1)
    return slots, couplings


class ModelProgram:
    """Compiled transition system for one scheme and onset mode."""

    def __init__(self, scheme: LevelScheme, graph: LevelGraph, mode: RabiOnset,
                 *, include_spontaneous: bool = True, stimulated_pair: bool = False,
                 initial_level: int | None = None, name: str = "configuration"):
        self.scheme = scheme
        self.graph = graph
        self.mode = mode
        self.include_spontaneous = include_spontaneous
        self.stimulated_pair = stimulated_pair  # two-level fluorescence partner
        self.name = name
        self._initial_level = graph.rest_level if initial_level is None else initial_level
        self._specs: dict = {}

    # -- program identity -------------------------------------------------

    @property
    def expected_ordering(self) -> str | None:
        return self.graph.expected_ordering

    def initial_anchor(self) -> BasisLabel:
        return BasisLabel(level=self._initial_level)

    def kind_of(self, level: int) -> str:
        if level == self.graph.rest_level:
            return "rest"
        if level == self.graph.shelf_level:
            return "shelf"
        return "excited"

    # -- scope compilation -------------------------------------------------

    def spec_for(self, anchor: BasisLabel) -> ScopeSpec:
        strong_on = anchor.strong_absorbed < self.scheme.n_strong_photons
        weak_on = anchor.weak_absorbed < self.scheme.n_weak_photons
        return self.spec_for_key(anchor.level, strong_on, weak_on)

    def spec_for_key(self, level: int, strong_on: bool, weak_on: bool) -> ScopeSpec:
        key = (level, strong_on, weak_on)
        if key not in self._specs:
            self._specs[key] = self._build_spec(level, strong_on, weak_on)
        return self._specs[key]

    def _build_spec(self, level: int, strong_on: bool, weak_on: bool) -> ScopeSpec:
        kind = self.kind_of(level)
        expand_chain = self.mode is RabiOnset.IMMEDIATE or kind == "shelf"
        if expand_chain:
            slots, couplings = _chain_slots(
                self.graph, level, strong_on, weak_on,
                follow_anchor_absorption=self.mode is RabiOnset.IMMEDIATE,
            )
        else:
            slots, couplings = [(level, 0, 0)], []
            if kind == "excited" and self.stimulated_pair and self.scheme.stimulated_emission:
                # the reversible partner of the two-level fluorescence step
                drive = self.graph.drives[0]
                if level == drive.upper:
                    ds = -1 if drive.budget == STRONG_FIELD else 0
                    dw = -1 if drive.budget == WEAK_FIELD else 0
                    slots.append((drive.lower, ds, dw))
                    couplings.append((0, 1, drive.omega, EdgeKind.STIMULATED_EXCHANGE))

        sinks = []
        if self.include_spontaneous:
            for decay in self.graph.decays:
                for slot_index, (slot_level, ds, dw) in enumerate(slots):
                    if slot_level != decay.src:
                        continue
                    sinks.append(SinkSpec(
                        source_slot=slot_index,
                        rate=decay.rate,
                        emit=True,
                        channel=decay.channel,
                        level=decay.dst,
                        d_strong=ds,
                        d_weak=dw,
                        gap_id=f"G{decay.src}{decay.dst}:{decay.channel.value}",
                    ))
        if self.mode is RabiOnset.DELAYED:
            # Absorption out of the anchor becomes a pump sink. Shelf
            # anchors that expanded into a chain are the exception: the
            # chain itself carries the transport, so only a chain that
            # stayed a bare anchor (metastable level on the lower side of
            # its drive) still pumps.
            for drive in self.graph.drives:
                on = strong_on if drive.budget == STRONG_FIELD else weak_on
                if drive.lower != level or not on:
                    continue
                if expand_chain and len(slots) > 1:
                    continue
                pump = effective_pump_rate(drive.omega, self.graph.loss_rate(drive.upper))
                sinks.append(SinkSpec(
                    source_slot=0,
                    rate=pump,
                    emit=False,
                    channel=None,
                    level=drive.upper,
                    d_strong=1 if drive.budget == STRONG_FIELD else 0,
                    d_weak=1 if drive.budget == WEAK_FIELD else 0,
                    gap_id=f"G{level}{drive.upper}:pump",
                ))

        terminal = not couplings and not sinks
        return ScopeSpec(
            kind=kind,
            strong_on=strong_on,
            weak_on=weak_on,
            levels=tuple(s[0] for s in slots),
            slot_d=tuple((s[1], s[2]) for s in slots),
            couplings=tuple(couplings),
            sinks=tuple(sinks),
            terminal=terminal,
        )

    # -- label arithmetic ---------------------------------------------------

    def slot_label(self, anchor: BasisLabel, spec: ScopeSpec, slot: int) -> BasisLabel:
        ds, dw = spec.slot_d[slot]
        return BasisLabel(
            level=spec.levels[slot],
            strong_absorbed=anchor.strong_absorbed + ds,
            weak_absorbed=anchor.weak_absorbed + dw,
            emitted=anchor.emitted,
        )

    def sink_label(self, anchor: BasisLabel, sink: SinkSpec) -> BasisLabel:
        emitted = anchor.emitted + ((sink.channel,) if sink.emit else ())
        return BasisLabel(
            level=sink.level,
            strong_absorbed=anchor.strong_absorbed + sink.d_strong,
            weak_absorbed=anchor.weak_absorbed + sink.d_weak,
            emitted=emitted,
        )

    # -- reference-scope materialization ------------------------------------

    def build_scope(self, anchor: BasisLabel, amplitudes=None, accumulated=None,
                    truncated: bool = True) -> HamiltonianScope:
        """Materialize the active scope as components plus edges.

        With ``truncated=False``, the scope also lists the interaction
        edges *implied* beyond each ready component (its own decay and
        exchange partners) so that :func:`~shelvesim.components.truncate`
        has something real to remove.
        """
        spec = self.spec_for(anchor)
        comps = []
        for slot in range(spec.n_slots):
            amp = complex(amplitudes[slot]) if amplitudes is not None else (1 + 0j if slot == 0 else 0j)
            comps.append(Component(self.slot_label(anchor, spec, slot), amp, Status.REALIZED))
        edges = [
            Edge(i, j, kind, omega)
            for (i, j, omega, kind) in spec.couplings
        ]
        for k, sink in enumerate(spec.sinks):
            amp = math.sqrt(accumulated[k]) + 0j if accumulated is not None else 0j
            comps.append(Component(self.sink_label(anchor, sink), amp, Status.READY, gap_id=sink.gap_id))
            edge_kind = EdgeKind.SPONTANEOUS_EMISSION if sink.emit else EdgeKind.LASER_ABSORPTION
            edges.append(Edge(sink.source_slot, spec.n_slots + k, edge_kind,
                              sink.rate, sink.channel, feed="rate"))
        scope = HamiltonianScope(comps, edges)
        if truncated:
            return scope
        # add the implied onward edges out of each ready component
        for k, sink in enumerate(spec.sinks):
            ready_index = spec.n_slots + k
            ready_label = comps[ready_index].label
            for decay in self.graph.decays:
                if decay.src != ready_label.level:
                    continue
                target = ready_label.with_emission(decay.dst, decay.channel)
                comps.append(Component(target, 0j, Status.READY, gap_id=f"beyond:{sink.gap_id}"))
                edges.append(Edge(ready_index, len(comps) - 1, EdgeKind.SPONTANEOUS_EMISSION,
                                  decay.rate, decay.channel))
            for drive in self.graph.drives:
                if ready_label.level == drive.lower:
                    target = ready_label.with_absorption(drive.upper, drive.budget)
                    kind = EdgeKind.LASER_ABSORPTION
                elif ready_label.level == drive.upper:
                    target = ready_label.with_absorption(drive.lower, drive.budget, count=-1)
                    kind = EdgeKind.STIMULATED_EXCHANGE
                else:
                    continue
                comps.append(Component(target, 0j, Status.REALIZED, gap_id=None))
                edges.append(Edge(ready_index, len(comps) - 1, kind, drive.omega))
        return HamiltonianScope(comps, edges)


# ---------------------------------------------------------------------------
# Program factories


def two_level_model(scheme: LevelScheme) -> ModelProgram:
    """Ground + excited level driven by the strong field only.

    Each absorbed photon is eventually re-emitted on the strong channel;
    once all ``n_strong_photons`` are converted the program is terminal.
    """
    return ModelProgram(
        scheme,
        two_level_graph(scheme),
        scheme.rabi_onset,
        stimulated_pair=True,
        name="two_level",
    )


def three_level_v_model(scheme: LevelScheme) -> ModelProgram:
    if scheme.config is not ConfigurationKind.V:
        raise SchemeError(
            f"three_level_v_model requires the V configuration, got {scheme.config.value}",
            field="config",
        )
    return build_configuration(scheme)


def build_configuration(scheme: LevelScheme) -> ModelProgram:
    """Program for any of the four three-level configurations."""
    return ModelProgram(scheme, configuration_graph(scheme), scheme.rabi_onset)


def resonance_loop_program(scheme: LevelScheme) -> ModelProgram:
    """The radiationless three-state loop: shelf chain, decays disabled.

    Anchored at the metastable level; with no sinks the walk never fires
    and the chain simply circulates amplitude coherently.
    """
    graph = configuration_graph(scheme)
    return ModelProgram(
        scheme,
        graph,
        RabiOnset.IMMEDIATE,
        include_spontaneous=False,
        initial_level=graph.shelf_level,
        name="loop",
    )


def loop_period(scheme: LevelScheme) -> float:
    """Full revival period of the three-state loop: 4*pi/hypot(omegas)."""
    return 4.0 * math.pi / math.hypot(scheme.omega_strong, scheme.omega_weak)


# ---------------------------------------------------------------------------
# Flat tables for the compiled trajectory kernel

_BIG_DT = 1e18


def numeric_dt_cap(spec: ScopeSpec) -> float:
    """Integrator ceiling for one scope: resolve the fastest Rabi period
    with >= 50 steps and the fastest drain with >= 2 steps per lifetime."""
    cap = _BIG_DT
    omega_max = max((w for (_, _, w, _) in spec.couplings), default=0.0)
    if omega_max > 0.0:
        cap = min(cap, 2.0 * math.pi / (50.0 * omega_max))
    loss_max = 0.0
    for slot in range(spec.n_slots):
        loss_max = max(loss_max, sum(s.rate for s in spec.sinks if s.source_slot == slot))
    if loss_max > 0.0:
        cap = min(cap, 0.5 / loss_max)
    return cap


_PAIR_INDEX = {(0, 1): 0, (0, 2): 1, (1, 2): 2}

MAX_SLOTS = 3
MAX_SINKS = 4


@dataclass
class KernelTables:
    """Scope specs flattened into arrays indexed by scope id."""

    n_slots: np.ndarray
    slot_level: np.ndarray
    slot_ds: np.ndarray
    slot_dw: np.ndarray
    h: np.ndarray        # [S, 3] couplings (omega/2) for slot pairs (0,1), (0,2), (1,2)
    loss: np.ndarray     # [S, MAX_SLOTS] total drain rate per slot
    n_sinks: np.ndarray
    sink_src: np.ndarray
    sink_rate: np.ndarray
    sink_emit: np.ndarray
    sink_chan: np.ndarray  # -1 pump, 0 strong, 1 weak
    sink_level: np.ndarray
    sink_ds: np.ndarray
    sink_dw: np.ndarray
    terminal: np.ndarray
    dt_num: np.ndarray
    lookup: np.ndarray   # [level, strong_on, weak_on] -> scope id
    keys: list
    initial_level: int


def compile_tables(program: ModelProgram) -> KernelTables:
    """Enumerate every reachable (level, budgets) scope and flatten it."""
    levels = {program.initial_anchor().level}
    changed = True
    while changed:
        changed = False
        for level in sorted(levels):
            for s_on in (True, False):
                for w_on in (True, False):
                    spec = program.spec_for_key(level, s_on, w_on)
                    for sink in spec.sinks:
                        if sink.level not in levels:
                            levels.add(sink.level)
                            changed = True

    keys = [
        (level, s_on, w_on)
        for level in sorted(levels)
        for s_on in (True, False)
        for w_on in (True, False)
    ]
    n = len(keys)
    tables = KernelTables(
        n_slots=np.zeros(n, np.int64),
        slot_level=np.zeros((n, MAX_SLOTS), np.int64),
        slot_ds=np.zeros((n, MAX_SLOTS), np.int64),
        slot_dw=np.zeros((n, MAX_SLOTS), np.int64),
        h=np.zeros((n, 3), np.float64),
        loss=np.zeros((n, MAX_SLOTS), np.float64),
        n_sinks=np.zeros(n, np.int64),
        sink_src=np.zeros((n, MAX_SINKS), np.int64),
        sink_rate=np.zeros((n, MAX_SINKS), np.float64),
        sink_emit=np.zeros((n, MAX_SINKS), np.uint8),
        sink_chan=np.full((n, MAX_SINKS), -1, np.int64),
        sink_level=np.zeros((n, MAX_SINKS), np.int64),
        sink_ds=np.zeros((n, MAX_SINKS), np.int64),
        sink_dw=np.zeros((n, MAX_SINKS), np.int64),
        terminal=np.zeros(n, np.uint8),
        dt_num=np.zeros(n, np.float64),
        lookup=np.full((MAX_SLOTS, 2, 2), -1, np.int64),
        keys=keys,
        initial_level=program.initial_anchor().level,
    )
    for sid, (level, s_on, w_on) in enumerate(keys):
        spec = program.spec_for_key(level, s_on, w_on)
        if spec.n_slots > MAX_SLOTS or len(spec.sinks) > MAX_SINKS:
            raise ValueError("scope too large for kernel tables")
        tables.lookup[level, int(s_on), int(w_on)] = sid
        tables.n_slots[sid] = spec.n_slots
        for i, lv in enumerate(spec.levels):
            tables.slot_level[sid, i] = lv
            tables.slot_ds[sid, i] = spec.slot_d[i][0]
            tables.slot_dw[sid, i] = spec.slot_d[i][1]
        for (i, j, omega, _kind) in spec.couplings:
            a, b = (i, j) if i < j else (j, i)
            tables.h[sid, _PAIR_INDEX[(a, b)]] = 0.5 * omega
        for k, sink in enumerate(spec.sinks):
            tables.loss[sid, sink.source_slot] += sink.rate
            tables.sink_src[sid, k] = sink.source_slot
            tables.sink_rate[sid, k] = sink.rate
            tables.sink_emit[sid, k] = 1 if sink.emit else 0
            tables.sink_chan[sid, k] = sink.channel.code if sink.channel is not None else -1
            tables.sink_level[sid, k] = sink.level
            tables.sink_ds[sid, k] = sink.d_strong
            tables.sink_dw[sid, k] = sink.d_weak
        tables.n_sinks[sid] = len(spec.sinks)
        tables.terminal[sid] = 1 if spec.terminal else 0
        tables.dt_num[sid] = numeric_dt_cap(spec)
    return tables
