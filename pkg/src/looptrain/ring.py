"""Dual-loop ring topology with scripted faults and wrap reconfiguration.

The primary loop carries traffic node i -> i+1 (mod C); the secondary loop
runs in reverse. A failed primary segment is bypassed FDDI-style by
wrapping onto the secondary at the two nodes adjacent to the break, which
turns the ring into a chain that is still traversed cyclically. Multiple
disjoint breaks split the ring into independent components.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class RingTopology:
    num_nodes: int
    primary_up: tuple[bool, ...]    # segment i: i -> (i+1) % C
    secondary_up: tuple[bool, ...]  # segment i, reverse direction
    node_up: tuple[bool, ...]

    @staticmethod
    def healthy(num_nodes: int) -> "RingTopology":
        if num_nodes < 1:
            raise TopologyError("ring needs at least one node")
        up = tuple([True] * num_nodes)
        return RingTopology(num_nodes, up, up, up)


@dataclass(frozen=True, order=True)
class FaultEvent:
    round: int
    hop: int
    kind: str    # link_down | link_up | node_down | node_up
    target: str  # "p<i>" / "s<i>" for links (plain "<i>" means primary), "<i>" for nodes


@dataclass
class FaultScript:
    events: list[FaultEvent] = field(default_factory=list)

    def __post_init__(self):
        self.events = sorted(self.events)

    @staticmethod
    def parse(text: str) -> "FaultScript":
        """One event per line: `<round>.<hop> <kind> <target>`."""
        events = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or "." not in parts[0]:
                raise ValueError(f"fault script line {lineno}: expected '<round>.<hop> <kind> <target>'")
            rnd, hop = parts[0].split(".", 1)
            events.append(FaultEvent(int(rnd), int(hop), parts[1], parts[2]))
        return FaultScript(events)

    @staticmethod
    def load(path: str) -> "FaultScript":
        with open(path) as f:
            return FaultScript.parse(f.read())

    def inverse(self) -> "FaultScript":
        """Events that undo this script (used by healing tests)."""
        flip = {"link_down": "link_up", "link_up": "link_down",
                "node_down": "node_up", "node_up": "node_down"}
        return FaultScript([FaultEvent(e.round, e.hop, flip[e.kind], e.target) for e in self.events])


@dataclass(frozen=True)
class RouteView:
    components: tuple[tuple[int, ...], ...]
    wrap_points: tuple[frozenset, ...]  # per component; empty set when no wrap is active


def _parse_link_target(target: str, c: int) -> tuple[str, int]:
    kind = "p"
    body = target
    if target and target[0] in ("p", "s"):
        kind, body = target[0], target[1:]
    try:
        i = int(body)
    except ValueError:
        raise TopologyError(f"bad link target {target!r}")
    if not (0 <= i < c):
        raise TopologyError(f"link index {i} out of range for ring of {c}")
    return kind, i


def apply_fault_event(topo: RingTopology, event: FaultEvent) -> RingTopology:
    c = topo.num_nodes
    if event.kind in ("link_down", "link_up"):
        which, i = _parse_link_target(event.target, c)
        state = event.kind == "link_up"
        if which == "p":
            links = list(topo.primary_up)
            links[i] = state
            return replace(topo, primary_up=tuple(links))
        links = list(topo.secondary_up)
        links[i] = state
        return replace(topo, secondary_up=tuple(links))
    if event.kind in ("node_down", "node_up"):
        try:
            i = int(event.target)
        except ValueError:
            raise TopologyError(f"bad node target {event.target!r}")
        if not (0 <= i < c):
            raise TopologyError(f"node {i} out of range for ring of {c}")
        nodes = list(topo.node_up)
        nodes[i] = event.kind == "node_up"
        return replace(topo, node_up=tuple(nodes))
    raise TopologyError(f"unknown fault kind {event.kind!r}")


def _segment_usable(topo: RingTopology, i: int) -> bool:
    # a down node makes both adjacent segments unusable for transit;
    # a wrapped chain needs both directions of each surviving segment
    j = (i + 1) % topo.num_nodes
    return (topo.primary_up[i] and topo.secondary_up[i]
            and topo.node_up[i] and topo.node_up[j])


def reconfigure(topo: RingTopology) -> RouteView:
    c = topo.num_nodes
    if all(topo.node_up) and all(topo.primary_up):
        # fully healthy primary loop: no wrap, primary order
        return RouteView((tuple(range(c)),), (frozenset(),))
    up = [i for i in range(c) if topo.node_up[i]]
    if not up:
        return RouteView((), ())
    components, wraps = [], []
    seen = set()
    for start in range(c):
        if not topo.node_up[start] or start in seen:
            continue
        # chain heads: the segment arriving from the predecessor is broken
        if _segment_usable(topo, (start - 1) % c):
            continue
        chain = [start]
        seen.add(start)
        node = start
        while _segment_usable(topo, node):
            node = (node + 1) % c
            if node in chain:
                break
            chain.append(node)
            seen.add(node)
        components.append(tuple(chain))
        wraps.append(frozenset({chain[0], chain[-1]}))
    # isolated up nodes whose both segments are broken are handled above
    # (they are their own chain heads); sort components by lowest member
    order = sorted(range(len(components)), key=lambda k: min(components[k]))
    return RouteView(tuple(components[k] for k in order), tuple(wraps[k] for k in order))


def next_hop(view: RouteView, from_node: int) -> int:
    for comp in view.components:
        if from_node in comp:
            return comp[(comp.index(from_node) + 1) % len(comp)]
    raise TopologyError(f"node {from_node} is not in any reachable component")


def detect_partitions(view: RouteView) -> int:
    return sum(1 for comp in view.components if comp)
