"""Max-flow / min-cut via BFS level graphs and shortest augmenting paths."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import ContractViolation

# residuals below RESIDUAL_EPS * max_capacity count as saturated; keeps float
# cancellation noise from leaking reachability across a saturated cut
RESIDUAL_EPS = 1e-10


@dataclass
class FlowNetwork:
    """Directed capacitated network; node ids are 0..node_count-1."""

    node_count: int
    source: int
    sink: int
    arcs: list = field(default_factory=list)  # (from, to, capacity)

    def __post_init__(self):
        if not (0 <= self.source < self.node_count and 0 <= self.sink < self.node_count):
            raise ContractViolation("source/sink out of range")
        if self.source == self.sink:
            raise ContractViolation("source and sink must differ")
        for a, b, cap in self.arcs:
            self._check_arc(a, b, cap)

    def _check_arc(self, a, b, cap):
        if not (0 <= a < self.node_count and 0 <= b < self.node_count):
            raise ContractViolation("arc endpoint out of range")
        if cap < 0:
            raise ContractViolation("negative capacity")

    def add_arc(self, a: int, b: int, cap: float) -> None:
        self._check_arc(a, b, cap)
        self.arcs.append((a, b, float(cap)))


@dataclass
class MaxFlowResult:
    flow_value: float
    source_side: np.ndarray  # bool per node, True = source side of the min cut


def max_flow(net: FlowNetwork) -> MaxFlowResult:
    """Dinic's algorithm; returns the flow value and the reachable-side cut."""
    n = net.node_count
    head = [[] for _ in range(n)]
    to, res = [], []
    for a, b, cap in net.arcs:
        if a == b:
            continue
        head[a].append(len(to)); to.append(b); res.append(float(cap))
        head[b].append(len(to)); to.append(a); res.append(0.0)
    eps = RESIDUAL_EPS * max((c for _, _, c in net.arcs), default=1.0)

    def bfs_levels():
        level = [-1] * n
        level[net.source] = 0
        q = deque([net.source])
        while q:
            u = q.popleft()
            for e in head[u]:
                v = to[e]
                if res[e] > eps and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[net.sink] >= 0 else None

    total = 0.0
    while True:
        level = bfs_levels()
        if level is None:
            break
        it = [0] * n
        # iterative blocking-flow search along shortest (level-respecting) paths
        path = []  # arc ids from source to the current node
        u = net.source
        while True:
            if u == net.sink:
                pushed = min(res[e] for e in path)
                for e in path:
                    res[e] -= pushed
                    res[e ^ 1] += pushed
                total += pushed
                # retreat to the first saturated arc on the path
                cut_at = next(i for i, e in enumerate(path) if res[e] <= eps)
                path = path[:cut_at]
                u = net.source if not path else to[path[-1]]
                continue
            advanced = False
            while it[u] < len(head[u]):
                e = head[u][it[u]]
                v = to[e]
                if res[e] > eps and level[v] == level[u] + 1:
                    path.append(e)
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if advanced:
                continue
            if u == net.source:
                break
            level[u] = -1  # dead end; the level check skips it from now on
            path.pop()
            u = net.source if not path else to[path[-1]]

    reach = np.zeros(n, dtype=bool)
    reach[net.source] = True
    q = deque([net.source])
    while q:
        u = q.popleft()
        for e in head[u]:
            v = to[e]
            if res[e] > eps and not reach[v]:
                reach[v] = True
                q.append(v)
    return MaxFlowResult(flow_value=total, source_side=reach)


def cut_capacity(net: FlowNetwork, source_side: np.ndarray) -> float:
    """Total capacity of arcs crossing from the given source side."""
    return sum(cap for a, b, cap in net.arcs if source_side[a] and not source_side[b])
