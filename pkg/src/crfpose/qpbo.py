"""Roof-duality partial optimality for binary pairwise models.

The model is reparameterized into normal form (nonnegative tables with zero
row/column minima), compiled into the symmetric doubled network, and solved
with max-flow.  A node is labeled only when its two copies land on opposite,
consistent sides of the reachability min-cut, which yields a persistent
partial labeling: some exact optimum agrees with every labeled node.

Infinite pairwise entries are clamped to a capacity exceeding the total
finite cost mass; a post-check demotes any labeled pair that would realize a
truly infinite cost back to unlabeled.
"""

from __future__ import annotations

import numpy as np

from .maxflow import FlowNetwork, max_flow
from .model import (ContractViolation, GraphicalModel, PartialLabeling,
                    UNLABELED)


def require_binary(model: GraphicalModel) -> None:
    if any(k != 2 for k in model.labels_per_node):
        raise ContractViolation("model is not binary (two labels per node)")


def count_infinite_pairs(model: GraphicalModel) -> int:
    """Number of edges whose (1,1) cost is infinite."""
    require_binary(model)
    return sum(1 for e in range(model.edge_count)
               if np.isinf(model.edge_table(e)[1, 1]))


def qpbo(model: GraphicalModel) -> PartialLabeling:
    require_binary(model)
    n = model.node_count
    unary = np.stack([np.asarray(model.unary[u], dtype=float) for u in range(n)])
    if not np.isfinite(unary).all():
        raise ContractViolation("unaries must be finite")

    w = model.pairwise_weight
    tables, inf_masks = [], []
    finite_mass = float(np.abs(unary).sum())
    for e in range(model.edge_count):
        t = model.edge_table(e)
        mask = np.isinf(t)
        wt = np.where(mask, 0.0, w * t)
        finite_mass += float(np.abs(wt).sum())
        tables.append(wt)
        inf_masks.append(mask)
    cap_inf = 1.0 + finite_mass
    for t, mask in zip(tables, inf_masks):
        t[mask] = cap_inf

    # normal form: fold row then column minima of each table into the
    # unaries (all entries finite here, so subtraction is safe)
    for e, (u, v) in enumerate(model.edges):
        t = tables[e]
        for i in range(2):
            m = t[i].min()
            t[i] -= m
            unary[u, i] += m
        for j in range(2):
            m = t[:, j].min()
            t[:, j] -= m
            unary[v, j] += m

    # doubled network: copies u and u+n, x_u=0 <=> u on the source side
    # <=> u+n on the sink side; every logical cost is split in half
    source, sink = 2 * n, 2 * n + 1
    net = FlowNetwork(2 * n + 2, source, sink)
    for u in range(n):
        c = unary[u, 1] - unary[u, 0]
        if c > 0:
            net.add_arc(source, u, c / 2.0)
            net.add_arc(u + n, sink, c / 2.0)
        elif c < 0:
            net.add_arc(u, sink, -c / 2.0)
            net.add_arc(source, u + n, -c / 2.0)
    for e, (u, v) in enumerate(model.edges):
        t = tables[e]
        if t[0, 1] > 0:
            net.add_arc(u, v, t[0, 1] / 2.0)
            net.add_arc(v + n, u + n, t[0, 1] / 2.0)
        if t[1, 0] > 0:
            net.add_arc(v, u, t[1, 0] / 2.0)
            net.add_arc(u + n, v + n, t[1, 0] / 2.0)
        if t[1, 1] > 0:
            net.add_arc(u + n, v, t[1, 1] / 2.0)
            net.add_arc(v + n, u, t[1, 1] / 2.0)
        if t[0, 0] > 0:
            net.add_arc(u, v + n, t[0, 0] / 2.0)
            net.add_arc(v, u + n, t[0, 0] / 2.0)

    side = max_flow(net).source_side
    assignment = []
    for u in range(n):
        plain, mirror = side[u], side[u + n]
        if plain and not mirror:
            assignment.append(0)
        elif mirror and not plain:
            assignment.append(1)
        else:
            assignment.append(UNLABELED)

    # no labeled pair may realize a truly infinite cost
    for e, (u, v) in enumerate(model.edges):
        mask = inf_masks[e]
        if not mask.any():
            continue
        lu, lv = assignment[u], assignment[v]
        if lu != UNLABELED and lv != UNLABELED and mask[lu, lv]:
            assignment[u] = UNLABELED
            assignment[v] = UNLABELED
    return PartialLabeling(tuple(assignment))
