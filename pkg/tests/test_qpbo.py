import numpy as np
import pytest

from crfpose.model import (INF, GraphicalModel, UNLABELED,
                           ContractViolation)
from crfpose.oracle import (brute_force, check_persistency, sample_binary_model,
                            sample_submodular_binary_model, _spawn)
from crfpose.qpbo import count_infinite_pairs, qpbo


def test_single_node_unary_argmin():
    m = GraphicalModel((2,), [np.array([1.0, 0.0])], ())
    assert qpbo(m).assignment == (1,)


def test_rejects_non_binary_models():
    m = GraphicalModel((3,), [np.zeros(3)], ())
    with pytest.raises(ContractViolation):
        qpbo(m)


def test_submodular_models_fully_labeled_and_optimal():
    for rng in _spawn(5, 60):
        m = sample_submodular_binary_model(rng)
        partial = qpbo(m)
        assert partial.labeled_count() == m.node_count
        assert check_persistency(m, partial)
        # fully labeled + persistent means the labeling is an exact optimum
        energy = brute_force(m).optimal_energy
        from crfpose.model import evaluate_energy
        assert evaluate_energy(m, partial.to_labeling()) == pytest.approx(energy, abs=1e-9)


def test_frustrated_cycle_is_all_unlabeled():
    t = np.array([[1.0, 0.0], [0.0, 1.0]])
    edges = ((0, 1), (1, 2), (0, 2))
    m = GraphicalModel((2,) * 3, [np.zeros(2)] * 3, edges,
                       pairwise=[t.copy() for _ in edges])
    partial = qpbo(m)
    assert partial.assignment == (UNLABELED,) * 3
    assert check_persistency(m, partial)


def test_mixed_models_persistency():
    for rng in _spawn(11, 120):
        m = sample_binary_model(rng)
        assert check_persistency(m, qpbo(m))


def test_permutation_invariance():
    for rng in _spawn(21, 25):
        m = sample_binary_model(rng, max_nodes=10)
        perm = rng.permutation(m.node_count)
        inv = np.argsort(perm)
        # permuted copy: node u of the original becomes perm[u]
        edges, tables = [], []
        for e, (u, v) in enumerate(m.edges):
            a, b = int(perm[u]), int(perm[v])
            t = m.edge_table(e)
            if a > b:
                a, b, t = b, a, t.T
            edges.append((a, b))
            tables.append(t.copy())
        order = np.argsort([e for e, _ in edges], kind="stable")
        pm = GraphicalModel(
            (2,) * m.node_count,
            [m.unary[int(inv[k])].copy() for k in range(m.node_count)],
            tuple(edges[i] for i in order),
            pairwise=[tables[i] for i in order],
            pairwise_weight=m.pairwise_weight)
        got = qpbo(pm)
        want = qpbo(m)
        assert tuple(got.assignment[perm[u]] for u in range(m.node_count)) \
            == want.assignment


def test_count_infinite_pairs():
    finite = GraphicalModel((2, 2), [np.zeros(2)] * 2, ((0, 1),),
                            pairwise=[np.ones((2, 2))])
    assert count_infinite_pairs(finite) == 0
    t = np.array([[0.0, 0.0], [0.0, INF]])
    m = GraphicalModel((2,) * 3, [np.zeros(2)] * 3, ((0, 1), (1, 2)),
                       pairwise=[t.copy(), np.ones((2, 2))])
    assert count_infinite_pairs(m) == 1


def test_infinite_pairs_never_labeled_jointly():
    for rng in _spawn(31, 40):
        m = sample_binary_model(rng, max_nodes=10)
        # plant infinities on a few (1,1) entries
        planted = False
        for e in range(m.edge_count):
            if rng.random() < 0.3:
                m.edge_table(e)[1, 1] = INF
                planted = True
        if not planted and m.edge_count:
            m.edge_table(0)[1, 1] = INF
        partial = qpbo(m)
        for e, (u, v) in enumerate(m.edges):
            if np.isinf(m.edge_table(e)[1, 1]):
                assert not (partial.assignment[u] == 1 and partial.assignment[v] == 1)
        assert check_persistency(m, partial)
