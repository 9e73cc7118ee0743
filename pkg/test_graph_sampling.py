"""
Tests for graph node sampling, node sets, class memory and missing-class completion.
"""
import logging
import math

import pytest
import torch
from hypothesis import given, strategies as st

from openset_panoseg.exceptions import InvalidInputError, NonFiniteError, ShapeMismatchError
from openset_panoseg.graph import (
    Domain,
    MemoryBank,
    MemoryStore,
    NodeKind,
    NodeSet,
    complete_missing_classes,
    pixel_confidence_entropy,
    sample_base_nodes,
    sample_novel_nodes,
    update_memory,
)
from openset_panoseg.graph.memory import node_class_sets
from openset_panoseg.models import IGNORE_ID

f64 = torch.float64


# ============ Confidence and entropy ============

def test_confident_logits_have_zero_entropy():
    logits = torch.zeros(1, 4, 2, 2, dtype=f64)
    logits[:, 1] = 100.0
    p, h = pixel_confidence_entropy(logits)
    assert torch.allclose(p, torch.ones_like(p))
    assert torch.allclose(h, torch.zeros_like(h), atol=1e-30)


def test_uniform_logits_have_maximum_entropy():
    p, h = pixel_confidence_entropy(torch.zeros(2, 6, 3, 3, dtype=f64))
    assert torch.allclose(p, torch.full_like(p, 1 / 6))
    assert torch.allclose(h, torch.full_like(h, math.log(6)))


def test_confidence_entropy_hand_evaluated():
    values = [2.0, 1.0, 0.0, -1.0]
    logits = torch.tensor(values, dtype=f64).view(1, 4, 1, 1)
    z = sum(math.exp(v) for v in values)
    probs = [math.exp(v) / z for v in values]
    p, h = pixel_confidence_entropy(logits)
    assert p.item() == pytest.approx(max(probs), abs=1e-12)
    assert h.item() == pytest.approx(-sum(q * math.log(q) for q in probs), abs=1e-12)


def test_confidence_entropy_rejects_non_finite():
    logits = torch.zeros(1, 3, 2, 2)
    logits[0, 0, 0, 0] = float("inf")
    with pytest.raises(NonFiniteError):
        pixel_confidence_entropy(logits)


@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=1000))
def test_entropy_bounded_by_log_classes(classes, seed):
    gen = torch.Generator().manual_seed(seed)
    logits = torch.randn(1, classes, 4, 4, generator=gen, dtype=f64) * 5
    p, h = pixel_confidence_entropy(logits)
    assert (h >= 0).all() and (h <= math.log(classes) + 1e-12).all()
    assert (p >= 1 / classes - 1e-12).all() and (p <= 1).all()


# ============ Base-class nodes ============

def test_base_nodes_predicates():
    features = torch.randn(4, 3, dtype=f64)
    labels = torch.zeros(4, dtype=torch.long)
    p = torch.tensor([0.9, 0.9, 0.1, 0.1], dtype=f64)
    h = torch.tensor([0.1, 0.1, 0.9, 0.9], dtype=f64)
    nodes = sample_base_nodes(features, labels, p, h, k=8, num_base=2, domain=Domain.SOURCE, noise=0.0)
    assert nodes.pixel_indices(0, NodeKind.POSITIVE) == [0, 1]
    assert nodes.pixel_indices(0, NodeKind.NEGATIVE) == []
    protos = nodes.select(nodes.kind_mask(NodeKind.PROTOTYPE))
    assert len(protos) == 1
    assert torch.allclose(protos.features[0], features.mean(dim=0))
    assert (nodes.domains == int(Domain.SOURCE)).all()


def test_identical_features_give_exact_prototype():
    features = torch.tensor([[1.5, -2.0]], dtype=f64).repeat(6, 1)
    labels = torch.ones(6, dtype=torch.long)
    p = torch.linspace(0.2, 0.9, 6, dtype=f64)
    h = torch.linspace(1.0, 0.1, 6, dtype=f64)
    nodes = sample_base_nodes(features, labels, p, h, k=2, num_base=3, domain=Domain.TARGET, noise=0.0)
    proto = nodes.select(nodes.kind_mask(NodeKind.PROTOTYPE))
    assert torch.equal(proto.features[0], features[0])
    assert len(nodes.pixel_indices(1, NodeKind.POSITIVE)) == 2


def test_k_one_keeps_node_nearest_to_class_mean():
    xs = torch.tensor([0.0, 4.0, 5.0, 6.0, 7.0, 8.0], dtype=f64)
    features = torch.stack([xs, torch.zeros_like(xs)], dim=1)
    labels = torch.zeros(6, dtype=torch.long)
    p = torch.tensor([0.9, 0.9, 0.9, 0.1, 0.1, 0.1], dtype=f64)
    h = torch.tensor([0.1, 0.1, 0.1, 0.9, 0.9, 0.9], dtype=f64)
    nodes = sample_base_nodes(features, labels, p, h, k=1, num_base=1, domain=Domain.SOURCE, noise=0.0)
    assert nodes.pixel_indices(0, NodeKind.POSITIVE) == [2]


def test_ignore_and_unknown_pixels_never_become_base_nodes():
    features = torch.randn(6, 2, dtype=f64)
    labels = torch.tensor([0, 0, 0, IGNORE_ID, 3, 3])
    p = torch.rand(6, dtype=f64)
    h = torch.rand(6, dtype=f64)
    nodes = sample_base_nodes(features, labels, p, h, k=4, num_base=3, domain=Domain.SOURCE)
    assert nodes.present_classes() == [0]
    assert set(nodes.pixels[nodes.pixels >= 0].tolist()) <= {0, 1, 2}


def test_all_ignore_gives_empty_set():
    nodes = sample_base_nodes(
        torch.randn(3, 4), torch.full((3,), IGNORE_ID), torch.rand(3), torch.rand(3),
        k=2, num_base=2, domain=Domain.TARGET,
    )
    assert len(nodes) == 0 and nodes.dim == 4


def test_base_nodes_shape_mismatch_rejected():
    with pytest.raises(ShapeMismatchError):
        sample_base_nodes(torch.randn(4, 2), torch.zeros(3, dtype=torch.long), torch.rand(4), torch.rand(4),
                          k=1, num_base=1, domain=Domain.SOURCE)


def test_prototype_noise_is_seeded():
    features = torch.randn(10, 4, dtype=f64)
    labels = torch.zeros(10, dtype=torch.long)
    p, h = torch.rand(10, dtype=f64), torch.rand(10, dtype=f64)

    def proto(seed):
        nodes = sample_base_nodes(features, labels, p, h, 3, 1, Domain.SOURCE, noise=0.5,
                                  generator=torch.Generator().manual_seed(seed))
        return nodes.select(nodes.kind_mask(NodeKind.PROTOTYPE)).features

    assert torch.equal(proto(0), proto(0))
    assert not torch.equal(proto(0), proto(1))


# ============ Novel-class nodes ============

def test_novel_nodes_split_at_median_entropy():
    features = torch.randn(4, 2, dtype=f64)
    h = torch.tensor([0.1, 0.2, 0.8, 0.9], dtype=f64)
    nodes = sample_novel_nodes(features, h, k=4, unknown_id=5, domain=Domain.TARGET, noise=0.0)
    assert nodes.pixel_indices(5, NodeKind.POSITIVE) == [0, 1]
    assert nodes.pixel_indices(5, NodeKind.NEGATIVE) == [2, 3]
    assert nodes.present_classes() == [5]


def test_equal_entropy_gives_only_global_mean_prototype():
    features = torch.randn(5, 3, dtype=f64)
    nodes = sample_novel_nodes(features, torch.full((5,), 0.3, dtype=f64), k=2, unknown_id=2,
                               domain=Domain.SOURCE, noise=0.0)
    assert len(nodes) == 1
    assert NodeKind(int(nodes.kinds[0])) is NodeKind.PROTOTYPE
    assert torch.allclose(nodes.features[0], features.mean(dim=0))


@given(st.permutations(list(range(8))))
def test_novel_selection_is_permutation_invariant(order):
    gen = torch.Generator().manual_seed(0)
    features = torch.randn(8, 3, generator=gen, dtype=f64)
    h = torch.rand(8, generator=gen, dtype=f64)
    perm = torch.tensor(order)
    base = sample_novel_nodes(features, h, 8, 4, Domain.TARGET, noise=0.0)
    shuffled = sample_novel_nodes(features[perm], h[perm], 8, 4, Domain.TARGET, noise=0.0, pixels=perm)
    for kind in (NodeKind.POSITIVE, NodeKind.NEGATIVE):
        assert base.pixel_indices(4, kind) == shuffled.pixel_indices(4, kind)


def test_novel_nodes_need_two_candidates():
    with pytest.raises(InvalidInputError):
        sample_novel_nodes(torch.randn(1, 2), torch.rand(1), 2, 3, Domain.SOURCE)


# ============ NodeSet ============

def test_nodeset_concat_select_and_descriptors():
    a = NodeSet.build(torch.zeros(2, 3), 0, Domain.SOURCE, NodeKind.POSITIVE, torch.tensor([4, 7]))
    b = NodeSet.build(torch.ones(1, 3), 5, Domain.TARGET, NodeKind.SYNTHESIZED)
    joint = NodeSet.concat([a, b])
    assert len(joint) == 3 and joint.dim == 3
    assert joint.descriptors() == [
        (0, "source", "positive"), (0, "source", "positive"), (5, "target", "synthesized"),
    ]
    assert joint.pixels.tolist() == [4, 7, -1]
    assert len(joint.select(joint.domain_mask(Domain.TARGET))) == 1
    assert joint.class_index() == {0: [0, 1], 5: [2]}
    assert [node.class_id for node in joint] == [0, 0, 5]


def test_nodeset_rejects_ragged_columns():
    with pytest.raises(ShapeMismatchError):
        NodeSet(torch.zeros(2, 3), torch.zeros(2, dtype=torch.long), torch.zeros(1, dtype=torch.long),
                torch.zeros(2, dtype=torch.long), torch.zeros(2, dtype=torch.long))


# ============ Memory ============

def _initialized(value, num_classes=3, dim=2):
    bank = MemoryBank.empty(num_classes, dim, f64)
    return update_memory(bank, {c: torch.full((1, dim), value, dtype=f64) for c in range(num_classes)}, 0.5)


def test_first_update_writes_set_mean():
    bank = MemoryBank.empty(2, 2, f64)
    feats = torch.tensor([[1.0, 2.0], [3.0, 6.0]], dtype=f64)
    new = update_memory(bank, {1: feats}, 0.01)
    assert torch.equal(new.means[1], torch.tensor([2.0, 4.0], dtype=f64))
    assert new.initialized.tolist() == [False, True]
    assert not bank.initialized.any()


def test_alpha_one_takes_batch_mean_and_zero_keeps_memory():
    bank = _initialized(1.0)
    feats = torch.full((3, 2), 4.0, dtype=f64)
    assert torch.equal(update_memory(bank, {0: feats}, 1.0).means[0], feats[0])
    assert torch.equal(update_memory(bank, {0: feats}, 0.0).means[0], bank.means[0])


def test_empty_class_sets_are_untouched():
    bank = _initialized(2.0)
    new = update_memory(bank, {0: torch.zeros(0, 2, dtype=f64)}, 0.5)
    assert torch.equal(new.means, bank.means)
    assert torch.equal(new.counts, bank.counts)


@pytest.mark.parametrize("alpha", [0.0, 0.5, 0.99, 1.0])
def test_memory_matches_geometric_closed_form(alpha):
    m0, c = -3.0, 2.0
    bank = _initialized(m0, num_classes=1, dim=4)
    const = {0: torch.full((5, 4), c, dtype=f64)}
    for t in range(1, 51):
        bank = update_memory(bank, const, alpha)
        expected = c + (1 - alpha) ** t * (m0 - c)
        assert torch.allclose(bank.means[0], torch.full((4,), expected, dtype=f64), atol=1e-10, rtol=0)


def test_memory_rejects_bad_alpha():
    with pytest.raises(InvalidInputError):
        update_memory(MemoryBank.empty(1, 1), {}, 1.5)


def test_memory_store_commit_round_trip():
    store = MemoryStore(3, 2).double()
    bank = update_memory(store.bank, {2: torch.ones(1, 2, dtype=f64)}, 0.5)
    assert not store.initialized.any()
    store.commit(bank)
    assert store.initialized.tolist() == [False, False, True]
    assert "means" in store.state_dict()


def test_node_class_sets_exclude_synthesized_nodes():
    nodes = NodeSet.concat([
        NodeSet.build(torch.zeros(2, 2), 0, Domain.SOURCE, NodeKind.POSITIVE),
        NodeSet.build(torch.ones(1, 2), 1, Domain.SOURCE, NodeKind.SYNTHESIZED),
    ])
    assert set(node_class_sets(nodes)) == {0}


# ============ Completion ============

def test_completion_without_missing_classes_is_identity():
    nodes = NodeSet.build(torch.randn(3, 2, dtype=f64), 0, Domain.TARGET, NodeKind.POSITIVE)
    bank = _initialized(0.0, num_classes=1)
    completed, skipped = complete_missing_classes(nodes, bank, bank, Domain.TARGET, [0])
    assert torch.equal(completed.features, nodes.features)
    assert skipped == []


def test_completion_with_zero_std_uses_memory_mean():
    target_bank = update_memory(MemoryBank.empty(4, 2, f64), {3: torch.tensor([[0.5, -1.0]], dtype=f64)}, 0.5)
    source_bank = update_memory(MemoryBank.empty(4, 2, f64), {3: torch.tensor([[1.0, 2.0]] * 3, dtype=f64)}, 0.5)
    assert torch.equal(source_bank.std[3], torch.zeros(2, dtype=f64))
    nodes = NodeSet.empty(2, torch.zeros(0, dtype=f64))
    completed, skipped = complete_missing_classes(nodes, target_bank, source_bank, Domain.TARGET, [3])
    assert len(completed) == 1 and skipped == []
    assert torch.equal(completed.features[0], target_bank.means[3])
    assert completed.descriptors() == [(3, "target", "synthesized")]


def test_completion_is_seeded():
    rng = torch.Generator()
    self_bank = update_memory(MemoryBank.empty(2, 3, f64), {1: torch.randn(4, 3, dtype=f64)}, 0.5)
    other_bank = update_memory(MemoryBank.empty(2, 3, f64), {1: torch.randn(4, 3, dtype=f64)}, 0.5)
    nodes = NodeSet.empty(3, torch.zeros(0, dtype=f64))
    first = complete_missing_classes(nodes, self_bank, other_bank, Domain.SOURCE, [1], rng.manual_seed(3))[0]
    second = complete_missing_classes(nodes, self_bank, other_bank, Domain.SOURCE, [1], rng.manual_seed(3))[0]
    assert torch.equal(first.features, second.features)


def test_completion_skips_uninitialized_classes(caplog):
    bank = MemoryBank.empty(3, 2, f64)
    nodes = NodeSet.empty(2, torch.zeros(0, dtype=f64))
    with caplog.at_level(logging.WARNING, logger="openset_panoseg"):
        completed, skipped = complete_missing_classes(nodes, bank, bank, Domain.SOURCE, range(3))
    assert len(completed) == 0
    assert skipped == [0, 1, 2]
    assert "memory not initialized" in caplog.text
