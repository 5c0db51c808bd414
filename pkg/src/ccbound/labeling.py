"""Label propagation over problem instances.

The core operation walks the tree in topological order and tracks, per
node, which cache signals, delivery signals, and already-recovered files
flow through it.  A file ``d_j`` is recoverable from the pair
``(Z_j, X_{d_1..d_K})``; the files first recovered at a node label its
outgoing edge, and the sum of the edge-label sizes is the scalar bound L:
the instance certifies ``alpha * R_star + beta * M >= L``.

Also here: the pairing table that re-derives L as a sum of 0/1 pair
contributions, and the two instance transforms used when reasoning about
optimal instances (relabeling users by a permutation, and growing an
unsaturated instance by one file so that L increases by exactly one).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import InputError, InvalidInstanceError, SaturationError
from .model import (
    CACHE,
    DELIVERY,
    INTERNAL,
    DemandVector,
    Inequality,
    ProblemInstance,
    SystemParams,
    Tree,
    meeting_point,
    replace_demands,
    topological_order,
    validate,
)


def rec(cache_ids: Iterable[int], demand_vectors: Iterable[DemandVector],
        params: Optional[SystemParams] = None) -> frozenset[int]:
    """Files recoverable from some (cache, delivery) pair: {d_j : j in cache_ids}.

    When ``params`` is given, the inputs are range-checked.
    """
    ids = set(cache_ids)
    vectors = set(demand_vectors)
    if params is not None:
        for j in ids:
            if not 1 <= j <= params.num_users:
                raise InputError(f"cache id {j} outside [1..{params.num_users}]")
        for vec in vectors:
            if len(vec) != params.num_users:
                raise InputError(f"demand vector {vec} is not of length {params.num_users}")
    files = set()
    for vec in vectors:
        for j in ids:
            files.add(vec[j - 1])
    return frozenset(files)


@dataclass(frozen=True)
class LabelingResult:
    """Per-node label sets, per-edge new-file sets, and the scalar bound L.

    All per-node tuples are indexed by node id.  ``new_files[u]`` is the
    label on u's outgoing edge; it is empty for leaves and for the root,
    and disjoint from ``w[u]`` everywhere.  ``lower_bound`` is the sum of
    the new-file set sizes and ``recovered_union`` the union of them all.
    """

    instance: ProblemInstance
    w: tuple[frozenset[int], ...]
    z: tuple[frozenset[int], ...]
    d: tuple[frozenset[DemandVector], ...]
    new_files: tuple[frozenset[int], ...]
    lower_bound: int
    recovered_union: frozenset[int]


def run_labeling(instance: ProblemInstance) -> LabelingResult:
    """Propagate labels from the leaves to the root and compute L.

    Deterministic for a given instance.  Works on any valid in-tree
    (in-degree-1 internals contribute nothing; binary form is not
    required here, only by the transforms that reason about subtrees).
    """
    _check_instance(instance)
    tree = instance.tree
    n = len(tree)
    w: list = [frozenset()] * n
    z: list = [frozenset()] * n
    d: list = [frozenset()] * n
    new: list = [frozenset()] * n

    for node_id in topological_order(tree):
        node = tree.nodes[node_id]
        if node.kind == CACHE:
            z[node_id] = frozenset((node.cache_id,))
        elif node.kind == DELIVERY:
            d[node_id] = frozenset((node.demands,))
        else:
            kids = tree.children[node_id]
            z[node_id] = frozenset().union(*(z[c] for c in kids))
            d[node_id] = frozenset().union(*(d[c] for c in kids))
            w[node_id] = frozenset().union(*(w[c] | new[c] for c in kids))
        new[node_id] = rec(z[node_id], d[node_id]) - w[node_id]

    lower_bound = sum(len(s) for s in new)
    root = tree.root_id
    recovered = w[root] | new[root]
    return LabelingResult(
        instance=instance,
        w=tuple(w),
        z=tuple(z),
        d=tuple(d),
        new_files=tuple(new),
        lower_bound=lower_bound,
        recovered_union=recovered,
    )


def inequality_of(instance: ProblemInstance) -> Inequality:
    """Read the certified inequality (alpha, beta, L) off an instance."""
    if instance.alpha == 0 or instance.beta == 0:
        raise InputError(
            "degenerate instance (alpha == 0 or beta == 0) yields no usable inequality"
        )
    result = run_labeling(instance)
    return Inequality(
        alpha=instance.alpha,
        beta=instance.beta,
        bound=Fraction(result.lower_bound),
        provenance="custom-instance",
    )


@dataclass(frozen=True)
class PsiTable:
    """0/1 pair contributions whose total re-derives L.

    ``psi[(delivery_leaf, cache_leaf)]`` is 1 exactly when that pair is
    the first to recover its file at the pair's meeting point;
    ``omega[(node, file)]`` tracks the first-recovery events and is all
    ones on completion.
    """

    psi: dict[tuple[int, int], int]
    omega: dict[tuple[int, int], int]
    total: int

    def row_sum(self, delivery_leaf: int) -> int:
        return sum(v for (i, _), v in self.psi.items() if i == delivery_leaf)


def psi_table(instance: ProblemInstance,
              labeling: Optional[LabelingResult] = None) -> PsiTable:
    """Assign the pair table by scanning delivery leaves, then cache leaves.

    Both scans run in ascending leaf id; the individual entries depend on
    that order, only the total (= L) does not.
    """
    if labeling is None:
        labeling = run_labeling(instance)
    tree = instance.tree
    omega = {
        (node_id, f): 0
        for node_id in range(len(tree))
        for f in sorted(labeling.new_files[node_id])
    }
    psi: dict[tuple[int, int], int] = {}
    for vi in tree.delivery_leaf_ids():
        demand = tree.nodes[vi].demands
        for vc in tree.cache_leaf_ids():
            u = meeting_point(tree, vi, vc)
            recovered_file = demand[tree.nodes[vc].cache_id - 1]
            key = (u, recovered_file)
            if recovered_file in labeling.new_files[u] and omega[key] == 0:
                psi[(vi, vc)] = 1
                omega[key] = 1
            else:
                psi[(vi, vc)] = 0
    return PsiTable(psi=psi, omega=omega, total=sum(psi.values()))


def permute_users(instance: ProblemInstance,
                  pi: Union[Mapping[int, int], Sequence[int]]) -> ProblemInstance:
    """Relabel users by the bijection ``pi`` (1-based).

    Cache leaf ``Z_i`` becomes ``Z_{pi(i)}`` and every demand vector is
    reindexed by the inverse permutation, so each pair recovers exactly
    the same file as before: every per-node new-file set, and hence L,
    is unchanged.
    """
    K = instance.params.num_users
    if not isinstance(pi, Mapping):
        pi = {i + 1: v for i, v in enumerate(pi)}
    if sorted(pi.keys()) != list(range(1, K + 1)) or sorted(pi.values()) != list(range(1, K + 1)):
        raise InputError(f"pi is not a bijection on [1..{K}]")
    sigma = {v: k for k, v in pi.items()}

    nodes = []
    for node in instance.tree.nodes:
        if node.kind == CACHE:
            nodes.append(replace(node, cache_id=pi[node.cache_id]))
        elif node.kind == DELIVERY:
            reordered = tuple(node.demands[sigma[j] - 1] for j in range(1, K + 1))
            nodes.append(replace(node, demands=reordered))
        else:
            nodes.append(node)
    return ProblemInstance(instance.params, Tree(nodes))


def augment_with_new_file(instance: ProblemInstance) -> ProblemInstance:
    """Grow an unsaturated instance to N+1 files so that L increases by one.

    Requires L < alpha * min(beta, K) and that the instance uses
    min(beta, K) distinct cache ids.  Locates the first delivery leaf
    whose pair-table row is short of min(beta, K), the deepest meeting
    point with an unpaired cache id, and rewrites that single demand
    entry to the new file.  All ties break by ascending node id.
    """
    if instance.alpha == 0 or instance.beta == 0:
        raise InputError("augmentation requires at least one delivery and one cache leaf")
    params = instance.params
    K = params.num_users
    min_bk = min(instance.beta, K)
    if instance.beta_hat != min_bk:
        raise InputError(
            f"augmentation requires beta_hat == min(beta, K) "
            f"(got beta_hat={instance.beta_hat}, min(beta, K)={min_bk})"
        )
    labeling = run_labeling(instance)
    target = instance.alpha * min_bk
    if labeling.lower_bound >= target:
        raise SaturationError(
            f"instance is saturated: L = {labeling.lower_bound} = alpha * min(beta, K)"
        )

    table = psi_table(instance, labeling)
    tree = instance.tree
    cache_leaves = tree.cache_leaf_ids()

    short_leaf = None
    for vi in tree.delivery_leaf_ids():
        if table.row_sum(vi) < min_bk:
            short_leaf = vi
            break
    assert short_leaf is not None, "some row must be short when L < alpha*min(beta,K)"

    paired_ids = {
        tree.nodes[vc].cache_id for vc in cache_leaves if table.psi[(short_leaf, vc)] == 1
    }
    candidates = [
        vc
        for vc in cache_leaves
        if table.psi[(short_leaf, vc)] == 0 and tree.nodes[vc].cache_id not in paired_ids
    ]
    assert candidates, "an unpaired cache id must exist when beta_hat == min(beta,K)"

    depth = {node_id: len(tree.root_path(node_id)) for node_id in range(len(tree))}
    meet = {vc: meeting_point(tree, short_leaf, vc) for vc in candidates}
    deepest = max((depth[meet[vc]], -meet[vc]) for vc in candidates)
    target_node = -deepest[1]
    partner = min(vc for vc in candidates if meet[vc] == target_node)

    k = tree.nodes[partner].cache_id
    demands = list(tree.nodes[short_leaf].demands)
    demands[k - 1] = params.num_files + 1
    return replace_demands(
        instance,
        {short_leaf: tuple(demands)},
        num_files=params.num_files + 1,
    )


def directional_recovery(result: LabelingResult, node_id: int) -> tuple[frozenset[int], frozenset[int]]:
    """Files recovered across an internal node, right-to-left and left-to-right.

    The left child is the lower-indexed one.  Together with the upstream
    set these determine the node's new-file set:
    ``new_files[u] == (delta_rl | delta_lr) - w[u]``.
    """
    tree = result.instance.tree
    if not 0 <= node_id < len(tree):
        raise InputError(f"unknown node id {node_id}")
    node = tree.nodes[node_id]
    if node.kind != INTERNAL:
        raise InputError(f"node {node_id} is not an internal node")
    kids = tree.children[node_id]
    if len(kids) != 2:
        raise InputError(f"node {node_id} does not have exactly two children")
    left, right = kids
    delta_rl = rec(result.z[right] - result.z[left], result.d[left])
    delta_lr = rec(result.z[left] - result.z[right], result.d[right])
    return delta_rl, delta_lr


def _check_instance(instance: ProblemInstance) -> None:
    """Raise InputError for demand-range problems, InvalidInstanceError otherwise."""
    N = instance.params.num_files
    for node in instance.tree.nodes:
        if node.kind == DELIVERY and node.demands is not None:
            for entry in node.demands:
                if entry > N or entry < 1:
                    raise InputError(
                        f"delivery node {node.id}: demand index {entry} outside [1..{N}]"
                    )
    report = validate(instance)
    if report:
        raise InvalidInstanceError(report)
