"""Domain types: system parameters, demand vectors, and labeled directed in-trees.

An instance of the caching problem is a directed in-tree whose leaves each
carry exactly one signal: a cache signal ``Z_i`` (``i`` a user id) or a
delivery signal ``X_{d_1..d_K}`` (a length-K vector of file ids).  Every
edge points toward the root, the root has in-degree one, and node ids are
dense integers assigned at construction.  All tie-breaking (leaf
enumeration, child ordering during normalization) is by ascending node id
so that every derived object is deterministic.

All types are immutable after construction; the operations in this module
are pure functions that return fresh objects.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .errors import InputError, InvalidInstanceError, MalformedTreeError

# Node kinds.
CACHE = "cache"
DELIVERY = "delivery"
INTERNAL = "internal"
ROOT = "root"

#: Length-K tuple of file ids; user j's demand sits at index j-1.
DemandVector = tuple

JSON_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SystemParams:
    """Problem size shared by every computation: N files, K users."""

    num_files: int
    num_users: int

    def __post_init__(self):
        if self.num_files < 1:
            raise InputError(f"num_files must be >= 1, got {self.num_files}")
        if self.num_users < 1:
            raise InputError(f"num_users must be >= 1, got {self.num_users}")


@dataclass(frozen=True)
class CacheSize:
    """Per-user cache size M, in units of files (exact rational)."""

    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))
        if self.value < 0:
            raise InputError(f"cache size must be nonnegative, got {self.value}")

    def check_range(self, params: SystemParams) -> None:
        if self.value > params.num_files:
            raise InputError(
                f"cache size {self.value} exceeds number of files {params.num_files}"
            )


@dataclass(frozen=True)
class Inequality:
    """A certified inequality ``alpha * R_star + beta * M >= bound``.

    ``provenance`` records which machinery produced it: "cutset",
    "proposed" (with the split used, if any), "han", "cdb", or
    "custom-instance" for bounds read off an explicit labeled tree.
    """

    alpha: int
    beta: int
    bound: Fraction
    provenance: str = "custom-instance"
    split: Optional[tuple[int, int]] = None

    def value_at(self, cache_size) -> Fraction:
        """Rate lower bound implied at cache size M: (bound - beta*M) / alpha."""
        m = Fraction(cache_size)
        return (Fraction(self.bound) - self.beta * m) / self.alpha


@dataclass(frozen=True)
class RatePoint:
    """An exact (M, R) pair."""

    cache: Fraction
    rate: Fraction


@dataclass(frozen=True)
class Node:
    """One tree node.  Leaves carry exactly one signal, internals none."""

    id: int
    kind: str
    parent: Optional[int] = None
    cache_id: Optional[int] = None
    demands: Optional[DemandVector] = None


class Tree:
    """Immutable directed in-tree over densely indexed nodes.

    The constructor only enforces what is needed to store the structure
    (dense ids, in-range parent references); semantic invariants are
    reported by :func:`validate` so that malformed trees can be inspected
    rather than rejected outright.
    """

    __slots__ = ("nodes", "children", "root_id")

    def __init__(self, nodes: Sequence[Node]):
        self.nodes = tuple(nodes)
        if not self.nodes:
            raise InputError("a tree needs at least one node")
        for pos, node in enumerate(self.nodes):
            if node.id != pos:
                raise InputError(
                    f"node ids must be dense and ordered, got id {node.id} at position {pos}"
                )
            if node.parent is not None:
                if not 0 <= node.parent < len(self.nodes):
                    raise InputError(
                        f"node {node.id} has out-of-range parent {node.parent}"
                    )
                if node.parent == node.id:
                    raise InputError(f"node {node.id} is its own parent")
        kids: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for node in self.nodes:
            if node.parent is not None:
                kids[node.parent].append(node.id)
        self.children = {i: tuple(sorted(c)) for i, c in kids.items()}
        roots = [n.id for n in self.nodes if n.kind == ROOT]
        self.root_id = roots[0] if len(roots) == 1 else None

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other) -> bool:
        return isinstance(other, Tree) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)

    def __repr__(self) -> str:
        return f"Tree({len(self.nodes)} nodes)"

    def is_leaf(self, node_id: int) -> bool:
        return self.nodes[node_id].kind in (CACHE, DELIVERY)

    def leaf_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind in (CACHE, DELIVERY)]

    def cache_leaf_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind == CACHE]

    def delivery_leaf_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind == DELIVERY]

    def root_path(self, node_id: int) -> list[int]:
        """Nodes from ``node_id`` (inclusive) to the root, following parents."""
        if not 0 <= node_id < len(self.nodes):
            raise InputError(f"unknown node id {node_id}")
        path = [node_id]
        seen = {node_id}
        cur = node_id
        while self.nodes[cur].parent is not None:
            cur = self.nodes[cur].parent
            if cur in seen:
                raise MalformedTreeError(f"cycle detected at node {cur}")
            seen.add(cur)
            path.append(cur)
        return path

    def subtree_ids(self, node_id: int) -> list[int]:
        """All nodes of the subtree rooted at ``node_id`` (inclusive), ascending id."""
        out = []
        stack = [node_id]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(self.children[cur])
        return sorted(out)


class TreeBuilder:
    """Incremental construction helper; assigns dense ids in creation order."""

    def __init__(self):
        self._nodes: list[dict] = []
        self._root_added = False

    def _add(self, **fields) -> int:
        node_id = len(self._nodes)
        self._nodes.append({"id": node_id, "parent": None, **fields})
        return node_id

    def cache_leaf(self, cache_id: int) -> int:
        return self._add(kind=CACHE, cache_id=cache_id)

    def delivery_leaf(self, demands: Iterable[int]) -> int:
        return self._add(kind=DELIVERY, demands=tuple(demands))

    def internal(self, children: Iterable[int]) -> int:
        node_id = self._add(kind=INTERNAL)
        self._attach(node_id, children)
        return node_id

    def root(self, child: int) -> int:
        if self._root_added:
            raise InputError("root already added")
        node_id = self._add(kind=ROOT)
        self._attach(node_id, [child])
        self._root_added = True
        return node_id

    def _attach(self, parent_id: int, children: Iterable[int]) -> None:
        for child in children:
            if not 0 <= child < len(self._nodes) - 1:
                raise InputError(f"unknown child id {child}")
            if self._nodes[child]["parent"] is not None:
                raise InputError(f"node {child} already has a parent")
            self._nodes[child]["parent"] = parent_id

    def build(self) -> Tree:
        return Tree([Node(**fields) for fields in self._nodes])


class ProblemInstance:
    """System parameters plus a labeled in-tree.

    Derived counts follow the leaf labels: ``alpha``/``beta`` are the
    numbers of delivery/cache leaves, ``alpha_hat``/``beta_hat`` the
    numbers of distinct demand vectors / cache ids among them.
    """

    __slots__ = ("params", "tree", "alpha", "beta", "alpha_hat", "beta_hat")

    def __init__(self, params: SystemParams, tree: Tree):
        self.params = params
        self.tree = tree
        demand_vectors = [
            n.demands for n in tree.nodes if n.kind == DELIVERY and n.demands is not None
        ]
        cache_ids = [
            n.cache_id for n in tree.nodes if n.kind == CACHE and n.cache_id is not None
        ]
        self.alpha = sum(1 for n in tree.nodes if n.kind == DELIVERY)
        self.beta = sum(1 for n in tree.nodes if n.kind == CACHE)
        self.alpha_hat = len(set(demand_vectors))
        self.beta_hat = len(set(cache_ids))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ProblemInstance)
            and self.params == other.params
            and self.tree == other.tree
        )

    def __hash__(self):
        return hash((self.params, self.tree))

    def __repr__(self) -> str:
        return (
            f"ProblemInstance(N={self.params.num_files}, K={self.params.num_users}, "
            f"alpha={self.alpha}, beta={self.beta}, {len(self.tree)} nodes)"
        )


# ---------------------------------------------------------------------------
# Structural queries
# ---------------------------------------------------------------------------


def validate(instance: ProblemInstance) -> list[str]:
    """Return every violated structural invariant (empty list = valid).

    Violations are data, not failures: malformed instances are returned
    for inspection.  In-degree of internal nodes is deliberately not
    checked here -- trees with in-degree 1 or >= 3 internals are legal
    inputs to :func:`normalize_in_degree`; use :func:`is_normalized` to
    test for strict binary form.
    """
    tree = instance.tree
    params = instance.params
    report: list[str] = []

    roots = [n for n in tree.nodes if n.kind == ROOT]
    if len(roots) != 1:
        report.append(f"expected exactly one root node, found {len(roots)}")
    for node in roots:
        if node.parent is not None:
            report.append(f"root node {node.id} must not have a parent")
        degree = len(tree.children[node.id])
        if degree != 1:
            report.append(f"root in-degree != 1 (found {degree})")

    for node in tree.nodes:
        if node.kind != ROOT and node.parent is None:
            report.append(f"node {node.id} has no parent")
        if node.kind in (CACHE, DELIVERY) and tree.children[node.id]:
            report.append(f"leaf node {node.id} has incoming edges")
        if node.kind == INTERNAL and not tree.children[node.id]:
            report.append(f"internal node {node.id} has no incoming edges")

        if node.kind == CACHE:
            if node.demands is not None:
                report.append(f"cache node {node.id} carries a demand vector")
            if node.cache_id is None:
                report.append(f"cache node {node.id} is missing its cache id")
            elif not 1 <= node.cache_id <= params.num_users:
                report.append(
                    f"cache node {node.id}: cache id {node.cache_id} outside [1..{params.num_users}]"
                )
        elif node.kind == DELIVERY:
            if node.cache_id is not None:
                report.append(f"delivery node {node.id} carries a cache id")
            if node.demands is None:
                report.append(f"delivery node {node.id} is missing its demand vector")
            else:
                if len(node.demands) != params.num_users:
                    report.append(
                        f"delivery node {node.id}: demand vector length {len(node.demands)} "
                        f"!= num_users {params.num_users}"
                    )
                for entry in node.demands:
                    if not 1 <= entry <= params.num_files:
                        report.append(
                            f"delivery node {node.id}: demand {entry} outside [1..{params.num_files}]"
                        )
        else:
            if node.cache_id is not None or node.demands is not None:
                report.append(f"node {node.id}: internal/root nodes carry no labels")

    if len(roots) == 1:
        reachable = set(tree.subtree_ids(roots[0].id))
        for node in tree.nodes:
            if node.id not in reachable:
                report.append(f"node {node.id} is not connected to the root")

    return report


def is_normalized(instance: ProblemInstance) -> bool:
    """True when every internal node has in-degree exactly two."""
    tree = instance.tree
    return all(
        len(tree.children[n.id]) == 2 for n in tree.nodes if n.kind == INTERNAL
    )


def meeting_point(tree: Tree, a: int, b: int) -> int:
    """First node common to the root-paths of ``a`` and ``b``.

    The in-tree property makes this unique: the two paths are disjoint
    before it and identical after it.  For a node paired with its own
    ancestor, the ancestor is returned.
    """
    if a == b:
        raise InputError("meeting point requires two distinct nodes")
    on_a_path = set(tree.root_path(a))
    for candidate in tree.root_path(b):
        if candidate in on_a_path:
            return candidate
    raise MalformedTreeError(f"nodes {a} and {b} share no common ancestor")


def topological_order(tree: Tree) -> list[int]:
    """Children-before-parents order: leaves first, then internals, root last.

    Deterministic: within each readiness phase, ties break by ascending
    node id.  Raises :class:`MalformedTreeError` on a cycle.
    """
    pending = {n.id: len(tree.children[n.id]) for n in tree.nodes}
    heap = []
    for node in tree.nodes:
        if pending[node.id] == 0:
            heapq.heappush(heap, (0, node.id))
    order = []
    while heap:
        _, node_id = heapq.heappop(heap)
        order.append(node_id)
        parent = tree.nodes[node_id].parent
        if parent is not None:
            pending[parent] -= 1
            if pending[parent] == 0:
                heapq.heappush(heap, (1, parent))
    if len(order) != len(tree.nodes):
        raise MalformedTreeError("cycle detected: topological order is incomplete")
    return order


def normalize_in_degree(instance: ProblemInstance) -> ProblemInstance:
    """Rewrite the tree so every internal node has in-degree exactly two.

    Internal nodes with a single child are contracted away (they recover
    nothing new); nodes with m >= 3 children are replaced by a left-deep
    binary chain over the children in ascending id order, which never
    decreases the resulting bound.  Already-binary instances are returned
    unchanged.  Idempotent.
    """
    report = validate(instance)
    if report:
        raise InvalidInstanceError(report)
    if is_normalized(instance):
        return instance

    tree = instance.tree
    builder = TreeBuilder()

    def rebuild(node_id: int) -> int:
        node = tree.nodes[node_id]
        if node.kind == CACHE:
            return builder.cache_leaf(node.cache_id)
        if node.kind == DELIVERY:
            return builder.delivery_leaf(node.demands)
        built = [rebuild(child) for child in tree.children[node_id]]
        while len(built) > 1:
            merged = builder.internal(built[:2])
            built = [merged] + built[2:]
        return built[0]

    root_child = tree.children[tree.root_id][0]
    builder.root(rebuild(root_child))
    return ProblemInstance(instance.params, builder.build())


# ---------------------------------------------------------------------------
# Serialization (shared with the CLI)
# ---------------------------------------------------------------------------


def instance_to_json(instance: ProblemInstance) -> dict:
    """Versioned JSON document; round-trips losslessly through ``instance_from_json``."""
    nodes = []
    for node in instance.tree.nodes:
        entry: dict = {"id": node.id, "kind": node.kind}
        if node.parent is not None:
            entry["parent"] = node.parent
        if node.cache_id is not None:
            entry["cache_id"] = node.cache_id
        if node.demands is not None:
            entry["demands"] = list(node.demands)
        nodes.append(entry)
    return {
        "version": JSON_SCHEMA_VERSION,
        "num_files": instance.params.num_files,
        "num_users": instance.params.num_users,
        "nodes": nodes,
    }


def instance_from_json(document: Mapping) -> ProblemInstance:
    """Parse the JSON instance schema produced by :func:`instance_to_json`."""
    try:
        version = document["version"]
        if version != JSON_SCHEMA_VERSION:
            raise InputError(f"unsupported instance schema version {version!r}")
        params = SystemParams(int(document["num_files"]), int(document["num_users"]))
        raw_nodes = document["nodes"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed instance document: {exc}") from exc

    nodes = []
    for raw in sorted(raw_nodes, key=lambda r: r["id"]):
        kind = raw["kind"]
        if kind not in (CACHE, DELIVERY, INTERNAL, ROOT):
            raise InputError(f"unknown node kind {kind!r}")
        demands = raw.get("demands")
        nodes.append(
            Node(
                id=int(raw["id"]),
                kind=kind,
                parent=raw.get("parent"),
                cache_id=raw.get("cache_id"),
                demands=tuple(demands) if demands is not None else None,
            )
        )
    return ProblemInstance(params, Tree(nodes))


def replace_demands(instance: ProblemInstance, new_demands: Mapping[int, DemandVector],
                    num_files: Optional[int] = None) -> ProblemInstance:
    """Copy of ``instance`` with the demand vectors of selected delivery leaves replaced.

    ``new_demands`` maps node id -> demand tuple.  Optionally widens or
    narrows the file universe via ``num_files``.
    """
    nodes = []
    for node in instance.tree.nodes:
        if node.id in new_demands:
            if node.kind != DELIVERY:
                raise InputError(f"node {node.id} is not a delivery leaf")
            nodes.append(replace(node, demands=tuple(new_demands[node.id])))
        else:
            nodes.append(node)
    params = instance.params
    if num_files is not None:
        params = SystemParams(num_files, params.num_users)
    return ProblemInstance(params, Tree(nodes))
