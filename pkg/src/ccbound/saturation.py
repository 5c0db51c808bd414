"""Saturation numbers: the least file count that attains L = alpha*min(beta, K).

Three upper bounds are computed: a constructive one (build a balanced
instance on alpha*min(beta,K) distinct files, then remap demand entries so
sibling subtrees reuse each other's files and count what is left), a
memoized recursion that tracks the same quantity along the heavier
subtree, and the closed form floor((2*alpha*beta + alpha + beta)/3) valid
for beta <= K.  For tiny parameters an exhaustive canonical search gives
the exact value.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Optional

from .errors import InputError, SaturationNotFoundError, SearchLimitError
from .labeling import run_labeling
from .model import (
    CACHE,
    DELIVERY,
    INTERNAL,
    ROOT,
    Node,
    ProblemInstance,
    SystemParams,
    Tree,
    TreeBuilder,
    replace_demands,
    topological_order,
)


def build_saturating_instance(alpha: int, beta: int, users: int) -> ProblemInstance:
    """Balanced construction attaining L = alpha * min(beta, users).

    The delivery/cache leaf counts are split near-evenly at every level
    (ceil on the delivery side, floor on the cache side), cache id subsets
    are chosen with minimum overlap (left takes the lowest ids, right the
    highest), and delivery leaf t demands files (t-1)*min(beta,K)+1 ..
    t*min(beta,K) at the cached positions (file 1 elsewhere).  Every
    recovered file is distinct, so the instance uses alpha*min(beta,K)
    files before any reuse.
    """
    if alpha < 1 or beta < 1 or users < 1:
        raise InputError("alpha, beta, and users must all be >= 1")
    m = min(beta, users)
    num_files = alpha * m
    params = SystemParams(num_files, users)

    # Records indexed by creation order (= final node ids, root appended last).
    records: list[dict] = []

    def new_record(a: int, b: int, zset: tuple[int, ...], parent: Optional[int]) -> int:
        records.append({"a": a, "b": b, "z": zset, "parent": parent, "kind": None})
        return len(records) - 1

    top = new_record(alpha, beta, tuple(range(1, m + 1)), None)
    queue = [top]
    while queue:
        u = queue.pop(0)
        a, b, zset = records[u]["a"], records[u]["b"], records[u]["z"]
        al, bl = (a + 1) // 2, b // 2
        ar, br = a - al, b - bl
        zl = zset[: min(bl, users)]
        zr = zset[len(zset) - min(br, users):]
        for (ca, cb, cz) in ((al, bl, zl), (ar, br, zr)):
            child = new_record(ca, cb, cz, u)
            if ca + cb >= 2:
                queue.append(child)
            elif cb == 1:
                records[child]["kind"] = CACHE
            else:
                records[child]["kind"] = DELIVERY

    delivery_ids = [i for i, r in enumerate(records) if r["kind"] == DELIVERY]
    for t, node_id in enumerate(delivery_ids, start=1):
        demands = [1] * users
        for r in range(1, m + 1):
            demands[r - 1] = (t - 1) * m + r
        records[node_id]["demands"] = tuple(demands)

    root_id = len(records)
    nodes = []
    for i, r in enumerate(records):
        parent = r["parent"] if r["parent"] is not None else root_id
        if r["kind"] == CACHE:
            nodes.append(Node(id=i, kind=CACHE, parent=parent, cache_id=r["z"][0]))
        elif r["kind"] == DELIVERY:
            nodes.append(Node(id=i, kind=DELIVERY, parent=parent, demands=r["demands"]))
        else:
            nodes.append(Node(id=i, kind=INTERNAL, parent=parent))
    nodes.append(Node(id=root_id, kind=ROOT, parent=None))
    return ProblemInstance(params, Tree(nodes))


def reuse_files(instance: ProblemInstance) -> ProblemInstance:
    """Remap demand entries so the lighter subtree at each node reuses the heavier's files.

    Processes violating nodes deepest-first (children before parents);
    each fix maps the lighter child's surplus files injectively onto the
    heavier child's (smallest file id to smallest) and rewrites the
    matching demand entries of the lighter subtree's delivery leaves.  A
    fix never disturbs nodes above it, so one bottom-up sweep suffices.
    Preserves every per-node new-file count inside the rewritten
    subtrees and never lowers L; the distinct-file count shrinks whenever
    a fix applies.  Returns the input unchanged if nothing needs fixing;
    otherwise the surviving files are renumbered 1..N' in ascending order.
    """
    current = instance
    changed = False
    while True:
        labeling = run_labeling(current)
        violation = _first_subset_violation(current, labeling)
        if violation is None:
            break
        current = _apply_file_reuse(current, labeling, *violation)
        changed = True
    if not changed:
        return instance
    return _compact_file_ids(current)


def _first_subset_violation(instance, labeling):
    """First internal node (children-before-parents order) whose lighter
    child's recovered set is not contained in the heavier child's."""
    tree = instance.tree
    for node_id in topological_order(tree):
        node = tree.nodes[node_id]
        if node.kind != INTERNAL:
            continue
        kids = tree.children[node_id]
        if len(kids) != 2:
            raise InputError(
                f"file reuse requires a binary instance; node {node_id} has {len(kids)} children"
            )
        left, right = kids
        gamma = lambda c: labeling.w[c] | labeling.new_files[c]
        gl, gr = gamma(left), gamma(right)
        if len(gl) >= len(gr):
            heavy, light, g_heavy, g_light = left, right, gl, gr
        else:
            heavy, light, g_heavy, g_light = right, left, gr, gl
        if not g_light <= g_heavy:
            return (heavy, light, g_heavy, g_light)
    return None


def _apply_file_reuse(instance, labeling, heavy, light, g_heavy, g_light):
    tree = instance.tree
    phi = dict(zip(sorted(g_light - g_heavy), sorted(g_heavy - g_light)))
    light_cache_ids = labeling.z[light]
    updates = {}
    for node_id in tree.subtree_ids(light):
        node = tree.nodes[node_id]
        if node.kind != DELIVERY:
            continue
        demands = list(node.demands)
        touched = False
        for cid in light_cache_ids:
            if demands[cid - 1] in phi:
                demands[cid - 1] = phi[demands[cid - 1]]
                touched = True
        if touched:
            updates[node_id] = tuple(demands)
    return replace_demands(instance, updates)


def _compact_file_ids(instance):
    """Renumber surviving files to 1..N'; unreadable demand entries become file 1."""
    labeling = run_labeling(instance)
    surviving = sorted(labeling.recovered_union)
    mapping = {f: i for i, f in enumerate(surviving, start=1)}
    updates = {}
    for node in instance.tree.nodes:
        if node.kind != DELIVERY:
            continue
        demands = tuple(mapping.get(f, 1) for f in node.demands)
        if demands != node.demands:
            updates[node.id] = demands
    return replace_demands(instance, updates, num_files=max(1, len(surviving)))


@lru_cache(maxsize=None)
def nsat_upper_construction(alpha: int, beta: int, users: int) -> int:
    """Distinct-file count of the balanced construction after file reuse."""
    instance = reuse_files(build_saturating_instance(alpha, beta, users))
    return len(run_labeling(instance).recovered_union)


@lru_cache(maxsize=None)
def nsat_upper_recursive(alpha: int, beta: int, users: int) -> int:
    """Same quantity computed without building trees.

    Follows the balanced split: the files needed are those of the heavier
    half plus the files first recovered where the halves join,
    a_l * [min(b_r, K-b_l)]+ + a_r * [min(b_l, K-b_r)]+.  Agrees with
    ``nsat_upper_construction`` on every input (cross-checked in tests).
    """
    if alpha < 0 or beta < 0:
        raise InputError("alpha and beta must be nonnegative")
    if users < 1:
        raise InputError("users must be >= 1")
    if alpha + beta <= 1:
        return 0
    al, bl = (alpha + 1) // 2, beta // 2
    ar, br = alpha - al, beta - bl
    joined = al * max(0, min(br, users - bl)) + ar * max(0, min(bl, users - br))
    return max(
        nsat_upper_recursive(al, bl, users),
        nsat_upper_recursive(ar, br, users),
    ) + joined


def nsat_upper_analytic(alpha: int, beta: int, users: int) -> int:
    """Closed-form upper bound floor((2ab + a + b) / 3); requires beta <= users."""
    if alpha < 1 or beta < 1:
        raise InputError("alpha and beta must be >= 1")
    if beta > users:
        raise InputError(f"analytic bound requires beta <= users (got beta={beta}, users={users})")
    return (2 * alpha * beta + alpha + beta) // 3


def nsat_upper_best(alpha: int, beta: int, users: int) -> int:
    """Smallest of the three upper bounds.

    Uses the recursion for the constructive term; it is exactly the
    construction's file count but cheap enough for the inequality search.
    """
    candidates = [nsat_upper_recursive(alpha, beta, users), alpha * min(beta, users)]
    if alpha >= 1 and 1 <= beta <= users:
        candidates.append(nsat_upper_analytic(alpha, beta, users))
    return min(candidates)


@dataclass(frozen=True)
class BruteForceLimits:
    """Ceilings for the exhaustive search; beyond them the space explodes."""

    max_leaves: int = 5   # alpha + beta
    max_users: int = 3
    max_files: int = 6


@dataclass(frozen=True)
class SaturationEstimate:
    """All bounds on the saturation number for one (alpha, beta, users)."""

    alpha: int
    beta: int
    users: int
    upper_construction: int
    upper_analytic: Optional[int]
    upper_trivial: int
    exact: Optional[int] = None

    @classmethod
    def compute(cls, alpha: int, beta: int, users: int, exact: bool = False,
                limits: Optional[BruteForceLimits] = None) -> "SaturationEstimate":
        analytic = nsat_upper_analytic(alpha, beta, users) if beta <= users else None
        exact_value = nsat_exact_bruteforce(alpha, beta, users, limits) if exact else None
        return cls(
            alpha=alpha,
            beta=beta,
            users=users,
            upper_construction=nsat_upper_construction(alpha, beta, users),
            upper_analytic=analytic,
            upper_trivial=alpha * min(beta, users),
            exact=exact_value,
        )


def nsat_exact_bruteforce(alpha: int, beta: int, users: int,
                          limits: Optional[BruteForceLimits] = None) -> int:
    """Exact saturation number by exhaustive search over canonical instances.

    Enumerates every binary tree shape on alpha+beta leaves, every
    delivery/cache assignment of the leaf slots, cache ids up to user
    renaming (restricted-growth form), and demand entries at the cached
    positions up to file renaming (first-used files get increasing ids;
    uncached positions are pinned to file 1 since no pair can read them).
    Returns the first N whose search attains L = alpha * min(beta, users).
    """
    if alpha < 1 or beta < 1 or users < 1:
        raise InputError("alpha, beta, and users must all be >= 1")
    limits = limits or BruteForceLimits()
    if alpha + beta > limits.max_leaves:
        raise SearchLimitError(
            f"alpha + beta = {alpha + beta} exceeds the search limit {limits.max_leaves}"
        )
    if users > limits.max_users:
        raise SearchLimitError(f"users = {users} exceeds the search limit {limits.max_users}")

    target = alpha * min(beta, users)
    max_seen = 0
    for num_files in range(1, limits.max_files + 1):
        for instance in _candidate_instances(alpha, beta, users, num_files):
            bound = run_labeling(instance).lower_bound
            if bound > max_seen:
                max_seen = bound
                if bound == target:
                    return num_files
    raise SaturationNotFoundError(
        f"no instance on at most {limits.max_files} files reaches L = {target} "
        f"(best seen: {max_seen})",
        max_bound_seen=max_seen,
    )


@lru_cache(maxsize=None)
def _binary_shapes(num_leaves: int):
    """All ordered binary tree shapes; a leaf is None, an internal a pair."""
    if num_leaves == 1:
        return (None,)
    shapes = []
    for k in range(1, num_leaves):
        for left in _binary_shapes(k):
            for right in _binary_shapes(num_leaves - k):
                shapes.append((left, right))
    return tuple(shapes)


def _restricted_growth(length: int, cap: int) -> Iterator[tuple[int, ...]]:
    """Sequences with s_1 = 1 and each value <= max(prefix)+1, capped."""
    if length == 0:
        yield ()
        return
    seq = [0] * length

    def go(i: int, prefix_max: int) -> Iterator[tuple[int, ...]]:
        if i == length:
            yield tuple(seq)
            return
        for v in range(1, min(cap, prefix_max + 1) + 1):
            seq[i] = v
            yield from go(i + 1, max(prefix_max, v))

    yield from go(0, 0)


def _candidate_instances(alpha, beta, users, num_files) -> Iterator[ProblemInstance]:
    params = SystemParams(num_files, users)
    num_leaves = alpha + beta
    for shape in _binary_shapes(num_leaves):
        for delivery_slots in combinations(range(num_leaves), alpha):
            delivery_set = set(delivery_slots)
            for cache_ids in _restricted_growth(beta, users):
                used = sorted(set(cache_ids))
                position_of = {cid: idx for idx, cid in enumerate(used)}
                for demand_seq in _restricted_growth(alpha * len(used), num_files):
                    yield _materialize(
                        shape, delivery_set, cache_ids, demand_seq,
                        used, position_of, params,
                    )


def _materialize(shape, delivery_set, cache_ids, demand_seq, used, position_of, params):
    builder = TreeBuilder()
    counters = {"slot": 0, "delivery": 0, "cache": 0}

    def demand_vector(t: int) -> tuple[int, ...]:
        base = t * len(used)
        vec = [1] * params.num_users
        for cid in used:
            vec[cid - 1] = demand_seq[base + position_of[cid]]
        return tuple(vec)

    def build(node) -> int:
        if node is None:
            slot = counters["slot"]
            counters["slot"] += 1
            if slot in delivery_set:
                t = counters["delivery"]
                counters["delivery"] += 1
                return builder.delivery_leaf(demand_vector(t))
            idx = counters["cache"]
            counters["cache"] += 1
            return builder.cache_leaf(cache_ids[idx])
        left, right = node
        return builder.internal([build(left), build(right)])

    builder.root(build(shape))
    return ProblemInstance(params, builder.build())
