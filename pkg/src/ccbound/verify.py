"""Seeded randomized invariant checks, shared by the CLI and the test suite.

Each check takes an instance and raises AssertionError with a readable
message on violation; the suite runners collect failures together with
the offending instance's JSON so a counterexample can be replayed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .bounds import verify_gap_le_4
from .errors import InputError, SaturationError
from .labeling import (
    augment_with_new_file,
    directional_recovery,
    permute_users,
    psi_table,
    rec,
    run_labeling,
)
from .model import (
    CACHE,
    DELIVERY,
    INTERNAL,
    ProblemInstance,
    SystemParams,
    TreeBuilder,
    instance_to_json,
    meeting_point,
    normalize_in_degree,
    topological_order,
)
from .saturation import (
    build_saturating_instance,
    nsat_upper_analytic,
    nsat_upper_construction,
    nsat_upper_recursive,
    reuse_files,
)


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------


def random_instance(rng: random.Random, *, max_users: int = 4, max_files: int = 6,
                    max_delivery: int = 4, max_cache: int = 4,
                    ensure_beta_hat: bool = False, max_merge: int = 2) -> ProblemInstance:
    """Random labeled in-tree with at least one leaf of each kind.

    ``max_merge`` > 2 produces internal nodes of higher in-degree (for
    normalization checks); the default is binary.  ``ensure_beta_hat``
    forces the cache leaves to cover min(beta, K) distinct ids, the
    precondition of the augmentation transform.
    """
    users = rng.randint(1, max_users)
    files = rng.randint(1, max_files)
    num_delivery = rng.randint(1, max_delivery)
    num_cache = rng.randint(1, max_cache)

    if ensure_beta_hat:
        want = min(num_cache, users)
        ids = list(range(1, want + 1))
        ids += [rng.randint(1, want) for _ in range(num_cache - want)]
        rng.shuffle(ids)
    else:
        ids = [rng.randint(1, users) for _ in range(num_cache)]

    builder = TreeBuilder()
    roots = []
    for _ in range(num_delivery):
        demands = tuple(rng.randint(1, files) for _ in range(users))
        roots.append(builder.delivery_leaf(demands))
    for cache_id in ids:
        roots.append(builder.cache_leaf(cache_id))

    while len(roots) > 1:
        take = 2 if max_merge <= 2 else rng.randint(2, min(max_merge, len(roots)))
        take = min(take, len(roots))
        picked = [roots.pop(rng.randrange(len(roots))) for _ in range(take)]
        roots.append(builder.internal(picked))
    builder.root(roots[0])
    return ProblemInstance(SystemParams(files, users), builder.build())


# ---------------------------------------------------------------------------
# Individual checks (assert on violation)
# ---------------------------------------------------------------------------


def check_psi_matches_lower_bound(instance: ProblemInstance) -> None:
    """The pair table total re-derives L, and every first-recovery slot fills."""
    labeling = run_labeling(instance)
    table = psi_table(instance, labeling)
    assert table.total == labeling.lower_bound, (
        f"pair-table total {table.total} != L {labeling.lower_bound}"
    )
    unfilled = [key for key, v in table.omega.items() if v == 0]
    assert not unfilled, f"first-recovery slots left unfilled: {unfilled}"


def check_bound_cap(instance: ProblemInstance) -> None:
    """L never exceeds alpha * min(beta, K)."""
    labeling = run_labeling(instance)
    cap = instance.alpha * min(instance.beta, instance.params.num_users)
    assert labeling.lower_bound <= cap, (
        f"L = {labeling.lower_bound} exceeds alpha*min(beta,K) = {cap}"
    )


def check_upstream_union(instance: ProblemInstance) -> None:
    """Each node's known set equals the union of new files strictly upstream."""
    labeling = run_labeling(instance)
    tree = instance.tree
    for node_id in range(len(tree)):
        upstream = frozenset().union(
            *(labeling.new_files[i] for i in tree.subtree_ids(node_id) if i != node_id),
            frozenset(),
        )
        assert labeling.w[node_id] == upstream, (
            f"node {node_id}: known set {sorted(labeling.w[node_id])} != "
            f"upstream union {sorted(upstream)}"
        )


def check_new_file_cap(instance: ProblemInstance) -> None:
    """Per-node cap: |new| <= min(crossing capacity, files left over).

    The crossing capacity counts distinct signals:
    ahat_l*[min(bhat_r, K-bhat_l)]+ + ahat_r*[min(bhat_l, K-bhat_r)]+.
    """
    labeling = run_labeling(instance)
    tree = instance.tree
    N, K = instance.params.num_files, instance.params.num_users
    for node in tree.nodes:
        if node.kind != INTERNAL or len(tree.children[node.id]) != 2:
            continue
        left, right = tree.children[node.id]
        ahat_l, bhat_l = len(labeling.d[left]), len(labeling.z[left])
        ahat_r, bhat_r = len(labeling.d[right]), len(labeling.z[right])
        rho = ahat_l * max(0, min(bhat_r, K - bhat_l)) + ahat_r * max(0, min(bhat_l, K - bhat_r))
        used = (labeling.w[left] | labeling.new_files[left]
                | labeling.w[right] | labeling.new_files[right])
        cap = min(rho, N - len(used))
        assert len(labeling.new_files[node.id]) <= cap, (
            f"node {node.id}: |new| = {len(labeling.new_files[node.id])} exceeds cap {cap}"
        )


def check_directional_identity(instance: ProblemInstance) -> None:
    """new(u) == (delta_rl | delta_lr) - w(u) at every binary internal node."""
    labeling = run_labeling(instance)
    tree = instance.tree
    for node in tree.nodes:
        if node.kind != INTERNAL or len(tree.children[node.id]) != 2:
            continue
        delta_rl, delta_lr = directional_recovery(labeling, node.id)
        expected = (delta_rl | delta_lr) - labeling.w[node.id]
        assert labeling.new_files[node.id] == expected, (
            f"node {node.id}: new {sorted(labeling.new_files[node.id])} != "
            f"directional {sorted(expected)}"
        )


def check_permutation_invariance(instance: ProblemInstance, rng: random.Random) -> None:
    """A random user relabeling leaves every per-node new-file set unchanged."""
    users = instance.params.num_users
    pi = list(range(1, users + 1))
    rng.shuffle(pi)
    before = run_labeling(instance)
    after = run_labeling(permute_users(instance, pi))
    assert before.new_files == after.new_files, "per-node new-file sets changed"
    assert before.lower_bound == after.lower_bound, "L changed under user relabeling"


def check_augmentation_increments(instance: ProblemInstance) -> None:
    """Augmenting an unsaturated instance adds one file and one to L."""
    labeling = run_labeling(instance)
    cap = instance.alpha * min(instance.beta, instance.params.num_users)
    if labeling.lower_bound >= cap:
        try:
            augment_with_new_file(instance)
        except SaturationError:
            return
        raise AssertionError("saturated instance was augmented without error")
    grown = augment_with_new_file(instance)
    assert grown.params.num_files == instance.params.num_files + 1, "N did not grow by 1"
    grown_bound = run_labeling(grown).lower_bound
    assert grown_bound == labeling.lower_bound + 1, (
        f"L went {labeling.lower_bound} -> {grown_bound}, expected +1"
    )


def check_meeting_points(instance: ProblemInstance, rng: random.Random) -> None:
    """The meeting point is unique and lies on both root-paths."""
    tree = instance.tree
    leaves = tree.leaf_ids()
    if len(leaves) < 2:
        return
    a, b = rng.sample(leaves, 2)
    u = meeting_point(tree, a, b)
    path_a, path_b = tree.root_path(a), tree.root_path(b)
    assert u in path_a and u in path_b, "meeting point off a root-path"
    common = [x for x in path_b if x in set(path_a)]
    assert common[0] == u, "meeting point is not the first common node"
    # beyond the meeting point the two paths coincide
    assert path_a[path_a.index(u):] == path_b[path_b.index(u):]


def check_normalization(instance: ProblemInstance) -> None:
    """Normalizing never lowers L, is idempotent, and keeps the leaves."""
    normalized = normalize_in_degree(instance)
    assert normalize_in_degree(normalized) is normalized, "normalization not idempotent"
    assert normalized.alpha == instance.alpha and normalized.beta == instance.beta
    before = run_labeling(instance).lower_bound
    after = run_labeling(normalized).lower_bound
    assert after >= before, f"normalization lowered L: {before} -> {after}"


def check_topological_order(instance: ProblemInstance) -> None:
    tree = instance.tree
    order = topological_order(tree)
    assert len(order) == len(tree)
    position = {node_id: idx for idx, node_id in enumerate(order)}
    for node in tree.nodes:
        if node.parent is not None:
            assert position[node.parent] > position[node.id], "parent emitted before child"


def check_saturating_build(alpha: int, beta: int, users: int) -> None:
    """The balanced construction saturates; reuse keeps L and sheds files."""
    built = build_saturating_instance(alpha, beta, users)
    target = alpha * min(beta, users)
    before = run_labeling(built)
    assert before.lower_bound == target, (
        f"construction L = {before.lower_bound}, expected {target}"
    )
    reused = reuse_files(built)
    after = run_labeling(reused)
    assert after.lower_bound >= target, "file reuse lowered L"
    assert len(after.recovered_union) <= len(before.recovered_union), "file reuse added files"
    assert nsat_upper_construction(alpha, beta, users) == nsat_upper_recursive(alpha, beta, users)
    if beta <= users:
        assert nsat_upper_construction(alpha, beta, users) <= nsat_upper_analytic(alpha, beta, users)


def check_split_identity(alpha_l: int, alpha_r: int, beta_l: int, beta_r: int, users: int) -> None:
    """alpha*min(beta,K) splits exactly into the four quadrant terms."""
    alpha, beta, K = alpha_l + alpha_r, beta_l + beta_r, users
    lhs = alpha * min(beta, K)
    rhs = (
        alpha_l * min(beta_l, K)
        + alpha_r * min(beta_r, K)
        + alpha_l * max(0, min(beta_r, K - beta_l))
        + alpha_r * max(0, min(beta_l, K - beta_r))
    )
    assert lhs == rhs, f"split identity failed: {lhs} != {rhs}"


def check_hat_identity(beta_l: int, beta_r: int, users: int) -> None:
    """With bhat = min(b, K) on both sides, min(bhat_l, K-bhat_r) = [min(b_l, K-b_r)]+."""
    K = users
    bhat_l, bhat_r = min(beta_l, K), min(beta_r, K)
    assert min(bhat_l, K - bhat_r) == max(0, min(beta_l, K - beta_r))
    assert min(bhat_r, K - bhat_l) == max(0, min(beta_r, K - beta_l))


# ---------------------------------------------------------------------------
# Suite runners
# ---------------------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: list = field(default_factory=list)  # (message, instance json or None)

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_instance_checks(name: str, seed: int, trials: int,
                         check: Callable[[ProblemInstance, random.Random], None],
                         **generator_options) -> SuiteResult:
    rng = random.Random(seed)
    result = SuiteResult(name=name, trials=trials)
    for _ in range(trials):
        instance = random_instance(rng, **generator_options)
        try:
            check(instance, rng)
        except AssertionError as exc:
            result.failures.append((str(exc), instance_to_json(instance)))
    return result


def suite_psi(seed: int, trials: int) -> SuiteResult:
    """Labeling invariants on random instances: pair-table total, caps, unions."""

    def check(instance, rng):
        check_psi_matches_lower_bound(instance)
        check_bound_cap(instance)
        check_upstream_union(instance)
        check_new_file_cap(instance)
        check_directional_identity(instance)
        check_meeting_points(instance, rng)
        check_topological_order(instance)

    return _run_instance_checks("psi", seed, trials, check)


def suite_permute(seed: int, trials: int) -> SuiteResult:
    """User-relabeling invariance plus the one-file augmentation step."""

    def check(instance, rng):
        check_permutation_invariance(instance, rng)
        check_augmentation_increments(instance)

    return _run_instance_checks("permute", seed, trials, check, ensure_beta_hat=True)


def suite_nsat(seed: int, trials: int) -> SuiteResult:
    """Saturation invariants on random parameter triples."""
    rng = random.Random(seed)
    result = SuiteResult(name="nsat", trials=trials)
    for _ in range(trials):
        alpha = rng.randint(1, 8)
        beta = rng.randint(1, 8)
        users = rng.randint(1, 8)
        try:
            check_saturating_build(alpha, beta, users)
            check_split_identity(rng.randint(0, 9), rng.randint(0, 9),
                                 rng.randint(0, 9), rng.randint(0, 9), users)
            check_hat_identity(rng.randint(0, 12), rng.randint(0, 12), users)
        except AssertionError as exc:
            result.failures.append(
                (f"(alpha={alpha}, beta={beta}, users={users}): {exc}", None)
            )
    return result


def suite_gap(seed: int, trials: int) -> SuiteResult:
    """Gap threshold on a small parameter grid (independent of trials)."""
    del seed, trials  # grid-based; kept for a uniform runner signature
    grid = [
        SystemParams(n, k)
        for n in range(2, 9)
        for k in range(2, 9)
    ]
    report = verify_gap_le_4(grid, m_grid=None, threshold=4)
    result = SuiteResult(name="gap", trials=report.points_checked)
    if not report.passed:
        params, m = report.argmax
        result.failures.append(
            (f"gap {report.max_gap} > 4 at N={params.num_files}, K={params.num_users}, M={m}",
             None)
        )
    if report.max_gap_upper_half > 2:
        params, m = report.argmax_upper_half
        result.failures.append(
            (f"upper-half gap {report.max_gap_upper_half} > 2 at N={params.num_files}, "
             f"K={params.num_users}, M={m}", None)
        )
    return result


SUITES = {
    "psi": suite_psi,
    "permute": suite_permute,
    "gap": suite_gap,
    "nsat": suite_nsat,
}


def run_suites(names, seed: int, trials: int) -> list[SuiteResult]:
    """Run the named suites ("all" expands to every suite) with one seed."""
    if names in ("all", None):
        selected = list(SUITES)
    elif isinstance(names, str):
        selected = [names]
    else:
        selected = list(names)
    results = []
    for name in selected:
        if name not in SUITES:
            raise InputError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
        results.append(SUITES[name](seed, trials))
    return results
