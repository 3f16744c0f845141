"""Fold construction for the three generalization protocols.

Within-distribution folds are a seeded random partition; out-of-distribution
folds keep all instances of a lemma inside one fold; the novel subset pairs an
externally supplied positive-id list with negatives sampled to match the
source corpus class ratio. All constructions are pure functions of
(instances, k, seed).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import TargetInstance
from .errors import MissingInstanceError, SplitError

FOLD_MODES = ("WID", "OOD")


@dataclass(frozen=True)
class FoldPlan:
    """Total partition of instance ids into k folds."""

    dataset_id: str
    mode: str
    k: int
    assignment: dict[str, int]

    def __post_init__(self):
        if self.mode not in FOLD_MODES:
            raise SplitError(f"unknown fold mode {self.mode!r}")
        if self.k < 2:
            raise SplitError(f"k must be >= 2, got {self.k}")
        bad = {i: f for i, f in self.assignment.items() if not (0 <= f < self.k)}
        if bad:
            raise SplitError(f"fold indices outside [0, {self.k}): {sorted(bad)[:5]}")

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.assignment.values():
            sizes[f] += 1
        return sizes

    def members(self, fold: int) -> set[str]:
        return {i for i, f in self.assignment.items() if f == fold}

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for instance_id in sorted(self.assignment):
                fh.write(f"{instance_id}\t{self.assignment[instance_id]}\n")

    @classmethod
    def load(cls, path: str | Path, dataset_id: str, mode: str) -> "FoldPlan":
        assignment: dict[str, int] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise SplitError(f"{path}:{line_no}: expected 'instance_id<TAB>fold'")
                if parts[0] in assignment:
                    raise SplitError(f"{path}:{line_no}: duplicate instance_id {parts[0]!r}")
                assignment[parts[0]] = int(parts[1])
        if not assignment:
            raise SplitError(f"empty fold plan: {path}")
        return cls(dataset_id=dataset_id, mode=mode, k=max(assignment.values()) + 1,
                   assignment=assignment)


@dataclass(frozen=True)
class NovelSubset:
    """Rare-metaphor test set: given positives plus ratio-matched negatives."""

    positive_ids: tuple[str, ...]
    negative_ids: tuple[str, ...]
    target_pos_ratio: float

    def __post_init__(self):
        overlap = set(self.positive_ids) & set(self.negative_ids)
        if overlap:
            raise SplitError(f"positives and negatives overlap: {sorted(overlap)[:5]}")
        achieved = self.achieved_pos_ratio()
        if abs(achieved - self.target_pos_ratio) > 0.01:
            raise SplitError(
                f"achieved positive ratio {achieved:.4f} deviates more than 1 point "
                f"from target {self.target_pos_ratio:.4f}"
            )

    def achieved_pos_ratio(self) -> float:
        total = len(self.positive_ids) + len(self.negative_ids)
        return len(self.positive_ids) / total if total else 0.0

    @property
    def ids(self) -> tuple[str, ...]:
        return self.positive_ids + self.negative_ids

    def save(self, path: str | Path) -> None:
        # line-oriented id<TAB>label; positives first
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i in self.positive_ids:
                fh.write(f"{i}\t1\n")
            for i in self.negative_ids:
                fh.write(f"{i}\t0\n")


def _check_instances(instances: list[TargetInstance]) -> None:
    if not instances:
        raise SplitError("cannot split an empty instance list")
    ids = [i.instance_id for i in instances]
    if len(set(ids)) != len(ids):
        raise SplitError("duplicate instance ids in split input")


def build_wid_folds(instances: list[TargetInstance], k: int, seed: int) -> FoldPlan:
    """Random partition into k folds with sizes differing by at most one."""
    _check_instances(instances)
    if k < 2:
        raise SplitError(f"k must be >= 2, got {k}")
    if k > len(instances):
        raise SplitError(f"infeasible: k={k} folds for {len(instances)} instances")
    ids = sorted(i.instance_id for i in instances)
    random.Random(seed).shuffle(ids)
    assignment = {instance_id: pos % k for pos, instance_id in enumerate(ids)}
    return FoldPlan(dataset_id=instances[0].dataset_id, mode="WID", k=k,
                    assignment=assignment)


def build_ood_folds(instances: list[TargetInstance], k: int, seed: int) -> FoldPlan:
    """Lemma-disjoint partition: all instances of a lemma share one fold.

    Lemmas are assigned greedily, largest instance count first, to the
    currently smallest fold, which keeps fold sizes balanced even for corpora
    with few, highly repeated lemmas.
    """
    _check_instances(instances)
    if k < 2:
        raise SplitError(f"k must be >= 2, got {k}")
    by_lemma: dict[str, list[str]] = {}
    for inst in instances:
        by_lemma.setdefault(inst.lemma, []).append(inst.instance_id)
    if len(by_lemma) < k:
        raise SplitError(
            f"infeasible: {len(by_lemma)} distinct lemmas cannot fill {k} folds"
        )
    lemmas = sorted(by_lemma)
    random.Random(seed).shuffle(lemmas)  # tie order among equal-sized lemmas
    lemmas.sort(key=lambda lem: -len(by_lemma[lem]))  # stable: keeps shuffled tie order
    sizes = [0] * k
    assignment: dict[str, int] = {}
    for lemma in lemmas:
        fold = min(range(k), key=lambda f: (sizes[f], f))
        for instance_id in by_lemma[lemma]:
            assignment[instance_id] = fold
        sizes[fold] += len(by_lemma[lemma])
    return FoldPlan(dataset_id=instances[0].dataset_id, mode="OOD", k=k,
                    assignment=assignment)


def build_novel_subset(
    lcc_instances: list[TargetInstance],
    novel_positive_ids: list[str],
    seed: int,
    target_pos_ratio: float | None = None,
) -> NovelSubset:
    """Pair the supplied maximal-metaphoricity positives with sampled negatives.

    Negatives are drawn without replacement so the subset's positive ratio
    matches target_pos_ratio, which defaults to the full corpus ratio.
    """
    _check_instances(lcc_instances)
    if not novel_positive_ids:
        raise SplitError("novel positive id list is empty")
    by_id = {i.instance_id: i for i in lcc_instances}
    positives = []
    for instance_id in novel_positive_ids:
        inst = by_id.get(instance_id)
        if inst is None:
            raise MissingInstanceError(f"novel id {instance_id!r} not in corpus")
        if inst.label != 1 or inst.metaphoricity != 3.0:
            raise MissingInstanceError(
                f"novel id {instance_id!r} is not a metaphoricity-3 positive"
            )
        positives.append(instance_id)
    if len(set(positives)) != len(positives):
        raise SplitError("novel positive id list contains duplicates")
    if target_pos_ratio is None:
        ratio = sum(i.label for i in lcc_instances) / len(lcc_instances)
    else:
        ratio = target_pos_ratio
    if not (0.0 < ratio < 1.0):
        raise SplitError("degenerate positive ratio; cannot match it")
    n_neg = round(len(positives) * (1.0 - ratio) / ratio)
    pool = sorted(i.instance_id for i in lcc_instances
                  if i.label == 0 and i.instance_id not in set(positives))
    if n_neg > len(pool):
        raise SplitError(f"infeasible: need {n_neg} negatives, only {len(pool)} available")
    negatives = random.Random(seed).sample(pool, n_neg)
    return NovelSubset(
        positive_ids=tuple(positives),
        negative_ids=tuple(negatives),
        target_pos_ratio=ratio,
    )


def novel_eval_guard(novel: NovelSubset, wid_plan: FoldPlan) -> dict[str, int]:
    """Map each novel instance to the one WID fold whose model may score it.

    A model trained with fold f held out is the only one that never saw the
    instances of fold f; novel examples are therefore scored by the run whose
    test fold contains them.
    """
    guard: dict[str, int] = {}
    for instance_id in novel.ids:
        if instance_id not in wid_plan.assignment:
            raise MissingInstanceError(
                f"novel id {instance_id!r} missing from the fold plan"
            )
        guard[instance_id] = wid_plan.assignment[instance_id]
    return guard


def load_novel_ids(path: str | Path) -> list[str]:
    """Novel positive-id input file: one instance_id per line."""
    ids = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                ids.append(line)
    if not ids:
        raise SplitError(f"novel id file is empty: {path}")
    return ids


def split_train_dev(
    instances: list[TargetInstance], seed: int, dev_fraction: float = 0.1
) -> tuple[list[TargetInstance], list[TargetInstance]]:
    """Hold out a seeded development slice from a training split."""
    if not 0.0 < dev_fraction < 1.0:
        raise SplitError(f"dev_fraction must be in (0, 1), got {dev_fraction}")
    _check_instances(instances)
    order = sorted(instances, key=lambda i: i.instance_id)
    random.Random(seed).shuffle(order)
    n_dev = max(1, round(len(order) * dev_fraction))
    if n_dev >= len(order):
        raise SplitError("dev split would consume the whole training set")
    return order[n_dev:], order[:n_dev]


class WithinDistributionKFold:
    """Seeded random k-fold splitter over TargetInstance lists.

    Yields (train_indices, test_indices) pairs like scikit-learn splitters so
    the classifier composes with standard cross-validation loops.
    """

    def __init__(self, k: int = 10, seed: int = 0):
        self.k = k
        self.seed = seed

    def get_n_splits(self, X=None, y=None, groups=None) -> int:
        return self.k

    def plan(self, instances: list[TargetInstance]) -> FoldPlan:
        return build_wid_folds(instances, self.k, self.seed)

    def split(self, instances: list[TargetInstance], y=None, groups=None):
        plan = self.plan(instances)
        yield from _plan_to_indices(plan, instances)


class LemmaDisjointKFold(WithinDistributionKFold):
    """k-fold splitter whose folds never share a target lemma."""

    def plan(self, instances: list[TargetInstance]) -> FoldPlan:
        return build_ood_folds(instances, self.k, self.seed)


def _plan_to_indices(plan: FoldPlan, instances: list[TargetInstance]):
    for fold in range(plan.k):
        test = [i for i, inst in enumerate(instances)
                if plan.assignment[inst.instance_id] == fold]
        train = [i for i, inst in enumerate(instances)
                 if plan.assignment[inst.instance_id] != fold]
        yield train, test
