"""Shared summation plan: one balanced addition schedule per neuron.

Both the interval analysis and the SMT encoder fold a neuron's product terms
with the same plan, so the interval computed for a tree node always describes
exactly the bit-vector variable the encoder creates for that node.

A plan lists the nonzero product leaves in source order and a sequence of
binary merges over refs. Ref numbering: 0..n_leaves-1 are leaves, n_leaves+m
is the result of merge m. The bias is not part of the tree; consumers append
it as one final addition when it is nonzero (or use it alone when the row has
no nonzero weights).
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import FixedPointLayer


@dataclass(frozen=True)
class ProductLeaf:
    """One summand w * x_src, optionally pre-shifted by 2**shift."""

    src: int
    weight: int
    shift: int = 0
    direction: str = "left"


@dataclass(frozen=True)
class SummationPlan:
    leaves: tuple[ProductLeaf, ...]
    merges: tuple[tuple[int, int], ...]
    bias: int

    @property
    def root(self) -> int | None:
        """Ref of the full product sum, None when there are no leaves."""
        if not self.leaves:
            return None
        return len(self.leaves) + len(self.merges) - 1 if self.merges else 0


def _balance(refs: list[int], n_leaves: int, merges: list[tuple[int, int]]) -> int:
    if len(refs) == 1:
        return refs[0]
    mid = (len(refs) + 1) // 2
    left = _balance(refs[:mid], n_leaves, merges)
    right = _balance(refs[mid:], n_leaves, merges)
    merges.append((left, right))
    return n_leaves + len(merges) - 1


def balanced_merges(n_leaves: int) -> tuple[tuple[int, int], ...]:
    """Balanced binary merge schedule over n_leaves summands."""
    if n_leaves <= 1:
        return ()
    merges: list[tuple[int, int]] = []
    _balance(list(range(n_leaves)), n_leaves, merges)
    return tuple(merges)


def plan_for_row(layer: FixedPointLayer, row: int) -> SummationPlan:
    """Summation plan for one output neuron; zero weights carry no leaf."""
    leaves = []
    es = layer.edge_shift
    for j, w in enumerate(layer.weights[row]):
        if w == 0:
            continue
        shift = es[row][j] if es is not None else 0
        leaves.append(ProductLeaf(src=j, weight=w, shift=shift, direction=layer.edge_shift_dir))
    return SummationPlan(
        leaves=tuple(leaves),
        merges=balanced_merges(len(leaves)),
        bias=layer.bias[row],
    )


def fold_plan(plan: SummationPlan, leaf_values: list, add):
    """Fold the merge schedule, returning (per-merge values, root value).

    `leaf_values` supplies one value per leaf; `add` combines two values.
    Returns ([], None) when the plan has no leaves.
    """
    if not plan.leaves:
        return [], None
    vals = list(leaf_values)
    for a, b in plan.merges:
        vals.append(add(vals[a], vals[b]))
    return vals[len(plan.leaves):], vals[-1]
