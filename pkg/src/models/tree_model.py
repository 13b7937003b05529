"""
Paired tree-shaped datasets.

This module provides the data model shared by every other part of the toolkit:
- Topology of a rooted tree (each node has at most one parent)
- PairedTreeData: aligned X/Y observation series per node plus a root anchor
- IncrementsByGeneration: per-generation paired increments
- Validation, SPGM -> DSPGM expansion and increment extraction

All objects are immutable and every operation is a pure function.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..exceptions import NotDSPGMError, TreeValidationError

logger = logging.getLogger(__name__)

CHAIN_SEPARATOR = "#"


@dataclass(frozen=True)
class NodeRecord:
    node_id: str
    parent_id: Optional[str] = None


@dataclass(frozen=True)
class Violation:
    """One broken invariant, naming the offending node and rule."""

    node_id: Optional[str]
    rule: str
    detail: str = ""

    def __str__(self):
        where = f"node {self.node_id!r}" if self.node_id is not None else "dataset"
        text = f"{self.rule} ({where})"
        return f"{text}: {self.detail}" if self.detail else text


@dataclass(frozen=True)
class Topology:
    """Rooted tree given as parent links, in input order.

    Generations are always recomputed from the parent links (root = 1).
    """

    records: Tuple[NodeRecord, ...]

    @classmethod
    def from_parents(cls, pairs):
        """Build a topology from ``(node_id, parent_id)`` pairs."""
        return cls(tuple(NodeRecord(str(n), None if p is None else str(p)) for n, p in pairs))

    @property
    def node_ids(self):
        return [r.node_id for r in self.records]

    @cached_property
    def parent_of(self) -> Dict[str, Optional[str]]:
        return {r.node_id: r.parent_id for r in self.records}

    @cached_property
    def children_of(self) -> Dict[str, List[str]]:
        children = {r.node_id: [] for r in self.records}
        for r in self.records:
            if r.parent_id is not None and r.parent_id in children:
                children[r.parent_id].append(r.node_id)
        return children

    @property
    def root(self):
        roots = [r.node_id for r in self.records if r.parent_id is None]
        if len(roots) != 1:
            raise TreeValidationError([Violation(None, "root count", f"expected 1 root, found {len(roots)}")])
        return roots[0]

    @cached_property
    def generations(self) -> Dict[str, int]:
        """Generation of every node; raises TreeValidationError on a broken topology."""
        problems = _topology_violations(self)
        if problems:
            raise TreeValidationError(problems)

        generation = {}
        stack = [(self.root, 1)]
        while stack:
            node, depth = stack.pop()
            generation[node] = depth
            stack.extend((child, depth + 1) for child in self.children_of[node])
        return generation

    @property
    def depth(self):
        return max(self.generations.values())

    def leaves(self):
        return [n for n in self.node_ids if not self.children_of[n]]

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class PairedTreeData:
    """A pair of same-topology trees: X/Y series per node and the anchor (X0, Y0)."""

    topology: Topology
    x_series: Mapping[str, Tuple[float, ...]]
    y_series: Mapping[str, Tuple[float, ...]]
    anchor: Tuple[float, float] = (0.0, 0.0)

    @classmethod
    def from_rows(cls, rows, anchor=(0.0, 0.0)):
        """Build a dataset from ``(node_id, parent_id, xs, ys)`` rows.

        Args:
            rows (iterable): One row per node; ``xs``/``ys`` are sequences of reals
            anchor (tuple): Fixed start point (X0, Y0)

        Returns:
            PairedTreeData: Dataset (not validated)
        """
        rows = list(rows)
        topology = Topology.from_parents((r[0], r[1]) for r in rows)
        x_series = {str(r[0]): tuple(float(v) for v in r[2]) for r in rows}
        y_series = {str(r[0]): tuple(float(v) for v in r[3]) for r in rows}
        return cls(topology, x_series, y_series, (float(anchor[0]), float(anchor[1])))

    def series_length(self, node_id):
        return len(self.x_series[node_id])

    @property
    def is_dspgm(self):
        return all(len(s) == 1 for s in self.x_series.values())

    @property
    def observation_count(self):
        return sum(len(s) for s in self.x_series.values())


@dataclass(frozen=True)
class IncrementsByGeneration:
    """Paired increments grouped by generation.

    ``generations`` maps generation index i >= 1 to an (n_i, 2) array of
    (dx, dy) rows, kept in input node order.
    """

    generations: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        frozen = {}
        for gen in sorted(self.generations):
            arr = np.array(self.generations[gen], dtype=float).reshape(-1, 2)
            if gen < 1:
                raise ValueError(f"generation index must be >= 1, got {gen}")
            arr.setflags(write=False)
            frozen[int(gen)] = arr
        object.__setattr__(self, "generations", frozen)

    @property
    def max_generation(self):
        return max(self.generations) if self.generations else 0

    def counts(self):
        return {gen: len(arr) for gen, arr in self.generations.items()}

    def pooled(self):
        """All generations stacked into one (n, 2) array, generation order."""
        if not self.generations:
            return np.empty((0, 2))
        return np.vstack([self.generations[g] for g in sorted(self.generations)])

    def __getitem__(self, gen):
        return self.generations[gen]

    def __iter__(self):
        return iter(sorted(self.generations))


def _topology_violations(topology: Topology) -> List[Violation]:
    violations = []
    seen = set()
    for r in topology.records:
        if r.node_id in seen:
            violations.append(Violation(r.node_id, "duplicate node id"))
        seen.add(r.node_id)

    roots = [r.node_id for r in topology.records if r.parent_id is None]
    if not roots:
        violations.append(Violation(None, "no root", "every node has a parent"))
    for extra in roots[1:]:
        violations.append(Violation(extra, "multiple roots", f"first root is {roots[0]!r}"))

    parent_of = topology.parent_of
    for r in topology.records:
        if r.parent_id is not None and r.parent_id not in parent_of:
            violations.append(Violation(r.node_id, "unknown parent", f"parent {r.parent_id!r} not in node set"))
        elif r.parent_id == r.node_id:
            violations.append(Violation(r.node_id, "cycle", "node is its own parent"))

    # Anything not reachable from the single root sits on a cycle.
    if len(roots) == 1 and not violations:
        reachable = set()
        stack = [roots[0]]
        while stack:
            node = stack.pop()
            reachable.add(node)
            stack.extend(topology.children_of[node])
        for r in topology.records:
            if r.node_id not in reachable:
                violations.append(Violation(r.node_id, "cycle", "not reachable from the root"))
    return violations


def validate(data: PairedTreeData) -> List[Violation]:
    """
    Check every structural invariant of a paired tree dataset.

    Args:
        data (PairedTreeData): Dataset to check

    Returns:
        list: Violations; empty iff the dataset is well formed
    """
    violations = _topology_violations(data.topology)

    node_ids = set(data.topology.node_ids)
    for node_id in data.topology.node_ids:
        if node_id not in data.x_series or node_id not in data.y_series:
            violations.append(Violation(node_id, "missing series"))
            continue
        xs, ys = data.x_series[node_id], data.y_series[node_id]
        if len(xs) != len(ys):
            violations.append(Violation(node_id, "series length mismatch", f"x has {len(xs)}, y has {len(ys)}"))
        elif len(xs) == 0:
            violations.append(Violation(node_id, "empty series"))
        if not all(math.isfinite(v) for v in (*xs, *ys)):
            violations.append(Violation(node_id, "non-finite value"))

    for node_id in sorted(set(data.x_series) | set(data.y_series)):
        if node_id not in node_ids:
            violations.append(Violation(node_id, "series without node"))

    if not all(math.isfinite(v) for v in data.anchor):
        violations.append(Violation(None, "non-finite anchor"))
    return violations


def ensure_valid(data: PairedTreeData) -> PairedTreeData:
    violations = validate(data)
    if violations:
        raise TreeValidationError(violations)
    return data


def _chain_separator(node_ids):
    """Shortest run of CHAIN_SEPARATOR that no input id contains, so chain ids stay unique."""
    sep = CHAIN_SEPARATOR
    while any(sep in n for n in node_ids):
        sep += CHAIN_SEPARATOR
    return sep


def _chain_ids(node_id, length, sep=CHAIN_SEPARATOR):
    return [node_id] + [f"{node_id}{sep}{k}" for k in range(2, length + 1)]


def to_dspgm(data: PairedTreeData) -> PairedTreeData:
    """
    Expand an SPGM dataset into its DSPGM form (one observation per node).

    A node with a series of length T becomes a chain of T nodes, the k-th
    holding the k-th observation; the original node's children hang off the
    last chain node. The anchor and the total observation count are unchanged.

    Args:
        data (PairedTreeData): Valid dataset

    Returns:
        PairedTreeData: Dataset with T = 1 for every node
    """
    ensure_valid(data)
    if data.is_dspgm:
        return data

    sep = _chain_separator(data.topology.node_ids)
    last_id = {n: _chain_ids(n, data.series_length(n), sep)[-1] for n in data.topology.node_ids}
    rows = []
    for record in data.topology.records:
        chain = _chain_ids(record.node_id, data.series_length(record.node_id), sep)
        parent = None if record.parent_id is None else last_id[record.parent_id]
        for k, chain_id in enumerate(chain):
            rows.append((chain_id, parent, (data.x_series[record.node_id][k],), (data.y_series[record.node_id][k],)))
            parent = chain_id

    expanded = PairedTreeData.from_rows(rows, data.anchor)
    ensure_valid(expanded)
    logger.debug("Expanded %d nodes into %d DSPGM nodes", len(data.topology), len(expanded.topology))
    return expanded


def _require_dspgm(data):
    ensure_valid(data)
    if not data.is_dspgm:
        longest = max(data.series_length(n) for n in data.topology.node_ids)
        raise NotDSPGMError(f"expected one observation per node, found series of length {longest}; call to_dspgm first")


def _group_by_generation(data, pairs):
    generation = data.topology.generations
    grouped: Dict[int, list] = {}
    for node_id, pair in zip(data.topology.node_ids, pairs):
        grouped.setdefault(generation[node_id], []).append(pair)
    return IncrementsByGeneration({g: np.array(v) for g, v in grouped.items()})


def extract_increments(data: PairedTreeData) -> IncrementsByGeneration:
    """
    Turn a DSPGM dataset into per-generation increments.

    Generation-1 increments are taken against the anchor, deeper ones against
    the parent node, so cumulative sums along any root-to-node path reproduce
    the stored values.

    Args:
        data (PairedTreeData): Valid dataset in DSPGM form

    Returns:
        IncrementsByGeneration: Increments grouped by generation
    """
    _require_dspgm(data)
    parent_of = data.topology.parent_of
    x0, y0 = data.anchor

    pairs = []
    for node_id in data.topology.node_ids:
        parent = parent_of[node_id]
        base_x, base_y = (x0, y0) if parent is None else (data.x_series[parent][0], data.y_series[parent][0])
        pairs.append((data.x_series[node_id][0] - base_x, data.y_series[node_id][0] - base_y))
    return _group_by_generation(data, pairs)


def raw_increments(data: PairedTreeData) -> IncrementsByGeneration:
    """Group DSPGM node values by generation without differencing.

    Used when raw observations are already increments, e.g. per-person
    counts in a genealogy tree.
    """
    _require_dspgm(data)
    pairs = [(data.x_series[n][0], data.y_series[n][0]) for n in data.topology.node_ids]
    return _group_by_generation(data, pairs)


def path_values(topology: Topology, increments: Mapping[str, Tuple[float, float]], anchor=(0.0, 0.0)):
    """Cumulative path sums: node value = anchor + sum of increments from the root down to the node.

    Args:
        topology (Topology): Valid topology
        increments (dict): Increment (dx, dy) per node id
        anchor (tuple): Start point (X0, Y0)

    Returns:
        dict: Node id -> (x, y)
    """
    values = {}
    root = topology.root
    stack = [(root, (anchor[0] + increments[root][0], anchor[1] + increments[root][1]))]
    while stack:
        node, value = stack.pop()
        values[node] = value
        for child in topology.children_of[node]:
            dx, dy = increments[child]
            stack.append((child, (value[0] + dx, value[1] + dy)))
    return values


def pooled_values(data: PairedTreeData) -> np.ndarray:
    """Every observation of the dataset as an (n, 2) array, node input order."""
    rows = []
    for node_id in data.topology.node_ids:
        rows.extend(zip(data.x_series[node_id], data.y_series[node_id]))
    return np.array(rows, dtype=float).reshape(-1, 2)
