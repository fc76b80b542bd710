"""Ancestral-relation classification on MPDAGs.

Whether one vertex is a descendant of another can be settled for the whole
equivalence class from the *critical set*: the neighbors of the source that
lie on a chordless possibly-causal path to the target. An empty critical set
rules descendance out in every member DAG; a definite arrow into it, or an
incomplete induced subgraph over it, forces descendance in every member; the
remaining case is genuinely undetermined. These relations drive the feature
selection of the strictly fair predictor.
"""
from __future__ import annotations

import enum
from collections import deque

import numpy as np

from .graph_core import GraphError, Pdag


class AncestralRelation(enum.Enum):
    DEFINITE_DESCENDANT = "definite_descendant"
    DEFINITE_NON_DESCENDANT = "definite_non_descendant"
    POSSIBLE_DESCENDANT = "possible_descendant"


def critical_set(g: Pdag, s: str, t: str) -> tuple[str, ...]:
    """Neighbors of ``s`` on at least one chordless possibly-causal path to ``t``.

    Breadth-first search over (first-edge neighbor, previous, current)
    triples. A step from ``cur`` to ``beta`` follows a directed or undirected
    edge, must keep the walk locally chordless (``beta`` nonadjacent to the
    previous vertex unless the step is directed) and must stay outside the
    neighborhood of ``s``. Once a first-edge neighbor reaches ``t`` its
    remaining triples are discarded.
    """
    si, ti = g.index(s), g.index(t)
    if si == ti:
        raise GraphError("source and target must differ")
    dmat, umat, adj = g.directed_mask, g.undirected_mask, g.adjacency_mask
    forward = dmat | umat
    found: set[int] = set()
    start = [a for a in np.flatnonzero(forward[si])]
    queue: deque[tuple[int, int, int]] = deque((a, si, a) for a in start)
    seen: set[tuple[int, int, int]] = set(queue)
    while queue:
        alpha, phi, tau = queue.popleft()
        if alpha in found:
            continue
        if tau == ti:
            found.add(alpha)
            queue = deque(item for item in queue if item[0] != alpha)
            continue
        for beta in np.flatnonzero(forward[tau]):
            if beta == si or adj[beta, si]:
                continue
            if not dmat[tau, beta] and adj[phi, beta]:
                continue
            triple = (alpha, int(tau), int(beta))
            if triple not in seen:
                seen.add(triple)
                queue.append(triple)
    return g.sort_vertices(g.names[a] for a in found)


def ancestral_relation(g: Pdag, s: str, t: str) -> AncestralRelation:
    """Classify ``t`` relative to ``s`` across every DAG the graph represents."""
    crit = critical_set(g, s, t)
    if not crit:
        return AncestralRelation.DEFINITE_NON_DESCENDANT
    if any(g.has_directed(s, c) for c in crit):
        return AncestralRelation.DEFINITE_DESCENDANT
    if _induces_incomplete(g, crit):
        return AncestralRelation.DEFINITE_DESCENDANT
    return AncestralRelation.POSSIBLE_DESCENDANT


def _induces_incomplete(g: Pdag, nodes: tuple[str, ...]) -> bool:
    idx = [g.index(v) for v in nodes]
    sub = g.adjacency_mask[np.ix_(idx, idx)]
    return not sub[~np.eye(len(idx), dtype=bool)].all()


def definite_nondescendants(g: Pdag, s: str) -> tuple[str, ...]:
    """All vertices that are non-descendants of ``s`` in every member DAG."""
    return tuple(
        t
        for t in g.names
        if t != s
        and ancestral_relation(g, s, t) is AncestralRelation.DEFINITE_NON_DESCENDANT
    )


def all_relations_definite(g: Pdag, s: str) -> bool:
    """True iff every ancestral relation of ``s`` is settled: no undirected edge at ``s``."""
    return not g.siblings_of(s)
