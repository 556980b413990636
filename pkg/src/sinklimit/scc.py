"""Strongly connected components (iterative Tarjan) and sink detection.

Works on an explicit node list plus an adjacency callback so the same code
serves dense profile graphs (nodes 0..n-1) and partially collapsed chains
whose live node ids are sparse.
"""

from typing import Callable, Iterable, Sequence


def strongly_connected_components(
    nodes: Sequence[int], successors: Callable[[int], Iterable[int]]
) -> list[list[int]]:
    """Tarjan's algorithm, iterative so deep chains cannot overflow the stack.

    Returns the list of components; each component is sorted ascending.
    """
    index: dict[int, int] = {}
    lowlink: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    components: list[list[int]] = []
    counter = 0

    for root in nodes:
        if root in index:
            continue
        # Each work item is (node, iterator over its successors).
        work = [(root, iter(successors(root)))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    if index[w] < lowlink[v]:
                        lowlink[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if lowlink[v] < lowlink[parent]:
                    lowlink[parent] = lowlink[v]
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comp.sort()
                components.append(comp)
    return components


def sink_components(
    nodes: Sequence[int], successors: Callable[[int], Iterable[int]]
) -> list[list[int]]:
    """Components of the condensation with no outgoing edge, sorted by
    smallest member."""
    comps = strongly_connected_components(nodes, successors)
    comp_of = {v: i for i, comp in enumerate(comps) for v in comp}
    is_sink = [True] * len(comps)
    for comp in comps:
        for v in comp:
            for w in successors(v):
                if comp_of[w] != comp_of[v]:
                    is_sink[comp_of[v]] = False
                    break
            if not is_sink[comp_of[v]]:
                break
    sinks = [comp for comp, keep in zip(comps, is_sink) if keep]
    sinks.sort(key=lambda c: c[0])
    return sinks
