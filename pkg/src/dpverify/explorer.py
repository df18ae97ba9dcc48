"""Exhaustive reachability analysis over distributed-process models.

Breadth-first exploration with content-addressed deduplication, so deadlock
witnesses are shortest paths and runs are reproducible.  Cycle detection is
done twice on purpose, by Kahn's topological count and by an iterative DFS
with back-edge detection, and the two verdicts are cross-checked.  Every
disjoint-union firing is audited during exploration; invariants are
evaluated over the finished state set.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .semantics import (
    DistributedProcess, DpState, Transition, initial_states, is_terminal,
    state_key, step_action,
)
from .terms import (
    Binding, ModelError, NatV, TupleV, Value, prod_value,
)


class InitialConditionUnsatisfiable(ModelError):
    pass


class ExplorationWarning(UserWarning):
    """Raised as a warning when a verdict rests on a truncated exploration."""


@dataclass
class Bounds:
    max_states: int = 10 ** 6
    max_queue: int = 64
    max_depth: Optional[int] = None

    def __post_init__(self):
        if self.max_states <= 0 or self.max_queue <= 0:
            raise ModelError("bounds must be positive")
        if self.max_depth is not None and self.max_depth < 0:
            raise ModelError("bounds must be positive")


@dataclass(frozen=True)
class OverlapEvent:
    """A disjoint-union application whose arguments overlapped."""

    state: int
    process: int
    edge: int
    detail: str


@dataclass(frozen=True)
class CycleWitness:
    """A lasso: edge indices leading from the initial state to the cycle,
    then the edge indices of the cycle itself."""

    prefix: tuple[int, ...]
    cycle: tuple[int, ...]


@dataclass
class ExplorationResult:
    dp: DistributedProcess
    inputs: dict[str, Value]
    states: list[DpState]
    edges: list[tuple[int, int, int, int]]  # (source, process, edge, target)
    initial: int
    terminals: list[int]
    deadlocks: list[int]
    has_cycle: bool
    cycle_witness: Optional[CycleWitness]
    overlap_events: list[OverlapEvent]
    truncated: bool
    bound_fired: Optional[str]
    parent_edge: list[Optional[int]]
    depth: list[int]
    expanded: list[bool]
    invariant_violations: list["InvariantViolation"] = field(default_factory=list)

    def state_count(self) -> int:
        return len(self.states)

    def path_to(self, state: int) -> list[int]:
        """Edge indices of the BFS tree path from the initial state."""
        path = []
        while True:
            e = self.parent_edge[state]
            if e is None:
                break
            path.append(e)
            state = self.edges[e][0]
        path.reverse()
        return path


def _successors_with_audit(state: DpState, dp: DistributedProcess):
    """Enabled transitions plus the overlap events their evaluation fired.

    Events from disabled edges are discarded: an aborted action never
    happened, so neither did its disjoint-union firings."""
    transitions: list[Transition] = []
    events: list[tuple[int, int, str]] = []
    for i, proc in enumerate(dp.processes):
        node = state.locs[i]
        for edge_index, edge in enumerate(proc.edges):
            if edge.src != node:
                continue
            local: list[str] = []

            def on_overlap(term, left, right, overlap, _local=local):
                _local.append("overlap %s between %s and %s"
                              % (_fmt_value_set(overlap), _fmt_value_set(left),
                                 _fmt_value_set(right)))

            target = step_action(state, i, edge_index, dp, on_overlap)
            if target is not None:
                transitions.append(Transition(state, i, edge_index, target))
                events.extend((i, edge_index, d) for d in local)
    return transitions, events


def _fmt_value_set(s) -> str:
    return "{%s}" % ", ".join(
        str(v.n) if isinstance(v, NatV) else repr(v) for v in s.items)


def explore(dp: DistributedProcess, inputs: Union[Binding, dict],
            bounds: Optional[Bounds] = None, workers: int = 1
            ) -> ExplorationResult:
    """Build the reachable state graph breadth first.

    Stops early when a bound fires, reporting truncation instead of raising.
    With workers > 1 the successor sets of one frontier level are computed
    concurrently and merged in frontier order, so results are identical for
    any worker count."""
    bounds = bounds or Bounds()
    if isinstance(inputs, Binding):
        inputs = {n: t.value for n, t in inputs.items()}
    init = initial_states(dp, inputs)
    if not init:
        raise InitialConditionUnsatisfiable(
            "no initial state satisfies the initial conditions")

    states: list[DpState] = [init[0]]
    index: dict[tuple, int] = {state_key(init[0]): 0}
    depth = [0]
    parent_edge: list[Optional[int]] = [None]
    expanded = [False]
    edges: list[tuple[int, int, int, int]] = []
    overlap_events: list[OverlapEvent] = []
    truncated = False
    bound_fired: Optional[str] = None

    frontier = [0]
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while frontier and not truncated:
            if bounds.max_depth is not None and depth[frontier[0]] >= bounds.max_depth:
                truncated, bound_fired = True, "max-depth"
                break
            if pool is not None:
                succ_lists = list(pool.map(
                    lambda i: _successors_with_audit(states[i], dp), frontier))
            else:
                succ_lists = [_successors_with_audit(states[i], dp)
                              for i in frontier]
            next_frontier: list[int] = []
            for src, (transitions, events) in zip(frontier, succ_lists):
                for proc, edge_index, detail in events:
                    overlap_events.append(
                        OverlapEvent(src, proc, edge_index, detail))
                complete = True
                for tr in transitions:
                    if any(len(q) > bounds.max_queue
                           for _, q in tr.target.channels):
                        truncated, bound_fired = True, "max-queue"
                        complete = False
                        continue
                    key = state_key(tr.target)
                    dst = index.get(key)
                    if dst is None:
                        if len(states) >= bounds.max_states:
                            truncated, bound_fired = True, "max-states"
                            complete = False
                            continue
                        dst = len(states)
                        states.append(tr.target)
                        index[key] = dst
                        depth.append(depth[src] + 1)
                        parent_edge.append(len(edges))
                        expanded.append(False)
                        next_frontier.append(dst)
                    edges.append((src, tr.process, tr.edge, dst))
                # A state counts as expanded only when every enabled
                # transition made it into the edge list; otherwise a pruned
                # successor could masquerade as a deadlock.
                expanded[src] = complete
            frontier = next_frontier
    finally:
        if pool is not None:
            pool.shutdown()

    terminals = [i for i, s in enumerate(states) if is_terminal(s, dp)]
    terminal_set = set(terminals)
    out_degree = [0] * len(states)
    for src, _, _, _ in edges:
        out_degree[src] += 1
    deadlocks = [i for i in range(len(states))
                 if i not in terminal_set and expanded[i] and out_degree[i] == 0]

    result = ExplorationResult(
        dp=dp, inputs=dict(inputs), states=states, edges=edges, initial=0,
        terminals=terminals, deadlocks=deadlocks, has_cycle=False,
        cycle_witness=None, overlap_events=overlap_events,
        truncated=truncated, bound_fired=bound_fired,
        parent_edge=parent_edge, depth=depth, expanded=expanded)
    witness = _dfs_find_cycle(result)
    result.has_cycle = witness is not None
    result.cycle_witness = witness
    if kahn_has_cycle(result) != result.has_cycle:
        raise ModelError("cycle detectors disagree; exploration graph corrupt")
    return result


# ---------------------------------------------------------------------------
# Cycle detection
# ---------------------------------------------------------------------------

def kahn_has_cycle(result: ExplorationResult) -> bool:
    """Topological elimination: nodes left over after repeatedly removing
    in-degree-zero states lie on cycles."""
    n = len(result.states)
    indeg = [0] * n
    adj: list[list[int]] = [[] for _ in range(n)]
    for src, _, _, dst in result.edges:
        indeg[dst] += 1
        adj[src].append(dst)
    queue = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for nxt in adj[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                queue.append(nxt)
    return seen != n


def _dfs_find_cycle(result: ExplorationResult) -> Optional[CycleWitness]:
    n = len(result.states)
    out_edges: list[list[int]] = [[] for _ in range(n)]
    for ei, (src, _, _, _) in enumerate(result.edges):
        out_edges[src].append(ei)

    WHITE, GREY, BLACK = 0, 1, 2
    color = [WHITE] * n
    # Stack entries: (state, iterator position, incoming edge index on path).
    for root in range(n):
        if color[root] != WHITE:
            continue
        stack: list[list] = [[root, 0, None]]
        color[root] = GREY
        while stack:
            state, pos, _ = stack[-1]
            if pos < len(out_edges[state]):
                stack[-1][1] += 1
                ei = out_edges[state][pos]
                dst = result.edges[ei][3]
                if color[dst] == WHITE:
                    color[dst] = GREY
                    stack.append([dst, 0, ei])
                elif color[dst] == GREY:
                    path_edges = [entry[2] for entry in stack
                                  if entry[2] is not None]
                    cycle_start = next(
                        i for i, entry in enumerate(stack) if entry[0] == dst)
                    on_cycle = [entry[2] for entry in stack[cycle_start + 1:]
                                if entry[2] is not None]
                    cycle = tuple(on_cycle) + (ei,)
                    prefix = tuple(e for e in path_edges if e not in on_cycle)
                    return CycleWitness(prefix, cycle)
            else:
                color[state] = BLACK
                stack.pop()
    return None


def dfs_find_cycle(result: ExplorationResult) -> Optional[CycleWitness]:
    return _dfs_find_cycle(result)


def detect_cycles(result: ExplorationResult) -> Optional[CycleWitness]:
    """Lasso witness if the reachable graph has a cycle, None if acyclic.

    Acyclicity of a complete finite reachable graph means every execution
    terminates.  On a truncated result the verdict is advisory only and a
    warning is emitted."""
    if result.truncated:
        warnings.warn("cycle verdict computed on a truncated exploration",
                      ExplorationWarning, stacklevel=2)
    witness = _dfs_find_cycle(result)
    if kahn_has_cycle(result) != (witness is not None):
        raise ModelError("cycle detectors disagree; exploration graph corrupt")
    return witness


# ---------------------------------------------------------------------------
# Invariants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvariantSpec:
    """A named predicate evaluated at every reachable state, optionally
    limited by a scope filter."""

    id: str
    description: str
    predicate: Callable[[DpState, DistributedProcess], bool]
    scope: Optional[Callable[[DpState, DistributedProcess], bool]] = None


@dataclass(frozen=True)
class InvariantViolation:
    spec_id: str
    state: int
    message: str = ""


class PredicateEvaluationError(ModelError):
    def __init__(self, spec_id: str, state_index: int, cause: Exception):
        super().__init__("invariant %s failed to evaluate at state %d: %s"
                         % (spec_id, state_index, cause))
        self.spec_id = spec_id
        self.state_index = state_index
        self.cause = cause


def check_invariants(result: ExplorationResult,
                     specs: list[InvariantSpec]) -> list[InvariantViolation]:
    """Evaluate every spec at every in-scope reachable state; the returned
    list is empty exactly when all invariants hold at the explored scale."""
    violations = []
    for spec in specs:
        for i, state in enumerate(result.states):
            try:
                if spec.scope is not None and not spec.scope(state, result.dp):
                    continue
                if not spec.predicate(state, result.dp):
                    violations.append(InvariantViolation(
                        spec.id, i, spec.description))
            except Exception as exc:  # noqa: BLE001 - witness matters
                raise PredicateEvaluationError(spec.id, i, exc) from exc
    return violations


# ---------------------------------------------------------------------------
# Final correctness check for row-product models
# ---------------------------------------------------------------------------

@dataclass
class FinalVerdict:
    holds: bool
    failures: list[str]
    overlap_count: int
    exempt_overlaps: int = 0


DRAIN_NODES = (3, 4)


def scoped_overlap_events(result: ExplorationResult) -> list[OverlapEvent]:
    """Overlap events covered by the disjointness claim.

    The claim is derived from the invariant suite, which speaks only about
    states where the coordinator has not yet entered its stop-signal drain
    phase (nodes 3 and 4).  A second stop receive unions {0} into a ghost
    set already holding 0; that bookkeeping happens only during the drain
    and is exempt."""
    return [e for e in result.overlap_events
            if result.states[e.state].locs[0] not in DRAIN_NODES]


def check_final_spec(result: ExplorationResult) -> FinalVerdict:
    """Every terminal state must have the full product written: cell i of C
    equals row i of A times B, for all i.  Disjoint-union firings audited
    during exploration must all have been disjoint (drain-phase stop
    bookkeeping exempt, see scoped_overlap_events)."""
    if result.truncated:
        raise ModelError("final check needs a complete exploration")
    failures = []
    for idx in result.terminals:
        binding = result.states[idx].binding
        n_rows = binding.value_of("N")
        a = binding.value_of("A")
        b = binding.value_of("B")
        c = binding.value_of("C")
        if not isinstance(n_rows, NatV) or not isinstance(a, TupleV) \
                or not isinstance(c, TupleV):
            raise ModelError("state %d does not look like a row-product model"
                             % idx)
        for i in range(1, n_rows.n + 1):
            expected = prod_value(a.items[i - 1], b)
            actual = c.items[i - 1]
            if actual != expected:
                failures.append(
                    "terminal state %d: cell %d is %r, expected %r"
                    % (idx, i, actual, expected))
    scoped = scoped_overlap_events(result)
    holds = not failures and not scoped
    return FinalVerdict(holds, failures, len(scoped),
                        len(result.overlap_events) - len(scoped))


# ---------------------------------------------------------------------------
# Graph comparison
# ---------------------------------------------------------------------------

def graphs_isomorphic(a: ExplorationResult, b: ExplorationResult,
                      drop_vars: frozenset = frozenset(),
                      match_edge_ids: bool = True) -> bool:
    """Content-addressed isomorphism: equal state-key sets and equal edge
    relations keyed by state content (optionally ignoring some variables).

    match_edge_ids=False compares only the shape of the transition relation,
    for graphs whose edge numbering legitimately differs (say, after a
    reduction rewrote a process graph)."""
    keys_a = [state_key(s, drop_vars) for s in a.states]
    keys_b = [state_key(s, drop_vars) for s in b.states]
    if len(set(keys_a)) != len(keys_a) or len(set(keys_b)) != len(keys_b):
        return False
    if set(keys_a) != set(keys_b):
        return False
    if keys_a[a.initial] != keys_b[b.initial]:
        return False
    if match_edge_ids:
        edges_a = {(keys_a[s], p, e, keys_a[d]) for s, p, e, d in a.edges}
        edges_b = {(keys_b[s], p, e, keys_b[d]) for s, p, e, d in b.edges}
    else:
        edges_a = {(keys_a[s], p, keys_a[d]) for s, p, _, d in a.edges}
        edges_b = {(keys_b[s], p, keys_b[d]) for s, p, _, d in b.edges}
    return edges_a == edges_b
