"""Exact subcarrier assignment via minimum-cost flow.

The per-group linear integer program (quota equality per user,
exclusivity per subcarrier) maps to a source -> users -> subcarriers
-> sink network with integral capacities, so successive shortest
augmenting paths with node potentials return the optimal integral
assignment directly.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np


class InfeasibleAssignmentError(Exception):
    """Quotas cannot be met; `blocking_users` lists the offenders."""

    def __init__(self, message: str, blocking_users: list[int]):
        super().__init__(message)
        self.blocking_users = blocking_users


@dataclass(frozen=True)
class Assignment:
    """Binary allocation a[n][k] with its exact total cost."""

    a: np.ndarray       # (N, U) uint8
    total_cost: float


class _Network:
    """Min-cost flow with successive shortest paths and potentials."""

    def __init__(self, num_nodes: int):
        self.num_nodes = num_nodes
        self.head: list[list[int]] = [[] for _ in range(num_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []

    def add_edge(self, u: int, v: int, cap: int, cost: float) -> int:
        idx = len(self.to)
        self.head[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.head[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(0)
        self.cost.append(-cost)
        return idx

    def min_cost_flow(self, source: int, sink: int, demand: int) -> int:
        """Push up to `demand` units; returns the flow actually sent."""
        potential = [0.0] * self.num_nodes  # all arc costs nonnegative
        sent = 0
        while sent < demand:
            dist = [math.inf] * self.num_nodes
            prev_edge = [-1] * self.num_nodes
            dist[source] = 0.0
            pq = [(0.0, source)]
            while pq:
                d, u = heapq.heappop(pq)
                if d > dist[u]:
                    continue
                for e in self.head[u]:
                    if self.cap[e] <= 0:
                        continue
                    v = self.to[e]
                    nd = d + self.cost[e] + potential[u] - potential[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        prev_edge[v] = e
                        heapq.heappush(pq, (nd, v))
            if not math.isfinite(dist[sink]):
                break
            for v in range(self.num_nodes):
                if math.isfinite(dist[v]):
                    potential[v] += dist[v]
            # unit capacities beyond the source arcs: augment one path,
            # bottleneck along it
            push = demand - sent
            v = sink
            while v != source:
                e = prev_edge[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = sink
            while v != source:
                e = prev_edge[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                v = self.to[e ^ 1]
            sent += push
        return sent


def _check_shape(costs: np.ndarray, quotas) -> tuple[int, int]:
    costs = np.asarray(costs, dtype=float)
    n_sub, n_users = costs.shape
    if len(quotas) != n_users:
        raise ValueError("one quota per user required")
    return n_sub, n_users


def solve_assignment(costs: np.ndarray, quotas) -> Assignment:
    """Minimum-total-cost assignment meeting every quota exactly.

    costs is (N subcarriers x U users); +inf marks unusable pairs.
    """
    costs = np.asarray(costs, dtype=float)
    n_sub, n_users = _check_shape(costs, quotas)
    quotas = [int(q) for q in quotas]

    blocking = [k for k in range(n_users)
                if np.count_nonzero(np.isfinite(costs[:, k])) < quotas[k]]
    if sum(quotas) > n_sub or blocking:
        if not blocking:
            blocking = list(range(n_users))
        raise InfeasibleAssignmentError(
            f"quotas cannot be met for users {blocking}", blocking)

    finite = costs[np.isfinite(costs)]
    scale = float(finite.max()) if finite.size and finite.max() > 0 else 1.0

    source = 0
    sink = n_users + n_sub + 1
    net = _Network(sink + 1)
    for k in range(n_users):
        net.add_edge(source, 1 + k, quotas[k], 0.0)
    pair_edges: dict[int, tuple[int, int]] = {}
    for n in range(n_sub):  # subcarrier-major arc order (deterministic ties)
        for k in range(n_users):
            if math.isfinite(costs[n, k]):
                e = net.add_edge(1 + k, 1 + n_users + n, 1, costs[n, k] / scale)
                pair_edges[e] = (n, k)
    for n in range(n_sub):
        net.add_edge(1 + n_users + n, sink, 1, 0.0)

    demand = sum(quotas)
    sent = net.min_cost_flow(source, sink, demand)
    if sent < demand:
        unmet = [k for k in range(n_users)
                 if net.cap[2 * k] > 0]  # residual on source->user arc k
        raise InfeasibleAssignmentError(
            f"quotas cannot be met for users {unmet}", unmet)

    a = np.zeros((n_sub, n_users), dtype=np.uint8)
    for e, (n, k) in pair_edges.items():
        if net.cap[e] == 0:  # saturated unit arc
            a[n, k] = 1
    total = float(np.sum(np.where(a.astype(bool), costs, 0.0)))
    return Assignment(a=a, total_cost=total)


def brute_force_assignment(costs: np.ndarray, quotas) -> Assignment:
    """Exhaustive oracle for small instances (N <= 10, sum quota <= 10)."""
    costs = np.asarray(costs, dtype=float)
    n_sub, n_users = _check_shape(costs, quotas)
    quotas = [int(q) for q in quotas]
    if n_sub > 10 or sum(quotas) > 10:
        raise ValueError("instance too large for brute force")

    best_cost = math.inf
    best_sets: list[tuple[int, ...]] | None = None
    usable = [tuple(n for n in range(n_sub) if math.isfinite(costs[n, k]))
              for k in range(n_users)]

    def recurse(k: int, used: int, acc: float, chosen: list[tuple[int, ...]]):
        nonlocal best_cost, best_sets
        if k == n_users:
            if acc < best_cost:
                best_cost = acc
                best_sets = list(chosen)
            return
        for combo in itertools.combinations(usable[k], quotas[k]):
            mask = 0
            for n in combo:
                mask |= 1 << n
            if mask & used:
                continue
            add = sum(costs[n, k] for n in combo)
            chosen.append(combo)
            recurse(k + 1, used | mask, acc + add, chosen)
            chosen.pop()

    recurse(0, 0, 0.0, [])
    if best_sets is None:
        raise InfeasibleAssignmentError("no feasible assignment exists",
                                        list(range(n_users)))
    a = np.zeros((n_sub, n_users), dtype=np.uint8)
    for k, combo in enumerate(best_sets):
        for n in combo:
            a[n, k] = 1
    total = float(np.sum(np.where(a.astype(bool), costs, 0.0)))
    return Assignment(a=a, total_cost=total)
