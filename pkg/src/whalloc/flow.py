"""Min-cost flow by successive shortest paths with node potentials.

Edges are stored in flat lists; edge ``e`` and its residual twin ``e ^ 1``
are added together. Costs may be Python ints (exact) or floats, in which
case comparisons use ``eps``.
"""

from __future__ import annotations

import heapq


class MinCostFlow:
    def __init__(self, n: int, eps: float = 0.0):
        self.n = n
        self.eps = eps
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.head: list[int] = []
        self.tail: list[int] = []
        self.cap: list[int] = []
        self.cost: list = []
        self.flow: list[int] = []

    def add_edge(self, u: int, v: int, cap: int, cost) -> int:
        e = len(self.head)
        for a, b, c, w in ((u, v, cap, cost), (v, u, 0, -cost)):
            self.adj[a].append(len(self.head))
            self.tail.append(a)
            self.head.append(b)
            self.cap.append(c)
            self.cost.append(w)
            self.flow.append(0)
        return e

    def residual(self, e: int) -> int:
        return self.cap[e] - self.flow[e]

    def push(self, e: int, amount: int) -> None:
        self.flow[e] += amount
        self.flow[e ^ 1] -= amount

    def total_cost(self):
        return sum(self.cost[e] * self.flow[e] for e in range(0, len(self.head), 2))

    def _dijkstra(self, s: int, h: list):
        dist: list = [None] * self.n
        parent = [-1] * self.n
        dist[s] = 0
        heap = [(0, s)]
        done = [False] * self.n
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for e in self.adj[u]:
                if self.cap[e] - self.flow[e] <= 0:
                    continue
                v = self.head[e]
                if done[v]:
                    continue
                rc = self.cost[e] + h[u] - h[v]
                if rc < 0:
                    # only float round-off can get here; potentials keep rc >= 0
                    rc = 0
                nd = d + rc
                if dist[v] is None or nd < dist[v] - self.eps:
                    dist[v] = nd
                    parent[v] = e
                    heapq.heappush(heap, (nd, v))
        return dist, parent

    def successive_shortest_paths(self, s: int, t: int, amount: int | None = None):
        """Send up to ``amount`` units (default: as much as possible) from s to t.

        Assumes the current flow is min-cost for its value and all residual
        costs reachable from ``s`` are nonnegative (true for zero flow on a
        graph with nonnegative costs). Returns ``(sent, augmentations)``.
        """
        h = [0] * self.n
        sent = 0
        rounds = 0
        while amount is None or sent < amount:
            dist, parent = self._dijkstra(s, h)
            if dist[t] is None:
                break
            for v in range(self.n):
                if dist[v] is not None:
                    h[v] += dist[v]
            push = None if amount is None else amount - sent
            v = t
            while v != s:
                e = parent[v]
                r = self.cap[e] - self.flow[e]
                push = r if push is None else min(push, r)
                v = self.tail[e]
            v = t
            while v != s:
                e = parent[v]
                self.push(e, push)
                v = self.tail[e]
            sent += push
            rounds += 1
        return sent, rounds

    def _negative_cycle(self):
        n = self.n
        dist = [0] * n
        parent = [-1] * n
        last = -1
        for _ in range(n):
            last = -1
            for e in range(len(self.head)):
                if self.cap[e] - self.flow[e] <= 0:
                    continue
                u, v = self.tail[e], self.head[e]
                nd = dist[u] + self.cost[e]
                if nd < dist[v] - self.eps:
                    dist[v] = nd
                    parent[v] = e
                    last = v
            if last < 0:
                return None
        v = last
        for _ in range(n):
            v = self.tail[parent[v]]
        cycle = []
        u = v
        while True:
            e = parent[u]
            cycle.append(e)
            u = self.tail[e]
            if u == v:
                break
        if not sum(self.cost[e] for e in cycle) < -self.eps:
            return None
        return cycle

    def cancel_negative_cycles(self) -> int:
        """Improve the current (feasible) flow to optimality. Returns cycles cancelled."""
        count = 0
        while True:
            cycle = self._negative_cycle()
            if cycle is None:
                return count
            push = min(self.cap[e] - self.flow[e] for e in cycle)
            for e in cycle:
                self.push(e, push)
            count += 1
