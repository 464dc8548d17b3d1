"""Dinic max-flow on integer capacities, with residual-graph queries."""
from __future__ import annotations

from collections import deque

INF = float("inf")


class FlowNetwork:
    __slots__ = ("n", "head", "to", "cap", "level", "it")

    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int | float] = []

    def add_edge(self, u: int, v: int, cap, rev_cap=0) -> int:
        """Add arc u->v (and its reverse with ``rev_cap``); return the arc id."""
        k = len(self.to)
        self.to += (v, u)
        self.cap += (cap, rev_cap)
        self.head[u].append(k)
        self.head[v].append(k + 1)
        return k

    def _bfs(self, s: int, t: int) -> bool:
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        to, cap, head = self.to, self.cap, self.head
        while q:
            u = q.popleft()
            for k in head[u]:
                v = to[k]
                if cap[k] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
        self.level = level
        return level[t] >= 0

    def _dfs(self, s: int, t: int, limit):
        # iterative blocking-flow search along the level graph
        to, cap, head, level, it = self.to, self.cap, self.head, self.level, self.it
        stack = [s]
        arcs: list[int] = []
        while stack:
            u = stack[-1]
            if u == t:
                push = min(cap[k] for k in arcs)
                push = min(push, limit)
                for k in arcs:
                    cap[k] -= push
                    cap[k ^ 1] += push
                return push
            adv = False
            lst = head[u]
            while it[u] < len(lst):
                k = lst[it[u]]
                v = to[k]
                if cap[k] > 0 and level[v] == level[u] + 1:
                    stack.append(v)
                    arcs.append(k)
                    adv = True
                    break
                it[u] += 1
            if not adv:
                stack.pop()
                level[u] = -1
                if arcs:
                    arcs.pop()
                    it[stack[-1]] += 1
        return 0

    def max_flow(self, s: int, t: int, limit=INF):
        """Augment from ``s`` to ``t``; stops early once ``limit`` is reached."""
        total = 0
        while total < limit and self._bfs(s, t):
            self.it = [0] * self.n
            while total < limit:
                f = self._dfs(s, t, limit - total)
                if not f:
                    break
                total += f
        return total

    def reachable(self, s: int) -> set[int]:
        """Nodes reachable from ``s`` along arcs with positive residual capacity."""
        seen = {s}
        q = [s]
        to, cap, head = self.to, self.cap, self.head
        while q:
            u = q.pop()
            for k in head[u]:
                if cap[k] > 0 and to[k] not in seen:
                    seen.add(to[k])
                    q.append(to[k])
        return seen

    def residual_arcs(self):
        for u in range(self.n):
            for k in self.head[u]:
                if self.cap[k] > 0:
                    yield u, self.to[k]
