"""Network and measurement-set model, case-file parsing and meter weights.

Buses are densified to ``1..n`` when a case is parsed; the original labels
are kept on :class:`Network` so reports can translate back. Lines are
unordered bus pairs stored in file order, parallel lines stay distinct.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from typing import Iterable, Literal, Sequence

FLOW = "flow"
INJECTION = "injection"


class CaseError(ValueError):
    """Invalid case file. ``location`` names the offending field or line."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class Measurement:
    kind: Literal["flow", "injection"]
    ref: int  # line index for flows, bus id for injections

    @property
    def is_flow(self) -> bool:
        return self.kind == FLOW

    def describe(self, net: "Network") -> str:
        if self.is_flow:
            i, j = net.lines[self.ref]
            return f"flow[{self.ref}] {net.label(i)}-{net.label(j)}"
        return f"injection {net.label(self.ref)}"


def Flow(line: int) -> Measurement:
    return Measurement(FLOW, line)


def Injection(bus: int) -> Measurement:
    return Measurement(INJECTION, bus)


@dataclass(frozen=True)
class Network:
    n: int
    lines: tuple[tuple[int, int], ...]
    name: str = ""
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(1, self.n + 1)))

    @property
    def buses(self) -> range:
        return range(1, self.n + 1)

    def label(self, bus: int) -> int:
        return self.labels[bus - 1]

    @cached_property
    def _incidence(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n + 1)]
        for k, (i, j) in enumerate(self.lines):
            inc[i].append(k)
            inc[j].append(k)
        return tuple(tuple(x) for x in inc)

    def incident(self, bus: int) -> tuple[int, ...]:
        return self._incidence[bus]

    def other_end(self, line: int, bus: int) -> int:
        i, j = self.lines[line]
        return j if bus == i else i

    def neighbors(self, bus: int) -> list[int]:
        """Distinct neighbours of ``bus`` in first-appearance order."""
        seen = dict.fromkeys(self.other_end(k, bus) for k in self._incidence[bus])
        return list(seen)

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        seen = {1}
        todo = deque([1])
        while todo:
            b = todo.popleft()
            for k in self._incidence[b]:
                o = self.other_end(k, b)
                if o not in seen:
                    seen.add(o)
                    todo.append(o)
        return len(seen) == self.n


@dataclass(frozen=True)
class MeasurementSet:
    entries: tuple[Measurement, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, k: int) -> Measurement:
        return self.entries[k]

    def __iter__(self):
        return iter(self.entries)

    def flow_rows(self) -> list[int]:
        return [r for r, e in enumerate(self.entries) if e.is_flow]

    def injection_rows(self) -> list[int]:
        return [r for r, e in enumerate(self.entries) if not e.is_flow]


@dataclass(frozen=True)
class MeterWeights:
    w: tuple[int, ...]  # per line index
    v: tuple[int, ...]  # per bus, v[b - 1]
    wtilde: tuple[int, ...]  # w + v at both endpoints, per line

    def bus(self, b: int) -> int:
        return self.v[b - 1]


def meter_weights(net: Network, ms: MeasurementSet) -> MeterWeights:
    w = [0] * len(net.lines)
    v = [0] * net.n
    for e in ms:
        if e.is_flow:
            w[e.ref] += 1
        else:
            v[e.ref - 1] += 1
    wt = tuple(w[k] + v[i - 1] + v[j - 1] for k, (i, j) in enumerate(net.lines))
    return MeterWeights(tuple(w), tuple(v), wt)


def incident_lines(net: Network, bus: int) -> list[int]:
    if not 1 <= bus <= net.n:
        raise KeyError(f"unknown bus {bus}")
    return list(net.incident(bus))


def check_measurements(net: Network, entries: Iterable[Measurement]) -> MeasurementSet:
    entries = tuple(entries)
    if not entries:
        raise CaseError("measurement set is empty", "measurements")
    for k, e in enumerate(entries):
        if e.is_flow and not 0 <= e.ref < len(net.lines):
            raise CaseError(f"line {e.ref} does not exist", f"measurements[{k}]")
        if not e.is_flow and not 1 <= e.ref <= net.n:
            raise CaseError(f"bus {e.ref} does not exist", f"measurements[{k}]")
    return MeasurementSet(entries)


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CaseError(f"expected integer, got {value!r}", where)
    return value


def case_from_dict(doc: dict) -> tuple[Network, MeasurementSet]:
    if not isinstance(doc, dict):
        raise CaseError("top level must be an object")
    for key in ("buses", "lines", "measurements"):
        if key not in doc:
            raise CaseError("missing field", key)
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise CaseError("expected string", "name")

    raw_buses = doc["buses"]
    if not isinstance(raw_buses, list) or not raw_buses:
        raise CaseError("expected non-empty list", "buses")
    index: dict[int, int] = {}
    for k, b in enumerate(raw_buses):
        b = _int(b, f"buses[{k}]")
        if b in index:
            raise CaseError(f"duplicate bus {b}", f"buses[{k}]")
        index[b] = len(index) + 1

    raw_lines = doc["lines"]
    if not isinstance(raw_lines, list):
        raise CaseError("expected list", "lines")
    lines = []
    for k, pair in enumerate(raw_lines):
        where = f"lines[{k}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise CaseError("expected [i, j]", where)
        ends = []
        for b in pair:
            b = _int(b, where)
            if b not in index:
                raise CaseError(f"bus {b} does not exist", where)
            ends.append(index[b])
        if ends[0] == ends[1]:
            raise CaseError("self-loop", where)
        lines.append((ends[0], ends[1]))

    net = Network(len(index), tuple(lines), name, tuple(index))
    if not net.is_connected():
        raise CaseError("network graph is disconnected", "lines")

    raw_meas = doc["measurements"]
    if not isinstance(raw_meas, list):
        raise CaseError("expected list", "measurements")
    entries = []
    for k, item in enumerate(raw_meas):
        where = f"measurements[{k}]"
        if not isinstance(item, dict):
            raise CaseError("expected object", where)
        kind = item.get("type")
        if kind == FLOW:
            line = _int(item.get("line"), where + ".line")
            if not 0 <= line < len(lines):
                raise CaseError(f"line {line} does not exist", where)
            entries.append(Flow(line))
        elif kind == INJECTION:
            b = _int(item.get("bus"), where + ".bus")
            if b not in index:
                raise CaseError(f"bus {b} does not exist", where)
            entries.append(Injection(index[b]))
        else:
            raise CaseError(f"unknown measurement type {kind!r}", where)
    return net, check_measurements(net, entries)


def parse_case(text: str) -> tuple[Network, MeasurementSet]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return case_from_dict(doc)


def case_to_dict(net: Network, ms: MeasurementSet) -> dict:
    meas = []
    for e in ms:
        if e.is_flow:
            meas.append({"type": FLOW, "line": e.ref})
        else:
            meas.append({"type": INJECTION, "bus": net.label(e.ref)})
    return {
        "name": net.name,
        "buses": list(net.labels),
        "lines": [[net.label(i), net.label(j)] for i, j in net.lines],
        "measurements": meas,
    }


def serialize_case(net: Network, ms: MeasurementSet) -> str:
    return json.dumps(case_to_dict(net, ms)) + "\n"


def load_case(path) -> tuple[Network, MeasurementSet]:
    """Load a case from a file path or a bundled name such as ``"ieee14"``."""
    path = str(path)
    if not path.endswith(".json") and "/" not in path:
        text = resources.files("ktuple.data").joinpath(f"{path}.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return parse_case(text)


def full_metering(net: Network, meters_per_line: int = 1, injections: bool = True) -> MeasurementSet:
    """Injection meter on every bus (first), then ``meters_per_line`` flows per line."""
    entries: list[Measurement] = []
    if injections:
        entries += [Injection(b) for b in net.buses]
    for k in range(len(net.lines)):
        entries += [Flow(k)] * meters_per_line
    return check_measurements(net, entries)


def network(lines: Sequence[tuple[int, int]], n: int | None = None, name: str = "") -> Network:
    """Build a validated network from 1-based bus pairs."""
    n = n if n is not None else max(max(p) for p in lines)
    for k, (i, j) in enumerate(lines):
        if i == j:
            raise CaseError("self-loop", f"lines[{k}]")
        if not (1 <= i <= n and 1 <= j <= n):
            raise CaseError("bus out of range", f"lines[{k}]")
    net = Network(n, tuple((int(i), int(j)) for i, j in lines), name)
    if not net.is_connected():
        raise CaseError("network graph is disconnected", "lines")
    return net
