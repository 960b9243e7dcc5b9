"""Grid topology: buses, lines, admittance and incidence matrices, zones.

Everything downstream indexes vectors and matrices by *position* in a fixed
canonical ordering: buses ascending by bus id, lines ascending by line id.
Grids and zones are immutable once built and safe to share between workers.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CaseParseError, CaseSimplificationWarning


class BusKind(enum.Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"


@dataclass(frozen=True)
class Bus:
    """One bus with its net injection (generation minus load, per-unit)."""

    id: int
    kind: BusKind
    p_inject: float = 0.0
    q_inject: float = 0.0
    v_mag_setpoint: float | None = None  # slack / PV only


@dataclass(frozen=True)
class Line:
    """One transmission line with series admittance, oriented from->to.

    The orientation is arbitrary but fixed at load time; it only determines
    signs in the incidence matrix. Parallel lines are distinct objects with
    distinct ids and the same endpoints.
    """

    id: int
    from_bus: int
    to_bus: int
    admittance: complex


def build_admittance(buses, lines) -> np.ndarray:
    """Dense nodal admittance matrix Y (no shunts: zero row sums).

    Off-diagonal entries are minus the summed admittance of all parallel
    lines between the two buses; diagonals are the positive row sums.
    """
    pos = {b.id: i for i, b in enumerate(sorted(buses, key=lambda b: b.id))}
    y = np.zeros((len(pos), len(pos)), dtype=complex)
    for ln in lines:
        i, k = pos[ln.from_bus], pos[ln.to_bus]
        y[i, k] -= ln.admittance
        y[k, i] -= ln.admittance
        y[i, i] += ln.admittance
        y[k, k] += ln.admittance
    return y


def build_incidence(buses, lines) -> np.ndarray:
    """Signed node-line incidence matrix D: +1 at from_bus, -1 at to_bus."""
    pos = {b.id: i for i, b in enumerate(sorted(buses, key=lambda b: b.id))}
    d = np.zeros((len(pos), len(lines)), dtype=float)
    for j, ln in enumerate(sorted(lines, key=lambda l: l.id)):
        d[pos[ln.from_bus], j] = 1.0
        d[pos[ln.to_bus], j] = -1.0
    return d


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable grid: buses, lines, and the derived Y and D matrices.

    Use :func:`make_grid` to construct; it validates and orders everything.
    """

    buses: tuple[Bus, ...]  # ascending id
    lines: tuple[Line, ...]  # ascending id
    y_matrix: np.ndarray  # n x n complex
    incidence: np.ndarray  # n x m in {-1, 0, +1}
    _bus_pos: dict[int, int] = field(repr=False)
    _line_pos: dict[int, int] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def m(self) -> int:
        return len(self.lines)

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    @property
    def line_ids(self) -> tuple[int, ...]:
        return tuple(l.id for l in self.lines)

    @property
    def slack_id(self) -> int:
        return next(b.id for b in self.buses if b.kind is BusKind.SLACK)

    def bus_index(self, bus_id: int) -> int:
        return self._bus_pos[bus_id]

    def line_index(self, line_id: int) -> int:
        return self._line_pos[line_id]

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self._bus_pos[bus_id]]

    def line(self, line_id: int) -> Line:
        return self.lines[self._line_pos[line_id]]

    def bus_positions(self, bus_ids) -> np.ndarray:
        """Positions of the given bus ids, in ascending bus-id order."""
        return np.array([self._bus_pos[i] for i in sorted(bus_ids)], dtype=int)

    def line_positions(self, line_ids) -> np.ndarray:
        return np.array([self._line_pos[i] for i in sorted(line_ids)], dtype=int)

    @property
    def line_admittances(self) -> np.ndarray:
        return np.array([l.admittance for l in self.lines], dtype=complex)


def make_grid(buses, lines) -> Grid:
    """Validate components and build an ordered Grid with Y and D."""
    buses = tuple(sorted(buses, key=lambda b: b.id))
    lines = tuple(sorted(lines, key=lambda l: l.id))
    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate bus ids")
    line_ids = [l.id for l in lines]
    if len(set(line_ids)) != len(line_ids):
        raise ValueError("duplicate line ids")
    n_slack = sum(1 for b in buses if b.kind is BusKind.SLACK)
    if n_slack != 1:
        raise ValueError(f"grid must have exactly one slack bus, found {n_slack}")
    known = set(ids)
    for b in buses:
        if b.v_mag_setpoint is not None and not 0.0 < b.v_mag_setpoint < 2.0:
            raise ValueError(f"bus {b.id}: voltage setpoint {b.v_mag_setpoint} outside (0, 2) p.u.")
        if b.kind in (BusKind.SLACK, BusKind.PV) and b.v_mag_setpoint is None:
            raise ValueError(f"bus {b.id}: {b.kind.value} bus needs a voltage setpoint")
    for l in lines:
        if l.from_bus == l.to_bus:
            raise ValueError(f"line {l.id}: self-loop at bus {l.from_bus}")
        if l.from_bus not in known or l.to_bus not in known:
            raise ValueError(f"line {l.id}: endpoint not a known bus")
        if l.admittance == 0:
            raise ValueError(f"line {l.id}: zero admittance")
    return Grid(
        buses=buses,
        lines=lines,
        y_matrix=build_admittance(buses, lines),
        incidence=build_incidence(buses, lines),
        _bus_pos={b.id: i for i, b in enumerate(buses)},
        _line_pos={l.id: j for j, l in enumerate(lines)},
    )


def connected_components(bus_ids, edges) -> int:
    """Number of connected components (union-find over (u, v) edges)."""
    parent = {i: i for i in bus_ids}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    count = len(parent)
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            count -= 1
    return count


@dataclass(frozen=True)
class Zone:
    """A partition of the grid into attacked nodes and the exterior.

    ``h_lines`` are lines with both endpoints inside, ``cut_lines`` have
    exactly one endpoint inside. Every grid line lands in exactly one of
    {h_lines, cut_lines, exterior}.
    """

    h_nodes: frozenset[int]
    h_lines: frozenset[int]
    exterior_nodes: frozenset[int]
    cut_lines: frozenset[int]

    @property
    def n_h(self) -> int:
        return len(self.h_nodes)

    @property
    def m_h(self) -> int:
        return len(self.h_lines)

    def sorted_h_nodes(self) -> list[int]:
        return sorted(self.h_nodes)

    def sorted_h_lines(self) -> list[int]:
        return sorted(self.h_lines)

    def sorted_exterior(self) -> list[int]:
        return sorted(self.exterior_nodes)


def make_zone(grid: Grid, h_node_ids) -> Zone:
    """Partition the grid's lines around the given attacked node set."""
    h = frozenset(int(i) for i in h_node_ids)
    if not h:
        raise ValueError("zone node set is empty")
    all_ids = frozenset(grid.bus_ids)
    if not h <= all_ids:
        raise ValueError(f"unknown zone nodes: {sorted(h - all_ids)}")
    if h == all_ids:
        raise ValueError("zone covers the whole grid; exterior would be empty")
    h_lines = set()
    cut = set()
    for l in grid.lines:
        inside = (l.from_bus in h) + (l.to_bus in h)
        if inside == 2:
            h_lines.add(l.id)
        elif inside == 1:
            cut.add(l.id)
    return Zone(
        h_nodes=h,
        h_lines=frozenset(h_lines),
        exterior_nodes=all_ids - h,
        cut_lines=frozenset(cut),
    )


def submatrix(grid: Grid, matrix: np.ndarray, row_bus_ids, col_bus_ids) -> np.ndarray:
    """Extract rows/columns of a bus-indexed matrix, ascending bus-id order."""
    return matrix[np.ix_(grid.bus_positions(row_bus_ids), grid.bus_positions(col_bus_ids))]


def incidence_block(grid: Grid, bus_ids, line_ids) -> np.ndarray:
    """Rows (buses) x columns (lines) block of the incidence matrix."""
    rows = grid.bus_positions(bus_ids)
    cols = grid.line_positions(line_ids)
    if len(cols) == 0:
        return np.zeros((len(rows), 0))
    return grid.incidence[np.ix_(rows, cols)]


# ---------------------------------------------------------------------------
# Case-file parsing (MATPOWER-style subset)
# ---------------------------------------------------------------------------

_BUS_PQ, _BUS_PV, _BUS_SLACK = 1, 2, 3


def _strip_comment(line: str) -> str:
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


def _scan_tables(text: str):
    """Return {name: [(line_no, [floats])]} for mpc.* scalar/matrix blocks."""
    tables: dict[str, list] = {}
    scalars: dict[str, float] = {}
    current = None
    for ln_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if current is None:
            if line.startswith("mpc.") and "=" in line:
                name, _, rest = line.partition("=")
                name = name.replace("mpc.", "").strip()
                rest = rest.strip()
                if rest.startswith("["):
                    tables[name] = []
                    current = name
                    line = rest[1:].strip()
                else:
                    value = rest.rstrip(";").strip().strip("'\"")
                    try:
                        scalars[name] = float(value)
                    except ValueError:
                        scalars[name] = value  # e.g. mpc.version = '2'
                    continue
            else:
                continue
        # inside a matrix block (possibly opened on this same line)
        body, bracket, _ = line.partition("]")
        _append_rows(tables, current, body, ln_no)
        if bracket:
            current = None
    return scalars, tables


def _append_rows(tables, name, text, ln_no):
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        row = []
        for tok in chunk.split():
            try:
                row.append(float(tok))
            except ValueError:
                raise CaseParseError(f"cannot parse number {tok!r} in mpc.{name}", ln_no) from None
        if row:
            tables[name].append((ln_no, row))


def parse_case(text: str) -> Grid:
    """Parse a MATPOWER-style case into a Grid.

    Reads baseMVA, the bus table (bus_i, type, Pd, Qd, Vm), the gen table
    (bus, Pg, Qg, Vg, status) and the branch table (fbus, tbus, r, x,
    status). Powers are converted to per-unit on baseMVA; branch series
    impedance becomes the line admittance y = 1/(r + jx). Shunt, charging
    and tap/DC fields are zeroed with a warning, out-of-service branches
    and generators are dropped.
    """
    scalars, tables = _scan_tables(text)
    if "baseMVA" not in scalars:
        raise CaseParseError("missing mpc.baseMVA")
    base = float(scalars["baseMVA"])
    if base <= 0:
        raise CaseParseError("baseMVA must be positive")
    for required in ("bus", "branch"):
        if required not in tables or not tables[required]:
            raise CaseParseError(f"missing mpc.{required} table")

    simplified: list[str] = []

    # generators, keyed by bus
    gen_p: dict[int, float] = {}
    gen_q: dict[int, float] = {}
    gen_v: dict[int, float] = {}
    for ln_no, row in tables.get("gen", []):
        if len(row) < 6:
            raise CaseParseError("gen row needs at least 6 columns (through Vg)", ln_no)
        if len(row) >= 8 and row[7] <= 0:
            continue  # out of service
        bus_i = int(row[0])
        gen_p[bus_i] = gen_p.get(bus_i, 0.0) + row[1]
        gen_q[bus_i] = gen_q.get(bus_i, 0.0) + row[2]
        gen_v.setdefault(bus_i, row[5])

    buses = []
    seen_kinds: dict[int, int] = {}
    for ln_no, row in tables["bus"]:
        if len(row) < 8:
            raise CaseParseError("bus row needs at least 8 columns (through Vm)", ln_no)
        bus_i = int(row[0])
        btype = int(row[1])
        if btype == _BUS_PQ:
            kind = BusKind.PQ
        elif btype == _BUS_PV:
            kind = BusKind.PV
        elif btype == _BUS_SLACK:
            kind = BusKind.SLACK
        else:
            raise CaseParseError(f"bus {bus_i}: unsupported bus type {btype}", ln_no)
        seen_kinds[bus_i] = btype
        if row[4] != 0 or row[5] != 0:
            simplified.append(f"bus {bus_i}: shunt Gs/Bs")
        p = (gen_p.get(bus_i, 0.0) - row[2]) / base
        q = (gen_q.get(bus_i, 0.0) - row[3]) / base
        v_set = None
        if kind in (BusKind.SLACK, BusKind.PV):
            v_set = gen_v.get(bus_i, row[7])
        buses.append(Bus(id=bus_i, kind=kind, p_inject=p, q_inject=q, v_mag_setpoint=v_set))

    if sum(1 for b in buses if b.kind is BusKind.SLACK) == 0:
        raise CaseParseError("no slack bus (type 3) in bus table")
    if sum(1 for b in buses if b.kind is BusKind.SLACK) > 1:
        raise CaseParseError("more than one slack bus (type 3) in bus table")

    lines = []
    next_id = 1
    for ln_no, row in tables["branch"]:
        if len(row) < 4:
            raise CaseParseError("branch row needs at least 4 columns (fbus tbus r x)", ln_no)
        status = row[10] if len(row) >= 11 else 1.0
        if status == 0:
            continue
        fbus, tbus = int(row[0]), int(row[1])
        r, x = row[2], row[3]
        if r == 0 and x == 0:
            raise CaseParseError(f"branch {fbus}-{tbus}: zero impedance", ln_no)
        if len(row) >= 5 and row[4] != 0:
            simplified.append(f"branch {fbus}-{tbus}: charging b")
        if len(row) >= 9 and row[8] not in (0.0, 1.0):
            simplified.append(f"branch {fbus}-{tbus}: tap ratio")
        if len(row) >= 10 and row[9] != 0:
            simplified.append(f"branch {fbus}-{tbus}: phase shift")
        lines.append(Line(id=next_id, from_bus=fbus, to_bus=tbus, admittance=1.0 / complex(r, x)))
        next_id += 1

    if simplified:
        warnings.warn(
            CaseSimplificationWarning(
                "dropped shunt/charging/tap data (line model is series admittance "
                "only): " + "; ".join(simplified)
            ),
            stacklevel=2,
        )
    try:
        return make_grid(buses, lines)
    except ValueError as exc:
        raise CaseParseError(str(exc)) from exc
