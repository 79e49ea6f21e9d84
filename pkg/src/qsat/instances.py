"""Random k-SAT instances: generation, evaluation, exhaustive solving and DIMACS I/O.

Assignments are integers in ``[0, 2**n)``; bit ``i`` holds the value of
variable ``i`` (1 = true). This convention is used everywhere in the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CapabilityError, ParseError, StateError

MAX_ENUMERATE_VARS = 30
MAX_TABLE_VARS = 26
_CHUNK_VARS = 20
META_PREFIX = "c qsat:"


@dataclass(frozen=True)
class Clause:
    vars: tuple[int, ...]
    negated: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(int(v) for v in self.vars))
        object.__setattr__(self, "negated", tuple(bool(b) for b in self.negated))
        if len(self.vars) != len(self.negated):
            raise ValueError("vars and negated must have the same length")
        if len(set(self.vars)) != len(self.vars):
            raise ValueError(f"clause variables must be distinct: {self.vars}")
        if any(v < 0 for v in self.vars):
            raise ValueError(f"negative variable index in {self.vars}")

    @property
    def k(self) -> int:
        return len(self.vars)

    def literals(self) -> list[int]:
        """DIMACS-style signed, 1-based literals."""
        return [-(v + 1) if neg else v + 1 for v, neg in zip(self.vars, self.negated)]

    @classmethod
    def from_literals(cls, lits: Iterable[int]) -> "Clause":
        lits = list(lits)
        return cls(tuple(abs(x) - 1 for x in lits), tuple(x < 0 for x in lits))

    def satisfied_by(self, s: int) -> bool:
        return any(((s >> v) & 1) != neg for v, neg in zip(self.vars, self.negated))


@dataclass
class Instance:
    n: int
    k: int
    clauses: list[Clause]
    solutions: list[int] | None = None
    meta: dict = field(default_factory=dict)
    _costs: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.clauses = list(self.clauses)
        for c in self.clauses:
            if c.k != self.k:
                raise ValueError(f"clause {c.literals()} has width {c.k}, expected k={self.k}")
            if any(v >= self.n for v in c.vars):
                raise ValueError(f"clause {c.literals()} references a variable >= n={self.n}")

    @property
    def m(self) -> int:
        return len(self.clauses)

    @property
    def mu(self) -> float:
        return self.m / self.n

    @property
    def id(self) -> str:
        return self.meta.get("id", f"n{self.n}-m{self.m}")

    def cost_table(self) -> np.ndarray:
        """Number of violated clauses for every assignment, as a ``2**n`` array.

        Cached on the instance; dtype is uint8 when ``m < 256``.
        """
        if self._costs is None:
            if self.n > MAX_TABLE_VARS:
                raise CapabilityError(f"cost table for n={self.n} exceeds limit {MAX_TABLE_VARS}")
            self._costs = _violation_table(self.clauses, self.n, self.m)
            self._costs.setflags(write=False)
        return self._costs

    def solution_mask(self) -> np.ndarray:
        if self.solutions is None:
            raise StateError("instance has no solution list; call enumerate_solutions first")
        mask = np.zeros(2**self.n, dtype=bool)
        mask[np.asarray(self.solutions, dtype=np.int64)] = True
        return mask


def _table_dtype(m: int):
    return np.uint8 if m < 256 else np.uint16 if m < 65536 else np.uint32


def _violation_table(clauses: Sequence[Clause], n: int, m: int) -> np.ndarray:
    # view the table as an n-dimensional 2x2x...x2 array; axis n-1-v is bit v.
    # a clause is violated exactly on the sub-block where every literal is false,
    # so each clause is a strided in-place increment of 2**(n-k) entries.
    costs = np.zeros(2**n, dtype=_table_dtype(m))
    cube = costs.reshape((2,) * n) if n > 0 else costs
    for c in clauses:
        idx: list = [slice(None)] * n
        for v, neg in zip(c.vars, c.negated):
            idx[n - 1 - v] = 1 if neg else 0
        if n > 0:
            cube[tuple(idx)] += 1
        else:
            costs += 1
    return costs


def cost(instance: Instance, s: int) -> int:
    """Count the clauses that assignment ``s`` leaves unsatisfied."""
    s = int(s)
    if not 0 <= s < 2**instance.n:
        raise ValueError(f"assignment {s} out of range for n={instance.n}")
    return sum(1 for c in instance.clauses if not c.satisfied_by(s))


def assignment_from_values(values: Sequence[bool]) -> int:
    """Index of the assignment whose variable ``i`` takes ``values[i]``."""
    return sum(1 << i for i, v in enumerate(values) if v)


@dataclass(frozen=True)
class EnsembleRule:
    """How many clauses an instance gets.

    With ``m`` unset the count follows ``mu * n``; when that is not an integer,
    even sample indices get ``floor(mu*n)`` and odd ones one more.
    """

    mu: float = 4.25
    m: int | None = None
    allow_duplicates: bool = True

    def clause_count(self, n: int, index: int = 0) -> int:
        if self.m is not None:
            return int(self.m)
        exact = Fraction(str(self.mu)) * n
        base = math.floor(exact)
        if exact.denominator == 1:
            return base
        return base + (index % 2)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "m": self.m, "allow_duplicates": self.allow_duplicates}


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *key)``; order-independent."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def generate_instance(
    n: int,
    k: int,
    rule: EnsembleRule | int | float = EnsembleRule(),
    rng: np.random.Generator | int | None = None,
    index: int = 0,
    meta: dict | None = None,
) -> Instance:
    """Draw one random k-SAT instance.

    ``rule`` may be an :class:`EnsembleRule`, an int (fixed ``m``) or a float
    (clause ratio). Each clause picks ``k`` distinct variables uniformly and
    negates each with probability 1/2.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if isinstance(rule, bool):
        raise TypeError("rule must be an EnsembleRule, int or float")
    if isinstance(rule, int):
        rule = EnsembleRule(m=rule)
    elif isinstance(rule, float):
        rule = EnsembleRule(mu=rule)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    m = rule.clause_count(n, index)
    if m < 0:
        raise ValueError(f"clause count must be nonnegative, got {m}")
    if not rule.allow_duplicates and m > math.comb(n, k) * 2**k:
        raise ValueError(f"cannot draw {m} distinct clauses with n={n}, k={k}")

    clauses: list[Clause] = []
    seen: set[frozenset] = set()
    while len(clauses) < m:
        vs = rng.choice(n, size=k, replace=False)
        negs = rng.random(k) < 0.5
        clause = Clause(tuple(vs.tolist()), tuple(negs.tolist()))
        if not rule.allow_duplicates:
            key = frozenset(clause.literals())
            if key in seen:
                continue
            seen.add(key)
        clauses.append(clause)
    info = {"k": k, "index": index, **rule.to_dict()}
    info.update(meta or {})
    return Instance(n=n, k=k, clauses=clauses, meta=info)


def enumerate_solutions(instance: Instance) -> list[int]:
    """All zero-cost assignments in ascending order; also stored on the instance."""
    n = instance.n
    if n > MAX_ENUMERATE_VARS:
        raise CapabilityError(f"exhaustive solve limited to n <= {MAX_ENUMERATE_VARS}, got {n}")
    if n <= _CHUNK_VARS or n <= MAX_TABLE_VARS and instance._costs is not None:
        sols = np.flatnonzero(instance.cost_table() == 0).tolist()
    else:
        sols = _enumerate_chunked(instance)
    instance.solutions = sols
    return sols


def _enumerate_chunked(instance: Instance) -> list[int]:
    # fix the high n - _CHUNK_VARS bits, reduce every clause, tabulate the rest
    n, low = instance.n, _CHUNK_VARS
    out: list[int] = []
    for prefix in range(2 ** (n - low)):
        reduced = []
        for c in instance.clauses:
            keep_v, keep_neg, sat = [], [], False
            for v, neg in zip(c.vars, c.negated):
                if v >= low:
                    if ((prefix >> (v - low)) & 1) != neg:
                        sat = True
                        break
                else:
                    keep_v.append(v)
                    keep_neg.append(neg)
            if not sat:
                reduced.append(Clause(tuple(keep_v), tuple(keep_neg)))
        table = np.ones(2**low, dtype=bool)
        cube = table.reshape((2,) * low)
        for c in reduced:
            idx: list = [slice(None)] * low
            for v, neg in zip(c.vars, c.negated):
                idx[low - 1 - v] = 1 if neg else 0
            cube[tuple(idx)] = False
        base = prefix << low
        out.extend((np.flatnonzero(table) + base).tolist())
    return out


def generate_soluble_ensemble(
    n: int,
    count: int,
    rule: EnsembleRule = EnsembleRule(),
    seed: int = 0,
    k: int = 3,
    max_attempts: int = 100_000,
) -> list[Instance]:
    """Random instances filtered to those with at least one solution.

    Slot ``i`` keeps drawing from substream ``(n, i, attempt)`` until a soluble
    instance turns up, so each slot is reproducible on its own.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    return [soluble_instance(n, i, rule, seed, k, max_attempts) for i in range(count)]


def soluble_instance(
    n: int, index: int, rule: EnsembleRule = EnsembleRule(), seed: int = 0, k: int = 3,
    max_attempts: int = 100_000,
) -> Instance:
    for attempt in range(max_attempts):
        rng = substream(seed, n, index, attempt)
        inst = generate_instance(
            n, k, rule, rng, index=index,
            meta={"seed": seed, "attempt": attempt, "id": f"n{n}-s{seed}-i{index}"},
        )
        if enumerate_solutions(inst):
            return inst
    raise RuntimeError(f"no soluble instance after {max_attempts} attempts (n={n}, index={index})")


# --- DIMACS ---------------------------------------------------------------


def write_dimacs(instance: Instance) -> str:
    meta = dict(instance.meta)
    meta["k"] = instance.k
    if instance.solutions is not None:
        meta["solution_count"] = len(instance.solutions)
    lines = [f"{META_PREFIX} {json.dumps(meta, sort_keys=True)}", f"p cnf {instance.n} {instance.m}"]
    lines += [" ".join(map(str, c.literals())) + " 0" for c in instance.clauses]
    return "\n".join(lines) + "\n"


def read_dimacs(text: str) -> Instance:
    meta: dict = {}
    header: tuple[int, int] | None = None
    clauses: list[Clause] = []
    current: list[int] = []
    current_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(META_PREFIX):
            try:
                meta.update(json.loads(line[len(META_PREFIX):]))
            except json.JSONDecodeError as e:
                raise ParseError(f"bad metadata comment: {e}", lineno) from None
            continue
        if line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if header is not None:
                raise ParseError("duplicate header", lineno)
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"malformed header {line!r}", lineno)
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise ParseError(f"malformed header {line!r}", lineno) from None
            if header[0] < 0 or header[1] < 0:
                raise ParseError("negative counts in header", lineno)
            continue
        if header is None:
            raise ParseError("clause before header", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"bad literal {tok!r}", lineno) from None
            if lit == 0:
                clauses.append(_make_clause(current, current_line or lineno))
                current = []
                current_line = 0
                continue
            if abs(lit) > header[0]:
                raise ParseError(f"literal {lit} out of range for {header[0]} variables", lineno)
            if not current:
                current_line = lineno
            current.append(lit)
    if header is None:
        raise ParseError("missing 'p cnf' header")
    if current:
        clauses.append(_make_clause(current, current_line))
    n, m = header
    if len(clauses) != m:
        raise ParseError(f"header declares {m} clauses, found {len(clauses)}")
    widths = {c.k for c in clauses}
    if len(widths) > 1:
        raise ParseError(f"mixed clause widths {sorted(widths)}")
    k = widths.pop() if widths else int(meta.get("k", 0))
    solution_count = meta.pop("solution_count", None)
    meta.pop("k", None)
    inst = Instance(n=n, k=k, clauses=clauses, meta=meta)
    if solution_count is not None:
        inst.meta["solution_count"] = solution_count
    return inst


def _make_clause(lits: list[int], lineno: int) -> Clause:
    try:
        return Clause.from_literals(lits)
    except ValueError as e:
        raise ParseError(str(e), lineno) from None


def save_ensemble(instances: Sequence[Instance], directory: str | Path) -> Path:
    """Write one ``.cnf`` per instance plus ``manifest.jsonl``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = directory / "manifest.jsonl"
    with manifest.open("w") as fh:
        for inst in instances:
            path = directory / f"{inst.id}.cnf"
            path.write_text(write_dimacs(inst))
            record = {
                "id": inst.id,
                "n": inst.n,
                "m": inst.m,
                "k": inst.k,
                "seed": inst.meta.get("seed"),
                "solution_count": None if inst.solutions is None else len(inst.solutions),
                "path": path.name,
            }
            fh.write(json.dumps(record) + "\n")
    return manifest


def load_ensemble(manifest: str | Path, solve: bool = True) -> list[Instance]:
    manifest = Path(manifest)
    out = []
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        inst = read_dimacs((manifest.parent / rec["path"]).read_text())
        inst.meta.setdefault("id", rec["id"])
        if solve:
            enumerate_solutions(inst)
        out.append(inst)
    return out
