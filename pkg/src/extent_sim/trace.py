"""Trace-driven memory layer: trace text format, the per-block quality
table, word-store simulation and baseline comparison."""

from __future__ import annotations

import enum
import io
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .driver import DriverConfig, QualityLevel
from .engine import PathTable, WriteConfig, write_bits
from .errors import ParseError, UsageError

WORD_BITS = 64
WORD_MASK = (1 << WORD_BITS) - 1
TRANSITIONS = ("0->0", "0->1", "1->0", "1->1")


class TraceOp(enum.Enum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True)
class TraceRecord:
    op: TraceOp
    address: int
    data: Optional[int] = None
    priority: Optional[QualityLevel] = None

    def __post_init__(self):
        if not 0 <= self.address <= WORD_MASK:
            raise UsageError("address must be a 64-bit unsigned value")
        if self.op is TraceOp.WRITE:
            if self.data is None or not 0 <= self.data <= WORD_MASK:
                raise UsageError("write records need a 64-bit data word")
        elif self.data is not None or self.priority is not None:
            raise UsageError("read records carry no data or priority")

    def __str__(self):
        if self.op is TraceOp.READ:
            return f"R 0x{self.address:x}"
        tail = f" {self.priority.value}" if self.priority is not None else ""
        return f"W 0x{self.address:x} 0x{self.data:016X}{tail}"


@dataclass(frozen=True)
class TraceConfig:
    table_capacity: int = 4096
    block_bytes: int = 64
    default_level: QualityLevel = QualityLevel.Q00
    initial_store: str = "zero"  # or "random"

    def __post_init__(self):
        if self.table_capacity < 1 or self.block_bytes < 1:
            raise UsageError("table capacity and block size must be positive")
        if self.initial_store not in ("zero", "random"):
            raise UsageError("initial_store must be 'zero' or 'random'")


def _tokens(line: str):
    """Whitespace-separated tokens with their 1-based start columns."""
    out, i, n = [], 0, len(line)
    while i < n:
        while i < n and line[i] in " \t":
            i += 1
        if i >= n:
            break
        j = i
        while j < n and line[j] not in " \t":
            j += 1
        out.append((line[i:j], i + 1))
        i = j
    return out


def _hex(tok: str, col: int, lineno: int, what: str) -> int:
    body = tok[2:] if tok[:2].lower() == "0x" else tok
    try:
        if not body or body.startswith(("+", "-", "_")):
            raise ValueError
        value = int(body, 16)
    except ValueError:
        raise ParseError(f"invalid hexadecimal {what} {tok!r}", lineno, col) from None
    if value > WORD_MASK:
        raise ParseError(f"{what} {tok!r} exceeds 64 bits", lineno, col)
    return value


def parse_trace(source) -> list:
    """Parse trace text (a string or an iterable of lines)."""
    lines = io.StringIO(source) if isinstance(source, str) else source
    records = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.isascii():
            raise ParseError("non-ASCII character", lineno)
        toks = _tokens(line)
        if not toks or toks[0][0].startswith("#"):
            continue
        op, col = toks[0]
        if op == "R":
            if len(toks) != 2:
                bad = toks[2][1] if len(toks) > 2 else len(line) + 1
                raise ParseError("read expects exactly one address", lineno, bad)
            records.append(TraceRecord(TraceOp.READ, _hex(*toks[1], lineno, "address")))
        elif op == "W":
            if len(toks) not in (3, 4):
                bad = toks[4][1] if len(toks) > 4 else len(line) + 1
                raise ParseError("write expects address, data and an optional priority", lineno, bad)
            addr = _hex(*toks[1], lineno, "address")
            data = _hex(*toks[2], lineno, "data")
            prio = None
            if len(toks) == 4:
                tag, tcol = toks[3]
                if tag not in ("00", "01", "10", "11"):
                    raise ParseError(f"invalid priority {tag!r}", lineno, tcol)
                prio = QualityLevel(tag)
            records.append(TraceRecord(TraceOp.WRITE, addr, data, prio))
        else:
            raise ParseError(f"unknown operation {op!r}", lineno, col)
    return records


def format_trace(records: Iterable[TraceRecord]) -> str:
    return "".join(f"{r}\n" for r in records)


class ExtentTable:
    """Per-block quality levels with first-in first-out eviction."""

    def __init__(self, capacity: int = 4096):
        if capacity < 1:
            raise UsageError("table capacity must be positive")
        self.capacity = capacity
        self._entries: OrderedDict = OrderedDict()

    def __len__(self):
        return len(self._entries)

    def lookup(self, block: int) -> Optional[QualityLevel]:
        return self._entries.get(block)

    def insert(self, block: int, level: QualityLevel) -> None:
        if block in self._entries:
            self._entries[block] = level
            return
        if len(self._entries) >= self.capacity:
            self._entries.popitem(last=False)
        self._entries[block] = level


def quality_decode(rec: TraceRecord, table: ExtentTable, default: QualityLevel, block_bytes: int = 64):
    if rec.op is not TraceOp.WRITE:
        raise UsageError("only write records carry a quality level")
    block = rec.address // block_bytes
    if rec.priority is not None:
        table.insert(block, rec.priority)
        return rec.priority
    hit = table.lookup(block)
    return default if hit is None else hit


def word_to_bits(word: int) -> np.ndarray:
    raw = np.frombuffer(int(word).to_bytes(8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")


def bits_to_word(bits) -> int:
    return int.from_bytes(np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes(), "little")


@dataclass
class RunReport:
    energy: float = 0.0
    latency: float = 0.0
    writes: int = 0
    reads: int = 0
    skipped_bits: int = 0
    failed_bits: int = 0
    attempted_bits: int = 0
    transitions: dict = field(default_factory=lambda: {t: 0 for t in TRANSITIONS})
    level_writes: dict = field(default_factory=lambda: {lv.value: 0 for lv in QualityLevel})
    # (write index, address, mask of bits that kept their old value)
    failure_log: list = field(default_factory=list)
    write_energies: list = field(default_factory=list)
    final_store: dict = field(default_factory=dict)
    # energy and latency of the attempted cell transitions alone
    transition_energy: float = 0.0
    transition_latency: float = 0.0

    @property
    def effective_wer(self) -> float:
        return self.failed_bits / self.attempted_bits if self.attempted_bits else 0.0

    @property
    def written_bits(self) -> int:
        return sum(self.transitions.values())

    def rows(self):
        rows = [
            ("writes", self.writes),
            ("reads", self.reads),
            ("energy_pj", f"{self.energy * 1e12:.6f}"),
            ("latency_ns", f"{self.latency * 1e9:.6f}"),
            ("energy_per_write_pj", f"{self.energy_per_write * 1e12:.6f}"),
            ("latency_per_write_ns", f"{self.latency_per_write * 1e9:.6f}"),
            ("energy_per_cell_write_pj", f"{self.energy_per_cell_write * 1e12:.6f}"),
            ("latency_per_cell_write_ns", f"{self.latency_per_cell_write * 1e9:.6f}"),
            ("skipped_bits", self.skipped_bits),
            ("attempted_bits", self.attempted_bits),
            ("failed_bits", self.failed_bits),
            ("effective_wer", f"{self.effective_wer:.6e}"),
        ]
        rows += [(f"transition_{t.replace('->', 'to')}", n) for t, n in self.transitions.items()]
        rows += [(f"writes_q{lv}", n) for lv, n in self.level_writes.items()]
        return rows

    @property
    def energy_per_cell_write(self) -> float:
        return self.transition_energy / self.attempted_bits if self.attempted_bits else 0.0

    @property
    def latency_per_cell_write(self) -> float:
        return self.transition_latency / self.attempted_bits if self.attempted_bits else 0.0

    @property
    def energy_per_write(self) -> float:
        return self.energy / self.writes if self.writes else 0.0

    @property
    def latency_per_write(self) -> float:
        return self.latency / self.writes if self.writes else 0.0

    def to_csv(self) -> str:
        return "metric,value\n" + "".join(f"{k},{v}\n" for k, v in self.rows())

    def summary(self) -> str:
        frac = {t: (n / self.written_bits if self.written_bits else 0.0) for t, n in self.transitions.items()}
        mix = "  ".join(f"{t} {f:.3f}" for t, f in frac.items())
        return (
            f"writes {self.writes}, reads {self.reads}\n"
            f"energy {self.energy * 1e12:.3f} pJ ({self.energy_per_write * 1e12:.3f} pJ/write)\n"
            f"latency {self.latency * 1e9:.3f} ns ({self.latency_per_write * 1e9:.3f} ns/write)\n"
            f"bits: {self.skipped_bits} skipped, {self.attempted_bits} attempted, {self.failed_bits} failed "
            f"(effective WER {self.effective_wer:.3e})\n"
            f"transition mix: {mix}\n"
        )


def _initial_word(mode: str, rng) -> int:
    if mode == "zero":
        return 0
    return int(rng.integers(0, WORD_MASK, dtype=np.uint64, endpoint=True))


def simulate_trace(
    records,
    driver: DriverConfig,
    mtj,
    seed: int,
    *,
    write: WriteConfig = WriteConfig(),
    trace_cfg: TraceConfig = TraceConfig(),
    rng=None,
) -> RunReport:
    """Replay ``records`` against a word store and accumulate the costs."""
    rng = rng if rng is not None else np.random.default_rng(np.random.SeedSequence([seed, 0]))
    init_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    tables = {}
    table = ExtentTable(trace_cfg.table_capacity)
    store: dict = {}
    rep = RunReport()
    cell_e, cell_t = [], []
    for rec in records:
        if rec.op is TraceOp.READ:
            rep.reads += 1
            continue
        level = quality_decode(rec, table, trace_cfg.default_level, trace_cfg.block_bytes)
        if level not in tables:
            tables[level] = PathTable(level, driver, mtj, write)
        old_word = store.get(rec.address)
        if old_word is None:
            old_word = _initial_word(trace_cfg.initial_store, init_rng)
        old, new = word_to_bits(old_word), word_to_bits(rec.data)
        res = write_bits(old, new, tables[level], rng)

        idx = old * 2 + new
        counts = np.bincount(idx, minlength=4)
        for t, c in zip(TRANSITIONS, counts):
            rep.transitions[t] += int(c)
        e = math.fsum(res.energy)
        rep.write_energies.append(e)
        cell_e.append(math.fsum(res.energy[res.attempted]))
        cell_t.append(math.fsum(res.latency[res.attempted]))
        rep.latency += float(res.latency.max())
        rep.skipped_bits += int(res.skipped.sum())
        rep.attempted_bits += int(res.attempted.sum())
        n_failed = int(res.failed.sum())
        if n_failed:
            rep.failed_bits += n_failed
            rep.failure_log.append((rep.writes, rec.address, bits_to_word(res.failed)))
        rep.level_writes[level.value] += 1
        store[rec.address] = bits_to_word(res.bits)
        rep.writes += 1
    rep.energy = math.fsum(rep.write_energies)
    rep.transition_energy = math.fsum(cell_e)
    rep.transition_latency = math.fsum(cell_t)
    rep.final_store = store
    return rep


def replay_store(records, failure_log) -> dict:
    """Final store implied by the trace and a failure log (zero initial store)."""
    failures = {i: (addr, mask) for i, addr, mask in failure_log}
    store, k = {}, 0
    for rec in records:
        if rec.op is not TraceOp.WRITE:
            continue
        old = store.get(rec.address, 0)
        kept = failures.get(k, (None, 0))[1]
        store[rec.address] = (rec.data & ~kept) | (old & kept)
        k += 1
    return store


def transition_stats(records, initial: int = 0) -> dict:
    """Fractions of per-bit transitions requested by the writes of a trace."""
    store = {}
    counts = np.zeros(4, dtype=np.int64)
    for rec in records:
        if rec.op is not TraceOp.WRITE:
            continue
        old = word_to_bits(store.get(rec.address, initial))
        new = word_to_bits(rec.data)
        counts += np.bincount(old * 2 + new, minlength=4)
        store[rec.address] = rec.data
    total = int(counts.sum())
    if total == 0:
        return {t: 0.0 for t in TRANSITIONS}
    return {t: int(c) / total for t, c in zip(TRANSITIONS, counts)}


def parse_mix(text: str) -> dict:
    """``"0->1=0.8,0->0=0.2"`` (``01=0.8`` is accepted as well)."""
    mix = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, sep, value = part.partition("=")
        if not sep:
            key, sep, value = part.partition(":")
        key = key.strip().replace("->", "")
        if key not in ("00", "01", "10", "11"):
            raise UsageError(f"unknown transition {key!r} in mix")
        try:
            mix[f"{key[0]}->{key[1]}"] = float(value)
        except ValueError as exc:
            raise UsageError(f"invalid share {value!r} in mix") from exc
    return mix


def _validate_mix(mix: dict) -> dict:
    full = {t: 0.0 for t in TRANSITIONS}
    for k, v in mix.items():
        if k not in full:
            raise UsageError(f"unknown transition {k!r}")
        if not v >= 0:
            raise UsageError("transition shares must be non-negative")
        full[k] = float(v)
    if abs(sum(full.values()) - 1.0) > 1e-9:
        raise UsageError(f"transition shares sum to {sum(full.values())!r}, expected 1")
    return full


def generate_synthetic_trace(
    n_writes: int,
    mix: dict,
    seed: int,
    *,
    level: Optional[QualityLevel] = None,
    base_address: int = 0x1000,
) -> list:
    """Writes whose per-bit transitions follow ``mix`` (zero initial store).

    Each write goes to a fresh address or to a stored word whose count of
    ones keeps the running share of old ones at ``p(1->0) + p(1->1)``; each
    bit then flips with the probability conditioned on its old value. A mix
    that reads ones but never creates them gets one all-ones priming write.
    """
    if n_writes < 0:
        raise UsageError("n_writes must be non-negative")
    m = _validate_mix(mix)
    if m["1->0"] > m["0->1"] + 1e-9:
        raise UsageError("a zero-initialised store cannot lose more ones (1->0) than it gains (0->1)")
    s1 = m["1->0"] + m["1->1"]
    q0 = m["0->1"] / (m["0->0"] + m["0->1"]) if s1 < 1 else 0.0
    q1 = m["1->0"] / s1 if s1 > 0 else 0.0
    rng = np.random.default_rng(seed)
    records = []
    # stored words bucketed by their number of ones
    buckets = [[] for _ in range(WORD_BITS + 1)]
    where = {}
    next_fresh = base_address
    ones_seen = bits_seen = 0

    def take(k):
        lst = buckets[k]
        i = int(rng.integers(0, len(lst)))
        addr = lst[i]
        lst[i] = lst[-1]
        where[lst[i]] = (k, i)
        lst.pop()
        del where[addr]
        return addr

    def emit(addr, old, value):
        nonlocal ones_seen, bits_seen
        ones_seen += bin(old).count("1")
        bits_seen += WORD_BITS
        k = bin(value).count("1")
        where[addr] = (k, len(buckets[k]))
        buckets[k].append(addr)
        records.append(TraceRecord(TraceOp.WRITE, addr, value, level))

    values = {}
    if s1 > 0 and q0 == 0 and n_writes > 0:
        values[next_fresh] = WORD_MASK
        emit(next_fresh, 0, WORD_MASK)
        next_fresh += 8
    while len(records) < n_writes:
        need = int(round(s1 * (bits_seen + WORD_BITS) - ones_seen))
        need = min(WORD_BITS, max(0, need))
        k = min((j for j in range(1, WORD_BITS + 1) if buckets[j]), key=lambda j: abs(j - need), default=0)
        if abs(k - need) >= need:
            addr, old = next_fresh, 0
            next_fresh += 8
        else:
            addr = take(k)
            old = values[addr]
        old_bits = word_to_bits(old)
        u = rng.random(WORD_BITS)
        flip = np.where(old_bits == 1, u < q1, u < q0)
        value = bits_to_word(old_bits ^ flip.astype(np.uint8))
        values[addr] = value
        emit(addr, old, value)
    return records


@dataclass(frozen=True)
class Baseline:
    energy: float  # J per write
    latency: float  # s per write
    area: float  # mm^2, reported verbatim


BASELINES = {
    "basic": Baseline(1046.0e-12, 19.0e-9, 1.31),
    "ref18": Baseline(503.6e-12, 2.2e-9, 1.37),
    "ref21": Baseline(393.3e-12, 7.3e-9, 1.31),
    "ref40": Baseline(356.9e-12, 7.8e-9, 1.41),
}
EXTENT_AREA = 1.46


@dataclass(frozen=True)
class Improvement:
    name: str
    energy: float  # fraction, 1 - ours/baseline
    latency: float
    area_ours: float
    area_baseline: float


def compare_baselines(energy_per_write: float, latency_per_write: float, baselines=None) -> list:
    """Fractional improvement of the given per-write averages over each baseline."""
    baselines = BASELINES if baselines is None else baselines
    missing = {"basic", "ref18", "ref21", "ref40"} - set(baselines)
    if missing:
        raise UsageError(f"baseline table lacks {sorted(missing)}")
    out = []
    for name, b in baselines.items():
        if b.energy == 0 or b.latency == 0:
            raise UsageError(f"baseline {name!r} has a zero entry")
        out.append(
            Improvement(name, 1.0 - energy_per_write / b.energy, 1.0 - latency_per_write / b.latency, EXTENT_AREA, b.area)
        )
    return out


def improvements_csv(rows) -> str:
    lines = ["baseline,energy_improvement_pct,latency_improvement_pct,area_mm2,baseline_area_mm2"]
    for r in rows:
        lines.append(f"{r.name},{r.energy * 100:.4f},{r.latency * 100:.4f},{r.area_ours},{r.area_baseline}")
    return "\n".join(lines) + "\n"
