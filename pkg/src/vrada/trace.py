"""Per-epoch solver traces and their CSV form."""
import csv
import math
from dataclasses import dataclass, field

COLUMNS = ("solver", "seed", "epoch", "passes", "elapsed_ms", "objective", "gap", "A_s")


@dataclass
class TraceRow:
    solver: str
    seed: int
    epoch: int
    passes: float
    elapsed_ms: float
    objective: float
    gap: float = None
    A_s: float = None

    def cells(self, timing=True):
        return [
            self.solver,
            str(self.seed),
            str(self.epoch),
            f"{self.passes:.3f}",
            f"{self.elapsed_ms:.3f}" if timing else "",
            _num(self.objective),
            _num(self.gap),
            _num(self.A_s),
        ]


def _num(x):
    return "" if x is None else repr(float(x))


@dataclass
class SolverTrace:
    solver: str
    seed: int
    header: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    status: str = "running"
    x: object = None
    state: object = None

    def add(self, **kw):
        self.rows.append(TraceRow(solver=self.solver, seed=self.seed, **kw))

    @property
    def objectives(self):
        return [r.objective for r in self.rows]

    @property
    def gaps(self):
        return [r.gap for r in self.rows]

    @property
    def final_objective(self):
        return self.rows[-1].objective if self.rows else math.inf

    def passes_to_gap(self, target):
        """Passes at the first row whose gap is <= target, or None."""
        for r in self.rows:
            if r.gap is not None and r.gap <= target:
                return r.passes
        return None


def write_csv(traces, stream, header=None, timing=True):
    """Write ``# key=value`` header lines, the column line, then every trace row."""
    for key, value in (header or {}).items():
        stream.write(f"# {key}={value}\n")
    for t in traces:
        for key, value in t.header.items():
            stream.write(f"# {t.solver}[{t.seed}].{key}={value}\n")
        stream.write(f"# {t.solver}[{t.seed}].status={t.status}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    for t in traces:
        for r in t.rows:
            writer.writerow(r.cells(timing))


def read_csv(stream):
    """Parse a trace CSV back into (header dict, list of row dicts)."""
    header, body = {}, []
    for line in stream:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return header, rows
