"""Per-step convergence records and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, fields

COLUMNS = ("k", "eta_k", "adi_steps", "lin_solves", "xi_k", "rel_riccati_resid", "seconds")
TOTAL_COLUMNS = ("n_kn", "n_adi", "n_lin_solve", "n_ls", "time_total")


@dataclass(frozen=True)
class LogRow:
    k: int
    eta_k: float
    adi_steps: int
    lin_solves: int
    xi_k: float
    rel_riccati_resid: float
    seconds: float


@dataclass
class ConvergenceLog:
    """Rows for the Newton steps taken; ``rel_riccati_resid`` is the value after the step."""

    rows: list = field(default_factory=list)
    initial_residual: float = 1.0

    def append(self, row: LogRow):
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    @property
    def residuals(self):
        """Relative residuals including the initial value 1."""
        return [self.initial_residual] + [r.rel_riccati_resid for r in self.rows]

    def totals(self) -> dict:
        return {
            "n_kn": len(self.rows),
            "n_adi": sum(r.adi_steps for r in self.rows),
            "n_lin_solve": sum(r.lin_solves for r in self.rows),
            "n_ls": sum(1 for r in self.rows if r.xi_k < 1),
            "time_total": sum(r.seconds for r in self.rows),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r.k, repr(r.eta_k), r.adi_steps, r.lin_solves, repr(r.xi_k), repr(r.rel_riccati_resid), repr(r.seconds)])
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ConvergenceLog":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"unexpected log columns {reader.fieldnames}")
        types = {f.name: f.type for f in fields(LogRow)}
        log = cls()
        for rec in reader:
            log.append(LogRow(**{k: (int(v) if types[k] in (int, "int") else float(v)) for k, v in rec.items()}))
        return log

    def as_dicts(self):
        return [asdict(r) for r in self.rows]
