"""Result records shared by the solvers: certificates and iteration traces."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

from flint import arb

from .mp import format_sci, log10


def plain(value, digits=8):
    """JSON-ready copy of ``value`` with Arb numbers rendered as decimal strings."""
    if isinstance(value, arb):
        return format_sci(value, digits)
    if isinstance(value, dict):
        return {str(k): plain(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v, digits) for v in value]
    if isinstance(value, Enum):
        return value.value
    return value


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGING = "diverging"


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of a quadratic-convergence test at one point.

    ``u`` is the certificate value compared against ``threshold``; ``epsilon``
    is the residual it was built from, ``kappa`` the inverse-separation factor
    and ``K`` the spectral magnitude factor.  ``details`` carries auxiliary
    quantities specific to a test (for instance the residual a test ignores).
    """

    epsilon: arb
    kappa: arb
    K: arb
    u: arb
    threshold: float
    satisfied: bool
    details: dict = field(default_factory=dict)

    def as_dict(self, digits=8):
        out = {
            "epsilon": format_sci(self.epsilon, digits),
            "kappa": format_sci(self.kappa, digits),
            "K": format_sci(self.K, digits),
            "u": format_sci(self.u, digits),
            "threshold": self.threshold,
            "satisfied": self.satisfied,
        }
        out.update(plain(self.details, digits))
        return out


@dataclass
class TraceRow:
    """Quantities evaluated at the iterate entering Newton iteration ``iteration``."""

    iteration: int
    certificate: arb | None
    err_res: arb
    wall_time: float = 0.0


@dataclass
class IterationTrace:
    """Per-iteration log of a solver run.

    Row ``i`` (1-based) holds the certificate value and residual of the point
    on which iteration ``i`` acts, i.e. after ``i - 1`` updates.  The residual
    after the last update is ``final_err_res``, so a run of ``k`` iterations
    yields the residual sequence ``eps_0 .. eps_k`` via :meth:`residuals`.
    """

    solver: str
    metadata: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    status: SolveStatus = SolveStatus.MAX_ITER
    certified: bool = False
    final_err_res: arb | None = None
    initial_certificate: CertificateReport | None = None

    def add(self, iteration, certificate, err_res, wall_time=0.0):
        if self.rows and iteration <= self.rows[-1].iteration:
            raise ValueError("trace iterations must be strictly increasing")
        if err_res < 0:
            raise ValueError("err_res must be non-negative")
        self.rows.append(TraceRow(iteration, certificate, err_res, wall_time))

    @property
    def iterations(self) -> int:
        return len(self.rows)

    def residuals(self) -> list:
        out = [r.err_res for r in self.rows]
        if self.final_err_res is not None:
            out.append(self.final_err_res)
        return out

    def log10_residuals(self) -> list:
        return [log10(e) for e in self.residuals()]

    # serialization -----------------------------------------------------------

    def to_csv(self, digits=8) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "certificate", "err_res"])
        for r in self.rows:
            cert = "" if r.certificate is None else format_sci(r.certificate, digits)
            w.writerow([r.iteration, cert, format_sci(r.err_res, digits)])
        return buf.getvalue()

    def to_dict(self, digits=8, wall_time=True) -> dict:
        rows = []
        for r in self.rows:
            row = {
                "iteration": r.iteration,
                "certificate": None if r.certificate is None else format_sci(r.certificate, digits),
                "err_res": format_sci(r.err_res, digits),
            }
            if wall_time:
                row["wall_time"] = round(r.wall_time, 6)
            rows.append(row)
        return {
            "solver": self.solver,
            "metadata": plain(self.metadata, digits),
            "status": self.status.value,
            "certified": self.certified,
            "initial_certificate": None if self.initial_certificate is None
            else self.initial_certificate.as_dict(digits),
            "rows": rows,
            "final_err_res": None if self.final_err_res is None else format_sci(self.final_err_res, digits),
        }

    def summary(self) -> str:
        last = self.final_err_res
        return (f"{self.solver}: {self.iterations} iterations, status={self.status.value}, "
                f"certified={self.certified}, final err_res="
                f"{'n/a' if last is None else format_sci(last, 3)}")


def digit_doubling(residuals, ratio=1.9, start=1e-4, floor=None) -> bool:
    """True when the residuals end below ``start`` with doubling digit counts.

    Checks ``log10(e[i+1]) <= ratio * log10(e[i])`` for consecutive residuals
    once ``e[i] <= start``.  Pairs whose successor already sits at or below
    ``floor`` (the working-precision noise level) are skipped because digits
    cannot keep doubling past the precision.
    """
    logs = [log10(e) for e in residuals]
    if not logs or logs[-1] > math.log10(start):
        return False
    limit = -math.inf if floor is None else log10(floor)
    for a, b in zip(logs, logs[1:]):
        if a > math.log10(start) or b <= limit:
            continue
        if b > ratio * a:
            return False
    return True


__all__ = ["SolveStatus", "CertificateReport", "TraceRow", "IterationTrace",
           "digit_doubling", "plain"]
