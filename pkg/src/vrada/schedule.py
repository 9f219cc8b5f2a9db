"""Epoch weights A_s, a_s and their guaranteed lower bounds.

A_0 = 0, A_1 = a_1 = 1/L and, for s >= 2,

    A_s = A_{s-1} + sqrt(m A_{s-1} (1 + sigma A_{s-1}) / (2L)),   a_s = A_s - A_{s-1}.

The optimality gap after epoch s is bounded by ||x0 - x*||^2 / (2 A_s), so
the lower bounds below translate directly into convergence rates.

The recursion is carried out in 420-digit decimal arithmetic and exposed as
correctly rounded floats.  The margin A_s - (1 + sqrt(sigma m/(2L))) A_{s-1}
stays roughly constant while A_s grows geometrically, so in double precision
it drops below one ulp once A_s passes about 1e18; the decimal copy keeps the
recursion exact up to the saturation level.
"""
import decimal
import math
from dataclasses import dataclass, field

from .errors import AuditError, ScheduleSaturated

SATURATION = 1e300
BOUND_RTOL = 1e-12
_CTX = decimal.Context(prec=420, Emax=10 ** 6, Emin=-10 ** 6)
_SAT = decimal.Decimal(SATURATION)


def _dec(x):
    return _CTX.create_decimal_from_float(float(x)) if isinstance(x, float) else \
        _CTX.create_decimal(x)


def next_A_exact(A_prev, m, L, sigma):
    """One schedule step in decimal arithmetic; inputs may be floats or Decimals."""
    A_prev, L, sigma = _dec(A_prev), _dec(L), _dec(sigma)
    if not A_prev > 0:
        raise ValueError("A_prev must be positive")
    if m < 1 or not L > 0 or sigma < 0:
        raise ValueError("need m >= 1, L > 0, sigma >= 0")
    c = _CTX
    inner = c.divide(c.multiply(c.multiply(_dec(m), A_prev), c.add(1, c.multiply(sigma, A_prev))),
                     c.multiply(2, L))
    A = c.add(A_prev, c.sqrt(inner))
    if A > _SAT:
        raise ScheduleSaturated(f"A_s would exceed {SATURATION:g} (A_prev={float(A_prev):g})")
    return A


def next_A(A_prev, m, L, sigma):
    """One schedule step, correctly rounded; raises :class:`ScheduleSaturated` past 1e300."""
    return float(next_A_exact(A_prev, m, L, sigma))


def s0_for(m):
    """1 + ceil(log2 log2 (m/2)) for m >= 3, computed exactly; None below 3.

    ceil(log2 log2 (m/2)) is the least integer t with m <= 2**(2**t + 1),
    and t >= 0 whenever m >= 3.
    """
    if m < 3:
        return None
    t = 0
    while m > 2 ** (2 ** t + 1):
        t += 1
    return 1 + t


def _power(base, exponent):
    # base >= 1; saturate instead of raising for huge exponents
    e = exponent * math.log(base)
    return math.exp(e) if e < 700.0 else math.inf


@dataclass
class EpochSchedule:
    """Lazily extended schedule; ``A[s]`` and ``a[s]`` for s = 0..epochs.

    ``a[0]`` is a placeholder 0 (a_s is defined from s = 1).  ``exact`` holds
    the decimal values that ``A`` rounds.
    """

    m: int
    L: float
    sigma: float = 0.0
    A: list = field(default_factory=list)
    a: list = field(default_factory=list)
    saturated: bool = False
    exact: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.m < 1 or not self.L > 0 or self.sigma < 0:
            raise ValueError("need m >= 1, L > 0, sigma >= 0")
        if not self.A:
            A1 = _CTX.divide(1, _dec(self.L))
            self.exact = [_dec(0), A1]
            self.A = [0.0, float(A1)]
            self.a = [0.0, float(A1)]
        elif not self.exact:
            self.exact = [_dec(v) for v in self.A]

    @property
    def epochs(self):
        return len(self.A) - 1

    @property
    def s0(self):
        return s0_for(self.m)

    def extend(self):
        """Append A_{s+1}; sets ``saturated`` and re-raises on saturation."""
        try:
            A = next_A_exact(self.exact[-1], self.m, self.L, self.sigma)
        except ScheduleSaturated:
            self.saturated = True
            raise
        self.a.append(float(_CTX.subtract(A, self.exact[-1])))
        self.exact.append(A)
        self.A.append(float(A))
        return self.A[-1]

    def extend_to(self, s):
        while self.epochs < s:
            self.extend()
        return self

    @property
    def growth(self):
        """1 + sqrt(sigma m / (2L)), the per-epoch ratio lower bound."""
        return 1.0 + math.sqrt(self.sigma * self.m / (2.0 * self.L))

    def growth_exact(self):
        c = _CTX
        return c.add(1, c.sqrt(c.divide(c.multiply(_dec(self.sigma), _dec(self.m)),
                                        c.multiply(2, _dec(self.L)))))

    def ratio_exact(self, s):
        """A_{s+1} / A_s in decimal arithmetic."""
        return _CTX.divide(self.exact[s + 1], self.exact[s])


def growth_lower_bounds(s, sched):
    """(max of the two always-valid bounds, max of the two s >= s0 bounds or None)."""
    if s < 2:
        raise ValueError(f"lower bounds are stated for s >= 2, got s={s}")
    m, L = sched.m, sched.L
    rho = sched.growth
    early = max(
        (m / (2.0 * L)) * (2.0 / m) ** (2.0 ** -(s - 1)),
        _power(rho, s - 1) / L,
    )
    s0 = sched.s0
    late = None
    if s0 is not None and s >= s0:
        late = max(
            (m / (32.0 * L)) * (s - s0 + 2.0 * math.sqrt(2.0)) ** 2,
            (m / (4.0 * L)) * _power(rho, s - s0),
        )
    return early, late


@dataclass
class ScheduleAuditRow:
    epoch: int
    A: float
    bound: float
    family: str

    @property
    def margin(self):
        return self.A / self.bound


@dataclass
class ScheduleAudit:
    rows: list

    @property
    def min_margin(self):
        return min((r.margin for r in self.rows), default=math.inf)

    def to_text(self):
        lines = [f"{'epoch':>6} {'family':>6} {'A_s':>24} {'bound':>24} {'margin':>12}"]
        for r in self.rows:
            lines.append(f"{r.epoch:>6} {r.family:>6} {r.A:>24.17g} {r.bound:>24.17g} {r.margin:>12.6g}")
        return "\n".join(lines)


def audit_schedule(sched, rtol=BOUND_RTOL):
    """Check A_0 = 0, A_1 = 1/L, monotone growth and every lower bound.

    Raises :class:`AuditError` naming the epoch and bound family on failure.
    """
    A = sched.A
    if A[0] != 0.0 or A[1] != 1.0 / sched.L or sched.a[1] != 1.0 / sched.L:
        raise AuditError("schedule initialization", 1, f"A_0={A[0]}, A_1={A[1]}")
    rows = []
    for s in range(2, len(A)):
        if not (A[s] > A[s - 1] and sched.a[s] > 0):
            raise AuditError("schedule monotonicity", s, f"A_s={A[s]} A_(s-1)={A[s - 1]}")
        early, late = growth_lower_bounds(s, sched)
        checks = [("eq11", early)] + ([("eq12", late)] if late is not None else [])
        for family, bound in checks:
            row = ScheduleAuditRow(s, A[s], bound, family)
            if A[s] < bound * (1.0 - rtol):
                raise AuditError(f"schedule lower bound {family}", s,
                                 f"A_s={A[s]:.17g} < bound={bound:.17g}")
            rows.append(row)
    return ScheduleAudit(rows)
