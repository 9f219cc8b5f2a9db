"""Grid search over the Lipschitz parameter, one seed per grid value."""
import math
from dataclasses import dataclass, field

from ..errors import TuningError

DEFAULT_GRID = (0.0125, 0.025, 0.05, 0.1, 0.25, 0.5)


@dataclass
class GridOutcome:
    L_param: float
    status: str
    final_objective: float
    passes_to_target: float = None


@dataclass
class TuningResult:
    best: float
    criterion: str
    outcomes: list = field(default_factory=list)
    traces: dict = field(default_factory=dict, repr=False)

    def header(self):
        return {f"grid[{o.L_param!r}]": f"{o.status}/{o.final_objective!r}/{o.passes_to_target}"
                for o in self.outcomes}


def tune_L(run_one, grid=DEFAULT_GRID, criterion="final_objective", target=None):
    """Pick the best grid value of ``run_one(L_param) -> SolverTrace``.

    ``criterion="final_objective"`` takes the smallest final objective among
    non-diverged runs.  ``criterion="passes"`` takes the fewest passes to reach
    gap <= ``target`` and falls back to the final objective for ties and for
    runs that never reach it.
    """
    grid = list(grid)
    if not grid:
        raise TuningError("empty tuning grid")
    if any(not v > 0 for v in grid):
        raise TuningError("tuning grid values must be positive")
    if criterion not in ("final_objective", "passes"):
        raise TuningError(f"unknown tuning criterion {criterion!r}")
    if criterion == "passes" and target is None:
        raise TuningError("criterion 'passes' needs a gap target")
    outcomes, traces = [], {}
    for L in grid:
        tr = run_one(L)
        f = tr.final_objective
        p = tr.passes_to_gap(target) if target is not None else None
        outcomes.append(GridOutcome(L, tr.status, f, p))
        traces[L] = tr
    alive = [o for o in outcomes if o.status != "diverged" and math.isfinite(o.final_objective)]
    if not alive:
        raise TuningError(f"every grid value diverged: {grid}")
    if criterion == "passes":
        key = lambda o: (math.inf if o.passes_to_target is None else o.passes_to_target,
                         o.final_objective)
    else:
        key = lambda o: o.final_objective
    best = min(alive, key=key).L_param
    return TuningResult(best, criterion, outcomes, traces)
