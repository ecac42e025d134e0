"""Grid and sequential tuning of the SeqNorm group counts (g_c, g_m).

Grid search evaluates every pair, ``len(gc) * len(gm)`` configurations.
Sequential tuning first sweeps g_m at g_c = 1, keeps the largest g_m whose
mean validation accuracy is within ``delta`` of the best, then sweeps g_c at
that g_m: ``len(gm) + len(gc)`` configurations.  Each configuration is run
``repeats`` times; equal means are separated by the lower variance.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

TIE_TOL = 1e-12


@dataclass
class TuneResult:
    trial: int
    phase: str
    g_c: int
    g_m: int
    accuracies: list = field(default_factory=list)
    feasible: bool = True
    note: str = ""
    selected: bool = False

    @property
    def mean(self):
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def variance(self):
        return float(np.var(self.accuracies)) if self.accuracies else float("nan")


def best_of(results):
    """Highest mean accuracy; equal means go to the lower variance, then to the earlier trial."""
    results = [r for r in results if r.feasible]
    if not results:
        return None
    top = max(r.mean for r in results)
    tied = [r for r in results if r.mean >= top - TIE_TOL]
    return min(tied, key=lambda r: (r.variance, r.trial))


def select_largest_gm(results, delta):
    """Among results within ``delta`` of the best mean, keep the largest g_m, then :func:`best_of`."""
    results = [r for r in results if r.feasible]
    if not results:
        return None
    top = max(r.mean for r in results)
    band = [r for r in results if r.mean >= top - delta - TIE_TOL]
    gm = max(r.g_m for r in band)
    return best_of([r for r in band if r.g_m == gm])


class _Runner:
    def __init__(self, run_trial, repeats, feasible, workers):
        if repeats < 1:
            raise ValueError("repeats must be >= 1")
        self.run_trial = run_trial
        self.repeats = repeats
        self.feasible = feasible
        self.workers = workers
        self.results = []
        self.trials_run = 0

    def sweep(self, phase, pairs):
        batch = []
        for g_c, g_m in pairs:
            result = TuneResult(len(self.results), phase, g_c, g_m)
            reason = self.feasible(g_c, g_m) if self.feasible else None
            if reason:
                warnings.warn(f"skipping g_c={g_c}, g_m={g_m}: {reason}", RuntimeWarning, stacklevel=3)
                result.feasible, result.note = False, reason
            else:
                batch.append(result)
            self.results.append(result)
        jobs = [(r, rep) for r in batch for rep in range(self.repeats)]

        def run(job):
            r, rep = job
            return float(self.run_trial(r.g_c, r.g_m, rep))

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                accs = list(pool.map(run, jobs))
        else:
            accs = [run(job) for job in jobs]
        for (r, _), acc in zip(jobs, accs):
            r.accuracies.append(acc)
        self.trials_run += len(jobs)
        return batch


def tune(strategy, gm_candidates, gc_candidates, run_trial, repeats=2, delta=0.001, feasible=None, workers=1):
    """Run a tuning strategy.

    ``run_trial(g_c, g_m, repeat)`` trains one model and returns its
    validation accuracy; ``feasible(g_c, g_m)`` returns a reason string for
    configurations that must be skipped.  Returns ``(results, selected,
    trials_run)`` where ``selected`` is the chosen :class:`TuneResult`.
    """
    gm_candidates, gc_candidates = list(gm_candidates), list(gc_candidates)
    if not gm_candidates or not gc_candidates:
        raise ValueError("candidate lists must be non-empty")
    runner = _Runner(run_trial, repeats, feasible, workers)
    if strategy == "grid":
        runner.sweep("grid", [(gc, gm) for gc in gc_candidates for gm in gm_candidates])
        selected = select_largest_gm(runner.results, delta)
    elif strategy == "sequential":
        first = runner.sweep("g_m", [(1, gm) for gm in gm_candidates])
        chosen = select_largest_gm(first, delta)
        if chosen is None:
            selected = None
        else:
            second = runner.sweep("g_c", [(gc, chosen.g_m) for gc in gc_candidates])
            selected = best_of(second)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if selected is not None:
        selected.selected = True
    return runner.results, selected, runner.trials_run
