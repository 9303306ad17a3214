from tqdm import tqdm
from dataclasses import dataclass, field
from bvsim import base
from bvsim.utils.metrics import ApproxReport


class ConvergenceMonitor:
    """Track a sequence of errors along a sweep and flag steps that do not improve."""

    def __init__(self, slack: float = 1e-9, low_is_good: bool = True, verbose: bool = False) -> None:
        """
        Monitor for monotone decrease (or increase) of a score sequence.

        :slack (float, default = 1e-9): Allowed worsening before a step counts as a violation.
        :low_is_good (bool, default = True): Lower scores indicate better approximation.
        :verbose (bool, default = False): Write a message on every violation.
        """
        self.slack = slack
        self.low_is_good = low_is_good
        self.verbose = verbose
        self.best_score = None
        self.last_score = None
        self.best_step = 0
        self.step = 0
        self.violations = []

    def __call__(self, score: float, label: object = None) -> bool:
        """
        Record the next score.

        :score (float): Score of the current sweep step.
        :label (object, default = None): Identifier of the step, e.g. k.
        :returns (bool): True if the step breaks monotonicity.
        """
        self.step += 1
        broken = self.last_score is not None and not self.improves(score, self.last_score)
        if broken:
            self.violations.append((label if label is not None else self.step, self.last_score, score))
            if self.verbose:
                tqdm.write(f"Convergence monitor: step {label or self.step} worsened "
                           f"{self.last_score:.3e} -> {score:.3e}")

        if self.best_score is None or self.new_best(score):
            self.best_score = score
            self.best_step = self.step
        self.last_score = score
        return broken

    def improves(self, score: float, previous: float) -> bool:
        """Monotone step, up to the slack."""
        if self.low_is_good:
            return score <= previous + self.slack
        return score >= previous - self.slack

    def new_best(self, score: float) -> bool:
        """
        Identify if the current score is better than previous scores.

        :score (float): Score for the current step.
        :returns (bool): True if the current score is better than the previous best.
        """
        if self.low_is_good:
            return score <= self.best_score
        return score >= self.best_score

    @property
    def monotone(self) -> bool:
        return not self.violations


@dataclass
class Certificate:
    """Outcome of the BV-simple certificate on an approximation report."""

    passed: bool
    reasons: base.List[str] = field(default_factory = list)
    final_errors: base.Dict[float, float] = field(default_factory = dict)

    @property
    def verdict(self) -> str:
        if self.passed:
            return "BV simple limit solution (certified on the sweep)"
        return "not certified: " + "; ".join(self.reasons)


def certificate(report: ApproxReport, budget: float = None, tol: float = 1e-3, slack: float = 1e-9) -> Certificate:
    """
    Per tau the error must not increase along the k sweep and must end below tol; Var(u_k) must stay in budget.

    :report (ApproxReport): Sweep results.
    :budget (float, default = None): Variation budget, defaults to the report's own.
    :tol (float, default = 1e-3): Threshold for the error at the largest k.
    :slack (float, default = 1e-9): Allowed non-monotone wiggle.
    :returns (Certificate): Verdict with the reasons for failure.
    """
    budget = budget if budget is not None else report.budget
    result = Certificate(passed = True)
    ks = report.ks
    for tau in report.taus:
        monitor = ConvergenceMonitor(slack = slack)
        errors = report.errors(tau)
        for k, err in zip(ks, errors):
            monitor(err, k)
        result.final_errors[tau] = errors[-1]
        if not monitor.monotone:
            result.passed = False
            k, before, after = monitor.violations[0]
            result.reasons.append(f"error at tau={tau} increased to {after:.3e} at k={k} (was {before:.3e})")
        if errors[-1] >= tol:
            result.passed = False
            result.reasons.append(f"error at tau={tau} is {errors[-1]:.3e} >= {tol:g} at k={ks[-1]}")
    if budget is not None:
        for k, var in report.variations().items():
            if var > budget * (1 + slack) + slack:
                result.passed = False
                result.reasons.append(f"Var(u_k) = {var:.6g} exceeds the budget {budget:.6g} at k={k}")
    return result
