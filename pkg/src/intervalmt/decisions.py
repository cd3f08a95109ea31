from __future__ import annotations

from dataclasses import dataclass, field

from .families import HypothesisFamily, Pair


@dataclass
class DecisionReport:
    """Per-hypothesis outcome of a multiple testing procedure.

    ``stages[pair]`` is the step at which the hypothesis was rejected, or
    ``None`` if it was accepted.  ``statistics[pair]`` is the value that
    drove the decision (``None`` when the procedure never looked at one).
    """

    procedure: str
    family: HypothesisFamily
    rejected: dict[Pair, bool]
    statistics: dict[Pair, float | None] = field(default_factory=dict)
    stages: dict[Pair, int | None] = field(default_factory=dict)

    def is_rejected(self, i: int, j: int) -> bool:
        return self.rejected[(i, j)]

    @property
    def rejected_pairs(self) -> list[Pair]:
        return [p for p, r in self.rejected.items() if r]

    @property
    def n_rejected(self) -> int:
        return sum(self.rejected.values())

    def to_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "family": self.family.as_dict(),
            "hypotheses": [
                {
                    "pair": list(p),
                    "rejected": r,
                    "statistic": self.statistics.get(p),
                    "stage": self.stages.get(p),
                }
                for p, r in self.rejected.items()
            ],
        }

    def format(self, labels: tuple[str, ...] | None = None) -> str:
        def name(i):
            return labels[i - 1] if labels else str(i)

        lines = [f"{'hypothesis':<24}{'statistic':>12}{'stage':>7}  decision"]
        for p, r in self.rejected.items():
            stat = self.statistics.get(p)
            stage = self.stages.get(p)
            lines.append(
                f"{'H(' + name(p[0]) + ', ' + name(p[1]) + ')':<24}"
                f"{'' if stat is None else f'{stat:.3f}':>12}"
                f"{'' if stage is None else stage:>7}  {'reject' if r else 'accept'}"
            )
        return "\n".join(lines)
