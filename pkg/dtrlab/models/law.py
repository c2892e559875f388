"""
Exact finite two-stage law used by the enumeration oracles.

Shape:
    DiscreteDtr.nodes[i]                      one H1 support point with P(H1 = h1)
        .pi1[a1]                              P(A1 = a1 | h1)
        .transitions[a1][k]                   one (Y1, O2) outcome with P(y1, o2 | h1, a1)
            .pi2[a2]                          P(A2 = a2 | h2)
            .y2[a2]                           finite law of Y2 given (h2, a2)
"""
from pydantic import BaseModel, Field, model_validator

PROBABILITY_TOLERANCE = 1e-9
ACTIONS = (1, -1)


def _sums_to_one(values, what: str) -> None:
    total = sum(values)
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        raise ValueError(f"{what} probabilities sum to {total}, not 1")


def _both_actions(mapping: dict, what: str) -> None:
    if set(mapping) != set(ACTIONS):
        raise ValueError(f"{what} needs entries for actions +1 and -1, got {sorted(mapping)}")


class StageTwoOutcome(BaseModel):
    values: list[float]
    probs: list[float]

    @model_validator(mode="after")
    def _check(self) -> "StageTwoOutcome":
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("values and probs must be non-empty and of equal length")
        if any(v <= 0 for v in self.values):
            raise ValueError(f"Y2 support must be positive, got {self.values}")
        if any(p < 0 for p in self.probs):
            raise ValueError("negative probability in Y2 law")
        _sums_to_one(self.probs, "Y2")
        return self

    @property
    def mean(self) -> float:
        return float(sum(v * p for v, p in zip(self.values, self.probs)))


class Transition(BaseModel):
    y1: float = Field(gt=0)
    o2: list[float]
    prob: float = Field(ge=0)
    pi2: dict[int, float]
    y2: dict[int, StageTwoOutcome]

    @model_validator(mode="after")
    def _check(self) -> "Transition":
        _both_actions(self.pi2, "pi2")
        _both_actions(self.y2, "y2")
        if any(not 0 < p <= 1 for p in self.pi2.values()):
            raise ValueError(f"pi2 entries must lie in (0, 1], got {self.pi2}")
        return self


class HistoryNode(BaseModel):
    h1: list[float]
    prob: float = Field(ge=0)
    pi1: dict[int, float]
    transitions: dict[int, list[Transition]]

    @model_validator(mode="after")
    def _check(self) -> "HistoryNode":
        _both_actions(self.pi1, "pi1")
        _both_actions(self.transitions, "transitions")
        if any(not 0 < p <= 1 for p in self.pi1.values()):
            raise ValueError(f"pi1 entries must lie in (0, 1], got {self.pi1}")
        for a1, outcomes in self.transitions.items():
            if not outcomes:
                raise ValueError(f"no transitions for a1={a1}")
            _sums_to_one([t.prob for t in outcomes], f"(Y1, O2) | a1={a1}")
        return self

    def h2(self, t: Transition, a1: int) -> list[float]:
        return [*self.h1, t.y1, *t.o2, float(a1)]


class DiscreteDtr(BaseModel):
    nodes: list[HistoryNode]

    @model_validator(mode="after")
    def _check(self) -> "DiscreteDtr":
        if not self.nodes:
            raise ValueError("law needs at least one H1 support point")
        _sums_to_one([node.prob for node in self.nodes], "H1")
        return self

    @property
    def support_size(self) -> int:
        return sum(len(ts) for node in self.nodes for ts in node.transitions.values())
