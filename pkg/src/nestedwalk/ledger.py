"""Per-run cost accounting.

Counters track the primitive operations a run actually performed
(input queries, data-structure operations, walk-operator applications,
checking reflections, inner-walk invocations).  The ``params`` mapping
carries the symbolic cost parameters of the walk being accounted
(setup/update/checking unit costs, marked fraction, spectral gap, and
their primed inner-walk variants), so ledgers can be compared against
closed-form cost expressions after a run.
"""

from dataclasses import dataclass, field

COUNTER_NAMES = (
    "queries",
    "ds_ops",
    "walk_ops",
    "checks",
    "inner_calls",
    "resamples",
)


@dataclass
class CostLedger:
    counters: dict = field(default_factory=lambda: {k: 0 for k in COUNTER_NAMES})
    params: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def charge(self, counter, amount=1):
        if amount < 0:
            raise ValueError("ledger counters are monotone nondecreasing")
        self.counters[counter] = self.counters.get(counter, 0) + amount

    def warn(self, message):
        self.warnings.append(message)

    def __add__(self, other):
        merged = CostLedger()
        for src in (self, other):
            for k, v in src.counters.items():
                merged.counters[k] = merged.counters.get(k, 0) + v
            merged.params.update(src.params)
            merged.warnings.extend(src.warnings)
        return merged

    def to_dict(self):
        return {
            "counters": dict(self.counters),
            "params": {k: v for k, v in sorted(self.params.items())},
            "warnings": list(self.warnings),
        }
