from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class EstimateReport:
    """Outcome of one estimator run on one seed.

    ``estimate`` is the xi . ahom xi estimate; ``sigma2_stat`` the
    method-specific variance-type statistic it was derived from.
    """

    method: str
    seed: int
    estimate: float
    sigma2_stat: float
    work_units: int
    wall_seconds: float = 0.0
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
