"""Shared result type for conditional-independence tests."""

from __future__ import annotations

from dataclasses import dataclass

PARCORR = "parcorr"
CMI_KNN = "cmi_knn"


@dataclass(frozen=True)
class CITestResult:
    """Outcome of one conditional-independence query."""

    statistic: float
    p_value: float
    n: int
    test_name: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value must be in [0, 1], got {self.p_value}")
        if self.test_name not in (PARCORR, CMI_KNN):
            raise ValueError(f"unknown test name {self.test_name!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
