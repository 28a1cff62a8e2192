"""
Evaluation curves.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np


class CurveKind(str, Enum):
    CMC = "cmc"
    ROC = "roc"
    PRINCETON = "princeton"
    PR = "pr"


# CSV column names per curve kind
CSV_HEADERS: Dict[CurveKind, Tuple[str, str]] = {
    CurveKind.CMC: ("rank", "cmc"),
    CurveKind.ROC: ("fpr", "tpr"),
    CurveKind.PRINCETON: ("geodesic_error", "fraction"),
    CurveKind.PR: ("recall", "precision"),
}


@dataclass(frozen=True)
class Curve:
    kind: CurveKind
    abscissa: np.ndarray
    ordinate: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.abscissa.shape != self.ordinate.shape or self.abscissa.ndim != 1:
            raise ValueError("curve abscissa and ordinate must be 1-D and of equal length")

    @property
    def points(self):
        return list(zip(self.abscissa.tolist(), self.ordinate.tolist()))

    def at(self, x: float) -> float:
        """Ordinate of the last point with abscissa <= x (step interpolation)."""
        idx = int(np.searchsorted(self.abscissa, x, side="right")) - 1
        return float(self.ordinate[idx]) if idx >= 0 else 0.0

    @property
    def header(self) -> Tuple[str, str]:
        return CSV_HEADERS[self.kind]
