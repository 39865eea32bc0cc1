"""Threshold-free detection metrics over score sets.

Everything here follows one convention: higher score means more
out-distribution.  AUROC is computed from rank statistics with exact tie
handling (ties count half), so it equals the pairwise definition
``P(s_out > s_in) + 0.5 P(s_out = s_in)`` to the last bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError
from .validation import as_vector

CONVENTION = "higher=more-out-distribution"


def _score_vector(scores, name: str) -> np.ndarray:
    arr = as_vector(scores, name=name)
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    return arr


def auroc(id_scores, ood_scores) -> float:
    """Probability that a random out-distribution score outranks an in one.

    Equivalent to the area under the ROC curve.  0.5 is chance, 1.0 is
    perfect separation, values below 0.5 mean the scores are inverted.
    """
    s_id = _score_vector(id_scores, "id_scores")
    s_ood = _score_vector(ood_scores, "ood_scores")
    ranks = rankdata(np.concatenate([s_id, s_ood]))
    rank_sum = ranks[s_id.size:].sum()
    wins = rank_sum - s_ood.size * (s_ood.size + 1) / 2
    return float(wins / (s_id.size * s_ood.size))


def fpr_at_tpr(id_scores, ood_scores, tpr: float = 0.95):
    """False-positive rate at the loosest threshold reaching ``tpr`` recall.

    The threshold is the largest score value ``t`` such that at least a
    ``tpr`` fraction of out-distribution scores satisfy ``s >= t``; the
    returned rate is the fraction of in-distribution scores passing the
    same test.  Returns ``(fpr, threshold)``.
    """
    s_id = _score_vector(id_scores, "id_scores")
    s_ood = _score_vector(ood_scores, "ood_scores")
    tpr = float(tpr)
    if not (0.0 < tpr <= 1.0):
        raise ValidationError(f"tpr must lie in (0, 1], got {tpr}")
    ordered = np.sort(s_ood)[::-1]
    counts = np.arange(1, ordered.size + 1)
    k = int(counts[(counts / ordered.size) >= tpr][0])
    threshold = float(ordered[k - 1])
    fpr = float(np.count_nonzero(s_id >= threshold) / s_id.size)
    return fpr, threshold


@dataclass
class EvalReport:
    """Headline metrics for one in/out score pairing."""

    auroc: float
    fpr_at_95_tpr: float
    tpr: float
    threshold: float
    n_in: int
    n_out: int
    method: str
    pair: tuple[str, str]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "pair": list(self.pair),
            "convention": CONVENTION,
            "auroc": self.auroc,
            "fpr_at_95_tpr": self.fpr_at_95_tpr,
            "tpr": self.tpr,
            "threshold": self.threshold,
            "n_in": self.n_in,
            "n_out": self.n_out,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def render(self) -> str:
        """One table-style line with FPR and AUROC in percent."""
        return (
            f"{self.method:<10s} {self.pair[0]} vs {self.pair[1]:<12s} "
            f"FPR{self.tpr * 100:.0f}: {self.fpr_at_95_tpr * 100:6.2f}  "
            f"AUROC: {self.auroc * 100:6.2f}"
        )


def eval_report(id_set, ood_set, tpr: float = 0.95) -> EvalReport:
    """Build an :class:`EvalReport` from two score sets of the same method.

    Mixing methods or score conventions in one report is rejected; such a
    comparison is meaningless.
    """
    if id_set.convention != ood_set.convention:
        raise ValidationError(
            f"score conventions differ: {id_set.convention!r} vs {ood_set.convention!r}"
        )
    if id_set.method != ood_set.method:
        raise ValidationError(
            f"score methods differ: {id_set.method!r} vs {ood_set.method!r}"
        )
    area = auroc(id_set.scores, ood_set.scores)
    fpr, threshold = fpr_at_tpr(id_set.scores, ood_set.scores, tpr=tpr)
    return EvalReport(
        auroc=area,
        fpr_at_95_tpr=fpr,
        tpr=tpr,
        threshold=threshold,
        n_in=int(id_set.scores.size),
        n_out=int(ood_set.scores.size),
        method=id_set.method,
        pair=(id_set.name or "in", ood_set.name or "out"),
    )
