"""Evaluation report: privacy (TUL) and utility (spatial/temporal/categorical)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import Trajectory
from .metrics import (frequency_distributions, hausdorff, hull_jaccard, pearson,
                      summary_stats, temporal_visit_matrix)
from .tul import TulModel, tul_metrics

TABLE_COLUMNS = ("Method", "ACC@1", "ACC@5", "Macro-F1", "Macro-P", "Macro-R")
TABLE_FIELDS = ("acc1", "acc5", "macro_f1", "macro_p", "macro_r")


class PairingError(ValueError):
    pass


@dataclass
class EvaluationReport:
    acc1: float
    acc5: float
    macro_p: float
    macro_r: float
    macro_f1: float
    hausdorff: dict
    jaccard: dict
    temporal_matrix: list
    hourly_freq: list
    category_freq: list
    pearson_temporal: float
    pearson_categorical: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        return cls(**json.loads(text))

    def flat(self) -> dict:
        row = {k: getattr(self, k) for k in ("acc1", "acc5", "macro_p", "macro_r", "macro_f1")}
        for name in ("hausdorff", "jaccard"):
            for stat, v in getattr(self, name).items():
                row[f"{name}_{stat}"] = v
        row["pearson_temporal"] = self.pearson_temporal
        row["pearson_categorical"] = self.pearson_categorical
        return row

    def to_csv(self) -> str:
        row = self.flat()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(row.keys())
        w.writerow([repr(v) for v in row.values()])
        return buf.getvalue()


def pair_by_tid(original: Sequence[Trajectory], candidate: Sequence[Trajectory]):
    cand = {t.tid: t for t in candidate}
    pairs = []
    for t in original:
        if t.tid not in cand:
            raise PairingError(f"candidate set has no trajectory with tid {t.tid}")
        pairs.append((t, cand.pop(t.tid)))
    if cand:
        raise PairingError(f"candidate trajectory tid {next(iter(cand))} has no original")
    return pairs


def evaluate_all(original: Sequence[Trajectory], candidate: Sequence[Trajectory],
                 tul: TulModel, n_categories: int) -> EvaluationReport:
    pairs = pair_by_tid(original, candidate)
    cands = [c for _, c in pairs]
    scores = tul_metrics(tul, cands)
    hd = [hausdorff(o.coords(), c.coords()) for o, c in pairs]
    jac = [hull_jaccard(o.coords(), c.coords()) for o, c in pairs]
    hourly_o, cat_o = frequency_distributions(original, n_categories)
    hourly_c, cat_c = frequency_distributions(cands, n_categories)
    return EvaluationReport(
        **scores.as_dict(),
        hausdorff=summary_stats(hd),
        jaccard=summary_stats(jac),
        temporal_matrix=temporal_visit_matrix(cands, n_categories).tolist(),
        hourly_freq=hourly_c.tolist(),
        category_freq=cat_c.tolist(),
        pearson_temporal=pearson(hourly_o, hourly_c),
        pearson_categorical=pearson(cat_o, cat_c),
    )


def comparison_table(reports: Mapping[str, EvaluationReport], fmt: str = "{:.3f}") -> str:
    """One CSV row per method with the TUL columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for name, rep in reports.items():
        w.writerow([name] + [fmt.format(getattr(rep, f)) for f in TABLE_FIELDS])
    return buf.getvalue()


def spatial_table(reports: Mapping[str, EvaluationReport], fmt: str = "{:.3f}") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    stats = ("min", "max", "std", "mean")
    w.writerow(["Method"] + [f"Hausdorff-{s}" for s in stats] + [f"Jaccard-{s}" for s in stats])
    for name, rep in reports.items():
        w.writerow([name] + [fmt.format(rep.hausdorff[s]) for s in stats]
                   + [fmt.format(rep.jaccard[s]) for s in stats])
    return buf.getvalue()


def matrix_csv(matrix, row_labels: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["category"] + [str(h) for h in range(np.shape(matrix)[1])])
    for label, row in zip(row_labels, matrix):
        w.writerow([label] + [repr(float(v)) for v in row])
    return buf.getvalue()
