"""Outcome scoring: voxel classification, the dentist error score, and a
battery of confusion-matrix metrics.

Classification compares a drilled outcome against an ideal outcome inside the
pristine tooth. The positive class is voxels that should remain: a kept voxel
that should be kept is a true positive, a drilled voxel that should be
drilled is a true negative, under-drilling produces false positives and
over-drilling produces false negatives. Every pristine-occupied voxel falls
in exactly one bucket.

The dentist score rescales precision and sensitivity around clinically
anchored floors (precision 0.95, sensitivity 0.2), averages them with weights
1 : 1.5, and maps the result onto a 0..15 error scale:

    value = (1 - (1.5 * s_res + p_res) / 2.5) * 15
          = 131.25 - 11.25 * S - 120 * P
          = 15 * (32*FP*TP + 3*FN*TP + 35*FN*FP) / (4 * (TP+FN) * (TP+FP))

Zero when nothing is misdrilled, 15 at the anchor floors, above 15 when
precision drops below its floor (reported unclamped, flagged out of range).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .voxelgrid import VoxelGrid, grids_compatible

__all__ = [
    "ClassificationCounts",
    "classify",
    "precision_sensitivity",
    "rescaled_precision",
    "rescaled_sensitivity",
    "DentistScore",
    "dentist_score",
    "dentist_closed_form",
    "f1_score",
    "MetricScore",
    "metric_battery",
    "BATTERY_METRICS",
    "outcome_report",
]

PRECISION_FLOOR = 0.95
SENSITIVITY_FLOOR = 0.2
DENTIST_MAX = 15.0


@dataclass(frozen=True)
class ClassificationCounts:
    tp: int  # kept and should keep
    tn: int  # drilled and should drill
    fp: int  # kept but should drill (under-drilling)
    fn: int  # drilled but should keep (over-drilling)

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer")
            object.__setattr__(self, name, int(v))

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def classify(outcome: VoxelGrid, ideal: VoxelGrid, pristine: VoxelGrid) -> ClassificationCounts:
    """Bucket every pristine-occupied voxel by outcome vs ideal occupancy."""
    if not (grids_compatible(outcome, pristine) and grids_compatible(ideal, pristine)):
        raise ValueError("incompatible grids: dims, origin, and cell must match")
    universe = pristine.occupancy
    kept = outcome.occupancy
    should_keep = ideal.occupancy
    if np.any(kept & ~universe):
        raise ValueError(
            "material creation: outcome occupies voxels empty in the pristine tooth")
    if np.any(should_keep & ~universe):
        raise ValueError("ideal outcome occupies voxels empty in the pristine tooth")
    tp = int(np.count_nonzero(kept & should_keep))
    fp = int(np.count_nonzero(kept & ~should_keep & universe))
    fn = int(np.count_nonzero(~kept & should_keep))
    tn = int(np.count_nonzero(~kept & ~should_keep & universe))
    return ClassificationCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def precision_sensitivity(counts: ClassificationCounts) -> tuple[float, float]:
    """Precision TP/(TP+FP) and sensitivity TP/(TP+FN)."""
    if counts.tp + counts.fp == 0:
        raise ValueError("degenerate denominator: TP + FP is zero")
    if counts.tp + counts.fn == 0:
        raise ValueError("degenerate denominator: TP + FN is zero")
    return (counts.tp / (counts.tp + counts.fp),
            counts.tp / (counts.tp + counts.fn))


def rescaled_precision(p: float) -> float:
    return (p - PRECISION_FLOOR) / (1.0 - PRECISION_FLOOR)


def rescaled_sensitivity(s: float) -> float:
    return (s - SENSITIVITY_FLOOR) / (1.0 - SENSITIVITY_FLOOR)


def dentist_closed_form(counts: ClassificationCounts) -> float:
    """Single-fraction form of the dentist score."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    den = 4.0 * (tp + fn) * (tp + fp)
    if den == 0:
        return math.nan
    return 15.0 * (32.0 * fp * tp + 3.0 * fn * tp + 35.0 * fn * fp) / den


@dataclass(frozen=True)
class DentistScore:
    value: float              # compositional form
    closed_form: float        # single-fraction form; equal within rounding
    precision: float
    sensitivity: float
    rescaled_precision: float
    rescaled_sensitivity: float
    degenerate: bool          # a defining denominator was zero
    out_of_range: bool        # value outside [0, 15]


def dentist_score(counts: ClassificationCounts) -> DentistScore:
    """Dentist error score from classification counts (0 best, 15 anchor max)."""
    if counts.tp + counts.fp == 0 or counts.tp + counts.fn == 0:
        nan = math.nan
        return DentistScore(nan, nan, nan, nan, nan, nan,
                            degenerate=True, out_of_range=False)
    p, s = precision_sensitivity(counts)
    p_res = rescaled_precision(p)
    s_res = rescaled_sensitivity(s)
    value = (1.0 - (1.5 * s_res + p_res) / 2.5) * DENTIST_MAX
    return DentistScore(
        value=value,
        closed_form=dentist_closed_form(counts),
        precision=p,
        sensitivity=s,
        rescaled_precision=p_res,
        rescaled_sensitivity=s_res,
        degenerate=False,
        out_of_range=not (0.0 <= value <= DENTIST_MAX),
    )


def f1_score(counts: ClassificationCounts) -> float:
    den = 2 * counts.tp + counts.fp + counts.fn
    if den == 0:
        raise ValueError("degenerate denominator: TP, FP and FN are all zero")
    return 2.0 * counts.tp / den


@dataclass(frozen=True)
class MetricScore:
    name: str
    value: float
    orientation: str          # "similarity" (higher better) or "error" (lower better)
    lo: float
    hi: float
    degenerate: bool          # denominator vanished; value is nan
    out_of_range: bool


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return math.nan, True
    return num / den, False


def _battery_rows(tp: float, tn: float, fp: float, fn: float):
    n = tp + tn + fp + fn
    acc, d_acc = _ratio(tp + tn, n)
    sen, d_sen = _ratio(tp, tp + fn)
    spe, d_spe = _ratio(tn, tn + fp)
    pre, d_pre = _ratio(tp, tp + fp)
    npv, d_npv = _ratio(tn, tn + fn)
    fpr, d_fpr = _ratio(fp, fp + tn)
    fnr, d_fnr = _ratio(fn, fn + tp)
    fdr, d_fdr = _ratio(fp, fp + tp)
    fomr, d_fom = _ratio(fn, fn + tn)
    f1, d_f1 = _ratio(2 * tp, 2 * tp + fp + fn)
    f05, d_f05 = _ratio(1.25 * tp, 1.25 * tp + 0.25 * fn + fp)
    f2, d_f2 = _ratio(5 * tp, 5 * tp + 4 * fn + fp)
    jac, d_jac = _ratio(tp, tp + fp + fn)
    bacc = (sen + spe) / 2.0
    d_bacc = d_sen or d_spe
    mcc_den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc, d_mcc = _ratio(tp * tn - fp * fn, mcc_den)
    info = sen + spe - 1.0
    mark = pre + npv - 1.0
    fm = math.sqrt(pre * sen) if not (d_pre or d_sen) else math.nan
    gm = math.sqrt(sen * spe) if not (d_sen or d_spe) else math.nan
    kap, d_kap = _ratio(2.0 * (tp * tn - fp * fn),
                        (tp + fp) * (fp + tn) + (tp + fn) * (fn + tn))
    pabak = 2.0 * acc - 1.0
    if d_sen or d_fpr or sen == fpr:
        pt, d_pt = math.nan, True
    else:
        pt, d_pt = (math.sqrt(sen * fpr) - fpr) / (sen - fpr), False
    if d_sen or d_spe or (sen + spe) == 0:
        op, d_op = math.nan, True
    else:
        op, d_op = acc - abs(spe - sen) / (spe + sen), d_acc

    S, E = "similarity", "error"
    return [
        ("accuracy", acc, S, 0.0, 1.0, d_acc),
        ("error_rate", 1.0 - acc if not d_acc else math.nan, E, 0.0, 1.0, d_acc),
        ("sensitivity", sen, S, 0.0, 1.0, d_sen),
        ("specificity", spe, S, 0.0, 1.0, d_spe),
        ("precision", pre, S, 0.0, 1.0, d_pre),
        ("negative_predictive_value", npv, S, 0.0, 1.0, d_npv),
        ("false_positive_rate", fpr, E, 0.0, 1.0, d_fpr),
        ("false_negative_rate", fnr, E, 0.0, 1.0, d_fnr),
        ("false_discovery_rate", fdr, E, 0.0, 1.0, d_fdr),
        ("false_omission_rate", fomr, E, 0.0, 1.0, d_fom),
        ("f1", f1, S, 0.0, 1.0, d_f1),
        ("f_half", f05, S, 0.0, 1.0, d_f05),
        ("f2", f2, S, 0.0, 1.0, d_f2),
        ("jaccard", jac, S, 0.0, 1.0, d_jac),
        ("balanced_accuracy", bacc if not d_bacc else math.nan, S, 0.0, 1.0, d_bacc),
        ("matthews_correlation", mcc, S, -1.0, 1.0, d_mcc),
        ("informedness", info if not d_bacc else math.nan, S, -1.0, 1.0, d_bacc),
        ("markedness", mark if not (d_pre or d_npv) else math.nan, S, -1.0, 1.0, d_pre or d_npv),
        ("fowlkes_mallows", fm, S, 0.0, 1.0, d_pre or d_sen),
        ("g_mean", gm, S, 0.0, 1.0, d_sen or d_spe),
        ("cohen_kappa", kap, S, -1.0, 1.0, d_kap),
        ("pabak", pabak if not d_acc else math.nan, S, -1.0, 1.0, d_acc),
        ("prevalence_threshold", pt, E, 0.0, 1.0, d_pt),
        ("optimized_precision", op, S, -1.0, 1.0, d_op),
    ]


#: Names of the 24 battery metrics, in report order.
BATTERY_METRICS = tuple(row[0] for row in _battery_rows(1.0, 1.0, 1.0, 1.0))


def metric_battery(counts: ClassificationCounts) -> list[MetricScore]:
    """The fixed battery of 24 bounded confusion-matrix metrics.

    Degenerate denominators yield nan values with the flag set, never a
    silent division by zero; values outside the declared range are flagged.
    """
    rows = _battery_rows(float(counts.tp), float(counts.tn),
                         float(counts.fp), float(counts.fn))
    out = []
    for name, value, orientation, lo, hi, degenerate in rows:
        oor = (not degenerate) and not (lo - 1e-12 <= value <= hi + 1e-12)
        out.append(MetricScore(name=name, value=value, orientation=orientation,
                               lo=lo, hi=hi, degenerate=degenerate, out_of_range=oor))
    return out


def outcome_report(counts: ClassificationCounts) -> dict:
    """JSON-ready report: counts, dentist score in both forms, F1, battery."""
    d = dentist_score(counts)
    try:
        f1 = f1_score(counts)
    except ValueError:
        f1 = math.nan
    return {
        "counts": {"tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn},
        "precision": d.precision,
        "sensitivity": d.sensitivity,
        "rescaled_precision": d.rescaled_precision,
        "rescaled_sensitivity": d.rescaled_sensitivity,
        "dentist": {
            "value": d.value,
            "closed_form": d.closed_form,
            "degenerate": d.degenerate,
            "out_of_range": d.out_of_range,
        },
        "f1": f1,
        "battery": [
            {
                "name": m.name,
                "value": m.value,
                "orientation": m.orientation,
                "range": [m.lo, m.hi],
                "degenerate": m.degenerate,
                "out_of_range": m.out_of_range,
            }
            for m in metric_battery(counts)
        ],
    }
