"""Rule-based advisory engine.

Turns utility curves and update signatures into flagged clients and
actionable recommendations. The detector half (flag_clients) never sees
ground-truth malicious flags: it receives redacted views and clusters
each round's PCA points itself. Ground truth stays available to the
report half for summary statistics, mirroring a dashboard that shows
identities separately from the detector's verdicts.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from fedshadow import _kernels
from fedshadow.federation import RunRecord
from fedshadow.signatures import SignatureRound


@dataclass(frozen=True)
class Thresholds:
    """Detector and recommendation thresholds; defaults tuned on desk runs."""

    f1_drop: float = 0.15            # drop vs trailing 5-round median
    signature_fraction: float = 0.5  # fraction of gated rounds in the suspect cluster
    separability_gate: float = 0.5   # best-split silhouette required to gate a round
    min_gated_rounds: int = 2        # gated participations needed before signature evidence counts
    density_margin: float = 1.25     # how much tighter the suspect cluster must be
    persistence_min: int = 3         # co-clusterings of one pair that mark a persistent core
    merge_separability: float = 0.2  # below this, clusters count as merged


@dataclass(frozen=True)
class RoundView:
    """Redacted round: participation and utility only, no ground truth."""

    round_index: int
    participant_ids: tuple
    per_class_f1: tuple
    accuracy: float


@dataclass(frozen=True)
class SignatureView:
    """Redacted signature: the PCA points only."""

    round_index: int
    points: np.ndarray


@dataclass
class FlaggedClient:
    client_id: int
    evidence: list  # [{"kind": ..., "value": ...}]
    score: float

    def to_json_dict(self) -> dict:
        return {
            "client_id": self.client_id,
            "evidence": [dict(e) for e in self.evidence],
            "score": self.score,
        }


@dataclass
class AdvisoryReport:
    flagged_clients: list
    recommendations: list  # [{"category", "text", "triggering_metric"}]
    summary_stats: dict

    def to_json_dict(self) -> dict:
        return {
            "flagged_clients": [f.to_json_dict() for f in self.flagged_clients],
            "recommendations": [dict(r) for r in self.recommendations],
            "summary_stats": dict(self.summary_stats),
        }


def redact_run(run: RunRecord) -> list:
    return [
        RoundView(
            round_index=r.round_index,
            participant_ids=tuple(int(c) for c in r.participant_ids),
            per_class_f1=tuple(float(v) for v in r.metrics.per_class_f1),
            accuracy=float(r.metrics.accuracy),
        )
        for r in run.rounds
    ]


def redact_signatures(signatures: list) -> list:
    return [
        SignatureView(round_index=s.round_index, points=np.asarray(s.points, dtype=np.float64))
        for s in signatures
    ]


def best_bipartition(points: np.ndarray):
    """Exhaustive best-silhouette 2-way split of a round's points.

    Returns (membership bool array, silhouette). Deterministic: ties in
    silhouette resolve to the first partition in enumeration order.
    """
    n = points.shape[0]
    if n < 2:
        return np.zeros(n, dtype=bool), 0.0
    points = np.ascontiguousarray(points, dtype=np.float64)
    best_mask = None
    best_score = -np.inf
    ids = list(range(1, n))  # point 0 stays in group False: halves the space
    for size in range(0, n - 1):
        for members in combinations(ids, size):
            mask = np.zeros(n, dtype=bool)
            mask[list(members)] = True
            mask[0] = False
            if mask.sum() == 0:
                continue
            score = _kernels.silhouette_two(points, mask)
            if score > best_score:
                best_score = score
                best_mask = mask
    if best_mask is None:
        return np.zeros(n, dtype=bool), 0.0
    return best_mask, float(best_score)


def _suspect_cluster(points: np.ndarray, mask: np.ndarray, margin: float):
    """Pick the suspect side of a split: minority, density as tie-break.

    Returns (suspect_mask or None, dense_mask or None). The dense mask
    is only set when one cluster is tighter than the other by `margin`
    and both clusters have at least 2 points.
    """
    size_true = int(mask.sum())
    size_false = mask.size - size_true
    if size_true < size_false:
        minority = mask
    elif size_false < size_true:
        minority = ~mask
    else:
        minority = None

    dense = None
    if size_true >= 2 and size_false >= 2:
        spread_true = float(_kernels.mean_pairwise(points[mask]))
        spread_false = float(_kernels.mean_pairwise(points[~mask]))
        if spread_true > 0 and spread_false / spread_true >= margin:
            dense = mask
        elif spread_false > 0 and spread_true / spread_false >= margin:
            dense = ~mask

    if minority is None and dense is not None:
        minority = dense  # equal halves: the tighter one is the outlier group
    return minority, dense


def flag_clients(round_views: list, signature_views: list,
                 victim_class: Optional[int],
                 thresholds: Thresholds = Thresholds()) -> list:
    """Flag suspicious clients from redacted evidence only.

    Evidence kinds:
      f1_impact          participated in a round whose victim-class F1
                         dropped more than f1_drop below the trailing
                         5-round median
      signature_outlier  either sits in the minority cluster of a
                         well-separated round split in >=
                         signature_fraction of its gated participations,
                         or belongs to a persistent core: a pair of
                         clients landing in the same separated cluster
                         in >= persistence_min gated rounds (benign
                         pairs essentially never repeat, poisoning peers
                         do every active round)
      density            sits in the tighter cluster of the split in >=
                         signature_fraction of its gated participations

    Runs shorter than 5 rounds return no flags (insufficient evidence).
    """
    if len(round_views) < 5:
        return []

    by_round = {rv.round_index: rv for rv in round_views}

    f1_evidence = {}
    if victim_class is not None:
        series = [(rv.round_index, rv.per_class_f1[victim_class]) for rv in round_views]
        series.sort()
        values = [v for _, v in series]
        for i in range(5, len(series)):
            baseline = float(np.median(values[i - 5:i]))
            drop = baseline - values[i]
            if drop > thresholds.f1_drop:
                rv = by_round[series[i][0]]
                level = min(1.0, drop / (2 * thresholds.f1_drop))
                for cid in rv.participant_ids:
                    f1_evidence[cid] = max(f1_evidence.get(cid, 0.0), level)

    gated = {}        # cid -> [participations, minority_count, dense_count]
    pair_counts = {}  # (cid_low, cid_high) -> same-cluster co-occurrences
    for sv in signature_views:
        rv = by_round.get(sv.round_index)
        if rv is None:
            continue
        mask, score = best_bipartition(sv.points)
        if score <= thresholds.separability_gate:
            continue
        minority, dense = _suspect_cluster(sv.points, mask, thresholds.density_margin)
        for pos, cid in enumerate(rv.participant_ids):
            entry = gated.setdefault(cid, [0, 0, 0])
            entry[0] += 1
            if minority is not None and minority[pos]:
                entry[1] += 1
            if dense is not None and dense[pos]:
                entry[2] += 1
        ids = rv.participant_ids
        for side in (mask, ~mask):
            members = [ids[i] for i in range(len(ids)) if side[i]]
            for a, b in combinations(sorted(members), 2):
                pair_counts[(a, b)] = pair_counts.get((a, b), 0) + 1

    flagged = {}

    def add(cid, kind, value):
        entry = flagged.setdefault(cid, {})
        entry[kind] = max(entry.get(kind, 0.0), value)

    for cid, level in f1_evidence.items():
        add(cid, "f1_impact", level)

    for cid, (total, minority_count, dense_count) in gated.items():
        if total < thresholds.min_gated_rounds:
            continue
        minority_fraction = minority_count / total
        dense_fraction = dense_count / total
        if minority_fraction >= thresholds.signature_fraction:
            add(cid, "signature_outlier", minority_fraction)
        if dense_fraction >= thresholds.signature_fraction:
            add(cid, "density", dense_fraction)

    max_pair = {}
    for (a, b), count in pair_counts.items():
        max_pair[a] = max(max_pair.get(a, 0), count)
        max_pair[b] = max(max_pair.get(b, 0), count)
    for cid, count in max_pair.items():
        level = min(1.0, count / (2.0 * thresholds.persistence_min))
        if level >= thresholds.signature_fraction:
            add(cid, "signature_outlier", level)

    out = []
    for cid in sorted(flagged):
        evidence = [
            {"kind": kind, "value": round(value, 6)}
            for kind, value in sorted(flagged[cid].items())
        ]
        out.append(FlaggedClient(
            client_id=int(cid),
            evidence=evidence,
            score=max(e["value"] for e in evidence),
        ))
    return out


def _final_window_mean(values, width=5) -> float:
    tail = values[-width:] if len(values) >= width else values
    return float(np.mean(tail))


def summary_statistics(run: RunRecord, signatures: list) -> dict:
    """Victim-class F1 drop, peak separability round, mean density ratio."""
    attack = run.config.attack
    f1_matrix = np.array([r.metrics.per_class_f1 for r in run.rounds])
    if attack is not None:
        series = f1_matrix[:, attack.victim_class]
        drop = float(series.max() - _final_window_mean(series))
    else:
        drops = f1_matrix.max(axis=0) - np.array(
            [_final_window_mean(f1_matrix[:, c]) for c in range(f1_matrix.shape[1])]
        )
        drop = float(drops.max())

    separabilities = [(s.round_index, s.separability) for s in signatures
                      if s.separability is not None]
    peak_round = None
    peak_value = None
    if separabilities:
        peak_round, peak_value = max(separabilities, key=lambda t: t[1])
        peak_value = float(peak_value)

    ratios = [s.density_ratio for s in signatures if s.density_ratio is not None]
    mean_ratio = float(np.mean(ratios)) if ratios else None

    return {
        "victim_f1_drop": round(drop, 6),
        "peak_separability_round": peak_round,
        "peak_separability": round(peak_value, 6) if peak_value is not None else None,
        "mean_density_ratio": round(mean_ratio, 6) if mean_ratio is not None else None,
    }


def generate_report(run: RunRecord, signatures: list, flags: list,
                    thresholds: Thresholds = Thresholds()) -> AdvisoryReport:
    """Deterministic recommendations from fired triggers plus summary stats."""
    stats = summary_statistics(run, signatures)
    recommendations = []

    if flags:
        ids = ", ".join(str(f.client_id) for f in flags)
        recommendations.append({
            "category": "client_verification",
            "text": (
                "Track per-class confusion for the flagged clients and require "
                "verification before accepting further updates from them. "
                f"Flagged: {ids}."
            ),
            "triggering_metric": f"flagged_clients={len(flags)}",
        })

    sep_values = [s.separability for s in signatures if s.separability is not None]
    high_sep = [v for v in sep_values if v > thresholds.separability_gate]
    if high_sep:
        recommendations.append({
            "category": "anomaly_detection",
            "text": (
                "Update clusters separate cleanly in projection space; wire an "
                "online outlier monitor on the per-round update signatures and "
                "quarantine the outlier cluster before aggregation."
            ),
            "triggering_metric": (
                f"rounds_over_gate={len(high_sep)};"
                f"max_separability={round(max(high_sep), 6)}"
            ),
        })

    merged = _merged_cluster_trigger(run, signatures, thresholds)
    if merged is not None:
        recommendations.append({
            "category": "robust_model",
            "text": (
                "Poisoned updates dominate aggregation and blend into the benign "
                "cluster, so outlier screening alone will miss them. Use robust "
                "aggregation (trimmed mean or median) and sanitize incoming data."
            ),
            "triggering_metric": merged,
        })

    accuracies = [r.metrics.accuracy for r in run.rounds]
    acc_drop = float(max(accuracies) - _final_window_mean(accuracies)) if accuracies else 0.0
    if stats["victim_f1_drop"] > thresholds.f1_drop and acc_drop < 0.15:
        recommendations.append({
            "category": "robustness_codesign",
            "text": (
                "Overall accuracy hides a targeted per-class failure; bake "
                "class-wise robustness checks into the training objective and "
                "release criteria rather than bolting detection on afterwards."
            ),
            "triggering_metric": (
                f"victim_f1_drop={stats['victim_f1_drop']};accuracy_drop={round(acc_drop, 6)}"
            ),
        })

    return AdvisoryReport(
        flagged_clients=flags,
        recommendations=recommendations,
        summary_stats=stats,
    )


def _merged_cluster_trigger(run: RunRecord, signatures: list,
                            thresholds: Thresholds) -> Optional[str]:
    """Overwhelming-poisoning signature: many malicious, clusters merged."""
    fractions = []
    seps = []
    for r, s in zip(run.rounds, signatures):
        frac = float(np.mean(r.malicious_flags)) if r.malicious_flags else 0.0
        fractions.append(frac)
        if s.separability is not None:
            seps.append(s.separability)
    if not fractions or not seps:
        return None
    median_fraction = float(np.median(fractions))
    median_sep = float(np.median(seps))
    if median_fraction >= 0.5 and median_sep < thresholds.merge_separability:
        return f"median_malicious_fraction={round(median_fraction, 6)};median_separability={round(median_sep, 6)}"
    return None


def advise(run: RunRecord, signatures: list,
           thresholds: Thresholds = Thresholds()) -> AdvisoryReport:
    """Full advisory pass: redact, flag, report."""
    victim = run.config.attack.victim_class if run.config.attack else None
    flags = flag_clients(redact_run(run), redact_signatures(signatures),
                         victim, thresholds)
    return generate_report(run, signatures, flags, thresholds)
