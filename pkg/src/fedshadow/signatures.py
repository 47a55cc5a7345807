"""Attack-behavior analytics on client update deltas.

Per-round 3-D PCA projections of the output-layer deltas, silhouette
separability between malicious and benign updates, within-group density
ratios, and a run-wide trajectory under a single global PCA basis.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from fedshadow import _kernels
from fedshadow.errors import AnalysisError
from fedshadow.federation import DEFAULT_HIDDEN_WIDTH, RunRecord
from fedshadow.learner import ModelParams

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

# Eigenvalues below this fraction of the largest are treated as rank
# deficiency, not signal.
_RANK_REL_TOL = 1e-10


def extract_delta(local: ModelParams, global_prev: ModelParams) -> np.ndarray:
    """Flattened output-layer update: rows of W2 then b2, local - global."""
    if local.dims != global_prev.dims:
        raise AnalysisError("parameter shapes disagree")
    dw = local.w2 - global_prev.w2
    db = local.b2 - global_prev.b2
    return np.concatenate([dw.ravel(), db])


def output_layer_slice(flat_delta: np.ndarray, n_classes: int,
                       hidden: int = DEFAULT_HIDDEN_WIDTH) -> np.ndarray:
    """Output-layer portion of a full flattened delta vector.

    The flat layout ends with W2 (row-major) then b2, so the slice is
    the trailing n_classes * (hidden + 1) entries.
    """
    width = n_classes * (hidden + 1)
    flat_delta = np.asarray(flat_delta, dtype=np.float64)
    if flat_delta.shape[-1] < width:
        raise AnalysisError("delta vector shorter than the output layer")
    return flat_delta[..., -width:]


def class_row_indices(rows, n_classes: int, hidden: int = DEFAULT_HIDDEN_WIDTH) -> np.ndarray:
    """Indices (into an output-layer vector) of the given class rows."""
    idx = []
    for r in rows:
        if not 0 <= r < n_classes:
            raise AnalysisError(f"class row {r} out of range")
        idx.extend(range(r * hidden, (r + 1) * hidden))
    for r in rows:
        idx.append(n_classes * hidden + r)
    return np.asarray(idx, dtype=np.int64)


def _jacobi_sorted(sym: np.ndarray):
    vals, vecs, _ = _kernels.jacobi_eigh(
        np.ascontiguousarray(sym, dtype=np.float64), JACOBI_TOL, JACOBI_MAX_SWEEPS
    )
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def pca_project(vectors, n_components: int = 3):
    """Principal-component projection of row vectors.

    Returns (projections, components, explained_variance), each padded
    with zeros up to n_components when the data has lower rank. When
    n < d the eigenproblem is solved on the n x n Gram matrix of the
    centered vectors and mapped back; otherwise on the d x d covariance.
    Component signs are fixed so the largest-magnitude coordinate of
    each component is positive.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise AnalysisError("PCA needs at least 2 vectors")
    n, d = x.shape
    centered = x - x.mean(axis=0)

    r_max = min(n_components, n - 1, d)
    projections = np.zeros((n, n_components))
    components = np.zeros((n_components, d))
    explained = np.zeros(n_components)

    if n < d:
        gram = centered @ centered.T
        vals, vecs = _jacobi_sorted(gram)
        scale = vals[0] if vals.size and vals[0] > 0 else 0.0
        for i in range(r_max):
            lam = vals[i]
            if lam <= scale * _RANK_REL_TOL or lam <= 0.0:
                break
            u = vecs[:, i]
            comp = centered.T @ u / np.sqrt(lam)
            proj = np.sqrt(lam) * u
            components[i] = comp
            projections[:, i] = proj
            explained[i] = lam / (n - 1)
    else:
        cov = centered.T @ centered / (n - 1)
        vals, vecs = _jacobi_sorted(cov)
        scale = vals[0] if vals.size and vals[0] > 0 else 0.0
        for i in range(r_max):
            lam = vals[i]
            if lam <= scale * _RANK_REL_TOL or lam <= 0.0:
                break
            comp = vecs[:, i]
            components[i] = comp
            projections[:, i] = centered @ comp
            explained[i] = lam

    for i in range(n_components):
        if explained[i] <= 0.0:
            continue
        j = int(np.argmax(np.abs(components[i])))
        if components[i][j] < 0.0:
            components[i] = -components[i]
            projections[:, i] = -projections[:, i]

    return projections, components, explained


def separability_score(projections, flags) -> Optional[float]:
    """Mean silhouette of malicious vs benign points; None if one group is empty."""
    points = np.ascontiguousarray(projections, dtype=np.float64)
    mask = np.asarray(flags, dtype=np.bool_)
    if points.shape[0] != mask.shape[0]:
        raise AnalysisError("points and flags disagree on length")
    n_mal = int(mask.sum())
    if n_mal == 0 or n_mal == mask.size:
        return None
    return float(_kernels.silhouette_two(points, mask))


def density_ratio(projections, flags) -> Optional[float]:
    """Benign over malicious mean within-group pairwise distance.

    Values above 1 mean the malicious updates sit closer together.
    None when either group has fewer than 2 points, or when the
    malicious points coincide exactly.
    """
    points = np.ascontiguousarray(projections, dtype=np.float64)
    mask = np.asarray(flags, dtype=np.bool_)
    if points.shape[0] != mask.shape[0]:
        raise AnalysisError("points and flags disagree on length")
    if mask.sum() < 2 or (~mask).sum() < 2:
        return None
    malicious = float(_kernels.mean_pairwise(points[mask]))
    benign = float(_kernels.mean_pairwise(points[~mask]))
    if malicious == 0.0:
        return None
    return benign / malicious


@dataclass
class SignatureRound:
    """Per-round PCA snapshot of the k participant deltas."""

    round_index: int
    points: np.ndarray  # (k, 3)
    malicious_flags: list
    explained_variance: np.ndarray  # (3,)
    separability: Optional[float]
    density_ratio: Optional[float]

    def to_json_dict(self) -> dict:
        return {
            "round": self.round_index,
            "points": np.asarray(self.points).tolist(),
            "malicious": [bool(v) for v in self.malicious_flags],
            "explained_variance": np.asarray(self.explained_variance).tolist(),
            "separability": self.separability,
            "density_ratio": self.density_ratio,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SignatureRound":
        return cls(
            round_index=int(doc["round"]),
            points=np.asarray(doc["points"], dtype=np.float64),
            malicious_flags=[bool(v) for v in doc["malicious"]],
            explained_variance=np.asarray(doc["explained_variance"], dtype=np.float64),
            separability=doc.get("separability"),
            density_ratio=doc.get("density_ratio"),
        )


@dataclass
class TrajectoryEntry:
    round_index: int
    client_id: int
    point: np.ndarray  # (3,)


@dataclass
class Trajectory:
    """All deltas of a run projected under one global PCA basis."""

    entries: list
    explained_variance: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "explained_variance": np.asarray(self.explained_variance).tolist(),
            "entries": [
                {
                    "round": e.round_index,
                    "client_id": e.client_id,
                    "point": np.asarray(e.point).tolist(),
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Trajectory":
        return cls(
            entries=[
                TrajectoryEntry(int(e["round"]), int(e["client_id"]),
                                np.asarray(e["point"], dtype=np.float64))
                for e in doc["entries"]
            ],
            explained_variance=np.asarray(doc["explained_variance"], dtype=np.float64),
        )


def _round_feature_vectors(round_record, n_classes: int, rows=None) -> np.ndarray:
    vectors = output_layer_slice(round_record.update_deltas, n_classes)
    if rows is not None:
        vectors = vectors[:, class_row_indices(rows, n_classes)]
    return vectors


def signature_for_round(round_record, n_classes: int, rows=None) -> SignatureRound:
    """PCA snapshot plus separability and density scores for one round."""
    vectors = _round_feature_vectors(round_record, n_classes, rows)
    points, _, explained = pca_project(vectors)
    flags = list(round_record.malicious_flags)
    return SignatureRound(
        round_index=round_record.round_index,
        points=points,
        malicious_flags=flags,
        explained_variance=explained,
        separability=separability_score(points, flags),
        density_ratio=density_ratio(points, flags),
    )


def feature_rows_for_config(config, rows="auto"):
    """Resolve the feature-row choice for a run config.

    "auto" restricts to the victim and target class rows when an attack
    is configured (that is where the poison signature lives; the other
    rows carry learning noise that swamps it), and falls back to the
    full output layer otherwise. Pass None to force the full layer or
    an explicit row list to override.
    """
    if rows == "auto":
        attack = config.attack
        if attack is not None and attack.victim_class != attack.target_class:
            return [attack.victim_class, attack.target_class]
        return None
    return rows


def feature_rows_for_run(run: RunRecord, rows="auto"):
    return feature_rows_for_config(run.config, rows)


def analyze_run(run: RunRecord, rows="auto"):
    """Per-round signatures plus the global-basis trajectory of a run."""
    if not run.rounds:
        raise AnalysisError("run has no rounds to analyze")
    n_classes = int(run.config.data_spec.get("n_classes", 10))
    rows = feature_rows_for_run(run, rows)

    signatures = [signature_for_round(r, n_classes, rows) for r in run.rounds]

    all_vectors = np.vstack([_round_feature_vectors(r, n_classes, rows) for r in run.rounds])
    projections, _, explained = pca_project(all_vectors)
    entries = []
    i = 0
    for r in run.rounds:
        for cid in r.participant_ids:
            entries.append(TrajectoryEntry(r.round_index, int(cid), projections[i]))
            i += 1
    return signatures, Trajectory(entries=entries, explained_variance=explained)
