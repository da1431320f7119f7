"""Group-balancing augmentation of a training split.

Samples are bucketed into cells keyed by (all declared sensitive-attribute
values, label). Every non-empty cell is raised to the size of the largest
cell, either by duplicating rows at random (random_oversample) or by
convex per-modality combinations of two same-cell parents (mixfeat).
Test splits are never augmented; originals are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, SampleMeta
from .errors import InputError, UnreachableCellError

CellKey = tuple[tuple[int, ...], int]  # (attribute values in declared order, label)


@dataclass(frozen=True)
class MixFeatConfig:
    beta_alpha: float = 1.0  # Beta(1,1) = uniform mixing weights
    beta_beta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.beta_alpha > 0 and self.beta_beta > 0):
            raise InputError("Beta shape parameters must be positive")


@dataclass
class CellPlan:
    current_count: int
    target_count: int


@dataclass
class AugmentationPlan:
    cells: dict[CellKey, CellPlan]
    method: str = "mixfeat"

    @property
    def total_synthetic(self) -> int:
        return sum(c.target_count - c.current_count for c in self.cells.values())


def _cell_key(meta: SampleMeta) -> CellKey:
    return (tuple(v for _, v in meta.attributes), meta.label)


def _cells_of(train: Dataset) -> dict[CellKey, list[int]]:
    cells: dict[CellKey, list[int]] = {}
    for i, m in enumerate(train.meta):
        cells.setdefault(_cell_key(m), []).append(i)
    return cells


def plan_balancing(train: Dataset, method: str = "mixfeat") -> AugmentationPlan:
    """Raise every non-empty (attributes, label) cell to the global max count."""
    cells = _cells_of(train)
    target = max(len(v) for v in cells.values())
    return AugmentationPlan(
        cells={k: CellPlan(len(v), target) for k, v in sorted(cells.items())},
        method=method,
    )


def mix_pair(row_i: np.ndarray, row_j: np.ndarray, lam: float) -> np.ndarray:
    """Convex combination lam * row_i + (1 - lam) * row_j."""
    return lam * np.asarray(row_i, dtype=float) + (1.0 - lam) * np.asarray(row_j, dtype=float)


def _synthesize(train: Dataset, plan: AugmentationPlan, draw_row):
    """Shared append loop; draw_row(cell_indices, rng) -> (per-modality rows, subject_id)."""
    cells = _cells_of(train)
    new_rows = {name: [] for name in train.modality_names}
    new_meta: list[SampleMeta] = []
    counter = 0
    for key, cp in sorted(plan.cells.items()):
        deficit = cp.target_count - cp.current_count
        if deficit <= 0:
            continue
        sources = cells.get(key, [])
        if not sources:
            raise UnreachableCellError(f"cell {key} needs {deficit} samples but has no source rows")
        for _ in range(deficit):
            rows, subject_id = draw_row(sources, key)
            for name, row in rows.items():
                new_rows[name].append(row)
            attrs, label = key
            counter += 1
            new_meta.append(
                SampleMeta(
                    sample_id=f"syn-{plan.method}-{counter:05d}",
                    subject_id=subject_id,
                    label=label,
                    attributes=tuple(zip(train.declared_attributes, attrs)),
                )
            )
    stacked = {
        name: (np.array(rows) if rows else np.empty((0, train.modality(name).n_features)))
        for name, rows in new_rows.items()
    }
    return train.with_rows_appended(stacked, new_meta)


def random_oversample(train: Dataset, plan: AugmentationPlan, seed: int) -> Dataset:
    """Duplicate uniformly-drawn rows of each deficient cell until balanced."""
    rng = np.random.default_rng(seed)

    def draw(sources, key):
        i = sources[rng.integers(len(sources))]
        rows = {t.modality_name: t.samples[i].copy() for t in train.modalities}
        return rows, train.meta[i].subject_id

    return _synthesize(train, plan, draw)


@dataclass(frozen=True)
class SynthProvenance:
    """How one synthetic row was built: parent row indices into the training
    dataset and the per-modality mixing weight used."""

    parent_i: int
    parent_j: int
    lambdas: tuple[tuple[str, float], ...]


def mixfeat_with_provenance(
    train: Dataset, plan: AugmentationPlan, cfg: MixFeatConfig
) -> tuple[Dataset, list[SynthProvenance]]:
    """mixfeat plus a per-synthetic-row record of parents and weights."""
    rng = np.random.default_rng(cfg.seed)
    counter = [0]
    provenance: list[SynthProvenance] = []

    def draw(sources, key):
        if len(sources) == 1:
            i = j = sources[0]
        else:
            pick = rng.choice(len(sources), size=2, replace=False)
            i, j = sources[pick[0]], sources[pick[1]]
        rows, lams = {}, []
        for t in train.modalities:
            lam = float(rng.beta(cfg.beta_alpha, cfg.beta_beta))
            rows[t.modality_name] = mix_pair(t.samples[i], t.samples[j], lam)
            lams.append((t.modality_name, lam))
        provenance.append(SynthProvenance(int(i), int(j), tuple(lams)))
        counter[0] += 1
        return rows, f"syn-subject-{counter[0]:05d}"

    return _synthesize(train, plan, draw), provenance


def mixfeat(train: Dataset, plan: AugmentationPlan, cfg: MixFeatConfig) -> Dataset:
    """Synthesize balanced samples by mixing two same-cell parents.

    For each synthetic sample two distinct parents are drawn uniformly from
    the cell (a singleton cell duplicates its only row), and each modality
    gets its own fresh mixing weight drawn from Beta(beta_alpha, beta_beta).
    Labels and attributes are inherited from the cell; the subject id is a
    fresh synthetic one.
    """
    return mixfeat_with_provenance(train, plan, cfg)[0]


def augment_dataset(train: Dataset, method: str, seed: int,
                    beta_alpha: float = 1.0, beta_beta: float = 1.0) -> Dataset:
    """Dispatch helper used by the pipeline; method 'none' is a no-op."""
    if method == "none":
        return train
    plan = plan_balancing(train, method)
    if method == "random_oversample":
        return random_oversample(train, plan, seed)
    if method == "mixfeat":
        return mixfeat(train, plan, MixFeatConfig(beta_alpha, beta_beta, seed))
    raise InputError(f"unknown augmentation method {method!r}")
