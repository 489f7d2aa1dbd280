"""Ingestion of metric/score tables and image catalog manifests.

The published per-image spreadsheet (VisComplexity2K export) is not
redistributed here; point ``VISCOMPLEXITY2K_CSV`` or a CLI flag at a
local CSV export of it. Loaders are column-name driven so both that
export and this package's own metric CSVs go through the same path.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pixmetrics import METRIC_COLUMNS

DATASET_ENV_VAR = "VISCOMPLEXITY2K_CSV"
DEFAULT_DATASET_PATHS = ("data/viscomplexity2k.csv", "viscomplexity2k.csv")

STANDARD_METRIC_ORDER = [METRIC_COLUMNS[k] for k in (
    "ie", "kc", "se", "ig", "fc", "h", "cf", "ergb", "ed", "fp", "tir", "mec",
)]

# Subgroup labels used by the published dataset / catalog tags.
TAG_NODE_LINK = "node-link"
TAG_HEATMAP_CONTINUOUS = "heatmap-continuous"
TAG_HEATMAP_DISCRETE = "heatmap-discrete"


class JoinMismatch(ValueError):
    """Metric and score tables do not share image ids."""

    def __init__(self, missing: list):
        super().__init__(f"ids missing from one side of the join: {missing[:20]}")
        self.missing = missing


@dataclass
class MetricScoreTable:
    image_ids: list
    X: np.ndarray
    y: np.ndarray
    columns: list
    tags: list = field(default_factory=list)


@dataclass
class CatalogEntry:
    image_id: str
    path: str
    tags: tuple


def load_catalog(path) -> list:
    """Catalog manifest CSV with columns (id, path, tags); tags are
    semicolon-separated subgroup labels."""
    entries = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            tags = tuple(t.strip() for t in row.get("tags", "").split(";") if t.strip())
            entries.append(CatalogEntry(image_id=row["id"], path=row["path"], tags=tags))
    ids = [e.image_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError("catalog ids must be unique")
    return entries


def _resolve_column(fieldnames: list, wanted: str) -> str | None:
    lowered = {name.lower().strip(): name for name in fieldnames}
    return lowered.get(wanted.lower())


def load_metric_score_table(
    path,
    metric_columns: list | None = None,
    score_column: str = "VC",
    id_column: str = "image_id",
    tag_column: str = "tags",
) -> MetricScoreTable:
    """Load a joined metric+score CSV.

    Column lookup is case-insensitive. ``metric_columns`` defaults to the
    twelve standard O.* names; missing metric columns raise KeyError
    naming the column.
    """
    metric_columns = metric_columns or STANDARD_METRIC_ORDER
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        fields = reader.fieldnames or []
        id_col = _resolve_column(fields, id_column)
        score_col = _resolve_column(fields, score_column)
        tag_col = _resolve_column(fields, tag_column)
        resolved = {}
        for col in metric_columns:
            actual = _resolve_column(fields, col)
            if actual is None:
                raise KeyError(f"metric column '{col}' not found in {path}")
            resolved[col] = actual
        if score_col is None:
            raise KeyError(f"score column '{score_column}' not found in {path}")
        ids, rows, ys, tags = [], [], [], []
        for i, row in enumerate(reader):
            ids.append(row[id_col] if id_col else str(i))
            rows.append([float(row[resolved[c]]) for c in metric_columns])
            ys.append(float(row[score_col]))
            tags.append(row[tag_col] if tag_col else "")
    return MetricScoreTable(
        image_ids=ids,
        X=np.array(rows, dtype=np.float64),
        y=np.array(ys, dtype=np.float64),
        columns=list(metric_columns),
        tags=tags,
    )


def join_metric_and_score_files(
    metrics_path, scores_path,
    metric_columns: list | None = None,
    score_column: str = "mu",
    id_column: str = "image_id",
) -> MetricScoreTable:
    """Join a metrics CSV with a scores CSV on image_id."""
    metric_columns = metric_columns or STANDARD_METRIC_ORDER
    scores = {}
    with open(scores_path, newline="") as f:
        reader = csv.DictReader(f)
        score_col = _resolve_column(reader.fieldnames or [], score_column)
        sid_col = _resolve_column(reader.fieldnames or [], id_column)
        if score_col is None or sid_col is None:
            raise KeyError(f"scores file needs '{id_column}' and '{score_column}'")
        for row in reader:
            scores[row[sid_col]] = float(row[score_col])
    table = load_metric_score_table(
        metrics_path, metric_columns=metric_columns,
        score_column=metric_columns[0],  # placeholder; y replaced below
        id_column=id_column,
    )
    missing = [i for i in table.image_ids if i not in scores]
    missing += [i for i in scores if i not in set(table.image_ids)]
    if missing:
        raise JoinMismatch(sorted(set(missing)))
    table.y = np.array([scores[i] for i in table.image_ids], dtype=np.float64)
    return table


def locate_published_dataset() -> Path | None:
    """Find a local copy of the published spreadsheet export, if any."""
    env = os.environ.get(DATASET_ENV_VAR)
    if env and Path(env).exists():
        return Path(env)
    for candidate in DEFAULT_DATASET_PATHS:
        if Path(candidate).exists():
            return Path(candidate)
    return None
