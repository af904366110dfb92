"""Static catalog of public rPPG datasets.

Fields that are not published for a dataset are kept as None.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, List, Optional

from rppgbench.exceptions import MalformedFile

CATALOG_PATH = Path(__file__).parent / "data" / "catalog.jsonl"

VIDEO_KINDS = frozenset({"RGB", "NIR"})
LABEL_KINDS = frozenset({"PPG", "HR", "RR", "BP", "ECG", "SpO2", "HRV", "EDA"})


@dataclass(frozen=True)
class DatasetCatalogEntry:
    index: int
    year: int
    name: str
    n_subjects: Optional[int] = None
    video_kinds: Optional[FrozenSet[str]] = None
    labels: Optional[FrozenSet[str]] = None

    def to_row(self):
        def fmt(kinds):
            return "-" if kinds is None else ", ".join(sorted(kinds))

        return {
            "#": self.index,
            "year": self.year,
            "dataset": self.name,
            "subjects": "-" if self.n_subjects is None else self.n_subjects,
            "video": fmt(self.video_kinds),
            "labels": fmt(self.labels),
        }


def _kinds(value, allowed, path, line, field):
    if value is None:
        return None
    kinds = frozenset(value)
    unknown = kinds - allowed
    if unknown:
        raise MalformedFile(
            path, f"unknown {field} {', '.join(sorted(unknown))}", line=line
        )
    return kinds


def load_catalog(path=CATALOG_PATH) -> List[DatasetCatalogEntry]:
    entries = []
    with open(path) as f:
        for line, text in enumerate(f, 1):
            if not text.strip():
                continue
            try:
                row = json.loads(text)
                entries.append(
                    DatasetCatalogEntry(
                        index=int(row["index"]),
                        year=int(row["year"]),
                        name=row["name"],
                        n_subjects=row.get("n_subjects"),
                        video_kinds=_kinds(
                            row.get("video_kinds"), VIDEO_KINDS, path, line, "video kind"
                        ),
                        labels=_kinds(row.get("labels"), LABEL_KINDS, path, line, "label"),
                    )
                )
            except (ValueError, KeyError, TypeError) as e:
                raise MalformedFile(path, f"invalid catalog row: {e}", line=line)
    return sorted(entries, key=lambda e: e.index)


def format_catalog(entries=None) -> str:
    from tabulate import tabulate

    if entries is None:
        entries = load_catalog()
    return tabulate([e.to_row() for e in entries], headers="keys")
