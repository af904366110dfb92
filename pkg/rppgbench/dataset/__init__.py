from rppgbench.dataset.records import (
    DatasetLoadResult,
    DatasetRecord,
    LoadFailure,
    SubjectSplit,
    load_dataset,
    load_record,
    split_by_subject,
)
from rppgbench.dataset.catalog import DatasetCatalogEntry, format_catalog, load_catalog
from rppgbench.dataset.analyzer import (
    AlignmentReport,
    AnalyzerReport,
    FitzpatrickResult,
    analyze_dataset,
    check_alignment,
    classify_fitzpatrick,
)
