from .builders import (
    TaskStream,
    blurry_stream,
    disjoint_stream,
    iid_offline_stream,
    iid_stream,
    imbalanced_stream,
    label_groups,
    permuted_stream,
)
from .datasets import (
    Dataset,
    export_csv,
    export_dataset,
    load_dataset,
    load_digits_dataset,
    load_idx_directory,
    load_idx_pair,
    parse_idx,
    read_csv_examples,
    read_idx,
)
from .fetch import fetch_mnist

__all__ = [
    "Dataset",
    "TaskStream",
    "blurry_stream",
    "disjoint_stream",
    "export_csv",
    "export_dataset",
    "fetch_mnist",
    "iid_offline_stream",
    "iid_stream",
    "imbalanced_stream",
    "label_groups",
    "load_dataset",
    "load_digits_dataset",
    "load_idx_directory",
    "load_idx_pair",
    "parse_idx",
    "permuted_stream",
    "read_csv_examples",
    "read_idx",
]
