//! Dataset ingestion, preprocessing, vertical partitioning, and batching.

mod batch;
mod ingest;
mod partition;
mod preprocess;
mod schema;
mod synthetic;

pub use batch::batch_iter;
pub use ingest::{load_csv, CellValue, RawTable, RowIssue};
pub use partition::{vertical_partition, GuestView};
pub use preprocess::{
    fit_statistics, preprocess, ColumnSpan, ColumnStats, FeatureMatrix, FitStatistics, Preprocessed,
};
pub use schema::{Attribute, AttributeKind, DatasetSchema};
pub use synthetic::{generate, write_csv, SyntheticKind};
