//! Pairwise layout distances and corpus statistics.

mod area;
mod docemd;
mod docsim;
mod summary;
mod wasserstein;

pub use area::{coverage_pct, overlap_pct, OverlapMode};
pub use docemd::{doc_emd, doc_emd_matrix, doc_emd_reports, DocEmdConfig, MetricReport, DEFAULT_RASTER_GRID};
pub use docsim::{box_weight, docsim, docsim_matrix};
pub use summary::{corpus_summary, CorpusSummary};
pub use wasserstein::{
    class_frequencies, pooled_boxes, w2_uniform, wasserstein_seq, wasserstein_seq_with, SeqWasserstein,
    DEFAULT_SUBSAMPLE_SEED, EXACT_POOL_LIMIT,
};
