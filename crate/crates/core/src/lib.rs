//! Graph kernels built from tree contexts of shortest-path DAG decompositions.
//!
//! Every graph is decomposed into one DAG per node by a breadth-first visit.
//! Subtrees of these DAGs are interned into a shared feature space and
//! weighted by a factor that decays (or grows) with subtree size.

pub mod cv;
pub mod dag;
pub mod error;
pub mod features;
pub mod formats;
pub mod graph;
pub mod gram;
pub mod implicit;
pub mod interner;
pub mod oracle;
pub mod scalar;
pub mod svm;
pub mod synth;

pub use cv::{nested_cv, CvConfig, CvReport, FoldRecord, Grid, KernelSetting};
pub use dag::{dag_visit, DagVisit};
pub use error::{Error, Result};
pub use features::{
    extract, extract_all, odd_features, tck_features, tck_plus_odd_features, wl_features, KernelFamily,
    KernelParams, SparseFeatureVector, SpaceTag,
};
pub use formats::{parse_jsonl_dataset, parse_tu_dataset, write_jsonl_dataset};
pub use graph::{Dataset, Graph, Label};
pub use gram::{gram, gram_from_vectors, Engine, GramMatrix, KernelTag};
pub use implicit::{decompose_all, decompose_implicit, kernel_implicit, ImplicitFeatureSpace};
pub use interner::{FeatureInterner, FeatureKey};
pub use scalar::Scalar;
pub use svm::{svm_predict, svm_train, SvmConfig, SvmModel};

pub type FeatureVector = SparseFeatureVector<f64>;
pub type FeatureVectorF32 = SparseFeatureVector<f32>;
pub type Gram = GramMatrix<f64>;
pub type GramF32 = GramMatrix<f32>;
pub type Params = KernelParams<f64>;
pub type ParamsF32 = KernelParams<f32>;
pub type Model = SvmModel<f64>;
pub type ModelF32 = SvmModel<f32>;

/// Runs `f` on a dedicated pool of `threads` workers (0 picks the default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
