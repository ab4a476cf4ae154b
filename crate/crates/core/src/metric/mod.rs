//! Boundary jets, the inverse-metric expansion they determine, and models
//! assigning a jet to every boundary offset.

pub mod field;
pub mod inverse;
pub mod jet;
pub mod model;

pub use field::{ambient_laplacian, laplacian_from_sample, FieldJet, MetricField, MetricSample};
pub use inverse::{
    direct_metric_series, inverse_metric_series, inverse_metric_series_with, rescaled_inverse_metric,
    ExpansionCoefficients,
};
pub use jet::{random_jet, BoundaryJet, JetRecord, Tensor};
pub use model::{make_model, JetTable, MetricModel, ModelSpec, TableEntry};
