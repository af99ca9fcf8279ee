pub mod absorption;
pub mod bipartite;
pub mod combinatorics;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod hypergraph;
pub mod matching;
pub mod partite_factor;
pub mod percolation;
pub mod regularity;
pub mod rng;
pub mod scalar;
pub mod spread_bipartite;
pub mod tree;

pub use error::{Error, Result};
pub use hypergraph::{Graph, Hypergraph, Vertex};
pub use rng::SeededRng;
pub use scalar::Scalar;

/// Floating scalar used by the samplers.
pub type Real = f64;
/// Exact scalar for literal equalities in certificates and weightings.
pub type Exact = num_rational::BigRational;
pub type PairCertificateF64 = regularity::PairCertificate<Real>;
pub type PairCertificateExact = regularity::PairCertificate<Exact>;
pub type CliqueWeightingF64 = partite_factor::CliqueWeighting<Real>;
pub type CliqueWeightingExact = partite_factor::CliqueWeighting<Exact>;
