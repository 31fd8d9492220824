//! False-discovery-controlled model selection over graded posets of models.
//!
//! Model families live in [`families`] and [`cpdag`]; [`selection`] grows a
//! path of covering steps from the least element, [`bounds`] turns subsample
//! agreement into an expected false-discovery bound, and [`oracle`] checks
//! every closed form by exhaustive enumeration on small instances.

pub mod bounds;
pub mod cpdag;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod families;
pub mod model;
pub mod oracle;
pub mod poset;
pub mod selection;

pub use error::{Error, Result};
pub use poset::{discovery_report, CoveringPair, DiscoveryReport, GradedPoset, JoinSemilattice, PathCertificate};
