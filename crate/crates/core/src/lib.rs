//! Power control for a cellular network with an underlaid D2D layer, both
//! modeled as independent Poisson point processes under Rayleigh fading.

pub mod error;
pub mod experiment;
pub mod feasibility;
pub mod gp;
pub mod model;
pub mod outage;
pub mod quad;
pub mod root;
pub mod sim;
pub mod special;

pub use error::{Error, MomentKind, Result};
pub use feasibility::{FeasibilityRegion, IndependentSolution, RegionCase};
pub use gp::{DependentOptimum, DiscretizedProblem, GpSolution, Grid};
pub use model::{Layer, Moment, NetworkParams, PolicyKind, PolicyMoments, PowerPolicy};
pub use sim::{OutageEstimate, PowerControl, SimConfig};
