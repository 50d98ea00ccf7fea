//! The bounded noisy counts mechanism, the attribute analyser on top of it,
//! and admissible noise distributions.

mod distribution;
mod maxent;
mod oracle;

pub use distribution::{NoiseDistribution, PMF_TOLERANCE};
pub use maxent::{solve_max_entropy, KKT_TOLERANCE};
pub use oracle::{
    AnalyserAnswer, Mechanism, MechanismParams, Oracle, Session, SharedSession, DEFAULT_QUERY_LIMIT,
};
