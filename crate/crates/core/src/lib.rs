//! A bounded-noise counting-query mechanism with sticky, contributor-keyed
//! noise, the averaging attacks that strip that noise, and the probability
//! calculations that predict how well the attacks work.
//!
//! ```
//! use bounded_noise::data::{fixtures, Query};
//! use bounded_noise::mechanism::{MechanismParams, Oracle, Session};
//!
//! let data = fixtures::toy_table();
//! let mut session = Session::new(&data, MechanismParams::uniform(1, 1, 7)?)?;
//! let q = Query::parse(data.schema(), "Suburb=Redfern")?;
//! let a = session.answer(&q)?;
//! assert!((2..=4).contains(&a));
//! assert_eq!(session.answer(&q)?, a);
//! # Ok::<(), bounded_noise::Error>(())
//! ```

pub mod analysis;
pub mod attacks;
pub mod data;
mod error;
pub mod harness;
pub mod mechanism;

pub use error::{Error, Result};
