//! Power-minimizing subcarrier, RRH and power allocation for NOMA in a
//! distributed antenna system, with single-SIC and mutual-SIC pairing.

pub mod alloc;
pub mod error;
pub mod harness;
pub mod mutual_sic;
pub mod oracle;
pub mod scenario;
pub mod solver;
pub mod waterfill;

pub use error::{Error, Result};
pub use scenario::{ChannelModel, ChannelTensor, Scenario, ScenarioConfig};
