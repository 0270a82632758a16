//! Two-way linear deterministic interference channels with a feedback time
//! fraction: channel arithmetic, sum-capacity formulas, coding schemes, a
//! bit-exact simulator and a rank-based verifier.

pub mod capacity;
pub mod channel;
pub mod cli;
pub mod gf2;
pub mod oracle;
pub mod schemes;
pub mod sim;
