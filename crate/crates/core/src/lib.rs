//! Seeded randomness extractors secure against adversaries with bounded
//! quantum storage, built as a Nisan–Wigderson composition of a list-decodable
//! code with a weak combinatorial design, plus exact small-scale verification
//! of the classical and quantum-storage security definitions.

pub mod bits;
pub mod cli;
pub mod codes;
pub mod designs;
pub mod error;
pub mod extract;
pub mod galois;
pub mod verify;

pub use bits::BitString;
pub use error::{Error, Result};
