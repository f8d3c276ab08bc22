//! Desk-scale laboratory for a quantum fully homomorphic encryption scheme
//! whose T-gate gadgets are built from modular arithmetic programs.
//!
//! The lowering pipeline runs LWE ciphertext -> [`ma_program`] ->
//! [`branching_program`] -> [`garden_hose`] network, which the
//! [`tgate_gadget`] executes as a teleportation chain over [`quantum_core`].
//! [`qfhe_scheme`] assembles the full QOTP + HE scheme and
//! [`resource_estimator`] reproduces the parameter tables.

pub mod acceptance;
pub mod branching_program;
pub mod canon;
pub mod error;
pub mod garden_hose;
pub mod lwe_he;
pub mod ma_program;
pub mod mbqc_scheduler;
pub mod qfhe_scheme;
pub mod quantum_core;
pub mod resource_estimator;
pub mod tgate_gadget;

pub use error::{Error, Result};

/// Smallest `w` with `2^w >= m` (and `w >= 1` for `m <= 2`).
pub fn ceil_log2(m: u64) -> u32 {
    if m <= 2 {
        return 1;
    }
    64 - (m - 1).leading_zeros()
}

#[cfg(test)]
mod tests {
    use super::ceil_log2;

    #[test]
    fn ceil_log2_small_values() {
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(16), 4);
        assert_eq!(ceil_log2(17), 5);
        assert_eq!(ceil_log2(1 << 16), 16);
    }
}
