//! Codes for centralized multi-node repair.

pub mod algebra;
pub mod bounds;
pub mod mbcr;
pub mod rlnc;
pub mod secret;
pub mod zigzag;
