//! Airy functions, the profile functions built from them and the
//! fundamental solutions of `u_t = u_xxx`.

pub mod airy;
pub mod profile;

pub use airy::{airy, airy_all, AiryKind, AiryValues};
pub use profile::{fundamental, profile, profile_integral_check, FundamentalKind, ProfileIdentity, ProfileKind};
