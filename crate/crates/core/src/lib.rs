//! Finite-window certificates of relative property A and relative
//! amenability for finitely generated groups.
//!
//! The crate is organized bottom-up:
//!
//! - [`rat`] — exact rational numbers (every verdict is decided exactly);
//! - [`group`] — group descriptions, canonical words, balls;
//! - [`coset`] — enumerated windows of disjoint unions of coset spaces;
//! - [`cert`] — certificates in set / integer / probability form, the
//!   conversions between them, and the verifier;
//! - [`lp`] — an exact rational simplex solver plus the LP encodings used to
//!   search for optimal certificates and almost-invariant measures;
//! - [`folner`] — finite graphs, boundary operators, Følner-set search, and
//!   a uniformly-finite-homology style boundary-filling test;
//! - [`transfer`] — constructions that move certificates between spaces:
//!   trees for free products, quotients, lifts, pushforwards, and the
//!   center-flip between conventions.

pub mod amenability;
pub mod cert;
pub mod coset;
pub mod group;
pub mod lp;
pub mod rat;
pub mod transfer;
