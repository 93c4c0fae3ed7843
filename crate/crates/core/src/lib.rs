//! Pricing and optimization under imperfect collateral.
//!
//! The crate is organised around a single object, the *effective derivative
//! financing rate*: a sign-switching discount rate that blends each party's
//! unsecured bond rate, its liquidity rate and the rate earned (or paid) on
//! posted collateral. Everything else hangs off it:
//!
//! * [`curves`] — term structures for every rate and intensity input.
//! * [`csa`] — collateral assets, CSA terms and the collateralization
//!   descriptors (`eta`, `chi`, blended repo spread).
//! * [`discounting`] — the effective rate itself.
//! * [`repo`] — break-even term repo spreads for unobservable tenors.
//! * [`pde`] — Crank–Nicolson pricer for single-underlier European payoffs.
//! * [`exposure`] — random swap netting sets and their exposure profiles.
//! * [`xva`] — CVA/DVA/CFA/DFA/LVA/colVA decomposition by quadrature.
//! * [`optimizer`] — unit LVAs, the allocation LP and the allocation ↔
//!   revaluation fixed point.

pub mod csa;
pub mod curves;
pub mod discounting;
mod error;
pub mod exposure;
pub mod optimizer;
pub mod pde;
pub mod repo;
pub mod xva;

pub use error::{Error, Result};
