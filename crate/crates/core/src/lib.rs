//! Pricing engine for sealed-bid combinatorial auctions with XOR bids.
//!
//! The crate computes efficient allocations (winner determination), VCG and
//! weakest-type payments, and core-selecting payment rules that charge the
//! minimum-revenue core point above a payment floor. Weakest-type payments are
//! computed by constraint generation over two linear-programming formulations;
//! core points are found with the usual LP/QP core-constraint generation loop.
//!
//! Modules map one-to-one onto the moving parts:
//!
//! * [`model`] — instances, bundles, allocations, price vectors, type spaces.
//! * [`solver`] — LP/QP/binary-IP solving behind one contract.
//! * [`wdp`] — winner determination with valuation overlays.
//! * [`payments`] — VCG and weakest-type payments (BPS and BO formulations).
//! * [`core_pricing`] — core separation, minimum-revenue LP, the QP rules, and
//!   the incentive-compatibility diagnosis.
//! * [`typespace`] — seeded synthetic linear type spaces.
//! * [`cats`] — CATS-format instance files.
//! * [`metrics`] — per-instance incentive/revenue/fairness statistics.
//! * [`gen`] — a small seeded instance generator for tests and sweeps.

pub mod cats;
pub mod core_pricing;
pub mod gen;
pub mod metrics;
pub mod model;
pub mod payments;
pub mod solver;
pub mod typespace;
pub mod wdp;

/// Project-wide absolute comparison tolerance.
///
/// Every feasibility check, payment comparison, and separation cutoff uses
/// this single value so that tolerances cannot drift apart between modules.
pub const EPS: f64 = 1e-6;

pub use model::{
    fixture_ex1, Allocation, Bid, Bidder, Bundle, CoreConstraint, Instance, LinearTypeSpace,
    PriceVector, TypeConstraint,
};
