//! Pricing engine for core-selecting combinatorial auctions with
//! single-parameter bidders.
//!
//! Covers efficient winner determination, Vickrey prices, core membership via
//! a separation oracle, the quadratic payment rule (Euclidean projection of
//! the Vickrey vector onto the core), its minimum-revenue-core variant, an
//! exact solver for the star network and sweeps of a winner's price as a
//! function of its own bid.

pub mod error;
pub mod instance;
pub mod lp;
pub mod mid;
pub mod money;
pub mod mrc;
pub mod polytope;
pub mod projection;
pub mod qp;
pub mod random;
pub mod star;
pub mod validate;
pub mod wdp;

pub use error::{Error, Result};
pub use instance::{AuctionInstance, InstanceSpec, Bid, Coalition, Outcome, TieBreakPolicy};
pub use mid::{
    compute_mid, generate_lower_bound_scenario, sweep_generic_curve, sweep_star_curve, verify_lower_bound,
    GenericSweep, LowerBoundReport, LowerBoundScenario, MidReport, PaymentRule, PriceCurve,
};
pub use money::Money;
pub use mrc::{min_core_revenue, mrc_quadratic_price, MrcResult};
pub use polytope::{
    enumerate_core_constraints, enumerate_core_polytope, find_most_violated_coalition, is_in_core, CoreConstraint,
    CoreMembership, CorePolytope,
};
pub use projection::{project_onto_core, project_onto_polytope, verify_kkt, KKTCertificate, ProjectionResult};
pub use star::{
    chi, expanded_core_polytope, phi, sigma_right_derivative, solve_sigma, star_mrc_price, star_to_instance,
    star_vickrey, StarBundle, StarInstance, StarSolution, StarSpec,
};
pub use validate::{all_passed, validate_instance, validate_star, PropertyCheck};
pub use wdp::{solve_wdp, vickrey_prices, WdpSolution};
