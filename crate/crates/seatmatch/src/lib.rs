//! School seats with reservations: run the assignment mechanisms, audit
//! what they did, and stress the theory that says when reserves help.
//!
//! Four mechanisms share one deferred-acceptance engine. `base` ignores
//! reserves entirely. `disc` (after NYC's Discovery Program) runs three
//! stages: general seats for everyone, reserved seats for unassigned
//! disadvantaged students, leftovers for the rest. `mr` (minority reserve)
//! and `jsa` (joint seat allocation) run once with seat-aware school
//! choice rules that differ only in whether a school fills its reserve
//! before or after its general seats. That one ordering choice decides
//! whether top disadvantaged students burn reserve capacity they never
//! needed.
//!
//! The rest of the crate is instrumentation around that engine:
//!
//! - [`model`]: students, schools, priorities, matchings, validity checks.
//! - [`choice`]: the per-school seat rules the engine drives.
//! - [`axioms`]: counterexample search for the three properties
//!   (substitutability, consistency, quota-filling acceptance) that make
//!   deferred acceptance correct.
//! - [`engine`]: round-based and one-at-a-time deferred acceptance, the
//!   staged run, traces.
//! - [`split`]: the split-seat auxiliary market that reduces every reserve
//!   mechanism to plain deferred acceptance, plus projection back and the
//!   equivalence check; this is also where seat types come from.
//! - [`audit`]: blocking pairs (textbook and within-group), dominance
//!   verdicts between matchings, rank-movement summaries, and the two
//!   market conditions (clean reserve slack, covered reserves) under which
//!   the dominance results hold.
//! - [`probes`]: counterfactual searches for profitable preference
//!   misreports and profitable rank drops.
//! - [`market`]: synthetic market generators, the rank and
//!   score-separation conditions that predict clean slack, occupancy
//!   (balls in bins) statistics, and Monte Carlo rate estimates.
//! - [`samples`]: six small pinned markets with golden matchings; each one
//!   is the smallest market that exhibits one phenomenon.
//! - [`io`]: the CSV formats, report rendering, and the experiment driver
//!   behind the `seatmatch` binary.
//!
//! # Quick start
//!
//! Two advantaged students and one disadvantaged student chase two seats
//! at one school; one seat is reserved. The plain run seats the two
//! highest-priority students, the reserve flips the second seat:
//!
//! ```
//! use seatmatch::{
//!     run_mechanism, Group, Instance, Mechanism, PriorityOrder, ReservationQuotas,
//!     School, Student,
//! };
//!
//! let students = vec![
//!     Student { group: Group::Advantaged, prefs: vec![0] },
//!     Student { group: Group::Advantaged, prefs: vec![0] },
//!     Student { group: Group::Disadvantaged, prefs: vec![0] },
//! ];
//! let schools = vec![School {
//!     quota: 2,
//!     priority: PriorityOrder::from_ranked(&[0, 1, 2]),
//! }];
//! let instance = Instance::new(students, schools);
//! let quotas = ReservationQuotas::new(vec![1]);
//!
//! let plain = run_mechanism(Mechanism::Base, &instance, &quotas)?.matching;
//! let reserved = run_mechanism(Mechanism::MinorityReserve, &instance, &quotas)?.matching;
//! assert_eq!(plain.assignments(), &[Some(0), Some(0), None]);
//! assert_eq!(reserved.assignments(), &[Some(0), None, Some(0)]);
//! # Ok::<(), seatmatch::engine::EngineError>(())
//! ```
//!
//! The `examples/` directory walks every capability on the sample
//! markets; the binary exposes the same machinery over CSV files.

pub mod audit;
pub mod axioms;
pub mod choice;
pub mod engine;
pub mod io;
pub mod market;
pub mod model;
pub mod probes;
pub mod samples;
pub mod split;

pub use engine::{run_mechanism, Mechanism, MechanismRun};
pub use model::{
    Group, Instance, Matching, PriorityOrder, ReservationQuotas, School, Student,
};
pub use split::SeatType;
