//! Shared generators and definition-level oracles for the integration
//! suites. The blocking-pair oracles restate the definitions as plain
//! loops over (student, school, holder) triples, so the library detectors
//! have something independent to disagree with.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use seatmatch::engine::{run_mechanism, Mechanism};
use seatmatch::model::{
    Group, Instance, Matching, PriorityOrder, ReservationQuotas, School, SchoolId, Student,
    StudentId,
};
use std::collections::BTreeSet;

/// Bounds for the random markets thrown at the engine.
#[derive(Clone, Copy)]
pub struct MarketSpace {
    pub max_students: usize,
    pub max_schools: usize,
    /// One shared priority list across schools.
    pub universal: bool,
}

impl Default for MarketSpace {
    fn default() -> Self {
        MarketSpace { max_students: 8, max_schools: 4, universal: false }
    }
}

fn random_permutation(n: usize, rng: &mut ChaCha12Rng) -> PriorityOrder {
    let mut order: Vec<StudentId> = (0..n).collect();
    order.shuffle(rng);
    PriorityOrder::from_ranked(&order)
}

/// Random market: mixed groups, partial preference lists in arbitrary
/// order (possibly empty), quotas 1..=3, reserves anywhere from zero to
/// the full quota.
pub fn random_instance(
    rng: &mut ChaCha12Rng,
    space: MarketSpace,
) -> (Instance, ReservationQuotas) {
    let num_students = rng.random_range(1..=space.max_students);
    let num_schools = rng.random_range(1..=space.max_schools);

    let students = (0..num_students)
        .map(|_| {
            let group =
                if rng.random_bool(0.5) { Group::Disadvantaged } else { Group::Advantaged };
            let mut prefs: Vec<SchoolId> =
                (0..num_schools).filter(|_| rng.random_bool(0.75)).collect();
            prefs.shuffle(rng);
            Student { group, prefs }
        })
        .collect();

    let shared = random_permutation(num_students, rng);
    let schools = (0..num_schools)
        .map(|_| School {
            quota: rng.random_range(1..=3),
            priority: if space.universal {
                shared.clone()
            } else {
                random_permutation(num_students, rng)
            },
        })
        .collect();

    let instance = Instance::new(students, schools);
    let reserved =
        (0..num_schools).map(|c| rng.random_range(0..=instance.quota(c))).collect();
    (instance, ReservationQuotas::new(reserved))
}

/// Reserves drawn so each school covers at least the disadvantaged admits
/// of the plain run, which is the exact hypothesis of the dominance
/// results for the reserve mechanisms over the plain one.
pub fn smart_quotas(instance: &Instance, rng: &mut ChaCha12Rng) -> ReservationQuotas {
    let base =
        run(Mechanism::Base, instance, &ReservationQuotas::zeros(instance.num_schools()));
    let reserved = (0..instance.num_schools())
        .map(|c| {
            let floor = base.group_at(instance, c, Group::Disadvantaged);
            rng.random_range(floor..=instance.quota(c))
        })
        .collect();
    ReservationQuotas::new(reserved)
}

pub fn run(mechanism: Mechanism, instance: &Instance, quotas: &ReservationQuotas) -> Matching {
    run_mechanism(mechanism, instance, quotas).expect("small markets settle").matching
}

/// Schools `s` lists strictly before the seat held; all of them when
/// unmatched.
pub fn preferred_schools(instance: &Instance, matching: &Matching, s: StudentId) -> Vec<SchoolId> {
    let prefs = instance.prefs(s);
    let cutoff = matching
        .school_of(s)
        .and_then(|held| prefs.iter().position(|&c| c == held))
        .unwrap_or(prefs.len());
    prefs[..cutoff].to_vec()
}

/// Textbook scan: a vacant seat or any admitted student of lower priority
/// grounds the claim.
pub fn scan_classical(instance: &Instance, matching: &Matching) -> BTreeSet<(StudentId, SchoolId)> {
    let mut pairs = BTreeSet::new();
    for s in 0..instance.num_students() {
        for c in preferred_schools(instance, matching, s) {
            let holders = matching.students_of(c);
            let priority = &instance.schools()[c].priority;
            if holders.len() < instance.quota(c)
                || holders.iter().any(|&t| priority.beats(s, t))
            {
                pairs.insert((s, c));
            }
        }
    }
    pairs
}

/// Same-group scan: the displaced student must come from the claimant's
/// group, and vacant seats do not count.
pub fn scan_in_group(
    instance: &Instance,
    matching: &Matching,
    group: Group,
) -> BTreeSet<(StudentId, SchoolId)> {
    let mut pairs = BTreeSet::new();
    for s in 0..instance.num_students() {
        if instance.group(s) != group {
            continue;
        }
        for c in preferred_schools(instance, matching, s) {
            let priority = &instance.schools()[c].priority;
            let displaced = matching
                .students_of(c)
                .iter()
                .any(|&t| instance.group(t) == group && priority.beats(s, t));
            if displaced {
                pairs.insert((s, c));
            }
        }
    }
    pairs
}
