//! Incentive probes: can a student gain a better seat by lying about their
//! preferences, or by deliberately scoring worse on the admission exam?
//!
//! Both probes search counterfactuals by rerunning the mechanism. They are
//! refutation tools, not proofs: an empty witness list means the search
//! found nothing, a non-empty one is a concrete, replayable manipulation.

use crate::engine::{run_mechanism, EngineError, Mechanism};
use crate::model::{
    Group, Instance, Rank, ReservationQuotas, SchoolId, Student, StudentId,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A preference misreport that earned `student` a strictly better seat, as
/// judged by their true list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManipulationWitness {
    pub student: StudentId,
    pub misreport: Vec<SchoolId>,
    pub honest: Option<SchoolId>,
    pub improved: Option<SchoolId>,
}

#[derive(Clone, Debug, Default)]
pub struct ManipulationProbe {
    pub witnesses: Vec<ManipulationWitness>,
    /// Misreport runs performed.
    pub attempts: usize,
}

impl ManipulationProbe {
    pub fn clean(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// An adjacent priority swap under which the demoted student lands a
/// strictly better seat: getting outscored paid off.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImprovementWitness {
    pub student: StudentId,
    pub swapped_with: StudentId,
    /// Priority list the swap touched; `None` means all of them at once,
    /// the sound reading for markets with one shared ranking.
    pub school: Option<SchoolId>,
    /// Seat while ranked higher.
    pub before: Option<SchoolId>,
    /// Strictly better seat while ranked lower.
    pub after: Option<SchoolId>,
}

#[derive(Clone, Debug, Default)]
pub struct ImprovementProbe {
    pub witnesses: Vec<ImprovementWitness>,
    /// Swapped-priority runs performed.
    pub attempts: usize,
}

impl ImprovementProbe {
    pub fn clean(&self) -> bool {
        self.witnesses.is_empty()
    }
}

fn with_prefs(instance: &Instance, s: StudentId, prefs: Vec<SchoolId>) -> Instance {
    let mut students: Vec<Student> = instance.students().to_vec();
    students[s].prefs = prefs;
    Instance::new(students, instance.schools().to_vec())
}

fn with_swap(
    instance: &Instance,
    school: Option<SchoolId>,
    a: StudentId,
    b: StudentId,
) -> Instance {
    let mut schools = instance.schools().to_vec();
    match school {
        Some(c) => schools[c].priority = schools[c].priority.swapped(a, b),
        None => {
            for sch in &mut schools {
                sch.priority = sch.priority.swapped(a, b);
            }
        }
    }
    Instance::new(instance.students().to_vec(), schools)
}

fn true_rank(instance: &Instance, s: StudentId, school: Option<SchoolId>) -> Rank {
    instance.rank_of(s, school).expect("assignments stay within the true list")
}

fn permute_into(pool: &[SchoolId], prefix: &mut Vec<SchoolId>, out: &mut Vec<Vec<SchoolId>>) {
    if pool.is_empty() {
        out.push(prefix.clone());
        return;
    }
    for (i, &c) in pool.iter().enumerate() {
        let mut rest = pool.to_vec();
        rest.remove(i);
        prefix.push(c);
        permute_into(&rest, prefix, out);
        prefix.pop();
    }
}

/// Every ordering of every non-empty subset of `list`.
fn ordered_sublists(list: &[SchoolId]) -> Vec<Vec<SchoolId>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << list.len()) {
        let subset: Vec<SchoolId> = (0..list.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| list[i])
            .collect();
        permute_into(&subset, &mut Vec::new(), &mut out);
    }
    out
}

const EXHAUSTIVE_LIST_LIMIT: usize = 4;

fn misreports_for(list: &[SchoolId], budget: usize, rng: &mut ChaCha12Rng) -> Vec<Vec<SchoolId>> {
    let mut reports = if list.len() <= EXHAUSTIVE_LIST_LIMIT {
        ordered_sublists(list)
    } else {
        // Proper prefixes always; the classic manipulation is a truncation.
        let mut reports: Vec<Vec<SchoolId>> =
            (1..list.len()).map(|k| list[..k].to_vec()).collect();
        for _ in 0..budget {
            let mut shuffled = list.to_vec();
            shuffled.shuffle(rng);
            shuffled.truncate(rng.random_range(1..=list.len()));
            reports.push(shuffled);
        }
        reports
    };
    reports.retain(|r| r != list);
    reports
}

/// Hunts for profitable preference misreports under `mechanism`. Students
/// with short lists are probed against every ordered sublist; longer lists
/// get all truncations plus `random_budget` shuffled partial lists. The
/// search moves to the next student once one witness is found.
pub fn probe_strategyproofness(
    instance: &Instance,
    quotas: &ReservationQuotas,
    mechanism: Mechanism,
    scope: Option<Group>,
    random_budget: usize,
    seed: u64,
) -> Result<ManipulationProbe, EngineError> {
    let honest = run_mechanism(mechanism, instance, quotas)?.matching;
    let mut probe = ManipulationProbe::default();

    for s in 0..instance.num_students() {
        if scope.is_some_and(|g| instance.group(s) != g) || instance.prefs(s).is_empty() {
            continue;
        }
        let honest_school = honest.school_of(s);
        let honest_rank = true_rank(instance, s, honest_school);
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (s as u64).wrapping_mul(0x9e3779b97f4a7c15));
        for misreport in misreports_for(instance.prefs(s), random_budget, &mut rng) {
            let shadow = with_prefs(instance, s, misreport.clone());
            let outcome = run_mechanism(mechanism, &shadow, quotas)?.matching;
            probe.attempts += 1;
            let lied_school = outcome.school_of(s);
            if true_rank(instance, s, lied_school) < honest_rank {
                probe.witnesses.push(ManipulationWitness {
                    student: s,
                    misreport,
                    honest: honest_school,
                    improved: lied_school,
                });
                break;
            }
        }
    }
    Ok(probe)
}

/// Hunts for under-performance incentives: adjacent priority swaps where
/// the student who drops a rank ends up strictly better seated. In a
/// market with one shared ranking the swap is applied to every school at
/// once (lower exam score moves a student down everywhere); otherwise each
/// school's list is probed separately.
pub fn probe_respect_improvements(
    instance: &Instance,
    quotas: &ReservationQuotas,
    mechanism: Mechanism,
    scope: Option<Group>,
) -> Result<ImprovementProbe, EngineError> {
    let baseline = run_mechanism(mechanism, instance, quotas)?.matching;
    let mut probe = ImprovementProbe::default();

    let lists: Vec<Option<SchoolId>> = if instance.universal_priority() {
        vec![None]
    } else {
        (0..instance.num_schools()).map(Some).collect()
    };

    for list in lists {
        let order = match list {
            Some(c) => instance.schools()[c].priority.order(),
            None => instance.schools().first().map(|c| c.priority.order()).unwrap_or_default(),
        };
        for pair in order.windows(2) {
            let (upper, lower) = (pair[0], pair[1]);
            let swapped = with_swap(instance, list, upper, lower);
            let outcome = run_mechanism(mechanism, &swapped, quotas)?.matching;
            probe.attempts += 1;

            // `upper` dropped a rank: did the drop pay off?
            let in_scope =
                |s: StudentId| scope.is_none_or(|g| instance.group(s) == g);
            if in_scope(upper) {
                let before = baseline.school_of(upper);
                let after = outcome.school_of(upper);
                if true_rank(instance, upper, after) < true_rank(instance, upper, before) {
                    probe.witnesses.push(ImprovementWitness {
                        student: upper,
                        swapped_with: lower,
                        school: list,
                        before,
                        after,
                    });
                }
            }
            // `lower` gained a rank: seen from the swapped profile, falling
            // back to the original order is the under-performance.
            if in_scope(lower) {
                let before = outcome.school_of(lower);
                let after = baseline.school_of(lower);
                if true_rank(instance, lower, after) < true_rank(instance, lower, before) {
                    probe.witnesses.push(ImprovementWitness {
                        student: lower,
                        swapped_with: upper,
                        school: list,
                        before,
                        after,
                    });
                }
            }
        }
    }
    Ok(probe)
}
