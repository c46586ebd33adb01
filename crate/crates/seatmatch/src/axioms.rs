//! Checkers for the three choice-function axioms that make deferred
//! acceptance well-behaved: substitutability, consistency and quota-filling
//! acceptance. They search for counterexamples; `None` means none exists
//! (exhaustive mode) or none was found (sampled mode).
//!
//! Universes of at most [`EXHAUSTIVE_LIMIT`] students are checked
//! exhaustively over every subset. For substitutability the search walks
//! single-student removals instead of all subset pairs: if some pair
//! `(S1, S2)` with `s ∈ C(S1)` but `s ∉ C(S2 ∪ {s})` exists, then along any
//! removal chain from `S1` down to `S2 ∪ {s}` there is a first step where `s`
//! drops out, and that step is a one-removal counterexample. Checking all
//! `2^n · n` removals is therefore equivalent to checking all `3^n` pairs.
//!
//! The checkers are generic over the choice rule so tests can feed them
//! deliberately broken rules and watch them object.

use crate::choice::ChoiceContext;
use crate::model::{StudentId, StudentSet};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

/// Largest universe checked exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// `student ∈ choice(pool)` but `student ∉ choice(subset ∪ {student})`
/// for `subset ⊆ pool`: shrinking the pool hurt a chosen student.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutabilityWitness {
    pub pool: Vec<StudentId>,
    pub subset: Vec<StudentId>,
    pub student: StudentId,
}

/// `choice(pool) ⊆ subset ⊆ pool` but `choice(subset) ≠ choice(pool)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencyWitness {
    pub pool: Vec<StudentId>,
    pub subset: Vec<StudentId>,
}

/// `|choice(pool)| ≠ min(quota, |pool|)`: seats wasted or overfilled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AcceptanceWitness {
    pub pool: Vec<StudentId>,
    pub chosen: Vec<StudentId>,
}

pub fn check_substitutable(
    ctx: &ChoiceContext,
    universe: &[StudentId],
    budget: usize,
    seed: u64,
) -> Option<SubstitutabilityWitness> {
    check_substitutable_rule(|pool| ctx.choose(pool), universe, budget, seed)
}

pub fn check_consistent(
    ctx: &ChoiceContext,
    universe: &[StudentId],
    budget: usize,
    seed: u64,
) -> Option<ConsistencyWitness> {
    check_consistent_rule(|pool| ctx.choose(pool), universe, budget, seed)
}

pub fn check_q_acceptant(
    ctx: &ChoiceContext,
    universe: &[StudentId],
    budget: usize,
    seed: u64,
) -> Option<AcceptanceWitness> {
    check_q_acceptant_rule(|pool| ctx.choose(pool), ctx.quota, universe, budget, seed)
}

pub fn check_substitutable_rule<F>(
    rule: F,
    universe: &[StudentId],
    budget: usize,
    seed: u64,
) -> Option<SubstitutabilityWitness>
where
    F: Fn(&StudentSet) -> StudentSet,
{
    if universe.len() <= EXHAUSTIVE_LIMIT {
        let memo = MaskMemo::build(&rule, universe);
        for pool in 0..memo.masks() {
            let chosen = memo.chosen(pool);
            let mut removable = pool;
            while removable != 0 {
                let t = removable & removable.wrapping_neg();
                removable &= removable - 1;
                let shrunk = pool & !t;
                // Every chosen student other than t must survive t's removal.
                let lost = (chosen & !t) & !memo.chosen(shrunk);
                if lost != 0 {
                    let s = lost.trailing_zeros() as usize;
                    return Some(SubstitutabilityWitness {
                        pool: memo.members(pool),
                        subset: memo.members(shrunk),
                        student: universe[s],
                    });
                }
            }
        }
        return None;
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let pool = random_subset(universe, &mut rng);
        let chosen = rule(&pool);
        let subset = random_subset_of(&pool, &mut rng);
        for &s in &chosen {
            let mut augmented: StudentSet = subset.clone();
            augmented.insert(s);
            if !rule(&augmented).contains(&s) {
                return Some(SubstitutabilityWitness {
                    pool: pool.into_iter().collect(),
                    subset: subset.into_iter().collect(),
                    student: s,
                });
            }
        }
    }
    None
}

pub fn check_consistent_rule<F>(
    rule: F,
    universe: &[StudentId],
    budget: usize,
    seed: u64,
) -> Option<ConsistencyWitness>
where
    F: Fn(&StudentSet) -> StudentSet,
{
    if universe.len() <= EXHAUSTIVE_LIMIT {
        let memo = MaskMemo::build(&rule, universe);
        for pool in 0..memo.masks() {
            let chosen = memo.chosen(pool);
            let free = pool & !chosen;
            // All sets between the chosen set and the pool must choose alike.
            let mut sub = free;
            loop {
                let between = chosen | sub;
                if memo.chosen(between) != chosen {
                    return Some(ConsistencyWitness {
                        pool: memo.members(pool),
                        subset: memo.members(between),
                    });
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & free;
            }
        }
        return None;
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let pool = random_subset(universe, &mut rng);
        let chosen = rule(&pool);
        let mut between = chosen.clone();
        for &s in pool.difference(&chosen) {
            if rng.random::<bool>() {
                between.insert(s);
            }
        }
        if rule(&between) != chosen {
            return Some(ConsistencyWitness {
                pool: pool.into_iter().collect(),
                subset: between.into_iter().collect(),
            });
        }
    }
    None
}

pub fn check_q_acceptant_rule<F>(
    rule: F,
    quota: usize,
    universe: &[StudentId],
    budget: usize,
    seed: u64,
) -> Option<AcceptanceWitness>
where
    F: Fn(&StudentSet) -> StudentSet,
{
    let verify = |pool: &StudentSet| -> Option<AcceptanceWitness> {
        let chosen = rule(pool);
        let want = quota.min(pool.len());
        if chosen.len() != want || !chosen.is_subset(pool) {
            return Some(AcceptanceWitness {
                pool: pool.iter().copied().collect(),
                chosen: chosen.into_iter().collect(),
            });
        }
        None
    };

    if universe.len() <= EXHAUSTIVE_LIMIT {
        for mask in 0u32..(1u32 << universe.len()) {
            let pool: StudentSet = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &s)| s)
                .collect();
            if let Some(w) = verify(&pool) {
                return Some(w);
            }
        }
        return None;
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let pool = random_subset(universe, &mut rng);
        if let Some(w) = verify(&pool) {
            return Some(w);
        }
    }
    None
}

/// Choice sets of every subset of a small universe, indexed by bitmask.
struct MaskMemo<'a> {
    universe: &'a [StudentId],
    chosen: Vec<u32>,
}

impl<'a> MaskMemo<'a> {
    fn build<F>(rule: &F, universe: &'a [StudentId]) -> Self
    where
        F: Fn(&StudentSet) -> StudentSet,
    {
        assert!(universe.len() <= EXHAUSTIVE_LIMIT);
        let total = 1u32 << universe.len();
        let mut chosen = Vec::with_capacity(total as usize);
        for mask in 0..total {
            let pool: StudentSet = universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &s)| s)
                .collect();
            let picked = rule(&pool);
            let mut picked_mask = 0u32;
            for (i, s) in universe.iter().enumerate() {
                if picked.contains(s) {
                    picked_mask |= 1 << i;
                }
            }
            chosen.push(picked_mask);
        }
        MaskMemo { universe, chosen }
    }

    fn masks(&self) -> u32 {
        1u32 << self.universe.len()
    }

    fn chosen(&self, mask: u32) -> u32 {
        self.chosen[mask as usize]
    }

    fn members(&self, mask: u32) -> Vec<StudentId> {
        self.universe
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &s)| s)
            .collect()
    }
}

fn random_subset(universe: &[StudentId], rng: &mut impl Rng) -> StudentSet {
    universe.iter().copied().filter(|_| rng.random::<bool>()).collect()
}

fn random_subset_of(pool: &StudentSet, rng: &mut impl Rng) -> StudentSet {
    pool.iter().copied().filter(|_| rng.random::<bool>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{max_select, ChoiceContext};
    use crate::model::{Group, PriorityOrder};

    fn ctx_trio(quota: usize, reserved: usize) -> Vec<ChoiceContext> {
        use Group::*;
        // a0 > a1 > d0 > a2 > d1 > d2
        let priority = PriorityOrder::from_ranked(&[0, 1, 3, 2, 4, 5]);
        let groups =
            vec![Advantaged, Advantaged, Advantaged, Disadvantaged, Disadvantaged, Disadvantaged];
        vec![
            ChoiceContext::responsive(priority.clone(), quota, groups.clone()),
            ChoiceContext::minority_reserve(priority.clone(), quota, reserved, groups.clone()),
            ChoiceContext::joint_seats(priority, quota, reserved, groups),
        ]
    }

    #[test]
    fn seat_rules_pass_all_three_axioms_exhaustively() {
        let universe: Vec<StudentId> = (0..6).collect();
        for ctx in ctx_trio(3, 1) {
            assert_eq!(check_substitutable(&ctx, &universe, 0, 0), None);
            assert_eq!(check_consistent(&ctx, &universe, 0, 0), None);
            assert_eq!(check_q_acceptant(&ctx, &universe, 0, 0), None);
        }
    }

    #[test]
    fn fully_reserved_school_still_passes() {
        let universe: Vec<StudentId> = (0..6).collect();
        for ctx in ctx_trio(2, 2) {
            assert_eq!(check_substitutable(&ctx, &universe, 0, 0), None);
            assert_eq!(check_consistent(&ctx, &universe, 0, 0), None);
            assert_eq!(check_q_acceptant(&ctx, &universe, 0, 0), None);
        }
    }

    /// Pool-dependent favoritism: with both s0 and s2 present, s2 jumps the
    /// queue; otherwise plain top-1. Shrinking {s0,s1,s2} to {s1,s2} then
    /// drops s2, so the rule is not substitutable (and not consistent).
    fn boosted_rule(priority: PriorityOrder) -> impl Fn(&StudentSet) -> StudentSet {
        move |pool| {
            if pool.contains(&0) && pool.contains(&2) {
                return [2].into_iter().collect();
            }
            max_select(pool, &priority, 1)
        }
    }

    #[test]
    fn broken_rule_fails_substitutability() {
        let priority = PriorityOrder::from_ranked(&[0, 1, 2]);
        let w = check_substitutable_rule(boosted_rule(priority), &[0, 1, 2], 0, 0)
            .expect("favoritism must be caught");
        assert_eq!(w.student, 2);
        // Verify the witness against the definition directly.
        let priority = PriorityOrder::from_ranked(&[0, 1, 2]);
        let rule = boosted_rule(priority);
        let pool: StudentSet = w.pool.iter().copied().collect();
        let mut shrunk: StudentSet = w.subset.iter().copied().collect();
        assert!(rule(&pool).contains(&w.student));
        shrunk.insert(w.student);
        assert!(!rule(&shrunk).contains(&w.student));
    }

    #[test]
    fn broken_rule_fails_consistency() {
        let priority = PriorityOrder::from_ranked(&[0, 1, 2]);
        let w = check_consistent_rule(boosted_rule(priority), &[0, 1, 2], 0, 0)
            .expect("favoritism must be caught");
        let priority = PriorityOrder::from_ranked(&[0, 1, 2]);
        let rule = boosted_rule(priority);
        let pool: StudentSet = w.pool.iter().copied().collect();
        let subset: StudentSet = w.subset.iter().copied().collect();
        assert!(rule(&pool).is_subset(&subset));
        assert!(subset.is_subset(&pool));
        assert_ne!(rule(&pool), rule(&subset));
    }

    #[test]
    fn seat_wasting_rule_fails_acceptance() {
        // Admits at most one student even with two seats open.
        let priority = PriorityOrder::from_ranked(&[0, 1, 2]);
        let rule = move |pool: &StudentSet| max_select(pool, &priority, 1);
        let w = check_q_acceptant_rule(rule, 2, &[0, 1, 2], 0, 0).expect("waste must be caught");
        assert!(w.pool.len() >= 2);
        assert_eq!(w.chosen.len(), 1);
    }

    #[test]
    fn sampled_mode_finds_planted_break_in_large_universe() {
        // 16 students forces the sampled path; favoritism planted on (0, 13).
        let order: Vec<StudentId> = (0..16).collect();
        let priority = PriorityOrder::from_ranked(&order);
        let rule = move |pool: &StudentSet| {
            if pool.contains(&0) && pool.contains(&13) {
                return [13].into_iter().collect();
            }
            max_select(pool, &priority, 1)
        };
        let universe: Vec<StudentId> = (0..16).collect();
        let w = check_substitutable_rule(rule, &universe, 4000, 7);
        assert!(w.is_some(), "sampled search should stumble on the planted break");
    }

    #[test]
    fn sampled_mode_accepts_honest_rules() {
        use Group::*;
        let order: Vec<StudentId> = (0..16).collect();
        let priority = PriorityOrder::from_ranked(&order);
        let groups: Vec<Group> = (0..16)
            .map(|i| if i % 3 == 0 { Disadvantaged } else { Advantaged })
            .collect();
        let universe: Vec<StudentId> = (0..16).collect();
        let ctx = ChoiceContext::joint_seats(priority, 5, 2, groups);
        assert_eq!(check_substitutable(&ctx, &universe, 300, 11), None);
        assert_eq!(check_consistent(&ctx, &universe, 300, 11), None);
        assert_eq!(check_q_acceptant(&ctx, &universe, 300, 11), None);
    }
}
