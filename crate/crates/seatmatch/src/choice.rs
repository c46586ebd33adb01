//! School choice functions: which applicants a school admits from a pool.
//!
//! Three seat rules share one evaluator that runs a short list of selection
//! passes, each pass picking the highest-priority candidates that match a
//! group filter up to a seat budget:
//!
//! * `Responsive` — one pass: the top `q` applicants.
//! * `MinorityReserve` — reserved seats first, restricted to disadvantaged
//!   applicants, then the rest of the quota open to everyone.
//! * `JointSeats` — general seats first, open to everyone, then reserved
//!   seats restricted to disadvantaged applicants not already seated, then
//!   any quota left over (nonempty only when a pass ran short) open to all.
//!
//! All three are substitutable, consistent and quota-filling; the checkers in
//! [`crate::axioms`] verify that exhaustively on small universes.

use crate::model::{Group, PriorityOrder, StudentId, StudentSet};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SeatRule {
    Responsive,
    MinorityReserve,
    JointSeats,
}

/// Everything one school needs to evaluate its choice function.
#[derive(Clone, Debug)]
pub struct ChoiceContext {
    pub rule: SeatRule,
    pub priority: PriorityOrder,
    pub quota: usize,
    pub reserved: usize,
    groups: Vec<Group>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum PassFilter {
    Everyone,
    DisadvantagedOnly,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum PassBudget {
    Seats(usize),
    /// Whatever is left of the full quota after earlier passes.
    RestOfQuota,
}

impl ChoiceContext {
    pub fn responsive(priority: PriorityOrder, quota: usize, groups: Vec<Group>) -> Self {
        ChoiceContext { rule: SeatRule::Responsive, priority, quota, reserved: 0, groups }
    }

    pub fn minority_reserve(
        priority: PriorityOrder,
        quota: usize,
        reserved: usize,
        groups: Vec<Group>,
    ) -> Self {
        assert!(reserved <= quota, "reserve exceeds quota");
        ChoiceContext { rule: SeatRule::MinorityReserve, priority, quota, reserved, groups }
    }

    pub fn joint_seats(
        priority: PriorityOrder,
        quota: usize,
        reserved: usize,
        groups: Vec<Group>,
    ) -> Self {
        assert!(reserved <= quota, "reserve exceeds quota");
        ChoiceContext { rule: SeatRule::JointSeats, priority, quota, reserved, groups }
    }

    pub fn group(&self, s: StudentId) -> Group {
        self.groups[s]
    }

    /// Seats open to everyone before the reserve (`JointSeats` first pass).
    pub fn general(&self) -> usize {
        self.quota - self.reserved
    }

    fn passes(&self) -> Vec<(PassFilter, PassBudget)> {
        match self.rule {
            SeatRule::Responsive => vec![(PassFilter::Everyone, PassBudget::RestOfQuota)],
            SeatRule::MinorityReserve => vec![
                (PassFilter::DisadvantagedOnly, PassBudget::Seats(self.reserved)),
                (PassFilter::Everyone, PassBudget::RestOfQuota),
            ],
            SeatRule::JointSeats => vec![
                (PassFilter::Everyone, PassBudget::Seats(self.general())),
                (PassFilter::DisadvantagedOnly, PassBudget::Seats(self.reserved)),
                (PassFilter::Everyone, PassBudget::RestOfQuota),
            ],
        }
    }

    /// The set of applicants the school admits out of `pool`.
    pub fn choose(&self, pool: &StudentSet) -> StudentSet {
        let mut chosen = StudentSet::new();
        for (filter, budget) in self.passes() {
            let seats = match budget {
                PassBudget::Seats(k) => k,
                PassBudget::RestOfQuota => self.quota - chosen.len(),
            };
            let candidates = pool.iter().copied().filter(|&s| {
                !chosen.contains(&s)
                    && match filter {
                        PassFilter::Everyone => true,
                        PassFilter::DisadvantagedOnly => self.groups[s] == Group::Disadvantaged,
                    }
            });
            chosen.extend(max_select_iter(candidates, &self.priority, seats));
        }
        chosen
    }

    /// Would the school admit `s` if it showed up alongside the students it
    /// currently holds? This is the stability test for one pair.
    pub fn admits(&self, held: &StudentSet, s: StudentId) -> bool {
        let mut pool = held.clone();
        pool.insert(s);
        self.choose(&pool).contains(&s)
    }
}

/// The `min(k, |pool|)` highest-priority students of `pool`.
pub fn max_select(pool: &StudentSet, priority: &PriorityOrder, k: usize) -> StudentSet {
    max_select_iter(pool.iter().copied(), priority, k)
}

fn max_select_iter(
    pool: impl Iterator<Item = StudentId>,
    priority: &PriorityOrder,
    k: usize,
) -> StudentSet {
    let mut v: Vec<StudentId> = pool.collect();
    v.sort_unstable_by_key(|&s| priority.rank(s));
    v.truncate(k);
    v.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[StudentId]) -> StudentSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn max_select_takes_top_k_by_priority() {
        let p = PriorityOrder::from_ranked(&[2, 0, 1]); // best: s2, then s0, then s1
        assert_eq!(max_select(&set(&[0, 1, 2]), &p, 2), set(&[2, 0]));
        assert_eq!(max_select(&set(&[0, 1, 2]), &p, 0), set(&[]));
        // Short pools are taken whole.
        assert_eq!(max_select(&set(&[1]), &p, 3), set(&[1]));
    }

    // Five students: a0 > a1 > d0 > a2 > d1 by priority; a* advantaged, d* disadvantaged.
    fn five_students() -> (PriorityOrder, Vec<Group>) {
        use Group::*;
        // ids: 0=a0, 1=a1, 2=a2, 3=d0, 4=d1
        let priority = PriorityOrder::from_ranked(&[0, 1, 3, 2, 4]);
        let groups = vec![Advantaged, Advantaged, Advantaged, Disadvantaged, Disadvantaged];
        (priority, groups)
    }

    #[test]
    fn responsive_is_plain_top_q() {
        let (p, g) = five_students();
        let ctx = ChoiceContext::responsive(p, 3, g);
        assert_eq!(ctx.choose(&set(&[0, 1, 2, 3, 4])), set(&[0, 1, 3]));
    }

    #[test]
    fn minority_reserve_seats_disadvantaged_first() {
        let (p, g) = five_students();
        // One-seat school, fully reserved: the best disadvantaged applicant
        // beats a higher-priority advantaged one.
        let ctx = ChoiceContext::minority_reserve(p, 1, 1, g);
        assert_eq!(ctx.choose(&set(&[0, 3, 4])), set(&[3]));
        assert_eq!(ctx.choose(&set(&[0, 1])), set(&[0]));
    }

    #[test]
    fn joint_seats_fills_general_then_reserved() {
        let (p, g) = five_students();
        let ctx = ChoiceContext::joint_seats(p, 3, 1, g);
        // Two general seats go to a0 and a1; the reserved seat goes to d0,
        // the best disadvantaged student not already seated.
        assert_eq!(ctx.choose(&set(&[0, 1, 2, 3, 4])), set(&[0, 1, 3]));
    }

    #[test]
    fn joint_seats_reserve_skips_already_seated_disadvantaged() {
        let (p, g) = five_students();
        let ctx = ChoiceContext::joint_seats(p, 2, 1, g);
        // General seat: d0 (best of pool). Reserved seat: d1, not d0 again.
        assert_eq!(ctx.choose(&set(&[2, 3, 4])), set(&[3, 4]));
    }

    #[test]
    fn pools_at_or_under_quota_are_taken_whole() {
        let (p, g) = five_students();
        for ctx in [
            ChoiceContext::responsive(p.clone(), 3, g.clone()),
            ChoiceContext::minority_reserve(p.clone(), 3, 2, g.clone()),
            ChoiceContext::joint_seats(p.clone(), 3, 2, g.clone()),
        ] {
            assert_eq!(ctx.choose(&set(&[1, 4])), set(&[1, 4]));
            assert_eq!(ctx.choose(&set(&[0, 2, 4])), set(&[0, 2, 4]));
        }
    }

    #[test]
    fn reserve_without_disadvantaged_applicants_opens_to_everyone() {
        let (p, g) = five_students();
        let mr = ChoiceContext::minority_reserve(p.clone(), 2, 2, g.clone());
        assert_eq!(mr.choose(&set(&[0, 1, 2])), set(&[0, 1]));
        let jsa = ChoiceContext::joint_seats(p, 2, 2, g);
        assert_eq!(jsa.choose(&set(&[0, 1, 2])), set(&[0, 1]));
    }

    #[test]
    fn zero_reserve_collapses_all_rules_to_responsive() {
        let (p, g) = five_students();
        let base = ChoiceContext::responsive(p.clone(), 2, g.clone());
        let mr = ChoiceContext::minority_reserve(p.clone(), 2, 0, g.clone());
        let jsa = ChoiceContext::joint_seats(p, 2, 0, g);
        for pool in [set(&[0, 1, 2, 3, 4]), set(&[2, 4]), set(&[3])] {
            let want = base.choose(&pool);
            assert_eq!(mr.choose(&pool), want);
            assert_eq!(jsa.choose(&pool), want);
        }
    }

    #[test]
    fn admits_matches_choose_on_augmented_pool() {
        let (p, g) = five_students();
        let ctx = ChoiceContext::minority_reserve(p, 2, 1, g);
        let held = set(&[0, 3]);
        // d1 would displace nobody it can displace: reserve is held by d0
        // (higher priority), the open seat by a0.
        assert!(!ctx.admits(&held, 4));
        // a1 cannot displace a0 or the reserved d0 either.
        assert!(!ctx.admits(&held, 1));
        // But with the reserve held by the weaker d1, d0 gets in.
        assert!(ctx.admits(&set(&[0, 4]), 3));
    }
}
