//! Fairness and comparison analytics over finished matchings: blocking
//! pairs, group dominance, rank-change summaries, and the two market
//! conditions (high competitiveness, smart reserve) that decide when the
//! reserve mechanisms provably help.

use crate::audit::DominanceVerdict::{
    DominatedBy, Equal, Incomparable, ParetoDominates, WeaklyDominates,
};
use crate::engine::{run_mechanism, EngineError, Mechanism};
use crate::model::{
    Group, Instance, Matching, Rank, ReservationQuotas, SchoolId, StudentId,
};
use std::collections::{BTreeMap, BTreeSet};

/// Which students a blocking-pair scan ranges over.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BlockScope {
    /// Disadvantaged students envying disadvantaged students.
    Disadvantaged,
    /// Advantaged students envying advantaged students.
    Advantaged,
    /// Any student, against any seat holder or a vacant seat.
    Classical,
}

/// Why the blocked student has a claim at the school.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Witness {
    /// The school has an unfilled seat.
    VacantSeat,
    /// This admitted student has lower priority than the claimant.
    Displaced(StudentId),
}

/// `student` prefers `school` to their assignment and `witness` shows the
/// school would have to yield a seat.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BlockingPair {
    pub student: StudentId,
    pub school: SchoolId,
    pub scope: BlockScope,
    pub witness: Witness,
}

fn schools_above_assignment<'a>(
    instance: &'a Instance,
    matching: &'a Matching,
    s: StudentId,
) -> impl Iterator<Item = SchoolId> + 'a {
    let assigned = matching.school_of(s);
    instance
        .prefs(s)
        .iter()
        .copied()
        .take_while(move |&c| Some(c) != assigned)
}

/// Lowest-priority member of `pool` that `s` outranks at `c`.
fn worst_beaten(
    instance: &Instance,
    c: SchoolId,
    pool: &BTreeSet<StudentId>,
    s: StudentId,
) -> Option<StudentId> {
    let priority = &instance.schools()[c].priority;
    pool.iter()
        .copied()
        .filter(|&other| priority.beats(s, other))
        .max_by_key(|&other| priority.rank(other))
}

/// Pairs where a `group` student is envied by a higher-priority student of
/// the same group. These are the fairness violations a reserve mechanism
/// can inflict on the very group it protects.
pub fn find_in_group_blocking_pairs(
    instance: &Instance,
    matching: &Matching,
    group: Group,
) -> Vec<BlockingPair> {
    let scope = match group {
        Group::Disadvantaged => BlockScope::Disadvantaged,
        Group::Advantaged => BlockScope::Advantaged,
    };
    let mut pairs = Vec::new();
    for s in 0..instance.num_students() {
        if instance.group(s) != group {
            continue;
        }
        for c in schools_above_assignment(instance, matching, s) {
            let peers: BTreeSet<StudentId> = matching
                .students_of(c)
                .iter()
                .copied()
                .filter(|&other| instance.group(other) == group)
                .collect();
            if let Some(witness) = worst_beaten(instance, c, &peers, s) {
                pairs.push(BlockingPair { student: s, school: c, scope, witness: Witness::Displaced(witness) });
            }
        }
    }
    pairs
}

/// Textbook blocking pairs against the schools' raw priorities: a vacant
/// seat or any admitted student of lower priority grounds a claim.
pub fn find_classical_blocking_pairs(instance: &Instance, matching: &Matching) -> Vec<BlockingPair> {
    let mut pairs = Vec::new();
    for s in 0..instance.num_students() {
        for c in schools_above_assignment(instance, matching, s) {
            let holders = matching.students_of(c);
            let witness = if holders.len() < instance.schools()[c].quota {
                Some(Witness::VacantSeat)
            } else {
                worst_beaten(instance, c, holders, s).map(Witness::Displaced)
            };
            if let Some(witness) = witness {
                pairs.push(BlockingPair { student: s, school: c, scope: BlockScope::Classical, witness });
            }
        }
    }
    pairs
}

/// Distinct students appearing on the claiming side of `pairs`.
pub fn blocked_students(pairs: &[BlockingPair]) -> BTreeSet<StudentId> {
    pairs.iter().map(|p| p.student).collect()
}

/// How two matchings relate for one group of students, judged by each
/// member's own preference list.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DominanceVerdict {
    /// The matchings are identical, full stop.
    Equal,
    /// Every group member holds the same seat in both, but the matchings
    /// differ somewhere outside the group.
    WeaklyDominates,
    /// No member is worse in the first and at least one is strictly better.
    ParetoDominates,
    /// No member is better in the first and at least one is strictly worse.
    DominatedBy,
    /// Some member is strictly better and another strictly worse.
    Incomparable,
}

impl DominanceVerdict {
    /// The first matching places every group member at least as well.
    pub fn first_dominates(self) -> bool {
        matches!(self, Equal | WeaklyDominates | ParetoDominates)
    }

    /// The second matching places every group member at least as well.
    pub fn second_dominates(self) -> bool {
        matches!(self, Equal | WeaklyDominates | DominatedBy)
    }
}

#[derive(Clone, Debug)]
pub struct GroupComparison {
    pub group: Group,
    pub verdict: DominanceVerdict,
    /// Members strictly better off in the first matching.
    pub prefer_first: Vec<StudentId>,
    /// Members strictly better off in the second matching.
    pub prefer_second: Vec<StudentId>,
}

fn rank_under(instance: &Instance, matching: &Matching, s: StudentId) -> Rank {
    instance
        .rank_of(s, matching.school_of(s))
        .expect("matching assigns only acceptable schools")
}

/// Compares two matchings seat by seat for the members of `group`.
pub fn compare_for_group(
    instance: &Instance,
    first: &Matching,
    second: &Matching,
    group: Group,
) -> GroupComparison {
    let mut prefer_first = Vec::new();
    let mut prefer_second = Vec::new();
    for s in instance.group_members(group) {
        let in_first = rank_under(instance, first, s);
        let in_second = rank_under(instance, second, s);
        if in_first < in_second {
            prefer_first.push(s);
        } else if in_second < in_first {
            prefer_second.push(s);
        }
    }
    let verdict = match (prefer_first.is_empty(), prefer_second.is_empty()) {
        (false, false) => Incomparable,
        (false, true) => ParetoDominates,
        (true, false) => DominatedBy,
        (true, true) if first == second => Equal,
        (true, true) => WeaklyDominates,
    };
    GroupComparison { group, verdict, prefer_first, prefer_second }
}

/// Rank movement between two matchings for one group. Students matched in
/// both contribute a numeric delta (negative means the second matching
/// ranks better on their own list); students matched in exactly one are
/// counted apart because gaining or losing a seat has no honest place on
/// the numeric scale. Students unmatched in both count as delta zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RankChangeHistogram {
    pub deltas: BTreeMap<i64, usize>,
    pub gained_seat: usize,
    pub lost_seat: usize,
}

impl RankChangeHistogram {
    pub fn improved(&self) -> usize {
        self.deltas.range(..0).map(|(_, n)| n).sum::<usize>() + self.gained_seat
    }

    pub fn worsened(&self) -> usize {
        self.deltas.range(1..).map(|(_, n)| n).sum::<usize>() + self.lost_seat
    }

    pub fn population(&self) -> usize {
        self.deltas.values().sum::<usize>() + self.gained_seat + self.lost_seat
    }
}

pub fn rank_change_histogram(
    instance: &Instance,
    from: &Matching,
    to: &Matching,
    group: Group,
) -> RankChangeHistogram {
    let mut hist = RankChangeHistogram::default();
    for s in instance.group_members(group) {
        match (rank_under(instance, from, s), rank_under(instance, to, s)) {
            (Rank::Listed(a), Rank::Listed(b)) => {
                *hist.deltas.entry(i64::from(b) - i64::from(a)).or_default() += 1;
            }
            (Rank::Unmatched, Rank::Listed(_)) => hist.gained_seat += 1,
            (Rank::Listed(_), Rank::Unmatched) => hist.lost_seat += 1,
            (Rank::Unmatched, Rank::Unmatched) => *hist.deltas.entry(0).or_default() += 1,
        }
    }
    hist
}

/// Mean rank movement by priority band. Bands slice the group's members by
/// the reference priority (school 0's order, which is every school's order
/// in a universal-priority market); only students matched under both
/// matchings contribute movement.
#[derive(Clone, Debug, PartialEq)]
pub struct RankTrend {
    pub bands: Vec<TrendBand>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrendBand {
    pub members: usize,
    pub both_matched: usize,
    pub total_delta: i64,
}

impl TrendBand {
    pub fn mean_delta(&self) -> Option<f64> {
        (self.both_matched > 0).then(|| self.total_delta as f64 / self.both_matched as f64)
    }

    pub fn absorb(&mut self, other: &TrendBand) {
        self.members += other.members;
        self.both_matched += other.both_matched;
        self.total_delta += other.total_delta;
    }
}

pub fn rank_trend_by_priority_band(
    instance: &Instance,
    from: &Matching,
    to: &Matching,
    group: Group,
    bands: usize,
) -> RankTrend {
    assert!(bands > 0, "need at least one band");
    if instance.num_schools() == 0 {
        return RankTrend { bands: vec![TrendBand::default(); bands] };
    }
    let reference = &instance.schools()[0].priority;
    let mut members: Vec<StudentId> = instance.group_members(group).collect();
    members.sort_unstable_by_key(|&s| reference.rank(s));

    let n = members.len();
    let mut out = Vec::with_capacity(bands);
    for b in 0..bands {
        let lo = b * n / bands;
        let hi = (b + 1) * n / bands;
        let mut band = TrendBand { members: hi - lo, ..TrendBand::default() };
        for &s in &members[lo..hi] {
            if let (Rank::Listed(a), Rank::Listed(t)) =
                (rank_under(instance, from, s), rank_under(instance, to, s))
            {
                band.both_matched += 1;
                band.total_delta += i64::from(t) - i64::from(a);
            }
        }
        out.push(band);
    }
    RankTrend { bands: out }
}

/// High competitiveness: under minority reserve, no school admits more
/// disadvantaged students than its reserve. Equivalently, general seats all
/// go to advantaged students, so every disadvantaged admit rides a reserved
/// seat. `slack[c]` is the reserve left after counting the school's
/// disadvantaged admits; the condition holds when none is negative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HighCompetitiveness {
    pub holds: bool,
    pub slack: Vec<i64>,
}

pub fn check_high_competitiveness(
    instance: &Instance,
    quotas: &ReservationQuotas,
    mr_matching: &Matching,
) -> HighCompetitiveness {
    let slack: Vec<i64> = (0..instance.num_schools())
        .map(|c| {
            quotas.reserved(c) as i64
                - mr_matching.group_at(instance, c, Group::Disadvantaged) as i64
        })
        .collect();
    HighCompetitiveness { holds: slack.iter().all(|&x| x >= 0), slack }
}

/// Smart reserve: each school reserves at least as many seats as the
/// disadvantaged students it admits without any reserve. `shortfall[c]` is
/// how many seats school `c` is short; the condition holds when none is
/// positive. Evaluated per school, which is what the dominance proof for
/// reserves over the plain mechanism actually uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmartReserve {
    pub holds: bool,
    pub shortfall: Vec<i64>,
}

pub fn check_smart_reserve(
    instance: &Instance,
    quotas: &ReservationQuotas,
    base_matching: &Matching,
) -> SmartReserve {
    let shortfall: Vec<i64> = (0..instance.num_schools())
        .map(|c| {
            base_matching.group_at(instance, c, Group::Disadvantaged) as i64
                - quotas.reserved(c) as i64
        })
        .collect();
    SmartReserve { holds: shortfall.iter().all(|&x| x <= 0), shortfall }
}

/// Outcome of checking that general-first seat filling dominates
/// reserve-first filling for disadvantaged students whenever the market is
/// highly competitive.
#[derive(Clone, Debug)]
pub struct ReserveOrderCheck {
    pub high_competitiveness: HighCompetitiveness,
    pub comparison: GroupComparison,
    /// Set when high competitiveness holds yet some disadvantaged student
    /// strictly prefers reserve-first filling. Reaching this state means a
    /// bug in the engine, not a property of the market.
    pub violated: bool,
}

pub fn verify_jsa_dominates_mr(
    instance: &Instance,
    quotas: &ReservationQuotas,
) -> Result<ReserveOrderCheck, EngineError> {
    let mr = run_mechanism(Mechanism::MinorityReserve, instance, quotas)?.matching;
    let jsa = run_mechanism(Mechanism::JointSeats, instance, quotas)?.matching;
    let high_competitiveness = check_high_competitiveness(instance, quotas, &mr);
    let comparison = compare_for_group(instance, &jsa, &mr, Group::Disadvantaged);
    let violated = high_competitiveness.holds && !comparison.verdict.first_dominates();
    Ok(ReserveOrderCheck { high_competitiveness, comparison, violated })
}
