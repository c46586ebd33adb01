//! Core market model: students with strict preference lists, schools with
//! quotas and strict priority orders, reservation quotas, and matchings.
//!
//! Students and schools are dense indices (`0..n`). External string ids live
//! in the I/O layer only.

use std::collections::BTreeSet;
use thiserror::Error;

pub type StudentId = usize;
pub type SchoolId = usize;

/// Deterministic set of students, ordered by id.
pub type StudentSet = BTreeSet<StudentId>;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Group {
    Advantaged,
    Disadvantaged,
}

/// Position of a school in a student's preference list, 1-based.
/// `Unmatched` orders after every listed rank: staying unassigned is worse
/// than any school the student finds acceptable.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Rank {
    Listed(u32),
    Unmatched,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("student {student} does not list school {school}")]
    UnacceptableAssignment { student: StudentId, school: SchoolId },
    #[error("school {school} out of range")]
    UnknownSchool { school: SchoolId },
    #[error("student {student} out of range")]
    UnknownStudent { student: StudentId },
}

/// Strict priority order over all students of an instance.
/// Stored as a rank table: `rank[s]` is the position of student `s`,
/// 0 being the highest priority. Ranks form a bijection onto `0..n`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PriorityOrder {
    rank: Vec<u32>,
}

impl PriorityOrder {
    /// Builds from an explicit order, best first. Panics unless `order` is a
    /// permutation of `0..order.len()`; orders are always constructed
    /// programmatically, so a malformed one is a caller bug.
    pub fn from_ranked(order: &[StudentId]) -> Self {
        let n = order.len();
        let mut rank = vec![u32::MAX; n];
        for (pos, &s) in order.iter().enumerate() {
            assert!(s < n, "priority order names student {s} out of range 0..{n}");
            assert!(rank[s] == u32::MAX, "priority order lists student {s} twice");
            rank[s] = pos as u32;
        }
        PriorityOrder { rank }
    }

    /// Builds directly from a rank table (`ranks[s]` = position of `s`).
    pub fn from_ranks(rank: Vec<u32>) -> Self {
        let order: Vec<StudentId> = {
            let mut idx: Vec<StudentId> = (0..rank.len()).collect();
            idx.sort_unstable_by_key(|&s| rank[s]);
            idx
        };
        // Round-trip through from_ranked to enforce bijectivity.
        let p = PriorityOrder::from_ranked(&order);
        assert!(p.rank == rank, "rank table is not a bijection onto 0..n");
        p
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    pub fn rank(&self, s: StudentId) -> u32 {
        self.rank[s]
    }

    /// True when `a` has strictly higher priority than `b`.
    pub fn beats(&self, a: StudentId, b: StudentId) -> bool {
        self.rank[a] < self.rank[b]
    }

    /// Materializes the order, best first.
    pub fn order(&self) -> Vec<StudentId> {
        let mut idx: Vec<StudentId> = (0..self.rank.len()).collect();
        idx.sort_unstable_by_key(|&s| self.rank[s]);
        idx
    }

    /// A copy with the ranks of `a` and `b` exchanged (used by the
    /// priority-improvement probes).
    pub fn swapped(&self, a: StudentId, b: StudentId) -> Self {
        let mut rank = self.rank.clone();
        rank.swap(a, b);
        PriorityOrder { rank }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Student {
    pub group: Group,
    /// Acceptable schools, most preferred first. Strict: no duplicates.
    pub prefs: Vec<SchoolId>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct School {
    pub quota: usize,
    pub priority: PriorityOrder,
}

/// An immutable school-choice market.
#[derive(Clone, PartialEq, Debug)]
pub struct Instance {
    students: Vec<Student>,
    schools: Vec<School>,
    universal: bool,
}

impl Instance {
    pub fn new(students: Vec<Student>, schools: Vec<School>) -> Self {
        let universal = match schools.split_first() {
            Some((first, rest)) => rest.iter().all(|c| c.priority == first.priority),
            None => true,
        };
        Instance { students, schools, universal }
    }

    pub fn num_students(&self) -> usize {
        self.students.len()
    }

    pub fn num_schools(&self) -> usize {
        self.schools.len()
    }

    pub fn students(&self) -> &[Student] {
        &self.students
    }

    pub fn schools(&self) -> &[School] {
        &self.schools
    }

    pub fn group(&self, s: StudentId) -> Group {
        self.students[s].group
    }

    pub fn prefs(&self, s: StudentId) -> &[SchoolId] {
        &self.students[s].prefs
    }

    pub fn quota(&self, c: SchoolId) -> usize {
        self.schools[c].quota
    }

    pub fn priority(&self, c: SchoolId) -> &PriorityOrder {
        &self.schools[c].priority
    }

    /// True when every school shares one priority order (single-score
    /// markets such as exam-based admissions).
    pub fn universal_priority(&self) -> bool {
        self.universal
    }

    pub fn groups(&self) -> Vec<Group> {
        self.students.iter().map(|s| s.group).collect()
    }

    pub fn group_members(&self, g: Group) -> impl Iterator<Item = StudentId> + '_ {
        self.students
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.group == g)
            .map(|(i, _)| i)
    }

    pub fn group_size(&self, g: Group) -> usize {
        self.group_members(g).count()
    }

    pub fn is_acceptable(&self, s: StudentId, c: SchoolId) -> bool {
        self.students[s].prefs.contains(&c)
    }

    /// 1-based rank of an assignment in `s`'s list; `None` means unassigned
    /// and ranks below every listed school. Asking about a school the
    /// student did not list is an error, not a rank.
    pub fn rank_of(&self, s: StudentId, school: Option<SchoolId>) -> Result<Rank, ModelError> {
        if s >= self.students.len() {
            return Err(ModelError::UnknownStudent { student: s });
        }
        let Some(c) = school else {
            return Ok(Rank::Unmatched);
        };
        if c >= self.schools.len() {
            return Err(ModelError::UnknownSchool { school: c });
        }
        match self.students[s].prefs.iter().position(|&x| x == c) {
            Some(pos) => Ok(Rank::Listed(pos as u32 + 1)),
            None => Err(ModelError::UnacceptableAssignment { student: s, school: c }),
        }
    }

    /// True when `s` strictly prefers `a` to `b`. Both must be acceptable
    /// (or `None`).
    pub fn prefers(
        &self,
        s: StudentId,
        a: Option<SchoolId>,
        b: Option<SchoolId>,
    ) -> Result<bool, ModelError> {
        Ok(self.rank_of(s, a)? < self.rank_of(s, b)?)
    }

    /// Structural checks; one entry per broken rule.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.students.len();
        for (i, st) in self.students.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &c in &st.prefs {
                if c >= self.schools.len() {
                    out.push(Violation::PrefSchoolOutOfRange { student: i, school: c });
                } else if !seen.insert(c) {
                    out.push(Violation::DuplicatePreference { student: i, school: c });
                }
            }
        }
        for (c, school) in self.schools.iter().enumerate() {
            if school.priority.len() != n {
                out.push(Violation::PrioritySizeMismatch {
                    school: c,
                    expected: n,
                    actual: school.priority.len(),
                });
            }
        }
        out
    }
}

/// Per-school reserved-seat counts, kept separate from the instance so one
/// market can be run under several reservation policies.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReservationQuotas {
    reserved: Vec<usize>,
}

impl ReservationQuotas {
    pub fn new(reserved: Vec<usize>) -> Self {
        ReservationQuotas { reserved }
    }

    pub fn zeros(num_schools: usize) -> Self {
        ReservationQuotas { reserved: vec![0; num_schools] }
    }

    pub fn uniform(num_schools: usize, reserved: usize) -> Self {
        ReservationQuotas { reserved: vec![reserved; num_schools] }
    }

    pub fn len(&self) -> usize {
        self.reserved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reserved.is_empty()
    }

    pub fn reserved(&self, c: SchoolId) -> usize {
        self.reserved[c]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.reserved
    }

    /// Seats left open to everyone: quota minus the reserve.
    pub fn general(&self, c: SchoolId, instance: &Instance) -> usize {
        instance.quota(c) - self.reserved[c]
    }

    pub fn validate(&self, instance: &Instance) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.reserved.len() != instance.num_schools() {
            out.push(Violation::QuotaTableSizeMismatch {
                expected: instance.num_schools(),
                actual: self.reserved.len(),
            });
            return out;
        }
        for (c, &r) in self.reserved.iter().enumerate() {
            if r > instance.quota(c) {
                out.push(Violation::ReservedOverQuota {
                    school: c,
                    reserved: r,
                    quota: instance.quota(c),
                });
            }
        }
        out
    }
}

/// Combined structural validation of a market and its reservation quotas.
pub fn validate_market(instance: &Instance, quotas: &ReservationQuotas) -> Vec<Violation> {
    let mut out = instance.validate();
    out.extend(quotas.validate(instance));
    out
}

#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum Violation {
    #[error("student {student} lists school {school} more than once")]
    DuplicatePreference { student: StudentId, school: SchoolId },
    #[error("student {student} lists school {school}, which does not exist")]
    PrefSchoolOutOfRange { student: StudentId, school: SchoolId },
    #[error("school {school} priority covers {actual} students, expected {expected}")]
    PrioritySizeMismatch { school: SchoolId, expected: usize, actual: usize },
    #[error("school {school} reserves {reserved} of {quota} seats")]
    ReservedOverQuota { school: SchoolId, reserved: usize, quota: usize },
    #[error("reservation table covers {actual} schools, expected {expected}")]
    QuotaTableSizeMismatch { expected: usize, actual: usize },
    #[error("school {school} holds {assigned} students over its quota {quota}")]
    OverCapacity { school: SchoolId, quota: usize, assigned: usize },
    #[error("student {student} is assigned to school {school} but does not list it")]
    UnacceptableMatch { student: StudentId, school: SchoolId },
}

/// A (partial) assignment of students to schools.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matching {
    assigned: Vec<Option<SchoolId>>,
    by_school: Vec<StudentSet>,
}

impl Matching {
    pub fn empty(num_students: usize, num_schools: usize) -> Self {
        Matching {
            assigned: vec![None; num_students],
            by_school: vec![StudentSet::new(); num_schools],
        }
    }

    pub fn from_assignments(assigned: Vec<Option<SchoolId>>, num_schools: usize) -> Self {
        let mut by_school = vec![StudentSet::new(); num_schools];
        for (s, &slot) in assigned.iter().enumerate() {
            if let Some(c) = slot {
                by_school[c].insert(s);
            }
        }
        Matching { assigned, by_school }
    }

    pub fn assign(&mut self, s: StudentId, c: SchoolId) {
        assert!(self.assigned[s].is_none(), "student {s} already assigned");
        self.assigned[s] = Some(c);
        self.by_school[c].insert(s);
    }

    pub fn school_of(&self, s: StudentId) -> Option<SchoolId> {
        self.assigned[s]
    }

    pub fn students_of(&self, c: SchoolId) -> &StudentSet {
        &self.by_school[c]
    }

    pub fn assignments(&self) -> &[Option<SchoolId>] {
        &self.assigned
    }

    pub fn num_students(&self) -> usize {
        self.assigned.len()
    }

    pub fn num_schools(&self) -> usize {
        self.by_school.len()
    }

    pub fn matched_count(&self) -> usize {
        self.assigned.iter().filter(|a| a.is_some()).count()
    }

    pub fn matched_in_group(&self, instance: &Instance, g: Group) -> usize {
        self.assigned
            .iter()
            .enumerate()
            .filter(|(s, a)| a.is_some() && instance.group(*s) == g)
            .count()
    }

    /// Students of `g` assigned to `c`.
    pub fn group_at(&self, instance: &Instance, c: SchoolId, g: Group) -> usize {
        self.by_school[c].iter().filter(|&&s| instance.group(s) == g).count()
    }

    /// Capacity, acceptability and cross-view consistency checks.
    pub fn validate(&self, instance: &Instance) -> Vec<Violation> {
        let mut out = Vec::new();
        for (c, members) in self.by_school.iter().enumerate() {
            if members.len() > instance.quota(c) {
                out.push(Violation::OverCapacity {
                    school: c,
                    quota: instance.quota(c),
                    assigned: members.len(),
                });
            }
        }
        for (s, &slot) in self.assigned.iter().enumerate() {
            if let Some(c) = slot {
                if !instance.is_acceptable(s, c) {
                    out.push(Violation::UnacceptableMatch { student: s, school: c });
                }
                debug_assert!(self.by_school[c].contains(&s));
            }
        }
        out
    }
}
