//! Split-seat form of a reserve market: each school becomes a general half
//! and a reserved half, reserves become ordinary responsive schools, and the
//! reserve mechanism becomes plain deferred acceptance over expanded
//! preference lists.
//!
//! School `c` splits into `2c` (general half, quota `q - q_r`, original
//! priority) and `2c + 1` (reserved half, quota `q_r`, priority with every
//! disadvantaged student moved above every advantaged one, original order
//! kept inside each group). The mechanism decides how a student's list is
//! expanded:
//!
//! * minority reserve: reserved half immediately before its general half,
//!   school by school;
//! * joint seats: general half immediately before its reserved half;
//! * three-stage Discovery: every general half in list order, then every
//!   reserved half in list order.
//!
//! Projecting an assignment back through `c = part / 2` recovers the direct
//! mechanism's matching; which half a student occupies is the seat type
//! reported in output files.

use crate::engine::{sda_rounds, ChoiceProfile, EngineError, Mechanism};
use crate::model::{
    Group, Instance, Matching, PriorityOrder, ReservationQuotas, School, SchoolId, Student,
    StudentId,
};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SplitError {
    #[error("the base mechanism has no split-seat form")]
    BaseHasNoSplit,
    #[error("projected matching puts {assigned} students at school {school} with quota {quota}")]
    ProjectionOverflow { school: SchoolId, quota: usize, assigned: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum SeatType {
    General,
    Reserved,
}

impl SeatType {
    pub fn key(self) -> &'static str {
        match self {
            SeatType::General => "general",
            SeatType::Reserved => "reserved",
        }
    }
}

/// A reserve market rewritten with two seat-typed halves per school.
#[derive(Clone, Debug)]
pub struct SplitInstance {
    pub mechanism: Mechanism,
    pub aux: Instance,
    original_schools: usize,
    original_quotas: Vec<usize>,
}

pub fn general_part(c: SchoolId) -> SchoolId {
    2 * c
}

pub fn reserved_part(c: SchoolId) -> SchoolId {
    2 * c + 1
}

pub fn original_school(part: SchoolId) -> SchoolId {
    part / 2
}

pub fn is_reserved_part(part: SchoolId) -> bool {
    part % 2 == 1
}

/// Original priority with all disadvantaged students promoted above all
/// advantaged ones; order inside each group is unchanged.
fn lifted_priority(instance: &Instance, base: &PriorityOrder) -> PriorityOrder {
    let mut order = base.order();
    order.sort_by_key(|&s| (instance.group(s) == Group::Advantaged, base.rank(s)));
    PriorityOrder::from_ranked(&order)
}

fn expand_prefs(prefs: &[SchoolId], mechanism: Mechanism) -> Vec<SchoolId> {
    match mechanism {
        Mechanism::MinorityReserve => {
            prefs.iter().flat_map(|&c| [reserved_part(c), general_part(c)]).collect()
        }
        Mechanism::JointSeats => {
            prefs.iter().flat_map(|&c| [general_part(c), reserved_part(c)]).collect()
        }
        Mechanism::Discovery => prefs
            .iter()
            .map(|&c| general_part(c))
            .chain(prefs.iter().map(|&c| reserved_part(c)))
            .collect(),
        Mechanism::Base => unreachable!("guarded by build_split"),
    }
}

pub fn build_split(
    instance: &Instance,
    quotas: &ReservationQuotas,
    mechanism: Mechanism,
) -> Result<SplitInstance, SplitError> {
    if mechanism == Mechanism::Base {
        return Err(SplitError::BaseHasNoSplit);
    }

    let mut schools = Vec::with_capacity(2 * instance.num_schools());
    for (c, school) in instance.schools().iter().enumerate() {
        schools.push(School {
            quota: quotas.general(c, instance),
            priority: school.priority.clone(),
        });
        schools.push(School {
            quota: quotas.reserved(c),
            priority: lifted_priority(instance, &school.priority),
        });
    }

    let students = instance
        .students()
        .iter()
        .map(|s| Student { group: s.group, prefs: expand_prefs(&s.prefs, mechanism) })
        .collect();

    Ok(SplitInstance {
        mechanism,
        aux: Instance::new(students, schools),
        original_schools: instance.num_schools(),
        original_quotas: instance.schools().iter().map(|c| c.quota).collect(),
    })
}

impl SplitInstance {
    /// Collapses an assignment over seat halves back onto original schools.
    pub fn project(&self, aux_matching: &Matching) -> Result<Matching, SplitError> {
        let mut projected =
            Matching::empty(self.aux.num_students(), self.original_schools);
        for s in 0..self.aux.num_students() {
            if let Some(part) = aux_matching.school_of(s) {
                projected.assign(s, original_school(part));
            }
        }
        for c in 0..self.original_schools {
            let assigned = projected.students_of(c).len();
            if assigned > self.original_quotas[c] {
                return Err(SplitError::ProjectionOverflow {
                    school: c,
                    quota: self.original_quotas[c],
                    assigned,
                });
            }
        }
        Ok(projected)
    }

    /// Which half each student occupies, `None` when unmatched.
    pub fn seat_types(&self, aux_matching: &Matching) -> Vec<Option<SeatType>> {
        (0..self.aux.num_students())
            .map(|s| {
                aux_matching.school_of(s).map(|part| {
                    if is_reserved_part(part) {
                        SeatType::Reserved
                    } else {
                        SeatType::General
                    }
                })
            })
            .collect()
    }

    /// Flags for [`crate::engine::ProposalOrder::Staged`]: general halves
    /// form the first wave.
    pub fn general_first_wave(&self) -> Vec<bool> {
        (0..self.aux.num_schools()).map(|part| !is_reserved_part(part)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceMismatch {
    pub student: StudentId,
    pub direct: Option<SchoolId>,
    pub projected: Option<SchoolId>,
}

/// Side-by-side outcome of a mechanism and deferred acceptance on its
/// split-seat form.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub mechanism: Mechanism,
    pub direct: Matching,
    pub projected: Matching,
    pub seat_types: Vec<Option<SeatType>>,
    pub mismatches: Vec<EquivalenceMismatch>,
}

impl EquivalenceReport {
    pub fn equal(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Runs `mechanism` directly and as split-seat deferred acceptance, then
/// compares student by student.
pub fn check_equivalence(
    instance: &Instance,
    quotas: &ReservationQuotas,
    mechanism: Mechanism,
) -> Result<EquivalenceReport, SplitError> {
    let direct = crate::engine::run_mechanism(mechanism, instance, quotas)?.matching;
    let split = build_split(instance, quotas, mechanism)?;
    let aux_matching = sda_rounds(&split.aux, &ChoiceProfile::base(&split.aux))?;
    let projected = split.project(&aux_matching)?;
    let seat_types = split.seat_types(&aux_matching);

    let mismatches = (0..instance.num_students())
        .filter_map(|s| {
            let (d, p) = (direct.school_of(s), projected.school_of(s));
            (d != p).then_some(EquivalenceMismatch { student: s, direct: d, projected: p })
        })
        .collect();

    Ok(EquivalenceReport { mechanism, direct, projected, seat_types, mismatches })
}

/// Seat types for a mechanism run obtained through the split-seat form.
/// The direct and projected matchings agree for the three reserve
/// mechanisms, so this is how output files label seats.
pub fn seat_types_for_run(
    instance: &Instance,
    quotas: &ReservationQuotas,
    mechanism: Mechanism,
) -> Result<Vec<Option<SeatType>>, SplitError> {
    if mechanism == Mechanism::Base {
        let matching =
            crate::engine::run_mechanism(Mechanism::Base, instance, quotas)?.matching;
        return Ok((0..instance.num_students())
            .map(|s| matching.school_of(s).map(|_| SeatType::General))
            .collect());
    }
    let split = build_split(instance, quotas, mechanism)?;
    let aux_matching = sda_rounds(&split.aux, &ChoiceProfile::base(&split.aux))?;
    Ok(split.seat_types(&aux_matching))
}
