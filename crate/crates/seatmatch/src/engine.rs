//! Student-proposing deferred acceptance over arbitrary choice profiles,
//! plus the staged Discovery-program run built from three restricted passes.
//!
//! Two evaluation orders are provided. [`sda_rounds`] advances all free
//! students at once: each round every unassigned student applies to the best
//! school that has not yet rejected them, and each school re-chooses from its
//! held students plus the new applicants. It is correct for any
//! substitutable, consistent choice profile. [`sda_sequential`] moves one
//! free student at a time and is restricted to responsive profiles, where the
//! result is independent of the proposal order; it exists because the staged
//! proposal order is the natural way to mirror a three-stage run inside a
//! single split-seat market, and order independence is what makes that
//! mirroring sound.

use crate::choice::{ChoiceContext, SeatRule};
use crate::model::{
    Group, Instance, Matching, ReservationQuotas, SchoolId, StudentId, StudentSet,
};
use std::collections::BTreeMap;
use thiserror::Error;

/// The four assignment mechanisms.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Mechanism {
    /// Deferred acceptance with plain responsive schools; reserves ignored.
    Base,
    /// Three-stage run: general seats for everyone, then reserved seats for
    /// still-unassigned disadvantaged students, then any reserved seats left
    /// over for still-unassigned advantaged students.
    Discovery,
    /// One run in which each school fills its reserve with disadvantaged
    /// applicants first, then the rest of its quota by priority.
    MinorityReserve,
    /// One run in which each school fills general seats by priority first,
    /// then its reserve with disadvantaged applicants.
    JointSeats,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] =
        [Mechanism::Base, Mechanism::Discovery, Mechanism::MinorityReserve, Mechanism::JointSeats];

    /// Flag spelling used by the command line and file outputs.
    pub fn key(self) -> &'static str {
        match self {
            Mechanism::Base => "base",
            Mechanism::Discovery => "disc",
            Mechanism::MinorityReserve => "mr",
            Mechanism::JointSeats => "jsa",
        }
    }

    pub fn from_key(key: &str) -> Option<Mechanism> {
        match key {
            "base" => Some(Mechanism::Base),
            "disc" => Some(Mechanism::Discovery),
            "mr" => Some(Mechanism::MinorityReserve),
            "jsa" => Some(Mechanism::JointSeats),
            _ => None,
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("deferred acceptance exceeded the round cap of {cap}")]
    RoundCapExceeded { cap: usize },
    #[error("profile has {actual} contexts for {expected} schools")]
    ProfileSizeMismatch { expected: usize, actual: usize },
    #[error("sequential proposing requires a responsive profile; school {school} is not")]
    SequentialNeedsResponsive { school: SchoolId },
}

/// One choice context per school.
#[derive(Clone, Debug)]
pub struct ChoiceProfile {
    contexts: Vec<ChoiceContext>,
}

impl ChoiceProfile {
    pub fn new(contexts: Vec<ChoiceContext>) -> Self {
        ChoiceProfile { contexts }
    }

    /// Responsive schools at their full quotas.
    pub fn base(instance: &Instance) -> Self {
        let groups = instance.groups();
        ChoiceProfile {
            contexts: instance
                .schools()
                .iter()
                .map(|c| ChoiceContext::responsive(c.priority.clone(), c.quota, groups.clone()))
                .collect(),
        }
    }

    /// Responsive schools with per-school quota overrides (the Discovery
    /// stages run the base rule on partial quotas).
    pub fn base_with_quotas(instance: &Instance, quotas: &[usize]) -> Self {
        assert_eq!(quotas.len(), instance.num_schools());
        let groups = instance.groups();
        ChoiceProfile {
            contexts: instance
                .schools()
                .iter()
                .zip(quotas)
                .map(|(c, &q)| ChoiceContext::responsive(c.priority.clone(), q, groups.clone()))
                .collect(),
        }
    }

    pub fn minority_reserve(instance: &Instance, quotas: &ReservationQuotas) -> Self {
        let groups = instance.groups();
        ChoiceProfile {
            contexts: instance
                .schools()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    ChoiceContext::minority_reserve(
                        c.priority.clone(),
                        c.quota,
                        quotas.reserved(i),
                        groups.clone(),
                    )
                })
                .collect(),
        }
    }

    pub fn joint_seats(instance: &Instance, quotas: &ReservationQuotas) -> Self {
        let groups = instance.groups();
        ChoiceProfile {
            contexts: instance
                .schools()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    ChoiceContext::joint_seats(
                        c.priority.clone(),
                        c.quota,
                        quotas.reserved(i),
                        groups.clone(),
                    )
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn context(&self, c: SchoolId) -> &ChoiceContext {
        &self.contexts[c]
    }

    pub fn is_responsive(&self) -> bool {
        self.contexts.iter().all(|c| c.rule == SeatRule::Responsive)
    }

    fn check_size(&self, instance: &Instance) -> Result<(), EngineError> {
        if self.contexts.len() != instance.num_schools() {
            return Err(EngineError::ProfileSizeMismatch {
                expected: instance.num_schools(),
                actual: self.contexts.len(),
            });
        }
        Ok(())
    }
}

/// Per-round application and rejection log.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundTrace {
    pub round: usize,
    pub proposals: Vec<(StudentId, SchoolId)>,
    pub rejections: Vec<(StudentId, SchoolId)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageTrace {
    pub stage: &'static str,
    pub rounds: Vec<RoundTrace>,
}

/// The three stage matchings of a Discovery run, before their union.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscoveryStages {
    pub general: Matching,
    pub reserved: Matching,
    pub leftover: Matching,
}

#[derive(Clone, Debug)]
pub struct MechanismRun {
    pub mechanism: Mechanism,
    pub matching: Matching,
    pub rounds: usize,
    pub trace: Option<Vec<StageTrace>>,
    pub stages: Option<DiscoveryStages>,
}

/// Proposal order for [`sda_sequential`].
#[derive(Clone, Debug)]
pub enum ProposalOrder {
    /// Lowest-id free student first.
    Queue,
    /// Highest-id free student first.
    Stack,
    /// Free students aiming at a flagged school go first, then free
    /// disadvantaged students, then everyone else; ties by lowest id. With
    /// the general halves of a split market flagged, this replays the
    /// Discovery stages inside one run.
    Staged { first_wave: Vec<bool> },
}

/// All-at-once deferred acceptance. Every student participates.
pub fn sda_rounds(instance: &Instance, profile: &ChoiceProfile) -> Result<Matching, EngineError> {
    Ok(rounds_restricted(instance, profile, None, None)?.0)
}

pub fn sda_rounds_traced(
    instance: &Instance,
    profile: &ChoiceProfile,
) -> Result<(Matching, Vec<RoundTrace>), EngineError> {
    let mut trace = Vec::new();
    let (m, _) = rounds_restricted(instance, profile, None, Some(&mut trace))?;
    Ok((m, trace))
}

/// Deferred acceptance where only `participants` (all students when `None`)
/// ever propose. Returns the matching and the number of rounds run.
fn rounds_restricted(
    instance: &Instance,
    profile: &ChoiceProfile,
    participants: Option<&[bool]>,
    mut trace: Option<&mut Vec<RoundTrace>>,
) -> Result<(Matching, usize), EngineError> {
    profile.check_size(instance)?;
    let n = instance.num_students();
    let max_list = instance.students().iter().map(|s| s.prefs.len()).max().unwrap_or(0);
    let cap = n * max_list + 1;

    // cursor[s]: index into s's list of the school currently being tried
    // (or held); it only ever advances past schools that rejected s.
    let mut cursor = vec![0usize; n];
    let mut held: Vec<Option<SchoolId>> = vec![None; n];
    let mut holds: Vec<StudentSet> = vec![StudentSet::new(); instance.num_schools()];

    let in_play = |s: StudentId| participants.map_or(true, |p| p[s]);

    let mut rounds = 0;
    loop {
        let mut proposals: BTreeMap<SchoolId, Vec<StudentId>> = BTreeMap::new();
        for s in 0..n {
            if in_play(s) && held[s].is_none() && cursor[s] < instance.prefs(s).len() {
                proposals.entry(instance.prefs(s)[cursor[s]]).or_default().push(s);
            }
        }
        if proposals.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > cap {
            return Err(EngineError::RoundCapExceeded { cap });
        }
        let mut round_trace = trace.as_ref().map(|_| RoundTrace {
            round: rounds,
            ..RoundTrace::default()
        });
        for (&c, new_applicants) in &proposals {
            if let Some(t) = round_trace.as_mut() {
                t.proposals.extend(new_applicants.iter().map(|&s| (s, c)));
            }
            let mut pool = holds[c].clone();
            pool.extend(new_applicants.iter().copied());
            let selected = profile.context(c).choose(&pool);
            for &s in pool.difference(&selected) {
                if held[s] == Some(c) {
                    held[s] = None;
                }
                cursor[s] += 1;
                if let Some(t) = round_trace.as_mut() {
                    t.rejections.push((s, c));
                }
            }
            for &s in &selected {
                held[s] = Some(c);
            }
            holds[c] = selected;
        }
        if let (Some(out), Some(t)) = (trace.as_deref_mut(), round_trace) {
            out.push(t);
        }
    }

    Ok((Matching::from_assignments(held, instance.num_schools()), rounds))
}

/// One-student-at-a-time deferred acceptance. Requires a responsive profile;
/// there the outcome is the student-optimal stable matching regardless of
/// `order`, which a property test pins down.
pub fn sda_sequential(
    instance: &Instance,
    profile: &ChoiceProfile,
    order: &ProposalOrder,
) -> Result<Matching, EngineError> {
    profile.check_size(instance)?;
    if let Some(c) = (0..profile.len()).find(|&c| profile.context(c).rule != SeatRule::Responsive)
    {
        return Err(EngineError::SequentialNeedsResponsive { school: c });
    }
    if let ProposalOrder::Staged { first_wave } = order {
        assert_eq!(first_wave.len(), instance.num_schools(), "stage flags must cover schools");
    }

    let n = instance.num_students();
    let mut cursor = vec![0usize; n];
    let mut held: Vec<Option<SchoolId>> = vec![None; n];
    let mut holds: Vec<StudentSet> = vec![StudentSet::new(); instance.num_schools()];

    let max_list = instance.students().iter().map(|s| s.prefs.len()).max().unwrap_or(0);
    let cap = n * max_list + 1;
    let mut steps = 0;
    loop {
        let free = |s: StudentId| held[s].is_none() && cursor[s] < instance.prefs(s).len();
        let next = match order {
            ProposalOrder::Queue => (0..n).find(|&s| free(s)),
            ProposalOrder::Stack => (0..n).rev().find(|&s| free(s)),
            ProposalOrder::Staged { first_wave } => (0..n)
                .filter(|&s| free(s))
                .min_by_key(|&s| {
                    let target = instance.prefs(s)[cursor[s]];
                    let tier = if first_wave[target] {
                        0
                    } else if instance.group(s) == Group::Disadvantaged {
                        1
                    } else {
                        2
                    };
                    (tier, s)
                }),
        };
        let Some(s) = next else { break };
        steps += 1;
        if steps > cap {
            return Err(EngineError::RoundCapExceeded { cap });
        }
        let c = instance.prefs(s)[cursor[s]];
        let mut pool = holds[c].clone();
        pool.insert(s);
        let selected = profile.context(c).choose(&pool);
        for &r in pool.difference(&selected) {
            if held[r] == Some(c) {
                held[r] = None;
            }
            cursor[r] += 1;
        }
        for &r in &selected {
            held[r] = Some(c);
        }
        holds[c] = selected;
    }

    Ok(Matching::from_assignments(held, instance.num_schools()))
}

/// The three-stage Discovery run.
pub fn run_disc(
    instance: &Instance,
    quotas: &ReservationQuotas,
    trace: bool,
) -> Result<MechanismRun, EngineError> {
    let n = instance.num_students();

    let general_quotas: Vec<usize> =
        (0..instance.num_schools()).map(|c| quotas.general(c, instance)).collect();
    let reserved_quotas: Vec<usize> =
        (0..instance.num_schools()).map(|c| quotas.reserved(c)).collect();

    let mut stage_traces = trace.then(Vec::new);
    let mut total_rounds = 0;

    let run_stage = |label: &'static str,
                         stage_quotas: &[usize],
                         participants: Option<&[bool]>,
                         traces: &mut Option<Vec<StageTrace>>,
                         total: &mut usize|
     -> Result<Matching, EngineError> {
        let profile = ChoiceProfile::base_with_quotas(instance, stage_quotas);
        let mut rt = traces.as_ref().map(|_| Vec::new());
        let (m, rounds) = rounds_restricted(instance, &profile, participants, rt.as_mut())?;
        *total += rounds;
        if let (Some(ts), Some(rt)) = (traces.as_mut(), rt) {
            ts.push(StageTrace { stage: label, rounds: rt });
        }
        Ok(m)
    };

    let general =
        run_stage("general-seats", &general_quotas, None, &mut stage_traces, &mut total_rounds)?;

    let unmatched_dis: Vec<bool> = (0..n)
        .map(|s| general.school_of(s).is_none() && instance.group(s) == Group::Disadvantaged)
        .collect();
    let reserved = run_stage(
        "reserved-seats",
        &reserved_quotas,
        Some(&unmatched_dis),
        &mut stage_traces,
        &mut total_rounds,
    )?;

    // Reserved seats nobody claimed are released to unassigned advantaged
    // students at their original priority.
    let leftover_quotas: Vec<usize> = (0..instance.num_schools())
        .map(|c| quotas.reserved(c) - reserved.students_of(c).len())
        .collect();
    let unmatched_adv: Vec<bool> = (0..n)
        .map(|s| general.school_of(s).is_none() && instance.group(s) == Group::Advantaged)
        .collect();
    let leftover = run_stage(
        "released-reserves",
        &leftover_quotas,
        Some(&unmatched_adv),
        &mut stage_traces,
        &mut total_rounds,
    )?;

    let mut merged = Matching::empty(n, instance.num_schools());
    for s in 0..n {
        let slot = general
            .school_of(s)
            .or_else(|| reserved.school_of(s))
            .or_else(|| leftover.school_of(s));
        if let Some(c) = slot {
            merged.assign(s, c);
        }
    }

    Ok(MechanismRun {
        mechanism: Mechanism::Discovery,
        matching: merged,
        rounds: total_rounds,
        trace: stage_traces,
        stages: Some(DiscoveryStages { general, reserved, leftover }),
    })
}

/// Runs `mechanism` on the market. `quotas` are ignored by `Base`.
pub fn run_mechanism(
    mechanism: Mechanism,
    instance: &Instance,
    quotas: &ReservationQuotas,
) -> Result<MechanismRun, EngineError> {
    run_mechanism_traced(mechanism, instance, quotas, false)
}

pub fn run_mechanism_traced(
    mechanism: Mechanism,
    instance: &Instance,
    quotas: &ReservationQuotas,
    trace: bool,
) -> Result<MechanismRun, EngineError> {
    if mechanism == Mechanism::Discovery {
        return run_disc(instance, quotas, trace);
    }
    let profile = match mechanism {
        Mechanism::Base => ChoiceProfile::base(instance),
        Mechanism::MinorityReserve => ChoiceProfile::minority_reserve(instance, quotas),
        Mechanism::JointSeats => ChoiceProfile::joint_seats(instance, quotas),
        Mechanism::Discovery => unreachable!(),
    };
    let mut rounds_log = trace.then(Vec::new);
    let (matching, rounds) = rounds_restricted(instance, &profile, None, rounds_log.as_mut())?;
    Ok(MechanismRun {
        mechanism,
        matching,
        rounds,
        trace: rounds_log.map(|r| vec![StageTrace { stage: "single-run", rounds: r }]),
        stages: None,
    })
}

/// First pair `(s, c)` with `c` acceptable to `s`, strictly preferred to
/// `s`'s assignment, and `s` admitted by `c`'s choice function alongside the
/// students `c` holds. `None` means `matching` is stable under `profile`.
pub fn find_profile_blocking_pair(
    instance: &Instance,
    profile: &ChoiceProfile,
    matching: &Matching,
) -> Option<(StudentId, SchoolId)> {
    for s in 0..instance.num_students() {
        let current = matching.school_of(s);
        for &c in instance.prefs(s) {
            if current == Some(c) {
                break; // remaining schools rank below the assignment
            }
            if profile.context(c).admits(matching.students_of(c), s) {
                return Some((s, c));
            }
        }
    }
    None
}
