//! Small worked markets with frozen outcomes for all four mechanisms.
//!
//! Each market isolates one behavior: the three-stage run wasting seats,
//! in-group unfairness, the two one-shot reserve rules disagreeing in both
//! directions, a reserve that backfires, reserves rescuing the group they
//! protect, and the three-stage run splitting off from the one-shot rules.
//! The assignments were worked out by hand and double-checked through the
//! split-seat form; tests treat them as ground truth.

use crate::engine::Mechanism;
use crate::model::{
    Group, Instance, PriorityOrder, ReservationQuotas, School, SchoolId, Student, StudentId,
};

#[derive(Clone, Debug)]
pub struct SampleMarket {
    pub name: &'static str,
    pub blurb: &'static str,
    pub instance: Instance,
    pub quotas: ReservationQuotas,
    /// Expected assignment vector per mechanism.
    pub golden: Vec<(Mechanism, Vec<Option<SchoolId>>)>,
}

impl SampleMarket {
    pub fn golden_for(&self, mechanism: Mechanism) -> &[Option<SchoolId>] {
        &self
            .golden
            .iter()
            .find(|(m, _)| *m == mechanism)
            .expect("every sample freezes all four mechanisms")
            .1
    }
}

fn build(
    groups_prefs: &[(Group, &[SchoolId])],
    quotas: &[usize],
    priority: &[StudentId],
    reserved: &[usize],
) -> (Instance, ReservationQuotas) {
    let p = PriorityOrder::from_ranked(priority);
    let instance = Instance::new(
        groups_prefs
            .iter()
            .map(|(g, prefs)| Student { group: *g, prefs: prefs.to_vec() })
            .collect(),
        quotas.iter().map(|&q| School { quota: q, priority: p.clone() }).collect(),
    );
    (instance, ReservationQuotas::new(reserved.to_vec()))
}

use Group::{Advantaged as A, Disadvantaged as D};
use Mechanism::{Base, Discovery, JointSeats, MinorityReserve};

/// Two advantaged students and one disadvantaged; one reserved seat at the
/// popular school. The staged run leaves every student weakly worse off and
/// two strictly, while both one-shot reserve rules reproduce the no-reserve
/// outcome.
pub fn discovery_hurts_everyone() -> SampleMarket {
    let (instance, quotas) =
        build(&[(A, &[0, 1]), (A, &[0, 1]), (D, &[1, 0])], &[2, 1], &[0, 1, 2], &[1, 0]);
    let plain = vec![Some(0), Some(0), Some(1)];
    let staged = vec![Some(0), Some(1), Some(0)];
    SampleMarket {
        name: "discovery-hurts-everyone",
        blurb: "staged reserves strand a high-priority student on a reserved seat and \
                push two students down their lists",
        instance,
        quotas,
        golden: vec![
            (Base, plain.clone()),
            (Discovery, staged),
            (MinorityReserve, plain.clone()),
            (JointSeats, plain),
        ],
    }
}

/// Six students over two schools. The staged run matches a disadvantaged
/// student away from a school that holds a lower-priority member of the same
/// group, creating an in-group blocking pair and a profitable truncation.
pub fn discovery_unfair_blocking() -> SampleMarket {
    let (instance, quotas) = build(
        &[
            (A, &[0, 1]),
            (A, &[0, 1]),
            (A, &[0, 1]),
            (D, &[0, 1]),
            (D, &[0, 1]),
            (D, &[0, 1]),
        ],
        &[3, 2],
        &[0, 1, 3, 2, 4, 5],
        &[1, 1],
    );
    let plain = vec![Some(0), Some(0), Some(1), Some(0), Some(1), None];
    let staged = vec![Some(0), Some(0), None, Some(1), Some(0), Some(1)];
    SampleMarket {
        name: "discovery-unfair-blocking",
        blurb: "staged reserves send a disadvantaged student below a same-group rival \
                and reward truncating her list",
        instance,
        quotas,
        golden: vec![
            (Base, plain.clone()),
            (Discovery, staged),
            (MinorityReserve, plain.clone()),
            (JointSeats, plain),
        ],
    }
}

/// Four schools with mixed reserves. Reserve-first and general-first
/// processing disagree in both directions: one disadvantaged student prefers
/// the first, another the second.
pub fn reserve_order_incomparable() -> SampleMarket {
    let (instance, quotas) = build(
        &[
            (A, &[1]),
            (A, &[0, 2]),
            (A, &[3, 2]),
            (D, &[1, 0]),
            (D, &[3]),
            (D, &[2]),
            (D, &[3]),
        ],
        &[1, 1, 1, 2],
        &[0, 3, 1, 4, 2, 5, 6],
        &[0, 1, 0, 1],
    );
    SampleMarket {
        name: "reserve-order-incomparable",
        blurb: "reserve-first and general-first seat filling each leave a different \
                disadvantaged student better off",
        instance,
        quotas,
        golden: vec![
            (Base, vec![Some(1), Some(2), Some(3), Some(0), Some(3), None, None]),
            (Discovery, vec![Some(1), Some(2), None, Some(0), Some(3), None, Some(3)]),
            (MinorityReserve, vec![None, Some(0), Some(3), Some(1), Some(3), Some(2), None]),
            (JointSeats, vec![None, Some(0), Some(2), Some(1), Some(3), None, Some(3)]),
        ],
    }
}

/// One reserved seat placed at a school no disadvantaged student ranks
/// first. Chasing it costs the protected group its preferred assignment:
/// the no-reserve outcome dominates for the group the reserve protects.
pub fn unsmart_reserve_backfires() -> SampleMarket {
    let (instance, quotas) = build(
        &[(A, &[0, 2]), (D, &[2, 0]), (D, &[0, 1])],
        &[1, 1, 1],
        &[0, 1, 2],
        &[1, 0, 0],
    );
    let with_reserve = vec![Some(2), Some(0), Some(1)];
    SampleMarket {
        name: "unsmart-reserve-backfires",
        blurb: "a reserve at the wrong school drags a disadvantaged student off her \
                first choice; dropping the reserve helps the whole group",
        instance,
        quotas,
        golden: vec![
            (Base, vec![Some(0), Some(2), Some(1)]),
            (Discovery, with_reserve.clone()),
            (MinorityReserve, with_reserve.clone()),
            (JointSeats, with_reserve),
        ],
    }
}

/// Fully reserved market where the no-reserve rule leaves a disadvantaged
/// student unmatched. Every reserve mechanism seats both disadvantaged
/// students, agreeing exactly.
pub fn reserves_rescue_everyone() -> SampleMarket {
    let (instance, quotas) =
        build(&[(A, &[0, 1]), (D, &[0, 1]), (D, &[0, 1])], &[1, 1], &[0, 1, 2], &[1, 1]);
    let reserved = vec![None, Some(0), Some(1)];
    SampleMarket {
        name: "reserves-rescue-everyone",
        blurb: "full reserves lift both disadvantaged students, one from being \
                unmatched entirely",
        instance,
        quotas,
        golden: vec![
            (Base, vec![Some(0), Some(1), None]),
            (Discovery, reserved.clone()),
            (MinorityReserve, reserved.clone()),
            (JointSeats, reserved),
        ],
    }
}

/// Balanced market in which both one-shot reserve rules coincide with the
/// no-reserve outcome while the staged run swaps two students across
/// schools for no fairness gain.
pub fn discovery_splits_verdict() -> SampleMarket {
    let (instance, quotas) = build(
        &[(A, &[0, 1]), (A, &[0, 1]), (D, &[0, 1]), (D, &[0, 1])],
        &[2, 2],
        &[0, 2, 1, 3],
        &[1, 1],
    );
    let plain = vec![Some(0), Some(1), Some(0), Some(1)];
    SampleMarket {
        name: "discovery-splits-verdict",
        blurb: "one-shot reserves leave a balanced market alone; the staged run \
                reshuffles it anyway",
        instance,
        quotas,
        golden: vec![
            (Base, plain.clone()),
            (Discovery, vec![Some(0), Some(1), Some(1), Some(0)]),
            (MinorityReserve, plain.clone()),
            (JointSeats, plain),
        ],
    }
}

pub fn all() -> Vec<SampleMarket> {
    vec![
        discovery_hurts_everyone(),
        discovery_unfair_blocking(),
        reserve_order_incomparable(),
        unsmart_reserve_backfires(),
        reserves_rescue_everyone(),
        discovery_splits_verdict(),
    ]
}

pub fn by_name(name: &str) -> Option<SampleMarket> {
    all().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_mechanism;
    use crate::model::validate_market;
    use crate::split::check_equivalence;

    #[test]
    fn every_sample_is_a_valid_market() {
        for sample in all() {
            assert!(
                validate_market(&sample.instance, &sample.quotas).is_empty(),
                "{} fails validation",
                sample.name
            );
        }
    }

    #[test]
    fn mechanisms_reproduce_the_frozen_assignments() {
        for sample in all() {
            assert_eq!(sample.golden.len(), 4, "{} must freeze all mechanisms", sample.name);
            for (mechanism, expected) in &sample.golden {
                let run = run_mechanism(*mechanism, &sample.instance, &sample.quotas).unwrap();
                assert_eq!(
                    run.matching.assignments(),
                    &expected[..],
                    "{} under {mechanism:?}",
                    sample.name
                );
            }
        }
    }

    #[test]
    fn split_forms_agree_on_every_sample() {
        for sample in all() {
            for mechanism in [Discovery, MinorityReserve, JointSeats] {
                let report =
                    check_equivalence(&sample.instance, &sample.quotas, mechanism).unwrap();
                assert!(
                    report.equal(),
                    "{} under {mechanism:?}: {:?}",
                    sample.name,
                    report.mismatches
                );
            }
        }
    }

    #[test]
    fn names_are_unique_and_resolvable() {
        let samples = all();
        for sample in &samples {
            assert_eq!(by_name(sample.name).unwrap().name, sample.name);
        }
        let mut names: Vec<_> = samples.iter().map(|s| s.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), samples.len());
    }
}
