//! Incentive probes: can a student gain by lying about preferences, and can
//! a priority upgrade ever hurt? The staged mechanism fails both probes on
//! a three-student market; the single-run mechanisms pass them on every
//! bundled sample.
//!
//! ```text
//! cargo run --example incentive_probes
//! ```

use seatmatch::engine::Mechanism;
use seatmatch::model::Group;
use seatmatch::probes::{probe_respect_improvements, probe_strategyproofness};
use seatmatch::samples;

fn main() {
    let sample = samples::discovery_unfair_blocking();
    println!("== {} ==", sample.name);

    let probe = probe_strategyproofness(
        &sample.instance,
        &sample.quotas,
        Mechanism::Discovery,
        Some(Group::Disadvantaged),
        64,
        0,
    )
    .unwrap();
    println!("staged run, misreport search ({} runs):", probe.attempts);
    for w in &probe.witnesses {
        println!(
            "  student {} truthfully gets {:?}, but reporting only {:?} gets {:?}",
            w.student, w.honest, w.misreport, w.improved
        );
    }
    assert!(!probe.clean(), "the staged mechanism is manipulable here");

    let probe =
        probe_respect_improvements(&sample.instance, &sample.quotas, Mechanism::Discovery, None)
            .unwrap();
    println!("staged run, priority-swap search ({} runs):", probe.attempts);
    for w in &probe.witnesses {
        println!(
            "  student {} holds {:?} ranked above {}, but {:?} ranked below: a higher score hurt",
            w.student, w.before, w.swapped_with, w.after
        );
    }
    assert!(!probe.clean(), "a priority improvement backfires here");

    println!("\nsingle-run mechanisms on every bundled sample:");
    for mechanism in [Mechanism::Base, Mechanism::MinorityReserve, Mechanism::JointSeats] {
        let mut misreports = 0;
        let mut swaps = 0;
        for sample in samples::all() {
            let sp =
                probe_strategyproofness(&sample.instance, &sample.quotas, mechanism, None, 64, 1)
                    .unwrap();
            assert!(sp.clean(), "{} manipulable on {}", mechanism.key(), sample.name);
            misreports += sp.attempts;
            let ri = probe_respect_improvements(&sample.instance, &sample.quotas, mechanism, None)
                .unwrap();
            assert!(ri.clean(), "{} punishes a priority gain on {}", mechanism.key(), sample.name);
            swaps += ri.attempts;
        }
        println!(
            "  {:<4} clean through {} misreport runs and {} priority-swap runs",
            mechanism.key(),
            misreports,
            swaps
        );
    }
}
