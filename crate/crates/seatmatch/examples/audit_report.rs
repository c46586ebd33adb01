//! Fairness audit of the staged Discovery mechanism on the markets built to
//! expose it: in-group blocking pairs, dominance verdicts against the plain
//! baseline, and the rank-movement profile by priority band.
//!
//! ```text
//! cargo run --example audit_report
//! ```

use seatmatch::audit::{
    compare_for_group, find_classical_blocking_pairs, find_in_group_blocking_pairs,
    rank_change_histogram, rank_trend_by_priority_band,
};
use seatmatch::engine::{run_mechanism, Mechanism};
use seatmatch::model::Group;
use seatmatch::samples;

fn main() {
    let sample = samples::discovery_unfair_blocking();
    let instance = &sample.instance;
    println!("== {} ==", sample.name);

    let base = run_mechanism(Mechanism::Base, instance, &sample.quotas).unwrap().matching;
    let disc = run_mechanism(Mechanism::Discovery, instance, &sample.quotas).unwrap().matching;

    let in_group = find_in_group_blocking_pairs(instance, &disc, Group::Disadvantaged);
    println!("staged run, blocking pairs within the disadvantaged group:");
    for pair in &in_group {
        println!("  student {} claims school {} ({:?})", pair.student, pair.school, pair.witness);
    }
    assert!(!in_group.is_empty(), "this market exists to produce one");
    println!(
        "classical blocking pairs: {} (the plain run has none, by stability)",
        find_classical_blocking_pairs(instance, &disc).len()
    );
    assert!(find_classical_blocking_pairs(instance, &base).is_empty());

    for group in [Group::Disadvantaged, Group::Advantaged] {
        let cmp = compare_for_group(instance, &disc, &base, group);
        println!("staged vs plain for {group:?}: {:?}", cmp.verdict);
    }

    let hist = rank_change_histogram(instance, &base, &disc, Group::Disadvantaged);
    println!(
        "disadvantaged rank deltas plain -> staged: {:?} (gained {}, lost {})",
        hist.deltas, hist.gained_seat, hist.lost_seat
    );

    // Who pays for the staged gains? Slice the disadvantaged group into
    // priority halves: the top half loses ground, the bottom half gains.
    let sample = samples::discovery_hurts_everyone();
    let base = run_mechanism(Mechanism::Base, &sample.instance, &sample.quotas).unwrap().matching;
    let disc =
        run_mechanism(Mechanism::Discovery, &sample.instance, &sample.quotas).unwrap().matching;
    let trend =
        rank_trend_by_priority_band(&sample.instance, &base, &disc, Group::Disadvantaged, 1);
    println!("\n== {} ==", sample.name);
    for (i, band) in trend.bands.iter().enumerate() {
        println!(
            "priority band {i}: {} members, mean rank delta {:?}",
            band.members,
            band.mean_delta()
        );
    }
}
