//! Synthetic markets and the predictions that say when reserve order stops
//! mattering: generate a score-based market shaped like the published
//! admissions aggregates, evaluate the rank and separation conditions, and
//! measure how often the reserve outcome is highly competitive.
//!
//! ```text
//! cargo run --release --example synthetic_market
//! ```

use seatmatch::audit::{check_high_competitiveness, compare_for_group};
use seatmatch::engine::{run_mechanism, Mechanism};
use seatmatch::market::{
    check_rank_condition, check_separation, gen_normal_potentials, hc_rate_monte_carlo, presets,
    rank_condition_proxies, MarketShape,
};
use seatmatch::model::Group;

fn main() {
    // One tenth of the published market: 8 schools, 64 seats each (21
    // reserved), 1872 advantaged and 913 disadvantaged students.
    let config = presets::nyc_like(10);
    let (instance, quotas) = gen_normal_potentials(&config, 7);

    let rank = check_rank_condition(&instance, config.quota, config.reserved, 0.5).unwrap();
    let proxies = rank_condition_proxies(config.schools, config.quota, config.reserved);
    println!(
        "rank condition: {} (pivotal advantaged rank {}, disadvantaged rank {}; log-free proxies {:?})",
        if rank.holds { "holds" } else { "fails" },
        rank.advantaged_rank,
        rank.disadvantaged_rank,
        proxies
    );

    let (p_adv, p_dis) = presets::NYC_TAILS;
    let separation = check_separation(&presets::NYC_POTENTIALS, p_adv, p_dis).unwrap();
    println!(
        "separation of the score distributions: {} (gap {:.2} vs threshold {:.2}, nominal {:.2})",
        if separation.holds { "holds" } else { "fails" },
        separation.lhs,
        separation.rhs,
        separation.rhs_nominal
    );

    let mr = run_mechanism(Mechanism::MinorityReserve, &instance, &quotas).unwrap().matching;
    let jsa = run_mechanism(Mechanism::JointSeats, &instance, &quotas).unwrap().matching;
    let hc = check_high_competitiveness(&instance, &quotas, &mr);
    println!(
        "this draw: highly competitive {} (reserve slack per school {:?})",
        if hc.holds { "yes" } else { "no" },
        hc.slack
    );
    let verdict = compare_for_group(&instance, &jsa, &mr, Group::Disadvantaged).verdict;
    println!("joint seats vs minority reserve for disadvantaged students: {verdict:?}");

    let trials = 50;
    let rate = hc_rate_monte_carlo(&MarketShape::NormalPotentials(config), trials, 11).unwrap();
    println!(
        "high competitiveness over {trials} seeds: {}/{} = {:.2} (95% interval {:.2}..{:.2})",
        rate.successes, rate.trials, rate.rate, rate.low, rate.high
    );
}
