//! Tour of the bundled sample markets: run all four mechanisms on each and
//! show who lands where, plus the two reserve flags that explain the
//! dominance picture.
//!
//! ```text
//! cargo run --example worked_markets
//! ```

use seatmatch::audit::{check_high_competitiveness, check_smart_reserve};
use seatmatch::engine::{run_mechanism, Mechanism};
use seatmatch::model::Group;
use seatmatch::samples;

fn main() {
    for sample in samples::all() {
        let instance = &sample.instance;
        println!("== {} ==", sample.name);
        println!("   {}", sample.blurb);
        let dis: Vec<usize> = instance.group_members(Group::Disadvantaged).collect();
        println!(
            "   {} students (disadvantaged: {:?}), {} schools",
            instance.num_students(),
            dis,
            instance.num_schools()
        );

        let base = run_mechanism(Mechanism::Base, instance, &sample.quotas)
            .expect("samples are valid markets")
            .matching;
        let mr = run_mechanism(Mechanism::MinorityReserve, instance, &sample.quotas)
            .expect("samples are valid markets")
            .matching;

        for mechanism in Mechanism::ALL {
            let run = run_mechanism(mechanism, instance, &sample.quotas).unwrap();
            let seats: Vec<String> = run
                .matching
                .assignments()
                .iter()
                .map(|slot| match slot {
                    Some(c) => format!("c{c}"),
                    None => "--".to_string(),
                })
                .collect();
            println!("   {:<4} {}", run.mechanism.key(), seats.join(" "));
        }

        let hc = check_high_competitiveness(instance, &sample.quotas, &mr);
        let smart = check_smart_reserve(instance, &sample.quotas, &base);
        println!(
            "   highly competitive: {}, smart reserve: {}\n",
            if hc.holds { "yes" } else { "no" },
            if smart.holds { "yes" } else { "no" }
        );
    }
}
