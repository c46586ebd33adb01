//! The three seat rules are substitutable, consistent, and quota-filling;
//! deferred acceptance is only well-behaved because of that. This example
//! verifies all three axioms exhaustively for each rule on a small pool,
//! then shows a plausible-looking rule that breaks substitutability.
//!
//! ```text
//! cargo run --example choice_axioms
//! ```

use seatmatch::axioms::{
    check_consistent, check_q_acceptant, check_substitutable, check_substitutable_rule,
};
use seatmatch::choice::{max_select, ChoiceContext};
use seatmatch::model::{Group, PriorityOrder, StudentId, StudentSet};

fn main() {
    // Ten students, disadvantaged at the odd ids, priority by id.
    let n = 10;
    let priority = PriorityOrder::from_ranked(&(0..n).collect::<Vec<_>>());
    let groups: Vec<Group> = (0..n)
        .map(|s| if s % 2 == 1 { Group::Disadvantaged } else { Group::Advantaged })
        .collect();
    let universe: Vec<StudentId> = (0..n).collect();

    let contexts = [
        ("responsive", ChoiceContext::responsive(priority.clone(), 3, groups.clone())),
        ("minority reserve", ChoiceContext::minority_reserve(priority.clone(), 3, 1, groups.clone())),
        ("joint seats", ChoiceContext::joint_seats(priority.clone(), 3, 1, groups.clone())),
    ];
    // Budget 0 means exhaustive: every subset of ten students is checked.
    for (name, ctx) in &contexts {
        let substitutable = check_substitutable(ctx, &universe, 0, 0).is_none();
        let consistent = check_consistent(ctx, &universe, 0, 0).is_none();
        let acceptant = check_q_acceptant(ctx, &universe, 0, 0).is_none();
        println!(
            "{name:<16} substitutable: {substitutable}, consistent: {consistent}, quota-filling: {acceptant}"
        );
        assert!(substitutable && consistent && acceptant);
    }

    // A rule whose verdict on one student depends on who else applied: the
    // school admits its top applicant, except that whenever students 0 and
    // 2 apply together it admits student 2 alone. Pool-dependent boosts
    // like that are exactly what substitutability forbids, and the checker
    // produces a witness.
    let boost = |pool: &StudentSet| -> StudentSet {
        if pool.contains(&0) && pool.contains(&2) {
            return [2].into_iter().collect();
        }
        max_select(pool, &priority, 1)
    };
    let witness = check_substitutable_rule(boost, &universe, 0, 0)
        .expect("the boost rule is not substitutable");
    println!(
        "\npool-dependent boost rule: student {} is chosen from pool {:?} but rejected from its subset {:?}",
        witness.student, witness.pool, witness.subset
    );
}
