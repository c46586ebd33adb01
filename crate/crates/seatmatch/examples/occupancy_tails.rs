//! The rank condition's proof treats preference lists as balls thrown into
//! school-shaped bins. This example simulates the two landmarks that
//! argument leans on: when some bin first exceeds a threshold, and when
//! every bin reaches it, against the classical cover-time prediction.
//!
//! ```text
//! cargo run --release --example occupancy_tails
//! ```

use seatmatch::market::{balls_in_bins_stats, cover_time_median_estimate};

fn main() {
    let trials = 400;

    for (bins, threshold) in [(100, 3), (1000, 3), (1000, 5)] {
        let stats = balls_in_bins_stats(bins, threshold, trials, 2);
        let predicted = cover_time_median_estimate(bins, threshold);
        let median = stats.cover_time_percentile(50.0);
        println!(
            "{bins} bins, threshold {threshold}: median cover {median} vs predicted {predicted:.0} (ratio {:.3})",
            median as f64 / predicted
        );
        println!(
            "  first overflow: 5th percentile {}, median {}",
            stats.first_overflow_percentile(5.0),
            stats.first_overflow_percentile(50.0)
        );
    }

    // One bin is degenerate: the threshold fills, the next ball overflows.
    let stats = balls_in_bins_stats(1, 3, 5, 0);
    println!(
        "degenerate single bin: cover at {:?}, overflow at {:?}",
        stats.cover_time, stats.first_overflow
    );
}
