//! Synthetic market generators and the numeric checks that predict when a
//! generated market will be highly competitive.
//!
//! Generators build markets where every student ranks every school, lists
//! are independent uniform permutations, schools share one ranking and one
//! (quota, reserve) pair. The ranking either interleaves the two groups
//! directly or derives from per-student potentials drawn from group-specific
//! normal distributions.
//!
//! The two predictive checks mirror the sufficient conditions for high
//! competitiveness: a within-group rank comparison, and a separation test on
//! the potential distributions. Both are asymptotic statements evaluated at
//! finite sizes, so they are reported with their intermediate quantities
//! rather than as bare booleans.

use crate::audit::check_high_competitiveness;
use crate::engine::{run_mechanism, EngineError, Mechanism};
use crate::model::{
    Group, Instance, PriorityOrder, ReservationQuotas, School, Student, StudentId,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MarketError {
    #[error("epsilon must lie strictly between 0 and 1, got {epsilon}")]
    EpsilonOutOfRange { epsilon: f64 },
    #[error("rank comparison needs every school to share one priority order")]
    NeedsUniversalPriority,
    #[error("condition requires quota - 1 > reserved, got quota {quota}, reserved {reserved}")]
    QuotaOrder { quota: usize, reserved: usize },
    #[error("quantile argument must lie strictly between 0 and 1, got {alpha}")]
    QuantileDomain { alpha: f64 },
    #[error("tail probability {value} falls outside (0, 1)")]
    TailProbability { value: f64 },
}

/// How the single shared ranking merges the two groups.
#[derive(Clone, Debug)]
pub enum RankingPolicy {
    /// Full priority order, best first. Must list every student.
    Explicit(Vec<StudentId>),
    /// Riffle the groups, keeping ids ordered inside each: each rank goes
    /// to the next advantaged student with this probability while both
    /// groups still have students left.
    Biased { advantaged_bias: f64 },
}

/// Group-specific normal distributions for student potentials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialParams {
    pub mean_advantaged: f64,
    pub mean_disadvantaged: f64,
    pub sd_advantaged: f64,
    pub sd_disadvantaged: f64,
}

#[derive(Clone, Debug)]
pub struct HomogeneousConfig {
    pub schools: usize,
    pub advantaged: usize,
    pub disadvantaged: usize,
    pub quota: usize,
    pub reserved: usize,
    pub ranking: RankingPolicy,
}

#[derive(Clone, Debug)]
pub struct NormalPotentialConfig {
    pub schools: usize,
    pub advantaged: usize,
    pub disadvantaged: usize,
    pub quota: usize,
    pub reserved: usize,
    pub potentials: PotentialParams,
}

/// Splitmix-style mix of a base seed and a stream index; use it to give
/// every Monte Carlo trial its own decorrelated seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Students 0..advantaged are the advantaged group, the rest the
/// disadvantaged group; each student's list is an independent uniform
/// permutation of all schools.
fn fill_students(
    schools: usize,
    advantaged: usize,
    disadvantaged: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<Student> {
    (0..advantaged + disadvantaged)
        .map(|s| {
            let mut prefs: Vec<usize> = (0..schools).collect();
            prefs.shuffle(rng);
            let group =
                if s < advantaged { Group::Advantaged } else { Group::Disadvantaged };
            Student { group, prefs }
        })
        .collect()
}

fn uniform_schools(n: usize, quota: usize, priority: PriorityOrder) -> Vec<School> {
    (0..n).map(|_| School { quota, priority: priority.clone() }).collect()
}

pub fn gen_homogeneous(
    config: &HomogeneousConfig,
    seed: u64,
) -> (Instance, ReservationQuotas) {
    assert!(config.reserved <= config.quota, "reserve cannot exceed quota");
    let total = config.advantaged + config.disadvantaged;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let ranked: Vec<StudentId> = match &config.ranking {
        RankingPolicy::Explicit(order) => {
            assert_eq!(order.len(), total, "explicit ranking must cover every student");
            order.clone()
        }
        RankingPolicy::Biased { advantaged_bias } => {
            assert!(
                (0.0..=1.0).contains(advantaged_bias),
                "bias is a probability"
            );
            let mut next_adv = 0;
            let mut next_dis = config.advantaged;
            let mut order = Vec::with_capacity(total);
            while order.len() < total {
                let take_adv = if next_adv == config.advantaged {
                    false
                } else if next_dis == total {
                    true
                } else {
                    rng.random_bool(*advantaged_bias)
                };
                if take_adv {
                    order.push(next_adv);
                    next_adv += 1;
                } else {
                    order.push(next_dis);
                    next_dis += 1;
                }
            }
            order
        }
    };
    let priority = PriorityOrder::from_ranked(&ranked);

    let students = fill_students(config.schools, config.advantaged, config.disadvantaged, &mut rng);
    let instance = Instance::new(students, uniform_schools(config.schools, config.quota, priority));
    let quotas = ReservationQuotas::uniform(config.schools, config.reserved);
    (instance, quotas)
}

pub fn gen_normal_potentials(
    config: &NormalPotentialConfig,
    seed: u64,
) -> (Instance, ReservationQuotas) {
    let (instance, quotas, _) = gen_normal_potentials_with_scores(config, seed);
    (instance, quotas)
}

/// Variant that also returns the sampled potential of every student, for
/// score-level analyses.
pub fn gen_normal_potentials_with_scores(
    config: &NormalPotentialConfig,
    seed: u64,
) -> (Instance, ReservationQuotas, Vec<f64>) {
    assert!(config.reserved <= config.quota, "reserve cannot exceed quota");
    let p = &config.potentials;
    assert!(
        p.sd_advantaged > 0.0 && p.sd_disadvantaged > 0.0,
        "potential spreads must be positive"
    );
    let total = config.advantaged + config.disadvantaged;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let adv = Normal::new(p.mean_advantaged, p.sd_advantaged).expect("checked sd");
    let dis = Normal::new(p.mean_disadvantaged, p.sd_disadvantaged).expect("checked sd");
    let scores: Vec<f64> = (0..total)
        .map(|s| {
            if s < config.advantaged {
                adv.sample(&mut rng)
            } else {
                dis.sample(&mut rng)
            }
        })
        .collect();
    // Exactly tied potentials fall back to a lottery draw.
    let lottery: Vec<u64> = (0..total).map(|_| rng.random()).collect();

    let mut ranked: Vec<StudentId> = (0..total).collect();
    ranked.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("normal samples are never NaN")
            .then(lottery[a].cmp(&lottery[b]))
    });
    let priority = PriorityOrder::from_ranked(&ranked);

    let students = fill_students(config.schools, config.advantaged, config.disadvantaged, &mut rng);
    let instance = Instance::new(students, uniform_schools(config.schools, config.quota, priority));
    let quotas = ReservationQuotas::uniform(config.schools, config.reserved);
    (instance, quotas, scores)
}

/// Within-group ranks whose comparison predicts high competitiveness, with
/// the hypothesis verdict at this market's actual group sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankCondition {
    /// The pivotal advantaged student exists and outranks the pivotal
    /// disadvantaged student (vacuously, if the latter rank is off the end
    /// of the group).
    pub holds: bool,
    /// Whether the reserve clears the `n ln n` floor the asymptotic
    /// statement assumes.
    pub reserve_exceeds_nlogn: bool,
    /// Pivotal advantaged rank, 1-based: ceil(n ln n + (q - qr) n lnln n).
    pub advantaged_rank: usize,
    /// Tighter variant used by the probabilistic argument, with q - qr - 1.
    pub advantaged_rank_strict: usize,
    /// Pivotal disadvantaged rank, 1-based: ceil((1 - eps) qr n).
    pub disadvantaged_rank: usize,
}

fn ceil_rank(x: f64) -> usize {
    // Small markets push the log-log term negative; the rank floors at 1.
    x.ceil().max(1.0) as usize
}

pub fn check_rank_condition(
    instance: &Instance,
    quota: usize,
    reserved: usize,
    epsilon: f64,
) -> Result<RankCondition, MarketError> {
    if !(0.0..=1.0).contains(&epsilon) || epsilon == 0.0 || epsilon == 1.0 {
        return Err(MarketError::EpsilonOutOfRange { epsilon });
    }
    if quota == 0 || quota - 1 <= reserved {
        return Err(MarketError::QuotaOrder { quota, reserved });
    }
    if !instance.universal_priority() {
        return Err(MarketError::NeedsUniversalPriority);
    }

    let n = instance.num_schools() as f64;
    let spare = (quota - reserved) as f64;
    let advantaged_rank = ceil_rank(n * n.ln() + spare * n * n.ln().ln());
    let advantaged_rank_strict = ceil_rank(n * n.ln() + (spare - 1.0) * n * n.ln().ln());
    let disadvantaged_rank = ceil_rank((1.0 - epsilon) * reserved as f64 * n);

    let reference = &instance.schools()[0].priority;
    let by_group = |g: Group| {
        let mut members: Vec<StudentId> = instance.group_members(g).collect();
        members.sort_unstable_by_key(|&s| reference.rank(s));
        members
    };
    let advantaged = by_group(Group::Advantaged);
    let disadvantaged = by_group(Group::Disadvantaged);

    let holds = match advantaged.get(advantaged_rank - 1) {
        None => false,
        Some(&pivot_adv) => match disadvantaged.get(disadvantaged_rank - 1) {
            // Too few disadvantaged students to even reach the pivotal
            // rank: the comparison has nothing to defeat.
            None => true,
            Some(&pivot_dis) => reference.beats(pivot_adv, pivot_dis),
        },
    };

    Ok(RankCondition {
        holds,
        reserve_exceeds_nlogn: (reserved as f64) > n * n.ln(),
        advantaged_rank,
        advantaged_rank_strict,
        disadvantaged_rank,
    })
}

/// Log-free stand-ins for the pivotal ranks, sized for markets with few
/// schools where the logarithmic terms are judged by eye: `n + n(q - qr)`
/// for the advantaged rank and `qr * n` for the disadvantaged one.
pub fn rank_condition_proxies(schools: usize, quota: usize, reserved: usize) -> (usize, usize) {
    (schools + schools * (quota - reserved), reserved * schools)
}

/// Tail probabilities at which the separation test evaluates the two score
/// distributions, derived from the market shape.
pub fn theorem_tail_probabilities(
    schools: usize,
    quota: usize,
    reserved: usize,
    advantaged: usize,
    disadvantaged: usize,
    epsilon: f64,
) -> Result<(f64, f64), MarketError> {
    if epsilon <= 0.0 {
        return Err(MarketError::EpsilonOutOfRange { epsilon });
    }
    let n = schools as f64;
    let p_adv =
        (n * n.ln() + (quota as f64 - reserved as f64 - 1.0) * n * n.ln().ln()) / advantaged as f64;
    let p_dis = (1.0 + epsilon) * reserved as f64 * n / disadvantaged as f64;
    for p in [p_adv, p_dis] {
        if !(p > 0.0 && p < 1.0) {
            return Err(MarketError::TailProbability { value: p });
        }
    }
    Ok((p_adv, p_dis))
}

/// Mean-separation test on the two potential distributions.
///
/// `rhs` is the full threshold: the approximation-error margin
/// `0.008 (sd_M + sd_m)` plus the logistic-quantile gap, and it is what
/// `holds` compares against. `rhs_nominal` drops the margin and keeps only
/// the quantile gap; published figures for this test quote the nominal
/// value, so both are reported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparationCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub rhs_nominal: f64,
}

pub fn check_separation(
    potentials: &PotentialParams,
    p_advantaged: f64,
    p_disadvantaged: f64,
) -> Result<SeparationCheck, MarketError> {
    for alpha in [p_advantaged, p_disadvantaged] {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MarketError::QuantileDomain { alpha });
        }
    }
    let lhs = potentials.mean_advantaged - potentials.mean_disadvantaged;
    let (sd_a, sd_d) = (potentials.sd_advantaged, potentials.sd_disadvantaged);
    let quantile_gap = (sd_a * (1.0 / p_advantaged - 1.0).ln()
        - sd_d * (1.0 / p_disadvantaged - 1.0).ln())
        / 1.702;
    let rhs = 0.008 * (sd_a + sd_d) + quantile_gap;
    let rhs_nominal =
        (sd_a * (1.0 / p_advantaged).ln() - sd_d * (1.0 / p_disadvantaged).ln()) / 1.702;
    Ok(SeparationCheck { holds: lhs > rhs, lhs, rhs, rhs_nominal })
}

/// Logistic approximation to the normal quantile:
/// `mu + sigma * (-1/1.702) * ln(1/alpha - 1)`.
///
/// Accurate to about 0.03 standard deviations for alpha in [0.1, 0.9]
/// (worst near alpha = 0.25); the error grows toward the tails and reaches
/// about 0.37 standard deviations at alpha = 0.01, so treat tail values as
/// rough guides only.
pub fn normal_quantile_approx(alpha: f64, mu: f64, sigma: f64) -> Result<f64, MarketError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MarketError::QuantileDomain { alpha });
    }
    Ok(mu + sigma * (-1.0 / 1.702) * (1.0 / alpha - 1.0).ln())
}

/// Per-trial occupancy landmarks for uniformly thrown balls.
#[derive(Clone, Debug)]
pub struct OccupancyStats {
    /// Ball count (1-based) at which some bin first exceeds the threshold,
    /// i.e. receives its (threshold + 1)-th ball.
    pub first_overflow: Vec<usize>,
    /// Ball count at which every bin has reached the threshold.
    pub cover_time: Vec<usize>,
}

impl OccupancyStats {
    /// Nearest-rank percentile; `pct` in (0, 100].
    fn percentile(sorted: &[usize], pct: f64) -> usize {
        let idx = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
        sorted[idx.clamp(1, sorted.len()) - 1]
    }

    pub fn first_overflow_percentile(&self, pct: f64) -> usize {
        let mut v = self.first_overflow.clone();
        v.sort_unstable();
        Self::percentile(&v, pct)
    }

    pub fn cover_time_percentile(&self, pct: f64) -> usize {
        let mut v = self.cover_time.clone();
        v.sort_unstable();
        Self::percentile(&v, pct)
    }
}

/// Throws balls into `bins` uniformly at random until both landmarks have
/// occurred, `trials` times.
pub fn balls_in_bins_stats(
    bins: usize,
    threshold: usize,
    trials: usize,
    seed: u64,
) -> OccupancyStats {
    assert!(bins >= 1 && threshold >= 1);
    let mut stats = OccupancyStats {
        first_overflow: Vec::with_capacity(trials),
        cover_time: Vec::with_capacity(trials),
    };
    for trial in 0..trials {
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, trial as u64));
        let mut counts = vec![0usize; bins];
        let mut below_threshold = bins;
        let mut overflow = None;
        let mut cover = None;
        let mut thrown = 0usize;
        while overflow.is_none() || cover.is_none() {
            thrown += 1;
            let bin = rng.random_range(0..bins);
            if counts[bin] >= threshold && overflow.is_none() {
                overflow = Some(thrown);
            }
            counts[bin] += 1;
            if counts[bin] == threshold {
                below_threshold -= 1;
                if below_threshold == 0 {
                    cover = Some(thrown);
                }
            }
        }
        stats.first_overflow.push(overflow.unwrap());
        stats.cover_time.push(cover.unwrap());
    }
    stats
}

/// Median cover time predicted by the classical limit law:
/// `n (ln n + (t-1) lnln n - ln((t-1)! ln 2))`.
pub fn cover_time_median_estimate(bins: usize, threshold: usize) -> f64 {
    let n = bins as f64;
    let factorial: f64 = (1..threshold).map(|k| k as f64).product();
    n * (n.ln() + (threshold as f64 - 1.0) * n.ln().ln() - (factorial * 2f64.ln()).ln())
}

/// Empirical success rate with a 95% Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub low: f64,
    pub high: f64,
}

pub fn wilson_interval(successes: usize, trials: usize) -> RateEstimate {
    assert!(trials >= 1 && successes <= trials);
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let margin = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    RateEstimate {
        successes,
        trials,
        rate: p,
        low: ((center - margin) / denom).max(0.0),
        high: ((center + margin) / denom).min(1.0),
    }
}

/// Market generator selector for Monte Carlo sweeps.
#[derive(Clone, Debug)]
pub enum MarketShape {
    Homogeneous(HomogeneousConfig),
    NormalPotentials(NormalPotentialConfig),
}

impl MarketShape {
    pub fn generate(&self, seed: u64) -> (Instance, ReservationQuotas) {
        match self {
            MarketShape::Homogeneous(config) => gen_homogeneous(config, seed),
            MarketShape::NormalPotentials(config) => gen_normal_potentials(config, seed),
        }
    }
}

/// Fraction of generated markets that come out highly competitive under
/// minority reserve.
pub fn hc_rate_monte_carlo(
    shape: &MarketShape,
    trials: usize,
    seed: u64,
) -> Result<RateEstimate, EngineError> {
    let mut successes = 0;
    for trial in 0..trials {
        let (instance, quotas) = shape.generate(mix_seed(seed, trial as u64));
        let mr = run_mechanism(Mechanism::MinorityReserve, &instance, &quotas)?.matching;
        if check_high_competitiveness(&instance, &quotas, &mr).holds {
            successes += 1;
        }
    }
    Ok(wilson_interval(successes, trials))
}

/// Configurations shaped like the New York specialized-high-school market.
pub mod presets {
    use super::{NormalPotentialConfig, PotentialParams};

    /// Group score distributions fitted to the published admission-test
    /// aggregates.
    pub const NYC_POTENTIALS: PotentialParams = PotentialParams {
        mean_advantaged: 408.76,
        mean_disadvantaged: 362.40,
        sd_advantaged: 92.53,
        sd_disadvantaged: 83.13,
    };

    /// Tail probabilities the published separation calculation plugs in.
    pub const NYC_TAILS: (f64, f64) = (0.18, 0.18);

    /// Eight schools with aggregate-average quotas and reserves; student
    /// counts and seat counts divided by `scale` (rounded to nearest), so
    /// `nyc_like(1)` is full size and `nyc_like(10)` is a tenth-size market
    /// with the same shape.
    pub fn nyc_like(scale: usize) -> NormalPotentialConfig {
        assert!(scale >= 1);
        let shrink = |x: usize| ((x as f64 / scale as f64).round() as usize).max(1);
        NormalPotentialConfig {
            schools: 8,
            advantaged: shrink(18723),
            disadvantaged: shrink(9132),
            quota: shrink(635),
            reserved: shrink(208),
            potentials: NYC_POTENTIALS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_market;

    fn small_homogeneous(bias: f64) -> HomogeneousConfig {
        HomogeneousConfig {
            schools: 3,
            advantaged: 5,
            disadvantaged: 4,
            quota: 2,
            reserved: 1,
            ranking: RankingPolicy::Biased { advantaged_bias: bias },
        }
    }

    #[test]
    fn generators_are_deterministic_and_valid() {
        let config = small_homogeneous(0.6);
        let (a, qa) = gen_homogeneous(&config, 42);
        let (b, qb) = gen_homogeneous(&config, 42);
        assert_eq!(a.students(), b.students());
        assert_eq!(a.schools()[0].priority, b.schools()[0].priority);
        assert_eq!(qa.reserved(0), qb.reserved(0));
        assert!(validate_market(&a, &qa).is_empty());
        let (c, _) = gen_homogeneous(&config, 43);
        assert_ne!(a.students(), c.students());

        let nyc = presets::nyc_like(100);
        let (i, q, scores) = gen_normal_potentials_with_scores(&nyc, 7);
        let (i2, _, scores2) = gen_normal_potentials_with_scores(&nyc, 7);
        assert_eq!(i.students(), i2.students());
        assert_eq!(scores, scores2);
        assert!(validate_market(&i, &q).is_empty());
        assert_eq!(scores.len(), i.num_students());
    }

    #[test]
    fn single_school_lists_are_that_school() {
        let config = HomogeneousConfig {
            schools: 1,
            advantaged: 2,
            disadvantaged: 2,
            quota: 3,
            reserved: 1,
            ranking: RankingPolicy::Biased { advantaged_bias: 0.5 },
        };
        let (instance, _) = gen_homogeneous(&config, 5);
        for s in 0..instance.num_students() {
            assert_eq!(instance.prefs(s), &[0]);
        }
    }

    #[test]
    fn extreme_bias_stacks_one_group_on_top() {
        let (top_adv, _) = gen_homogeneous(&small_homogeneous(1.0), 9);
        let order = top_adv.schools()[0].priority.order();
        assert_eq!(order, vec![0, 1, 2, 3, 4, 5, 6, 7, 8]);

        let (top_dis, _) = gen_homogeneous(&small_homogeneous(0.0), 9);
        let order = top_dis.schools()[0].priority.order();
        assert_eq!(order, vec![5, 6, 7, 8, 0, 1, 2, 3, 4]);
    }

    #[test]
    fn explicit_ranking_is_used_verbatim_and_preserves_universality() {
        let config = HomogeneousConfig {
            ranking: RankingPolicy::Explicit(vec![8, 7, 6, 5, 4, 3, 2, 1, 0]),
            ..small_homogeneous(0.5)
        };
        let (instance, _) = gen_homogeneous(&config, 1);
        assert!(instance.universal_priority());
        assert_eq!(instance.schools()[2].priority.order(), vec![8, 7, 6, 5, 4, 3, 2, 1, 0]);
    }

    #[test]
    fn wide_mean_gap_with_tiny_spread_separates_the_groups() {
        let config = NormalPotentialConfig {
            schools: 2,
            advantaged: 6,
            disadvantaged: 6,
            quota: 3,
            reserved: 1,
            potentials: PotentialParams {
                mean_advantaged: 1000.0,
                mean_disadvantaged: 0.0,
                sd_advantaged: 0.001,
                sd_disadvantaged: 0.001,
            },
        };
        let (instance, _) = gen_normal_potentials(&config, 3);
        let order = instance.schools()[0].priority.order();
        assert!(order[..6].iter().all(|&s| s < 6), "advantaged block first: {order:?}");
    }

    #[test]
    fn equal_potentials_mix_the_groups() {
        // Wilcoxon rank-sum of the advantaged group against the null of
        // exchangeable ranks; three sigma at these sizes.
        let config = NormalPotentialConfig {
            schools: 2,
            advantaged: 120,
            disadvantaged: 80,
            quota: 3,
            reserved: 1,
            potentials: PotentialParams {
                mean_advantaged: 100.0,
                mean_disadvantaged: 100.0,
                sd_advantaged: 15.0,
                sd_disadvantaged: 15.0,
            },
        };
        let (instance, _) = gen_normal_potentials(&config, 2024);
        let reference = &instance.schools()[0].priority;
        let rank_sum: f64 = instance
            .group_members(Group::Advantaged)
            .map(|s| (reference.rank(s) + 1) as f64)
            .sum();
        let (m, n) = (120.0_f64, 80.0_f64);
        let mean = m * (m + n + 1.0) / 2.0;
        let sd = (m * n * (m + n + 1.0) / 12.0).sqrt();
        assert!(
            (rank_sum - mean).abs() <= 3.0 * sd,
            "rank sum {rank_sum} vs null {mean} +- {sd}"
        );
    }

    #[test]
    fn rank_condition_reproduces_aggregate_scale_figures() {
        assert_eq!(rank_condition_proxies(8, 635, 208), (3424, 1664));

        let (instance, _) = gen_normal_potentials(&presets::nyc_like(1), 11);
        let check = check_rank_condition(&instance, 635, 208, 0.5).unwrap();
        assert!(check.holds);
        assert!(check.reserve_exceeds_nlogn);
        // ceil(8 ln 8 + 427 * 8 * lnln 8) and the (q - qr - 1) variant.
        assert_eq!(check.advantaged_rank, 2518);
        assert_eq!(check.advantaged_rank_strict, 2512);
        // ceil(0.5 * 208 * 8)
        assert_eq!(check.disadvantaged_rank, 832);
    }

    #[test]
    fn rank_condition_rejects_bad_inputs() {
        let (instance, _) = gen_homogeneous(&small_homogeneous(0.5), 1);
        assert_eq!(
            check_rank_condition(&instance, 2, 1, 1.5).unwrap_err(),
            MarketError::EpsilonOutOfRange { epsilon: 1.5 }
        );
        assert_eq!(
            check_rank_condition(&instance, 2, 1, 0.5).unwrap_err(),
            MarketError::QuotaOrder { quota: 2, reserved: 1 }
        );

        let mut schools = instance.schools().to_vec();
        schools[1].priority = schools[1].priority.swapped(0, 1);
        let skewed = Instance::new(instance.students().to_vec(), schools);
        assert_eq!(
            check_rank_condition(&skewed, 3, 1, 0.5).unwrap_err(),
            MarketError::NeedsUniversalPriority
        );
    }

    #[test]
    fn rank_condition_fails_when_disadvantaged_lead() {
        let config = HomogeneousConfig {
            schools: 2,
            advantaged: 30,
            disadvantaged: 30,
            quota: 8,
            reserved: 2,
            ranking: RankingPolicy::Biased { advantaged_bias: 0.0 },
        };
        let (instance, _) = gen_homogeneous(&config, 4);
        let check = check_rank_condition(&instance, 8, 2, 0.5).unwrap();
        // advantaged_rank floors at 1 here; the top advantaged student
        // still sits below every disadvantaged student.
        assert!(!check.holds);

        // And when the pivotal advantaged student does not exist at all:
        let tiny = HomogeneousConfig { schools: 3, advantaged: 1, ..config };
        let (instance, _) = gen_homogeneous(&tiny, 4);
        let check = check_rank_condition(&instance, 40, 2, 0.5).unwrap();
        assert!(check.advantaged_rank > 1, "rank {}", check.advantaged_rank);
        assert!(!check.holds);
    }

    #[test]
    fn separation_check_matches_published_aggregates() {
        let (p_a, p_d) = presets::NYC_TAILS;
        let check = check_separation(&presets::NYC_POTENTIALS, p_a, p_d).unwrap();
        assert!((check.lhs - 46.36).abs() < 0.01);
        assert!((check.rhs_nominal - 9.47).abs() < 0.02);
        assert!((check.rhs - 9.78).abs() < 0.01);
        assert!(check.holds);
    }

    #[test]
    fn separation_check_degenerate_cases() {
        let symmetric = PotentialParams {
            mean_advantaged: 50.0,
            mean_disadvantaged: 50.0,
            sd_advantaged: 10.0,
            sd_disadvantaged: 10.0,
        };
        let check = check_separation(&symmetric, 0.3, 0.3).unwrap();
        assert_eq!(check.lhs, 0.0);
        assert!((check.rhs - 0.016 * 10.0).abs() < 1e-12);
        assert!(!check.holds);

        // At the median the logistic terms vanish one by one.
        let check = check_separation(&symmetric, 0.5, 0.5).unwrap();
        assert!((check.rhs - 0.16).abs() < 1e-12);

        assert_eq!(
            check_separation(&symmetric, 0.0, 0.5).unwrap_err(),
            MarketError::QuantileDomain { alpha: 0.0 }
        );
    }

    #[test]
    fn quantile_approximation_behaves() {
        assert_eq!(normal_quantile_approx(0.5, 7.0, 3.0).unwrap(), 7.0);
        let lo = normal_quantile_approx(0.2, 0.0, 1.0).unwrap();
        let hi = normal_quantile_approx(0.8, 0.0, 1.0).unwrap();
        assert!((lo + hi).abs() < 1e-12, "symmetric around the mean");
        let at_018 = normal_quantile_approx(0.18, 0.0, 1.0).unwrap();
        assert!((at_018 - (-0.8909)).abs() < 5e-4);
        assert!(normal_quantile_approx(1.0, 0.0, 1.0).is_err());
        assert!(normal_quantile_approx(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_bin_overflow_and_cover_are_exact() {
        let stats = balls_in_bins_stats(1, 3, 50, 8);
        assert!(stats.first_overflow.iter().all(|&x| x == 4));
        assert!(stats.cover_time.iter().all(|&x| x == 3));
    }

    #[test]
    fn cover_estimate_matches_hand_computation() {
        let est = cover_time_median_estimate(1000, 3);
        assert!((est - 10446.4).abs() < 1.0, "got {est}");
    }

    #[test]
    fn wilson_interval_brackets_the_rate() {
        let est = wilson_interval(90, 100);
        assert!(est.low < 0.9 && 0.9 < est.high);
        assert!(est.low > 0.8 && est.high < 0.96);
        let sure = wilson_interval(0, 10);
        assert_eq!(sure.rate, 0.0);
        assert!(sure.low == 0.0 && sure.high < 0.31);
    }

    #[test]
    fn hc_rate_extremes() {
        // No reserves: any matched disadvantaged student defeats the
        // condition, and with seats to spare someone always matches.
        let no_reserve = MarketShape::Homogeneous(HomogeneousConfig {
            schools: 2,
            advantaged: 3,
            disadvantaged: 3,
            quota: 4,
            reserved: 0,
            ranking: RankingPolicy::Biased { advantaged_bias: 0.5 },
        });
        let rate = hc_rate_monte_carlo(&no_reserve, 30, 17).unwrap();
        assert_eq!(rate.rate, 0.0);

        // Mixed ranks and abundant seats: disadvantaged students spill past
        // the tiny reserve onto general seats, so the rate stays low.
        let loose = MarketShape::Homogeneous(HomogeneousConfig {
            schools: 2,
            advantaged: 8,
            disadvantaged: 8,
            quota: 10,
            reserved: 1,
            ranking: RankingPolicy::Biased { advantaged_bias: 0.5 },
        });
        let rate = hc_rate_monte_carlo(&loose, 30, 17).unwrap();
        assert!(rate.rate < 0.5, "rate {}", rate.rate);
    }

    #[test]
    fn preset_scaling_rounds_to_nearest() {
        let tenth = presets::nyc_like(10);
        assert_eq!(
            (tenth.advantaged, tenth.disadvantaged, tenth.quota, tenth.reserved),
            (1872, 913, 64, 21)
        );
        let full = presets::nyc_like(1);
        assert_eq!(
            (full.advantaged, full.disadvantaged, full.quota, full.reserved),
            (18723, 9132, 635, 208)
        );
    }
}
