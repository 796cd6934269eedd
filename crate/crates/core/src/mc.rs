//! Monte Carlo estimation of colored-event probabilities.
//!
//! Trials are cut into blocks of [`BLOCK_TRIALS`]; block `b` draws from
//! random stream `b` of the master seed. Each block yields a histogram over
//! event outcome patterns and histograms are merged by addition, so the
//! result is the same for any number of workers.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chroma::{ColorDistribution, ColorMask};
use crate::error::{Error, Result};
use crate::events::{MonotoneProperty, Scratch};
use crate::rng::RandomStream;

pub const BLOCK_TRIALS: u64 = 1024;
pub const MAX_TRIALS: u64 = 1 << 40;
pub const MAX_EVENTS: usize = 8;

/// Point estimate with its 1-sigma binomial standard error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub n_trials: u64,
    pub hits: u64,
    pub master_seed: u64,
    /// Not part of any reproducible output.
    #[serde(skip)]
    pub wall_time: f64,
}

// wall_time is ignored so equal seeds compare equal
impl PartialEq for Estimate {
    fn eq(&self, other: &Self) -> bool {
        self.p_hat.to_bits() == other.p_hat.to_bits()
            && self.stderr.to_bits() == other.stderr.to_bits()
            && self.n_trials == other.n_trials
            && self.hits == other.hits
            && self.master_seed == other.master_seed
    }
}

impl Estimate {
    /// `stderr = sqrt(p(1-p)/N)`; for `N = 1` this is always 0.
    pub fn from_counts(hits: u64, n_trials: u64, master_seed: u64, wall_time: f64) -> Self {
        let p = if n_trials == 0 { 0.0 } else { hits as f64 / n_trials as f64 };
        let stderr = if n_trials == 0 {
            0.0
        } else {
            (p * (1.0 - p) / n_trials as f64).sqrt()
        };
        Self {
            p_hat: p,
            stderr,
            n_trials,
            hits,
            master_seed,
            wall_time,
        }
    }

    /// `|p_hat - target| <= k * stderr`, with a floor on sigma so that a
    /// zero-variance estimate must hit the target exactly.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.p_hat - target).abs() <= k * self.stderr + 1e-12
    }
}

/// Overlap structure of a three-mask experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// `ab, ac, bc`: pairwise overlaps in three different colors.
    Bc,
    /// `ab, ac, ad`: all three share color `a`.
    Ad,
}

impl Pattern {
    pub fn masks(self) -> [ColorMask; 3] {
        let labels = match self {
            Pattern::Bc => ["ab", "ac", "bc"],
            Pattern::Ad => ["ab", "ac", "ad"],
        };
        labels.map(|l| ColorMask::parse(l, 4).expect("static mask"))
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Bc => "bc",
            Pattern::Ad => "ad",
        }
    }

    /// Recognize a triple of two-color masks by its overlap structure.
    pub fn classify(masks: &[ColorMask]) -> Option<Pattern> {
        if masks.len() != 3 || masks.iter().any(|m| m.bits().count_ones() != 2) {
            return None;
        }
        if (0..3).any(|i| masks[i].overlap(&masks[(i + 1) % 3]) != 1) {
            return None;
        }
        let common = masks[0].bits() & masks[1].bits() & masks[2].bits();
        Some(if common == 0 { Pattern::Bc } else { Pattern::Ad })
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bc" => Ok(Pattern::Bc),
            "ad" => Ok(Pattern::Ad),
            _ => Err(Error::InvalidSpec(format!("unknown pattern {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub events: Vec<(MonotoneProperty, ColorMask)>,
    pub distribution: ColorDistribution,
    pub trials: u64,
    pub seed: u64,
    /// 0 uses every available core; 1 runs serially on the calling thread.
    pub workers: usize,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<usize> {
        if self.events.is_empty() || self.events.len() > MAX_EVENTS {
            return Err(Error::InvalidSpec(format!(
                "need 1..={MAX_EVENTS} events, got {}",
                self.events.len()
            )));
        }
        if self.trials < 1 || self.trials > MAX_TRIALS {
            return Err(Error::InvalidSpec(format!(
                "trials must be in 1..={MAX_TRIALS}, got {}",
                self.trials
            )));
        }
        let n = self.events[0].0.ground_size();
        for (p, mask) in &self.events {
            if p.ground_size() != n {
                return Err(Error::GroundSizeMismatch {
                    expected: n,
                    actual: p.ground_size(),
                });
            }
            let full = (1u32 << self.distribution.num_colors()) - 1;
            if mask.bits() as u32 & !full != 0 {
                return Err(Error::InvalidMask(format!(
                    "mask {} outside a {}-color alphabet",
                    mask.label(),
                    self.distribution.num_colors()
                )));
            }
        }
        Ok(n)
    }
}

/// Histogram of outcome patterns over all trials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tally {
    pub counts: Vec<u64>,
    pub trials: u64,
}

impl Tally {
    fn zeros(num_events: usize) -> Self {
        Self {
            counts: vec![0; 1 << num_events],
            trials: 0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.trials += other.trials;
        self
    }

    /// Trials in which every event of `events` (bitmask) held.
    pub fn hits(&self, events: usize) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(p, _)| p & events == events)
            .map(|(_, c)| c)
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub tally: Tally,
    pub seed: u64,
    pub wall_time: f64,
    num_events: usize,
}

impl Outcome {
    /// Estimate of the intersection of the events whose indices are given.
    pub fn intersection(&self, events: &[usize]) -> Estimate {
        let mask = events.iter().fold(0, |m, &i| m | 1 << i);
        Estimate::from_counts(self.tally.hits(mask), self.tally.trials, self.seed, self.wall_time)
    }

    pub fn all(&self) -> Estimate {
        let all: Vec<usize> = (0..self.num_events).collect();
        self.intersection(&all)
    }

    pub fn marginal(&self, i: usize) -> Estimate {
        self.intersection(&[i])
    }

    pub fn num_events(&self) -> usize {
        self.num_events
    }
}

fn run_block(
    spec: &ExperimentSpec,
    ground: usize,
    block: u64,
    colors: &mut Vec<u8>,
    scratch: &mut Scratch,
) -> Tally {
    let mut tally = Tally::zeros(spec.events.len());
    let start = block * BLOCK_TRIALS;
    let count = BLOCK_TRIALS.min(spec.trials - start);
    let mut stream = RandomStream::new(spec.seed, block);
    colors.resize(ground, 0);
    for _ in 0..count {
        spec.distribution.fill(colors, &mut stream);
        let mut pattern = 0;
        for (i, (prop, mask)) in spec.events.iter().enumerate() {
            let c: &[u8] = colors;
            if prop.eval_with(scratch, |e| mask.contains(c[e])) {
                pattern |= 1 << i;
            }
        }
        tally.counts[pattern] += 1;
    }
    tally.trials = count;
    tally
}

/// Run all trials and return the full outcome histogram.
pub fn run_outcome(spec: &ExperimentSpec) -> Result<Outcome> {
    let ground = spec.validate()?;
    let started = Instant::now();
    let blocks = spec.trials.div_ceil(BLOCK_TRIALS);
    let k = spec.events.len();
    let tally = if spec.workers == 1 {
        let mut colors = Vec::new();
        let mut scratch = Scratch::default();
        (0..blocks).fold(Tally::zeros(k), |acc, b| {
            acc.merge(run_block(spec, ground, b, &mut colors, &mut scratch))
        })
    } else {
        let job = || {
            (0..blocks)
                .into_par_iter()
                .map_init(
                    || (Vec::new(), Scratch::default()),
                    |(colors, scratch), b| run_block(spec, ground, b, colors, scratch),
                )
                .reduce(|| Tally::zeros(k), Tally::merge)
        };
        if spec.workers == 0 {
            job()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(spec.workers)
                .build()
                .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?
                .install(job)
        }
    };
    Ok(Outcome {
        tally,
        seed: spec.seed,
        wall_time: started.elapsed().as_secs_f64(),
        num_events: k,
    })
}

/// Estimate of the probability that every event holds.
pub fn run(spec: &ExperimentSpec) -> Result<Estimate> {
    Ok(run_outcome(spec)?.all())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairCheck {
    pub joint: Estimate,
    pub marginals: [Estimate; 2],
    /// `(joint - m1 m2) / sigma` with
    /// `sigma^2 = se_joint^2 + (m2 se_1)^2 + (m1 se_2)^2`; 0 when both the
    /// difference and sigma vanish.
    pub z_score: f64,
}

/// Joint and marginal estimates for two events whose masks overlap in one
/// color, and the z-score of the independence gap.
pub fn run_pair_check(spec: &ExperimentSpec) -> Result<PairCheck> {
    if spec.events.len() != 2 {
        return Err(Error::InvalidSpec("pair check needs exactly two events".into()));
    }
    if spec.events[0].1.overlap(&spec.events[1].1) != 1 {
        return Err(Error::InvalidSpec("pair check masks must share exactly one color".into()));
    }
    let out = run_outcome(spec)?;
    let joint = out.all();
    let (m1, m2) = (out.marginal(0), out.marginal(1));
    let diff = joint.p_hat - m1.p_hat * m2.p_hat;
    let sigma = (joint.stderr.powi(2)
        + (m2.p_hat * m1.stderr).powi(2)
        + (m1.p_hat * m2.stderr).powi(2))
    .sqrt();
    let z_score = if sigma > 0.0 {
        diff / sigma
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(PairCheck {
        joint,
        marginals: [m1, m2],
        z_score,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MajorityRow {
    pub m: usize,
    pub bc: Estimate,
    pub ad: Estimate,
}

/// Majority on `2m + 1` elements under both mask patterns. One run per `m`
/// samples events for `ab, ac, bc, ad` together.
pub fn majority_limit(m_list: &[usize], trials: u64, seed: u64, workers: usize) -> Result<Vec<MajorityRow>> {
    m_list
        .iter()
        .map(|&m| {
            let u = MonotoneProperty::majority(2 * m + 1, m as i64);
            let events = ["ab", "ac", "bc", "ad"]
                .iter()
                .map(|l| Ok((u.clone(), ColorMask::parse(l, 4)?)))
                .collect::<Result<Vec<_>>>()?;
            let out = run_outcome(&ExperimentSpec {
                events,
                distribution: ColorDistribution::uniform(4)?,
                trials,
                seed: crate::rng::mix_seed(seed, &[m as u64]),
                workers,
            })?;
            Ok(MajorityRow {
                m,
                bc: out.intersection(&[0, 1, 2]),
                ad: out.intersection(&[0, 1, 3]),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_rectangle;
    use std::sync::Arc;

    fn mask(s: &str) -> ColorMask {
        ColorMask::parse(s, 4).unwrap()
    }

    fn rect_spec(n: usize, pattern: Pattern, trials: u64, seed: u64, workers: usize) -> ExperimentSpec {
        let lat = Arc::new(build_rectangle(n).unwrap());
        let u = MonotoneProperty::crossing(lat, "12", "34").unwrap();
        ExperimentSpec {
            events: pattern.masks().iter().map(|&m| (u.clone(), m)).collect(),
            distribution: ColorDistribution::uniform(4).unwrap(),
            trials,
            seed,
            workers,
        }
    }

    #[test]
    fn always_true_event() {
        let spec = ExperimentSpec {
            events: vec![(MonotoneProperty::majority(5, -1), mask("ab"))],
            distribution: ColorDistribution::uniform(4).unwrap(),
            trials: 1000,
            seed: 1,
            workers: 1,
        };
        let e = run(&spec).unwrap();
        assert_eq!(e.p_hat, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn single_trial_stderr_is_zero() {
        let spec = rect_spec(3, Pattern::Ad, 1, 4, 1);
        let e = run(&spec).unwrap();
        assert_eq!(e.n_trials, 1);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = rect_spec(2, Pattern::Bc, 0, 1, 1);
        assert!(run(&spec).is_err());
        spec.trials = 10;
        spec.events.clear();
        assert!(run(&spec).is_err());
        let mut spec = rect_spec(2, Pattern::Bc, 10, 1, 1);
        spec.events.push((MonotoneProperty::majority(3, 1), mask("ab")));
        assert!(matches!(run(&spec), Err(Error::GroundSizeMismatch { .. })));
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let serial = run_outcome(&rect_spec(6, Pattern::Ad, 5000, 77, 1)).unwrap();
        for w in [0, 2, 3] {
            let par = run_outcome(&rect_spec(6, Pattern::Ad, 5000, 77, w)).unwrap();
            assert_eq!(serial.tally, par.tally);
        }
    }

    #[test]
    fn pattern_classification() {
        assert_eq!(Pattern::classify(&Pattern::Bc.masks()), Some(Pattern::Bc));
        assert_eq!(Pattern::classify(&Pattern::Ad.masks()), Some(Pattern::Ad));
        assert_eq!(Pattern::classify(&[mask("ab"), mask("cd"), mask("ac")]), None);
        assert_eq!("bc".parse::<Pattern>().unwrap(), Pattern::Bc);
        assert!("xy".parse::<Pattern>().is_err());
    }

    #[test]
    fn single_edge_pair_joint_is_quarter() {
        let u = MonotoneProperty::contains_element(1, 0).unwrap();
        let spec = ExperimentSpec {
            events: vec![(u.clone(), mask("ab")), (u, mask("ac"))],
            distribution: ColorDistribution::uniform(4).unwrap(),
            trials: 200_000,
            seed: 3,
            workers: 1,
        };
        let pc = run_pair_check(&spec).unwrap();
        assert!(pc.joint.within(0.25, 5.0), "{:?}", pc.joint);
        assert!(pc.marginals.iter().all(|m| m.within(0.5, 5.0)));
    }

    #[test]
    fn pair_check_rejects_disjoint_masks() {
        let u = MonotoneProperty::contains_element(1, 0).unwrap();
        let spec = ExperimentSpec {
            events: vec![(u.clone(), mask("ab")), (u, mask("cd"))],
            distribution: ColorDistribution::uniform(4).unwrap(),
            trials: 10,
            seed: 3,
            workers: 1,
        };
        assert!(run_pair_check(&spec).is_err());
    }

    #[test]
    fn rectangle_pair_independence() {
        let lat = Arc::new(build_rectangle(10).unwrap());
        let u = MonotoneProperty::crossing(lat, "12", "34").unwrap();
        let spec = ExperimentSpec {
            events: vec![(u.clone(), mask("ab")), (u, mask("ac"))],
            distribution: ColorDistribution::uniform(4).unwrap(),
            trials: 200_000,
            seed: 10,
            workers: 0,
        };
        let pc = run_pair_check(&spec).unwrap();
        assert!(pc.z_score.abs() < 4.0, "{pc:?}");
    }

    #[test]
    fn majority_small_m_against_exact() {
        let rows = majority_limit(&[0, 1], 200_000, 5, 0).unwrap();
        assert_eq!(rows[0].bc.p_hat, 0.0);
        assert!(rows[0].ad.within(0.25, 5.0));
        assert!(rows[1].bc.within(3.0 / 32.0, 3.0), "{:?}", rows[1].bc);
        assert!(rows[1].ad.within(5.0 / 32.0, 3.0), "{:?}", rows[1].ad);
    }

    #[test]
    fn rectangle_sandwich() {
        let out = run_outcome(&rect_spec(8, Pattern::Ad, 100_000, 12, 0)).unwrap();
        let triple = out.all();
        let pair = out.intersection(&[0, 1]);
        let product: f64 = (0..3).map(|i| out.marginal(i).p_hat).product();
        assert!(triple.p_hat <= pair.p_hat + 5.0 * pair.stderr);
        assert!(triple.p_hat >= product - 5.0 * triple.stderr);

        let out = run_outcome(&rect_spec(8, Pattern::Bc, 100_000, 13, 0)).unwrap();
        let product: f64 = (0..3).map(|i| out.marginal(i).p_hat).product();
        assert!(out.all().p_hat <= product + 5.0 * out.all().stderr);
    }
}
