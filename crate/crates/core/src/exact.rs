//! Exhaustive rational computation of colored-event probabilities.
//!
//! Each property is first tabulated over all `2^n` subsets. A coloring then
//! reduces to one subset bitmask per color mask, and the outcome of all
//! events is recorded as a bit pattern. The pattern histogram gives the
//! joint probability, every pairwise joint and every marginal in one pass.

use std::collections::HashMap;
use std::fmt;

use num::{BigInt, BigRational, One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chroma::{ColorDistribution, ColorMask};
use crate::error::{Error, Result};
use crate::events::{
    check_monotone, random_generated_property, Direction, MonotoneProperty, TruthTable,
};
use crate::rng::RandomStream;

/// Upper bound on the number of colorings (or coupled outcomes) enumerated.
pub const MAX_COLORINGS: u64 = 20_000_000;
/// Ground-size cap for the 4-color cases.
pub const MAX_GROUND_FOUR_COLORS: usize = 10;

/// Exact probability.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactProb(pub BigRational);

impl ExactProb {
    pub fn new(num: u64, den: u64) -> Self {
        Self(BigRational::new(num.into(), den.into()))
    }

    pub fn from_count(count: u64, total: &BigInt) -> Self {
        Self(BigRational::new(count.into(), total.clone()))
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    pub fn to_f64(&self) -> f64 {
        num::ToPrimitive::to_f64(&self.0).unwrap_or(f64::NAN)
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::ops::Mul for &ExactProb {
    type Output = ExactProb;
    fn mul(self, rhs: &ExactProb) -> ExactProb {
        ExactProb(&self.0 * &rhs.0)
    }
}

/// Rationals cross the JSON boundary as decimal strings.
#[derive(Serialize, Deserialize)]
struct RationalRepr {
    num: String,
    den: String,
}

impl Serialize for ExactProb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalRepr {
            num: self.0.numer().to_string(),
            den: self.0.denom().to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactProb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = RationalRepr::deserialize(d)?;
        let num: BigInt = r.num.parse().map_err(serde::de::Error::custom)?;
        let den: BigInt = r.den.parse().map_err(serde::de::Error::custom)?;
        if den.is_zero() {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Self(BigRational::new(num, den)))
    }
}

/// Properties paired with the color masks selecting their percolation.
#[derive(Clone, Debug)]
pub struct ColoredEventSpec {
    pub events: Vec<(MonotoneProperty, ColorMask)>,
    pub distribution: ColorDistribution,
}

impl ColoredEventSpec {
    pub fn uniform(num_colors: usize, events: Vec<(MonotoneProperty, ColorMask)>) -> Result<Self> {
        Ok(Self {
            events,
            distribution: ColorDistribution::uniform(num_colors)?,
        })
    }

    fn ground_size(&self) -> Result<usize> {
        let n = self
            .events
            .first()
            .map(|(p, _)| p.ground_size())
            .ok_or_else(|| Error::InvalidSpec("no events".into()))?;
        for (p, _) in &self.events {
            if p.ground_size() != n {
                return Err(Error::GroundSizeMismatch {
                    expected: n,
                    actual: p.ground_size(),
                });
            }
        }
        Ok(n)
    }
}

/// Probability of each outcome pattern: bit `i` set iff event `i` holds.
#[derive(Clone, Debug)]
pub struct PatternDistribution {
    probs: Vec<BigRational>,
}

impl PatternDistribution {
    /// Probability that every event in `events` (a bitmask) holds.
    pub fn all_of(&self, events: usize) -> ExactProb {
        ExactProb(
            self.probs
                .iter()
                .enumerate()
                .filter(|(p, _)| p & events == events)
                .map(|(_, x)| x)
                .sum(),
        )
    }

    pub fn num_events(&self) -> usize {
        self.probs.len().trailing_zeros() as usize
    }
}

fn guard(outcomes: u128, what: &str) -> Result<()> {
    if outcomes > MAX_COLORINGS as u128 {
        return Err(Error::TooLarge(format!(
            "{what}: {outcomes} outcomes exceeds the limit of {MAX_COLORINGS}"
        )));
    }
    Ok(())
}

/// Visit every coloring of `n` elements with `m` colors. The first element's
/// color is split across workers; each worker folds its own accumulator and
/// the results are merged with `merge`.
fn fold_colorings<A, F, M>(n: usize, m: usize, init: impl Fn() -> A + Sync, visit: F, merge: M) -> A
where
    A: Send,
    F: Fn(&mut A, &[u8]) + Sync,
    M: Fn(A, A) -> A + Sync,
{
    if n == 0 {
        let mut acc = init();
        visit(&mut acc, &[]);
        return acc;
    }
    (0..m as u8)
        .into_par_iter()
        .map(|first| {
            let mut acc = init();
            let mut colors = vec![0u8; n];
            colors[0] = first;
            loop {
                visit(&mut acc, &colors);
                // odometer over elements 1..n
                let mut i = 1;
                while i < n {
                    colors[i] += 1;
                    if (colors[i] as usize) < m {
                        break;
                    }
                    colors[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
            acc
        })
        .reduce(&init, &merge)
}

/// Exact probability that a predicate of the coloring holds.
pub fn exact_coloring_probability<F>(
    ground_size: usize,
    dist: &ColorDistribution,
    pred: F,
) -> Result<ExactProb>
where
    F: Fn(&[u8]) -> bool + Sync,
{
    let m = dist.num_colors();
    guard((m as u128).saturating_pow(ground_size as u32), "coloring enumeration")?;
    let weights = rational_weights(dist)?;
    if dist.is_uniform() {
        let count = fold_colorings(
            ground_size,
            m,
            || 0u64,
            |acc, c| *acc += pred(c) as u64,
            |a, b| a + b,
        );
        return Ok(ExactProb::from_count(count, &BigInt::from(m).pow(ground_size as u32)));
    }
    // Group satisfying colorings by their color histogram.
    let hist = fold_colorings(
        ground_size,
        m,
        HashMap::<Vec<u8>, u64>::new,
        |acc, c| {
            if pred(c) {
                *acc.entry(histogram(c, m)).or_default() += 1;
            }
        },
        merge_counts,
    );
    Ok(ExactProb(
        hist.into_iter().map(|(h, count)| weight_of(weights, &h, count)).sum(),
    ))
}

fn rational_weights(dist: &ColorDistribution) -> Result<&[BigRational]> {
    dist.exact_weights().ok_or_else(|| {
        Error::InvalidDistribution("exact enumeration requires rational weights".into())
    })
}

fn histogram(colors: &[u8], m: usize) -> Vec<u8> {
    let mut h = vec![0u8; m];
    for &x in colors {
        h[x as usize] += 1;
    }
    h
}

fn merge_counts<K: std::hash::Hash + Eq>(mut a: HashMap<K, u64>, b: HashMap<K, u64>) -> HashMap<K, u64> {
    for (k, v) in b {
        *a.entry(k).or_default() += v;
    }
    a
}

/// `count * prod_c w_c^h_c`
fn weight_of(weights: &[BigRational], h: &[u8], count: u64) -> BigRational {
    let mut term = BigRational::from_integer(count.into());
    for (w, &k) in weights.iter().zip(h) {
        term *= num::pow(w.clone(), k as usize);
    }
    term
}

/// Joint outcome distribution of all events over every coloring.
pub fn exact_patterns(spec: &ColoredEventSpec) -> Result<PatternDistribution> {
    let n = spec.ground_size()?;
    let k = spec.events.len();
    if k > 8 {
        return Err(Error::InvalidSpec("at most 8 events".into()));
    }
    let m = spec.distribution.num_colors();
    guard((m as u128).saturating_pow(n as u32), "coloring enumeration")?;
    let tables = spec
        .events
        .iter()
        .map(|(p, _)| TruthTable::of(p))
        .collect::<Result<Vec<_>>>()?;
    let masks: Vec<ColorMask> = spec.events.iter().map(|(_, mask)| *mask).collect();
    let pattern_of = |colors: &[u8]| -> usize {
        let mut pattern = 0;
        for (i, (table, mask)) in tables.iter().zip(&masks).enumerate() {
            let mut subset = 0usize;
            for (e, &c) in colors.iter().enumerate() {
                if mask.contains(c) {
                    subset |= 1 << e;
                }
            }
            if table.get(subset) {
                pattern |= 1 << i;
            }
        }
        pattern
    };
    let total = BigInt::from(m).pow(n as u32);
    if spec.distribution.is_uniform() {
        let counts = fold_colorings(
            n,
            m,
            || vec![0u64; 1 << k],
            |acc, c| acc[pattern_of(c)] += 1,
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
        let probs = counts
            .into_iter()
            .map(|c| BigRational::new(c.into(), total.clone()))
            .collect();
        return Ok(PatternDistribution { probs });
    }
    let weights = rational_weights(&spec.distribution)?;
    let hist = fold_colorings(
        n,
        m,
        HashMap::<(usize, Vec<u8>), u64>::new,
        |acc, c| *acc.entry((pattern_of(c), histogram(c, m))).or_default() += 1,
        merge_counts,
    );
    let mut probs = vec![BigRational::zero(); 1 << k];
    for ((pattern, h), count) in hist {
        probs[pattern] += weight_of(weights, &h, count);
    }
    Ok(PatternDistribution { probs })
}

/// Probability that every `(property, mask)` pair holds.
pub fn exact_joint(spec: &ColoredEventSpec) -> Result<ExactProb> {
    let patterns = exact_patterns(spec)?;
    Ok(patterns.all_of((1 << spec.events.len()) - 1))
}

/// `P_{1/2}(prop)` by subset enumeration.
pub fn exact_half(prop: &MonotoneProperty) -> Result<ExactProb> {
    let table = TruthTable::of(prop)?;
    Ok(ExactProb::from_count(
        table.count(),
        &(BigInt::one() << table.ground_size()),
    ))
}

/// `P_p(prop) = sum_S [S in prop] p^|S| (1-p)^(n-|S|)`.
pub fn exact_p(prop: &MonotoneProperty, p: &BigRational) -> Result<ExactProb> {
    if p.is_negative() || *p > BigRational::one() {
        return Err(Error::ProbabilityOutOfRange(p.to_string()));
    }
    let table = TruthTable::of(prop)?;
    let n = table.ground_size();
    let q = BigRational::one() - p;
    let total = table
        .count_by_size()
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(k, c)| {
            BigRational::from_integer(c.into()) * num::pow(p.clone(), k) * num::pow(q.clone(), n - k)
        })
        .sum();
    Ok(ExactProb(total))
}

/// Joint outcome distribution for the XOR coupling: `k` independent uniform
/// subsets `E_1..E_k` plus `E_{k+1} = E_1 xor ... xor E_k`, with property
/// `i` evaluated on `E_{i+1}`.
pub fn coupled_patterns(k: usize, props: &[MonotoneProperty]) -> Result<PatternDistribution> {
    if k < 1 || props.len() != k + 1 {
        return Err(Error::InvalidSpec(format!(
            "xor coupling with k = {k} needs {} properties, got {}",
            k + 1,
            props.len()
        )));
    }
    let n = props[0].ground_size();
    if let Some(p) = props.iter().find(|p| p.ground_size() != n) {
        return Err(Error::GroundSizeMismatch {
            expected: n,
            actual: p.ground_size(),
        });
    }
    if k * n > 24 {
        return Err(Error::TooLarge(format!("2^{} coupled outcomes", k * n)));
    }
    let tables = props.iter().map(TruthTable::of).collect::<Result<Vec<_>>>()?;
    let full = (1usize << n) - 1;
    let outcomes = 1usize << (k * n);
    let counts = (0..outcomes)
        .into_par_iter()
        .fold(
            || vec![0u64; 1 << (k + 1)],
            |mut acc, code| {
                let mut parity = 0;
                let mut pattern = 0;
                for (i, table) in tables.iter().take(k).enumerate() {
                    let s = (code >> (i * n)) & full;
                    parity ^= s;
                    if table.get(s) {
                        pattern |= 1 << i;
                    }
                }
                if tables[k].get(parity) {
                    pattern |= 1 << k;
                }
                acc[pattern] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; 1 << (k + 1)],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total = BigInt::from(outcomes);
    Ok(PatternDistribution {
        probs: counts
            .into_iter()
            .map(|c| BigRational::new(c.into(), total.clone()))
            .collect(),
    })
}

/// Which inequality is being checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InequalityCase {
    /// Upward properties of `E_ab, E_ac, E_bc`; joint <= product.
    Thm1Bc,
    /// Upward properties of `E_ab, E_ac, E_ad`; joint >= product.
    Thm1Ad,
    /// Downward properties of `E_ab, E_ac, E_bc`; joint >= product.
    DownBc,
    /// Downward properties of `E_ab, E_ac, E_ad`; joint <= product.
    DownAd,
    /// Downward properties of the `k + 1` XOR-coupled percolations.
    Multi(usize),
    /// Two properties of one percolation, both closed in the same direction.
    HarrisKleitman,
    /// Downward properties of `E_1234, E_1256, E_1357, E_1467` under a
    /// uniform 8-coloring.
    Octo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    pub fn holds(self, lhs: &ExactProb, rhs: &ExactProb) -> bool {
        match self {
            Relation::AtMost => lhs <= rhs,
            Relation::AtLeast => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

impl InequalityCase {
    pub fn id(&self) -> String {
        match self {
            InequalityCase::Thm1Bc => "thm1_bc".into(),
            InequalityCase::Thm1Ad => "thm1_ad".into(),
            InequalityCase::DownBc => "down_bc".into(),
            InequalityCase::DownAd => "down_ad".into(),
            InequalityCase::Multi(k) => format!("multi{k}"),
            InequalityCase::HarrisKleitman => "hk".into(),
            InequalityCase::Octo => "octo".into(),
        }
    }

    pub fn num_properties(&self) -> usize {
        match self {
            InequalityCase::Multi(k) => k + 1,
            InequalityCase::HarrisKleitman => 2,
            InequalityCase::Octo => 4,
            _ => 3,
        }
    }

    pub fn relation(&self) -> Relation {
        match self {
            InequalityCase::Thm1Bc | InequalityCase::DownAd => Relation::AtMost,
            _ => Relation::AtLeast,
        }
    }

    /// Required direction of the properties; `None` for Harris-Kleitman,
    /// which only needs both to agree.
    pub fn direction(&self) -> Option<Direction> {
        match self {
            InequalityCase::Thm1Bc | InequalityCase::Thm1Ad => Some(Direction::Upward),
            InequalityCase::HarrisKleitman => None,
            _ => Some(Direction::Downward),
        }
    }

    /// Color masks for the colored cases.
    pub fn masks(&self) -> Option<(usize, Vec<ColorMask>)> {
        let parse = |m: usize, labels: &[&str]| {
            labels
                .iter()
                .map(|l| ColorMask::parse(l, m).expect("static mask"))
                .collect()
        };
        match self {
            InequalityCase::Thm1Bc | InequalityCase::DownBc => {
                Some((4, parse(4, &["ab", "ac", "bc"])))
            }
            InequalityCase::Thm1Ad | InequalityCase::DownAd => {
                Some((4, parse(4, &["ab", "ac", "ad"])))
            }
            InequalityCase::Octo => Some((8, parse(8, &["1234", "1256", "1357", "1467"]))),
            _ => None,
        }
    }

    /// Largest ground size the case can enumerate within the guards.
    pub fn max_ground_size(&self) -> usize {
        match self {
            InequalityCase::Thm1Bc
            | InequalityCase::Thm1Ad
            | InequalityCase::DownBc
            | InequalityCase::DownAd => MAX_GROUND_FOUR_COLORS,
            InequalityCase::Multi(k) => (24 / k.max(&1)).min(crate::events::MAX_MONOTONE_CHECK),
            InequalityCase::HarrisKleitman => crate::events::MAX_MONOTONE_CHECK,
            InequalityCase::Octo => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFactorization {
    pub pair: [usize; 2],
    pub joint: ExactProb,
    pub product: ExactProb,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub case: String,
    pub ground_size: usize,
    pub lhs: ExactProb,
    pub rhs: ExactProb,
    pub relation: Relation,
    pub holds: bool,
    pub pairwise: Vec<PairFactorization>,
    /// `lhs - rhs`.
    pub slack: String,
}

impl InequalityReport {
    pub fn pairwise_exact(&self) -> bool {
        self.pairwise.iter().all(|p| p.exact)
    }
}

/// Check directions, then evaluate.
pub fn verify_case(case: InequalityCase, props: &[MonotoneProperty]) -> Result<InequalityReport> {
    check_directions(case, props)?;
    evaluate_case(case, props)
}

fn check_directions(case: InequalityCase, props: &[MonotoneProperty]) -> Result<()> {
    if props.len() != case.num_properties() {
        return Err(Error::InvalidSpec(format!(
            "{} takes {} properties, got {}",
            case.id(),
            case.num_properties(),
            props.len()
        )));
    }
    let required = case.direction().unwrap_or(props[0].direction());
    for (i, p) in props.iter().enumerate() {
        if p.direction() != required {
            return Err(Error::DirectionMismatch(format!(
                "{}: property {i} is declared {:?}, case needs {:?}",
                case.id(),
                p.direction(),
                required
            )));
        }
        let shape = check_monotone(p)?;
        if !shape.conforms(required) {
            return Err(Error::DirectionMismatch(format!(
                "{}: property {i} is {shape:?}, case needs {required:?}",
                case.id()
            )));
        }
    }
    Ok(())
}

/// Evaluate the inequality without checking directions. Used for witness
/// searches, where a wrongly oriented property is the point.
pub fn evaluate_case(case: InequalityCase, props: &[MonotoneProperty]) -> Result<InequalityReport> {
    if props.len() != case.num_properties() {
        return Err(Error::InvalidSpec(format!(
            "{} takes {} properties",
            case.id(),
            case.num_properties()
        )));
    }
    let n = props[0].ground_size();
    if n > case.max_ground_size() {
        return Err(Error::TooLarge(format!(
            "{} supports ground size <= {}, got {n}",
            case.id(),
            case.max_ground_size()
        )));
    }
    let patterns = match case {
        InequalityCase::Multi(k) => coupled_patterns(k, props)?,
        InequalityCase::HarrisKleitman => coupled_patterns(1, props)?,
        _ => {
            let (m, masks) = case.masks().expect("colored case");
            let spec = ColoredEventSpec::uniform(m, props.iter().cloned().zip(masks).collect())?;
            exact_patterns(&spec)?
        }
    };
    let halves = props.iter().map(exact_half).collect::<Result<Vec<_>>>()?;
    let lhs = patterns.all_of((1 << props.len()) - 1);
    let rhs = halves.iter().fold(ExactProb::one(), |acc, h| &acc * h);
    let relation = case.relation();
    let mut pairwise = Vec::new();
    // Under k = 1 the two percolations coincide; there is no independence
    // claim to check.
    if case != InequalityCase::HarrisKleitman && case != InequalityCase::Multi(1) {
        for i in 0..props.len() {
            for j in i + 1..props.len() {
                let joint = patterns.all_of(1 << i | 1 << j);
                let product = &halves[i] * &halves[j];
                pairwise.push(PairFactorization {
                    pair: [i, j],
                    exact: joint == product,
                    joint,
                    product,
                });
            }
        }
    }
    Ok(InequalityReport {
        case: case.id(),
        ground_size: n,
        holds: relation.holds(&lhs, &rhs),
        slack: (&lhs.0 - &rhs.0).to_string(),
        lhs,
        rhs,
        relation,
        pairwise,
    })
}

/// Fuzzing parameters for one batch.
#[derive(Clone, Copy, Debug)]
pub struct FuzzParams {
    pub ground_size: usize,
    pub max_generators: usize,
}

/// Random properties of the right shape for `case`.
pub fn random_case_properties(
    case: InequalityCase,
    params: FuzzParams,
    stream: &mut RandomStream,
) -> Result<Vec<MonotoneProperty>> {
    let dir = case.direction().unwrap_or(Direction::Upward);
    (0..case.num_properties())
        .map(|_| {
            let gens = rand::Rng::random_range(stream, 1..=params.max_generators.max(1));
            random_generated_property(dir, params.ground_size, gens, params.ground_size, stream)
        })
        .collect()
}

/// Search for random properties with one direction flipped that violate the
/// inequality; shows the monotonicity hypothesis is doing work.
pub fn find_violation_witness(
    case: InequalityCase,
    ground_size: usize,
    tries: usize,
    seed: u64,
) -> Result<Option<(Vec<MonotoneProperty>, InequalityReport)>> {
    for t in 0..tries {
        let mut stream = RandomStream::new(seed, t as u64);
        let mut props = random_case_properties(
            case,
            FuzzParams {
                ground_size,
                max_generators: 3,
            },
            &mut stream,
        )?;
        let flip = t % props.len();
        props[flip] = props[flip].complement();
        let report = evaluate_case(case, &props)?;
        if !report.holds {
            return Ok(Some((props, report)));
        }
    }
    Ok(None)
}

/// The one-edge example: `contains(e)` under the bc and ad patterns.
pub fn single_edge_reports() -> Result<[InequalityReport; 2]> {
    let u = MonotoneProperty::contains_element(1, 0)?;
    let props = vec![u.clone(), u.clone(), u];
    Ok([
        verify_case(InequalityCase::Thm1Bc, &props)?,
        verify_case(InequalityCase::Thm1Ad, &props)?,
    ])
}

/// Exact bc- and ad-pattern probabilities for the majority property on
/// `2m + 1` elements.
pub fn majority_exact(m: usize) -> Result<[InequalityReport; 2]> {
    let u = MonotoneProperty::majority(2 * m + 1, m as i64);
    let props = vec![u.clone(), u.clone(), u];
    Ok([
        verify_case(InequalityCase::Thm1Bc, &props)?,
        verify_case(InequalityCase::Thm1Ad, &props)?,
    ])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub configurations: u64,
    pub violations: u64,
}

impl DualityCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Over every configuration, count those where it is not the case that
/// exactly one of "open `primal` crossing" and "closed `dual` crossing"
/// holds. Meaningful for site-mode lattices whose dual is the same lattice.
pub fn check_crossing_duality(
    primal: &MonotoneProperty,
    dual: &MonotoneProperty,
) -> Result<DualityCheck> {
    let open = TruthTable::of(primal)?;
    let closed = TruthTable::of(dual)?;
    if open.ground_size() != closed.ground_size() {
        return Err(Error::GroundSizeMismatch {
            expected: open.ground_size(),
            actual: closed.ground_size(),
        });
    }
    let n = open.ground_size();
    let full = (1usize << n) - 1;
    let violations = (0..=full)
        .filter(|&s| open.get(s) == closed.get(full ^ s))
        .count() as u64;
    Ok(DualityCheck {
        configurations: 1 << n,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chroma::{pair_subset, ratio, xor_subset, Coloring, ElementSubset};
    use crate::lattice::{build_rectangle, build_rhombus};
    use std::sync::Arc;

    fn mask(s: &str) -> ColorMask {
        ColorMask::parse(s, 4).unwrap()
    }

    /// Brute-force oracle: walk all 4^n colorings by integer code, build the
    /// subsets explicitly and evaluate the properties directly.
    fn brute_joint(props: &[MonotoneProperty], masks: &[ColorMask], m: usize) -> (u64, u64) {
        let n = props[0].ground_size();
        let total = (m as u64).pow(n as u32);
        let mut hits = 0;
        for code in 0..total {
            let mut x = code;
            let colors: Vec<u8> = (0..n)
                .map(|_| {
                    let c = (x % m as u64) as u8;
                    x /= m as u64;
                    c
                })
                .collect();
            let c = Coloring::new(colors, m).unwrap();
            if props
                .iter()
                .zip(masks)
                .all(|(p, &mk)| p.eval(&pair_subset(&c, mk)).unwrap())
            {
                hits += 1;
            }
        }
        (hits, total)
    }

    #[test]
    fn single_edge_example() {
        let [bc, ad] = single_edge_reports().unwrap();
        assert_eq!(bc.lhs, ExactProb::zero());
        assert_eq!(ad.lhs, ExactProb::new(1, 4));
        assert_eq!(bc.rhs, ExactProb::new(1, 8));
        assert_eq!(ad.rhs, ExactProb::new(1, 8));
        assert!(bc.holds && ad.holds);
        assert!(bc.pairwise_exact() && ad.pairwise_exact());
    }

    #[test]
    fn majority_m1_against_brute_force() {
        let u = MonotoneProperty::majority(3, 1);
        let props = [u.clone(), u.clone(), u];
        let (bc_hits, total) = brute_joint(&props, &[mask("ab"), mask("ac"), mask("bc")], 4);
        let (ad_hits, _) = brute_joint(&props, &[mask("ab"), mask("ac"), mask("ad")], 4);
        // frozen from the oracle above: 6/64 and 10/64
        assert_eq!((bc_hits, ad_hits, total), (6, 10, 64));
        let [bc, ad] = majority_exact(1).unwrap();
        assert_eq!(bc.lhs, ExactProb::new(3, 32));
        assert_eq!(ad.lhs, ExactProb::new(5, 32));
    }

    #[test]
    fn exact_joint_matches_brute_force_on_random_triples() {
        let mut stream = RandomStream::new(5, 0);
        for n in 1..=4 {
            for _ in 0..10 {
                let props = random_case_properties(
                    InequalityCase::Thm1Bc,
                    FuzzParams {
                        ground_size: n,
                        max_generators: 3,
                    },
                    &mut stream,
                )
                .unwrap();
                let masks = [mask("ab"), mask("ac"), mask("bc")];
                let (hits, total) = brute_joint(&props, &masks, 4);
                let spec =
                    ColoredEventSpec::uniform(4, props.iter().cloned().zip(masks).collect())
                        .unwrap();
                assert_eq!(exact_joint(&spec).unwrap(), ExactProb::new(hits, total));
            }
        }
    }

    #[test]
    fn exact_half_examples() {
        for n in 1..6 {
            let c = MonotoneProperty::contains_element(n, n - 1).unwrap();
            assert_eq!(exact_half(&c).unwrap(), ExactProb::new(1, 2));
        }
        assert_eq!(
            exact_half(&MonotoneProperty::majority(3, 1)).unwrap(),
            ExactProb::new(1, 2)
        );
        let rect = Arc::new(build_rectangle(1).unwrap());
        let u = MonotoneProperty::crossing(rect, "12", "34").unwrap();
        assert_eq!(exact_half(&u).unwrap(), ExactProb::new(1, 2));
        assert!(exact_half(&MonotoneProperty::majority(25, 12)).is_err());
    }

    #[test]
    fn exact_p_examples() {
        let c = MonotoneProperty::contains_element(1, 0).unwrap();
        assert_eq!(exact_p(&c, &ratio(1, 4)).unwrap(), ExactProb::new(1, 4));
        let full = MonotoneProperty::majority(4, 3);
        assert_eq!(exact_p(&full, &ratio(1, 1)).unwrap(), ExactProb::one());
        assert!(exact_p(&c, &ratio(5, 4)).is_err());
        assert!(exact_p(&c, &ratio(-1, 4)).is_err());
    }

    #[test]
    fn exact_p_half_agrees_with_exact_half() {
        let mut stream = RandomStream::new(8, 1);
        for i in 0..100 {
            let n = 1 + i % 8;
            let p = random_generated_property(Direction::Upward, n, 1 + i % 4, n, &mut stream)
                .unwrap();
            assert_eq!(exact_p(&p, &ratio(1, 2)).unwrap(), exact_half(&p).unwrap());
        }
    }

    #[test]
    fn pair_subset_is_half_percolation() {
        // P(E_ab = T) = 2^-n for every T, checked by enumeration
        let n = 5;
        let d = ColorDistribution::uniform(4).unwrap();
        for t in 0..1u64 << n {
            let target = ElementSubset::from_mask(n, t);
            let p = exact_coloring_probability(n, &d, |c| {
                let c = Coloring::new(c.to_vec(), 4).unwrap();
                pair_subset(&c, mask("ab")) == target
            })
            .unwrap();
            assert_eq!(p, ExactProb::new(1, 1 << n));
        }
    }

    #[test]
    fn overlapping_pairs_are_independent_subsets() {
        // joint law of (E_ab, E_ac) is uniform on pairs of subsets
        let n = 3;
        let d = ColorDistribution::uniform(4).unwrap();
        for s in 0..1u64 << n {
            for t in 0..1u64 << n {
                let p = exact_coloring_probability(n, &d, |c| {
                    let c = Coloring::new(c.to_vec(), 4).unwrap();
                    pair_subset(&c, mask("ab")).to_mask() == s
                        && pair_subset(&c, mask("ac")).to_mask() == t
                })
                .unwrap();
                assert_eq!(p, ExactProb::new(1, 1 << (2 * n)));
            }
        }
    }

    #[test]
    fn deformed_pair_is_two_alpha_percolation() {
        let n = 4;
        let alpha = ratio(1, 10);
        let d = ColorDistribution::deformed_exact(alpha.clone()).unwrap();
        let p = &alpha * ratio(2, 1);
        let q = ratio(1, 1) - &p;
        for t in 0..1u64 << n {
            let k = t.count_ones() as usize;
            let expected = num::pow(p.clone(), k) * num::pow(q.clone(), n - k);
            let got = exact_coloring_probability(n, &d, |c| {
                let c = Coloring::new(c.to_vec(), 5).unwrap();
                pair_subset(&c, mask5("ab")).to_mask() == t
            })
            .unwrap();
            assert_eq!(got.0, expected);
        }
    }

    fn mask5(s: &str) -> ColorMask {
        ColorMask::parse(s, 5).unwrap()
    }

    #[test]
    fn octo_masks_are_the_k3_xor_code() {
        let (_, masks) = InequalityCase::Octo.masks().unwrap();
        for color in 0..8u8 {
            let bits: Vec<bool> = masks.iter().map(|m| m.contains(color)).collect();
            assert_eq!(bits[3], bits[0] ^ bits[1] ^ bits[2]);
        }
        // and for a concrete coloring the fourth subset is the xor of the others
        let c = Coloring::new(vec![0, 1, 2, 3, 4, 5, 6, 7], 8).unwrap();
        let subsets: Vec<_> = masks.iter().map(|&m| pair_subset(&c, m)).collect();
        assert_eq!(xor_subset(&subsets[..3]).unwrap(), subsets[3]);
    }

    #[test]
    fn octo_every_three_mutually_independent() {
        let (_, masks) = InequalityCase::Octo.masks().unwrap();
        let d = ColorDistribution::uniform(8).unwrap();
        let n = 2;
        for skip in 0..4 {
            let idx: Vec<usize> = (0..4).filter(|&i| i != skip).collect();
            for code in 0..1u64 << (3 * n) {
                let target: Vec<u64> = (0..3).map(|j| (code >> (j * n)) & 0b11).collect();
                let p = exact_coloring_probability(n, &d, |c| {
                    let c = Coloring::new(c.to_vec(), 8).unwrap();
                    idx.iter()
                        .zip(&target)
                        .all(|(&i, &t)| pair_subset(&c, masks[i]).to_mask() == t)
                })
                .unwrap();
                assert_eq!(p, ExactProb::new(1, 1 << (3 * n)));
            }
        }
        // all four together are not independent: E_1467 is forced
        let p = exact_coloring_probability(n, &d, |c| {
            let c = Coloring::new(c.to_vec(), 8).unwrap();
            masks.iter().all(|&m| pair_subset(&c, m).is_empty())
        })
        .unwrap();
        assert_eq!(p, ExactProb::new(1, 1 << (3 * n)));
    }

    #[test]
    fn k2_coupling_single_element() {
        // (E1, E2) uniform over 4 outcomes; every pair (Ei, Ej) uniform too
        let props: Vec<_> = (0..3)
            .map(|_| MonotoneProperty::contains_element(1, 0).unwrap())
            .collect();
        let pd = coupled_patterns(2, &props).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                assert_eq!(pd.all_of(1 << i | 1 << j), ExactProb::new(1, 4));
            }
        }
        assert_eq!(pd.all_of(0b111), ExactProb::zero());
    }

    #[test]
    fn multi1_is_harris_kleitman() {
        let mut stream = RandomStream::new(4, 4);
        for _ in 0..20 {
            let props = random_case_properties(
                InequalityCase::Multi(1),
                FuzzParams {
                    ground_size: 4,
                    max_generators: 3,
                },
                &mut stream,
            )
            .unwrap();
            let multi = verify_case(InequalityCase::Multi(1), &props).unwrap();
            let hk = verify_case(InequalityCase::HarrisKleitman, &props).unwrap();
            assert_eq!(multi.lhs, hk.lhs);
            let t0 = TruthTable::of(&props[0]).unwrap();
            let t1 = TruthTable::of(&props[1]).unwrap();
            let both = (0..16).filter(|&s| t0.get(s) && t1.get(s)).count() as u64;
            assert_eq!(hk.lhs, ExactProb::new(both, 16));
            assert!(hk.holds);
        }
    }

    #[test]
    fn fuzzed_cases_hold() {
        let cases = [
            (InequalityCase::Thm1Bc, 4),
            (InequalityCase::Thm1Ad, 4),
            (InequalityCase::DownBc, 4),
            (InequalityCase::DownAd, 4),
            (InequalityCase::Multi(2), 3),
            (InequalityCase::Multi(3), 3),
            (InequalityCase::Octo, 2),
        ];
        for (case, max_n) in cases {
            for t in 0..40 {
                let mut stream = RandomStream::new(21, t);
                let n = 1 + t as usize % max_n;
                let props = random_case_properties(
                    case,
                    FuzzParams {
                        ground_size: n,
                        max_generators: 3,
                    },
                    &mut stream,
                )
                .unwrap();
                let r = verify_case(case, &props).unwrap();
                assert!(r.holds, "{case:?} {r:?}");
                assert!(r.pairwise_exact(), "{case:?} {r:?}");
            }
        }
    }

    #[test]
    fn direction_mismatch_rejected() {
        let u = MonotoneProperty::contains_element(2, 0).unwrap();
        let d = u.complement();
        let err = verify_case(InequalityCase::Thm1Bc, &[u.clone(), u.clone(), d.clone()]);
        assert!(matches!(err, Err(Error::DirectionMismatch(_))));
        let err = verify_case(InequalityCase::HarrisKleitman, &[u, d]);
        assert!(matches!(err, Err(Error::DirectionMismatch(_))));
    }

    #[test]
    fn flipped_direction_has_witness() {
        let found = find_violation_witness(InequalityCase::Thm1Ad, 2, 200, 3).unwrap();
        let (_, report) = found.expect("a violating triple exists");
        assert!(!report.holds);
        let found = find_violation_witness(InequalityCase::HarrisKleitman, 2, 200, 3).unwrap();
        assert!(found.is_some());
    }

    #[test]
    fn bc_case_is_symmetric_under_swapping_b_and_c() {
        // swapping b <-> c maps masks (ab, ac, bc) to (ac, ab, bc)
        let mut stream = RandomStream::new(12, 0);
        for _ in 0..20 {
            let props = random_case_properties(
                InequalityCase::Thm1Bc,
                FuzzParams {
                    ground_size: 3,
                    max_generators: 3,
                },
                &mut stream,
            )
            .unwrap();
            let a = ColoredEventSpec::uniform(
                4,
                vec![
                    (props[0].clone(), mask("ab")),
                    (props[1].clone(), mask("ac")),
                    (props[2].clone(), mask("bc")),
                ],
            )
            .unwrap();
            let b = ColoredEventSpec::uniform(
                4,
                vec![
                    (props[0].clone(), mask("ac")),
                    (props[1].clone(), mask("ab")),
                    (props[2].clone(), mask("bc")),
                ],
            )
            .unwrap();
            assert_eq!(exact_joint(&a).unwrap(), exact_joint(&b).unwrap());
        }
    }

    #[test]
    fn guards_are_errors() {
        let big = MonotoneProperty::majority(11, 5);
        let spec = ColoredEventSpec::uniform(
            4,
            vec![(big.clone(), mask("ab")), (big.clone(), mask("ac")), (big, mask("bc"))],
        )
        .unwrap();
        // 4^11 colorings fit the enumeration guard; the case cap is 10
        assert!(exact_joint(&spec).is_ok());
        let big = MonotoneProperty::majority(11, 5);
        let props = vec![big.clone(), big.clone(), big];
        assert!(matches!(
            verify_case(InequalityCase::Thm1Bc, &props),
            Err(Error::TooLarge(_))
        ));
        let huge = MonotoneProperty::majority(13, 6);
        let spec = ColoredEventSpec::uniform(4, vec![(huge, mask("ab"))]).unwrap();
        assert!(matches!(exact_joint(&spec), Err(Error::TooLarge(_))));
    }

    #[test]
    fn rectangle_duality_exact() {
        for n in [1, 2] {
            let rect = Arc::new(build_rectangle(n).unwrap());
            let u = MonotoneProperty::crossing(rect, "12", "34").unwrap();
            assert_eq!(exact_half(&u).unwrap(), ExactProb::new(1, 2));
        }
    }

    #[test]
    fn rhombus_duality_exact() {
        for m in [2, 3, 4] {
            let lat = Arc::new(build_rhombus(m).unwrap());
            let u = MonotoneProperty::crossing(lat.clone(), "12", "34").unwrap();
            let v = MonotoneProperty::crossing(lat, "14", "23").unwrap();
            let check = check_crossing_duality(&u, &v).unwrap();
            assert!(check.holds(), "m = {m}: {check:?}");
            assert_eq!(exact_half(&u).unwrap(), ExactProb::new(1, 2));
            let p = ratio(1, 3);
            let q = ratio(2, 3);
            let sum = &exact_p(&u, &p).unwrap().0 + &exact_p(&v, &q).unwrap().0;
            assert_eq!(sum, ratio(1, 1));
        }
    }

    #[test]
    fn report_serializes_rationals_as_strings() {
        let [bc, _] = single_edge_reports().unwrap();
        let v = serde_json::to_value(&bc).unwrap();
        assert_eq!(v["rhs"]["num"], "1");
        assert_eq!(v["rhs"]["den"], "8");
        assert_eq!(v["relation"], "<=");
        let back: InequalityReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, bc);
    }
}
