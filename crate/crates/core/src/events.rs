//! Monotone properties and their evaluation.
//!
//! Every property is an upward-closed predicate ("kind") together with a
//! direction. A downward property is the complement of its upward kind, so
//! "avoids e" is `contains(e)` taken downward and "no 12-34 crossing" is the
//! crossing event taken downward.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chroma::ElementSubset;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Mode};
use crate::rng::RandomStream;

/// Largest ground set accepted by [`check_monotone`].
pub const MAX_MONOTONE_CHECK: usize = 12;
/// Largest ground set for which a full truth table is built.
pub const MAX_TRUTH_TABLE: usize = 24;

/// Disjoint-set forest with union by size and path halving.
#[derive(Clone, Debug, Default)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        let mut uf = Self::default();
        uf.reset(n);
        uf
    }

    /// Reinitialize to `n` singletons, reusing the allocation.
    pub fn reset(&mut self, n: usize) {
        self.parent.clear();
        self.parent.extend(0..n as u32);
        self.size.clear();
        self.size.resize(n, 1);
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    #[inline]
    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    #[inline]
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }

    pub fn same(&mut self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upward,
    Downward,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Upward => Direction::Downward,
            Direction::Downward => Direction::Upward,
        }
    }
}

/// The upward-closed predicate behind a property.
#[derive(Clone, Debug)]
pub enum EventKind {
    /// Some vertex (site) of `from` is joined to some vertex (site) of `to`.
    Crossing {
        lattice: Arc<Lattice>,
        from: String,
        to: String,
    },
    /// Some open cluster touches all three segments.
    TripleConnection {
        lattice: Arc<Lattice>,
        segments: [String; 3],
    },
    /// The center is joined to the `"shell"` segment.
    CenterToShell { lattice: Arc<Lattice> },
    /// More than `threshold` elements present.
    Majority { ground_size: usize, threshold: i64 },
    ContainsElement { ground_size: usize, element: usize },
    /// Upward closure of an antichain.
    Generated {
        ground_size: usize,
        generators: Vec<ElementSubset>,
    },
}

#[derive(Clone, Debug)]
pub struct MonotoneProperty {
    direction: Direction,
    kind: EventKind,
}

impl MonotoneProperty {
    pub fn crossing(lattice: Arc<Lattice>, from: &str, to: &str) -> Result<Self> {
        let a = lattice.segment(from)?;
        let b = lattice.segment(to)?;
        if a.iter().any(|x| b.contains(x)) {
            return Err(Error::InvalidSpec(format!(
                "crossing segments {from:?} and {to:?} overlap"
            )));
        }
        Ok(Self::upward(EventKind::Crossing {
            lattice,
            from: from.into(),
            to: to.into(),
        }))
    }

    pub fn triple_connection(lattice: Arc<Lattice>, segments: [&str; 3]) -> Result<Self> {
        for s in segments {
            lattice.segment(s)?;
        }
        Ok(Self::upward(EventKind::TripleConnection {
            lattice,
            segments: segments.map(String::from),
        }))
    }

    pub fn center_to_shell(lattice: Arc<Lattice>) -> Result<Self> {
        lattice.segment("shell")?;
        if lattice.center().is_none() {
            return Err(Error::InvalidSpec("lattice has no distinguished center".into()));
        }
        Ok(Self::upward(EventKind::CenterToShell { lattice }))
    }

    /// `|S| > threshold`.
    pub fn majority(ground_size: usize, threshold: i64) -> Self {
        Self::upward(EventKind::Majority {
            ground_size,
            threshold,
        })
    }

    pub fn contains_element(ground_size: usize, element: usize) -> Result<Self> {
        if element >= ground_size {
            return Err(Error::InvalidSpec(format!(
                "element {element} outside ground set of size {ground_size}"
            )));
        }
        Ok(Self::upward(EventKind::ContainsElement {
            ground_size,
            element,
        }))
    }

    pub fn avoids_element(ground_size: usize, element: usize) -> Result<Self> {
        Ok(Self::contains_element(ground_size, element)?.complement())
    }

    /// Upward: `S` contains some generator. Downward: `S` contains none.
    /// Generators are reduced to their minimal members.
    pub fn generated(
        direction: Direction,
        ground_size: usize,
        generators: Vec<ElementSubset>,
    ) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.len() != ground_size) {
            return Err(Error::GroundSizeMismatch {
                expected: ground_size,
                actual: g.len(),
            });
        }
        let mut minimal: Vec<ElementSubset> = Vec::new();
        let mut sorted = generators;
        sorted.sort_by_key(|g| g.count());
        for g in sorted {
            if !minimal.iter().any(|m| m.is_subset(&g)) {
                minimal.push(g);
            }
        }
        Ok(Self {
            direction,
            kind: EventKind::Generated {
                ground_size,
                generators: minimal,
            },
        })
    }

    fn upward(kind: EventKind) -> Self {
        Self {
            direction: Direction::Upward,
            kind,
        }
    }

    /// Complement family; flips the direction.
    pub fn complement(&self) -> Self {
        Self {
            direction: self.direction.flip(),
            kind: self.kind.clone(),
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn kind(&self) -> &EventKind {
        &self.kind
    }

    pub fn ground_size(&self) -> usize {
        match &self.kind {
            EventKind::Crossing { lattice, .. }
            | EventKind::TripleConnection { lattice, .. }
            | EventKind::CenterToShell { lattice } => lattice.num_elements(),
            EventKind::Majority { ground_size, .. }
            | EventKind::ContainsElement { ground_size, .. }
            | EventKind::Generated { ground_size, .. } => *ground_size,
        }
    }

    pub fn eval(&self, subset: &ElementSubset) -> Result<bool> {
        if subset.len() != self.ground_size() {
            return Err(Error::GroundSizeMismatch {
                expected: self.ground_size(),
                actual: subset.len(),
            });
        }
        Ok(self.eval_with(&mut Scratch::default(), |e| subset.contains(e)))
    }

    /// Evaluate with caller-owned scratch and an arbitrary membership test;
    /// the Monte Carlo engine passes `|e| mask.contains(colors[e])`.
    #[inline]
    pub fn eval_with<F: Fn(usize) -> bool>(&self, scratch: &mut Scratch, open: F) -> bool {
        let up = match &self.kind {
            EventKind::Majority {
                ground_size,
                threshold,
            } => ((0..*ground_size).filter(|&e| open(e)).count() as i64) > *threshold,
            EventKind::ContainsElement { element, .. } => open(*element),
            EventKind::Generated { generators, .. } => {
                generators.iter().any(|g| g.iter().all(&open))
            }
            EventKind::Crossing { lattice, from, to } => {
                scratch.connect(lattice, &open);
                scratch.crossing(lattice, segment(lattice, from), segment(lattice, to))
            }
            EventKind::TripleConnection { lattice, segments } => {
                scratch.connect(lattice, &open);
                scratch.triple(lattice, segments.each_ref().map(|s| segment(lattice, s)))
            }
            EventKind::CenterToShell { lattice } => {
                scratch.connect(lattice, &open);
                let center = lattice.center().expect("validated at construction");
                scratch.center_to(lattice, center, segment(lattice, "shell"))
            }
        };
        up == (self.direction == Direction::Upward)
    }
}

fn segment<'a>(lattice: &'a Lattice, label: &str) -> &'a [u32] {
    lattice.segment(label).expect("validated at construction")
}

/// Per-worker evaluation buffers, reset between trials.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    uf: UnionFind,
    open: Vec<bool>,
    bits: Vec<u64>,
    tags: Vec<u8>,
}

impl Scratch {
    fn connect<F: Fn(usize) -> bool>(&mut self, lattice: &Lattice, open: &F) {
        let n = lattice.num_elements();
        self.open.clear();
        self.open.extend((0..n).map(open));
        self.uf.reset(lattice.num_vertices());
        if self.tags.len() < lattice.num_vertices() {
            self.tags.resize(lattice.num_vertices(), 0);
        }
        // pack open links into words first; branching per link mispredicts half the time
        let links = lattice.links();
        self.bits.clear();
        match lattice.mode() {
            Mode::Bond => self.bits.extend(self.open.chunks(64).map(|ch| {
                ch.iter()
                    .enumerate()
                    .fold(0u64, |w, (j, &o)| w | (o as u64) << j)
            })),
            Mode::Site => {
                let open = &self.open;
                self.bits.extend(links.chunks(64).map(|ch| {
                    ch.iter().enumerate().fold(0u64, |w, (j, &[u, v])| {
                        w | ((open[u as usize] & open[v as usize]) as u64) << j
                    })
                }))
            }
        }
        for (i, &word) in self.bits.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let [u, v] = links[i * 64 + w.trailing_zeros() as usize];
                self.uf.union(u, v);
                w &= w - 1;
            }
        }
    }

    #[inline]
    fn counts(&self, lattice: &Lattice, v: u32) -> bool {
        lattice.mode() == Mode::Bond || self.open[v as usize]
    }

    fn crossing(&mut self, lattice: &Lattice, a: &[u32], b: &[u32]) -> bool {
        for &v in a {
            if self.counts(lattice, v) {
                let r = self.uf.find(v);
                self.tags[r as usize] = 1;
            }
        }
        let mut hit = false;
        for &v in b {
            if self.counts(lattice, v) && self.tags[self.uf.find(v) as usize] == 1 {
                hit = true;
                break;
            }
        }
        self.clear_tags(a);
        hit
    }

    fn triple(&mut self, lattice: &Lattice, segs: [&[u32]; 3]) -> bool {
        for (bit, seg) in segs.iter().enumerate() {
            for &v in *seg {
                if self.counts(lattice, v) {
                    let r = self.uf.find(v);
                    self.tags[r as usize] |= 1 << bit;
                }
            }
        }
        let mut hit = false;
        for &v in segs[2] {
            if self.counts(lattice, v) && self.tags[self.uf.find(v) as usize] == 0b111 {
                hit = true;
                break;
            }
        }
        for seg in segs {
            self.clear_tags(seg);
        }
        hit
    }

    fn center_to(&mut self, lattice: &Lattice, center: u32, shell: &[u32]) -> bool {
        if !self.counts(lattice, center) {
            return false;
        }
        let rc = self.uf.find(center);
        shell
            .iter()
            .any(|&v| self.counts(lattice, v) && self.uf.find(v) == rc)
    }

    fn clear_tags(&mut self, seg: &[u32]) {
        for &v in seg {
            let r = self.uf.find(v);
            self.tags[r as usize] = 0;
        }
    }
}

/// Membership bit for every subset of a ground set of at most
/// [`MAX_TRUTH_TABLE`] elements; subset `s` is the bitmask of its members.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    ground_size: usize,
    words: Vec<u64>,
}

impl TruthTable {
    pub fn of(prop: &MonotoneProperty) -> Result<Self> {
        let n = prop.ground_size();
        if n > MAX_TRUTH_TABLE {
            return Err(Error::TooLarge(format!(
                "2^{n} subsets exceeds the 2^{MAX_TRUTH_TABLE} truth-table limit"
            )));
        }
        let total = 1usize << n;
        let mut words = vec![0u64; total.div_ceil(64)];
        words.par_iter_mut().enumerate().for_each_init(
            Scratch::default,
            |scratch, (w, word)| {
                let lo = w * 64;
                for s in lo..(lo + 64).min(total) {
                    if prop.eval_with(scratch, |e| (s >> e) & 1 == 1) {
                        *word |= 1 << (s - lo);
                    }
                }
            },
        );
        Ok(Self {
            ground_size: n,
            words,
        })
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    #[inline]
    pub fn get(&self, subset: usize) -> bool {
        (self.words[subset / 64] >> (subset % 64)) & 1 == 1
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Number of member subsets of each cardinality.
    pub fn count_by_size(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.ground_size + 1];
        for s in 0..1usize << self.ground_size {
            if self.get(s) {
                out[s.count_ones() as usize] += 1;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Upward,
    Downward,
    /// Empty or full family: closed in both directions.
    Both,
    Neither,
}

impl Monotonicity {
    pub fn conforms(self, direction: Direction) -> bool {
        matches!(
            (self, direction),
            (Monotonicity::Both, _)
                | (Monotonicity::Upward, Direction::Upward)
                | (Monotonicity::Downward, Direction::Downward)
        )
    }
}

/// Exhaustive classification by single-element additions and removals.
pub fn check_monotone(prop: &MonotoneProperty) -> Result<Monotonicity> {
    let n = prop.ground_size();
    if n > MAX_MONOTONE_CHECK {
        return Err(Error::TooLarge(format!(
            "monotonicity check limited to ground size {MAX_MONOTONE_CHECK}, got {n}"
        )));
    }
    Ok(classify(&TruthTable::of(prop)?))
}

pub fn classify(table: &TruthTable) -> Monotonicity {
    let n = table.ground_size();
    let (mut up, mut down) = (true, true);
    for s in 0..1usize << n {
        for e in 0..n {
            if (s >> e) & 1 == 0 {
                let (small, big) = (table.get(s), table.get(s | 1 << e));
                up &= !small || big;
                down &= !big || small;
            }
        }
    }
    match (up, down) {
        (true, true) => Monotonicity::Both,
        (true, false) => Monotonicity::Upward,
        (false, true) => Monotonicity::Downward,
        (false, false) => Monotonicity::Neither,
    }
}

/// Random monotone family for fuzzing: `num_generators` random sets of size
/// at most `max_gen_size`, closed in `direction`.
pub fn random_generated_property(
    direction: Direction,
    ground_size: usize,
    num_generators: usize,
    max_gen_size: usize,
    stream: &mut RandomStream,
) -> Result<MonotoneProperty> {
    if ground_size > MAX_MONOTONE_CHECK {
        return Err(Error::TooLarge(format!(
            "generated properties limited to ground size {MAX_MONOTONE_CHECK}"
        )));
    }
    let cap = max_gen_size.min(ground_size);
    let generators = (0..num_generators)
        .map(|_| {
            // an empty generator makes the family constant
            let k = if cap == 0 { 0 } else { stream.random_range(1..=cap) };
            ElementSubset::from_indices(ground_size, sample(stream, ground_size, k))
        })
        .collect();
    MonotoneProperty::generated(direction, ground_size, generators)
}
