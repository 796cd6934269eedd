//! Finite lattices with labeled boundary segments.
//!
//! Every lattice stores its connectivity as a list of links. In bond mode the
//! links are the percolating elements themselves; in site mode the elements
//! are the vertices and the links are the neighbor pairs between them.
//!
//! Boundary labels follow the corner numbering used for crossing events:
//! a side running from corner `i` to corner `j` is labeled `"ij"`.
//!
//! * rectangle: corners 1..4 are bottom-left, top-left, top-right,
//!   bottom-right, so `"12"` is the left column, `"34"` the right column,
//!   `"23"` the top row and `"14"` the bottom row.
//! * rhombus: `"12"` is `i = 0`, `"34"` is `i = m-1`, `"14"` is `j = 0` and
//!   `"23"` is `j = m-1`.
//! * hexagon: six sides `"12"`, `"23"`, `"34"`, `"45"`, `"56"`, `"61"` in
//!   cyclic order; a corner site belongs to both sides meeting there. The
//!   alternating sides `"12"`, `"34"`, `"56"` are `q = l`, `q + r = -l` and
//!   `r = l` in axial coordinates. `"shell"` is the union of all six sides.
//! * cubic: `"shell"` holds every vertex with a coordinate on the box face.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bond,
    Site,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "size", rename_all = "lowercase")]
pub enum Geometry {
    Rectangle(usize),
    Rhombus(usize),
    Hexagon(usize),
    Cubic(usize),
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Rectangle(_) => "rectangle",
            Geometry::Rhombus(_) => "rhombus",
            Geometry::Hexagon(_) => "hexagon",
            Geometry::Cubic(_) => "cubic",
        }
    }

    pub fn size(&self) -> usize {
        match *self {
            Geometry::Rectangle(n)
            | Geometry::Rhombus(n)
            | Geometry::Hexagon(n)
            | Geometry::Cubic(n) => n,
        }
    }
}

/// Immutable lattice geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    mode: Mode,
    geometry: Geometry,
    num_vertices: usize,
    links: Vec<[u32; 2]>,
    boundary: BTreeMap<String, Vec<u32>>,
    center: Option<u32>,
    // CSR adjacency: (neighbor vertex, link index)
    adj_offsets: Vec<u32>,
    adj: Vec<(u32, u32)>,
}

impl Lattice {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Edges in bond mode, sites in site mode.
    pub fn num_elements(&self) -> usize {
        match self.mode {
            Mode::Bond => self.links.len(),
            Mode::Site => self.num_vertices,
        }
    }

    pub fn links(&self) -> &[[u32; 2]] {
        &self.links
    }

    pub fn boundary(&self) -> &BTreeMap<String, Vec<u32>> {
        &self.boundary
    }

    pub fn segment(&self, label: &str) -> Result<&[u32]> {
        self.boundary
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSegment(label.to_string()))
    }

    pub fn center(&self) -> Option<u32> {
        self.center
    }

    /// Neighbors of `v` paired with the index of the connecting link.
    pub fn neighbors(&self, v: usize) -> &[(u32, u32)] {
        let lo = self.adj_offsets[v] as usize;
        let hi = self.adj_offsets[v + 1] as usize;
        &self.adj[lo..hi]
    }

    pub fn dump(&self) -> LatticeDump {
        let (edges, neighbors) = match self.mode {
            Mode::Bond => (Some(self.links.clone()), None),
            Mode::Site => {
                let nb = (0..self.num_vertices)
                    .map(|v| self.neighbors(v).iter().map(|&(w, _)| w).collect())
                    .collect();
                (None, Some(nb))
            }
        };
        LatticeDump {
            mode: self.mode,
            geometry: self.geometry,
            num_vertices: self.num_vertices,
            num_elements: self.num_elements(),
            edges,
            neighbors,
            boundary: self.boundary.clone(),
            center: self.center,
        }
    }
}

/// JSON debug dump of a lattice.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct LatticeDump {
    pub mode: Mode,
    pub geometry: Geometry,
    pub num_vertices: usize,
    pub num_elements: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[u32; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<Vec<Vec<u32>>>,
    pub boundary: BTreeMap<String, Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<u32>,
}

struct Builder {
    num_vertices: usize,
    links: Vec<[u32; 2]>,
    boundary: BTreeMap<String, Vec<u32>>,
    center: Option<u32>,
}

impl Builder {
    fn new(num_vertices: usize) -> Self {
        Self {
            num_vertices,
            links: Vec::new(),
            boundary: BTreeMap::new(),
            center: None,
        }
    }

    fn link(&mut self, u: usize, v: usize) {
        self.links.push([u as u32, v as u32]);
    }

    fn segment(&mut self, label: &str, members: impl IntoIterator<Item = usize>) {
        let mut v: Vec<u32> = members.into_iter().map(|x| x as u32).collect();
        v.sort_unstable();
        v.dedup();
        self.boundary.insert(label.to_string(), v);
    }

    fn finish(self, mode: Mode, geometry: Geometry) -> Lattice {
        let n = self.num_vertices;
        let mut degree = vec![0u32; n + 1];
        for &[u, v] in &self.links {
            debug_assert!(u != v, "self-loop");
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut adj_offsets = vec![0u32; n + 1];
        for v in 0..n {
            adj_offsets[v + 1] = adj_offsets[v] + degree[v];
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0u32, 0u32); self.links.len() * 2];
        for (i, &[u, v]) in self.links.iter().enumerate() {
            adj[fill[u as usize] as usize] = (v, i as u32);
            fill[u as usize] += 1;
            adj[fill[v as usize] as usize] = (u, i as u32);
            fill[v as usize] += 1;
        }
        debug_assert!(self
            .boundary
            .values()
            .all(|s| !s.is_empty() && s.iter().all(|&x| (x as usize) < n)));
        Lattice {
            mode,
            geometry,
            num_vertices: n,
            links: self.links,
            boundary: self.boundary,
            center: self.center,
            adj_offsets,
            adj,
        }
    }
}

/// Bond-mode rectangle on the vertex grid `{0..n+1} x {0..n}`.
pub fn build_rectangle(n: usize) -> Result<Lattice> {
    if n < 1 {
        return Err(Error::InvalidSize(format!("rectangle needs n >= 1, got {n}")));
    }
    let width = n + 2;
    let height = n + 1;
    let idx = |x: usize, y: usize| y * width + x;
    let mut b = Builder::new(width * height);
    for y in 0..height {
        for x in 0..width - 1 {
            b.link(idx(x, y), idx(x + 1, y));
        }
    }
    for x in 0..width {
        for y in 0..height - 1 {
            b.link(idx(x, y), idx(x, y + 1));
        }
    }
    b.segment("12", (0..height).map(|y| idx(0, y)));
    b.segment("34", (0..height).map(|y| idx(width - 1, y)));
    b.segment("14", (0..width).map(|x| idx(x, 0)));
    b.segment("23", (0..width).map(|x| idx(x, height - 1)));
    Ok(b.finish(Mode::Bond, Geometry::Rectangle(n)))
}

/// Forward half of the triangular-lattice neighbor offsets; the other half
/// is implied by symmetry.
const TRI_FORWARD: [(i64, i64); 3] = [(1, 0), (0, 1), (1, -1)];

/// Site-mode `m x m` rhombus of the triangular lattice.
pub fn build_rhombus(m: usize) -> Result<Lattice> {
    if m < 1 {
        return Err(Error::InvalidSize(format!("rhombus needs m >= 1, got {m}")));
    }
    let idx = |i: usize, j: usize| i * m + j;
    let mut b = Builder::new(m * m);
    let side = m as i64;
    for i in 0..m {
        for j in 0..m {
            for (di, dj) in TRI_FORWARD {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if (0..side).contains(&ni) && (0..side).contains(&nj) {
                    b.link(idx(i, j), idx(ni as usize, nj as usize));
                }
            }
        }
    }
    b.segment("12", (0..m).map(|j| idx(0, j)));
    b.segment("34", (0..m).map(|j| idx(m - 1, j)));
    b.segment("14", (0..m).map(|i| idx(i, 0)));
    b.segment("23", (0..m).map(|i| idx(i, m - 1)));
    Ok(b.finish(Mode::Site, Geometry::Rhombus(m)))
}

/// Site-mode regular hexagon of side `l` on the triangular lattice.
pub fn build_hexagon(l: usize) -> Result<Lattice> {
    build_triangular_ball(l, Mode::Site)
}

/// Hexagonal ball of radius `l` on the triangular lattice, in either mode.
/// In bond mode the vertices are the hexagon's sites and the elements are
/// the nearest-neighbor edges between them.
pub fn build_triangular_ball(l: usize, mode: Mode) -> Result<Lattice> {
    if l < 1 {
        return Err(Error::InvalidSize(format!("hexagon needs l >= 1, got {l}")));
    }
    let r = l as i64;
    let mut coords = Vec::new();
    for q in -r..=r {
        for s in (-r).max(-q - r)..=r.min(-q + r) {
            coords.push((q, s));
        }
    }
    let index: std::collections::HashMap<(i64, i64), usize> =
        coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut b = Builder::new(coords.len());
    for (i, &(q, s)) in coords.iter().enumerate() {
        for (dq, ds) in TRI_FORWARD {
            if let Some(&j) = index.get(&(q + dq, s + ds)) {
                b.link(i, j);
            }
        }
    }
    let side = |pred: &dyn Fn(i64, i64) -> bool| -> Vec<usize> {
        coords
            .iter()
            .enumerate()
            .filter(|(_, &(q, s))| pred(q, s))
            .map(|(i, _)| i)
            .collect()
    };
    // Axial (q, r); the third cube coordinate is -q-r.
    b.segment("12", side(&|q, _| q == r));
    b.segment("23", side(&|_, s| s == -r));
    b.segment("34", side(&|q, s| q + s == -r));
    b.segment("45", side(&|q, _| q == -r));
    b.segment("56", side(&|_, s| s == r));
    b.segment("61", side(&|q, s| q + s == r));
    b.segment(
        "shell",
        side(&|q, s| q.abs() == r || s.abs() == r || (q + s).abs() == r),
    );
    b.center = Some(index[&(0, 0)] as u32);
    Ok(b.finish(mode, Geometry::Hexagon(l)))
}

/// `{0..L-1}^3` box with 6-neighbor adjacency.
pub fn build_cubic(side: usize, mode: Mode) -> Result<Lattice> {
    if side < 2 {
        return Err(Error::InvalidSize(format!("cubic box needs L >= 2, got {side}")));
    }
    let l = side;
    let idx = |x: usize, y: usize, z: usize| (x * l + y) * l + z;
    let mut b = Builder::new(l * l * l);
    for axis in 0..3 {
        for x in 0..l {
            for y in 0..l {
                for z in 0..l {
                    let mut c = [x, y, z];
                    if c[axis] + 1 == l {
                        continue;
                    }
                    let from = idx(c[0], c[1], c[2]);
                    c[axis] += 1;
                    b.link(from, idx(c[0], c[1], c[2]));
                }
            }
        }
    }
    let on_face = |c: usize| c == 0 || c == l - 1;
    let mut shell = Vec::new();
    for x in 0..l {
        for y in 0..l {
            for z in 0..l {
                if on_face(x) || on_face(y) || on_face(z) {
                    shell.push(idx(x, y, z));
                }
            }
        }
    }
    b.segment("shell", shell);
    b.center = Some(idx(l / 2, l / 2, l / 2) as u32);
    Ok(b.finish(mode, Geometry::Cubic(side)))
}
