//! Points on the unit sphere, the latitude/longitude tessellation `T(k)`,
//! patches of neighbouring tiles and the two resolution parameters derived
//! from them.
//!
//! `T(k)` is cut by the parallels `θ_l = π/2 + lΔ` (`l = -k..=k`) and the
//! meridians `φ_m = mΔ`, with `Δ = π/(2k+1)`. The parallels `θ_{±k}` bound two
//! polar caps of angular radius `Δ/2`; everything in between is split into
//! `2k` rows of `2(2k+1)` cells. A cell is addressed by `(row, col)` where
//! `row = l` runs over `-k+1..=k` and spans `[θ_{l-1}, θ_l]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Slack used when deciding whether a point sits on a tile boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Convergence threshold (radians) of the boundary-gap minimisation in
/// [`Tessellation::strict_delta`].
const GAP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("colatitude {0} is outside [0, π]")]
    ColatitudeOutOfRange(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("tessellation order must be at least 1")]
    ZeroOrder,
    #[error("no tile with index {0}")]
    UnknownTile(usize),
}

/// A point on S₂ in colatitude/longitude coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpherePoint {
    theta: f64,
    phi: f64,
}

impl SpherePoint {
    pub const NORTH_POLE: SpherePoint = SpherePoint { theta: 0.0, phi: 0.0 };
    pub const SOUTH_POLE: SpherePoint = SpherePoint { theta: PI, phi: 0.0 };

    /// Builds a point, wrapping `phi` into `[0, 2π)`. Colatitudes within
    /// rounding distance of the valid range are clamped.
    pub fn new(theta: f64, phi: f64) -> Result<Self, GeometryError> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if !(-BOUNDARY_TOLERANCE..=PI + BOUNDARY_TOLERANCE).contains(&theta) {
            return Err(GeometryError::ColatitudeOutOfRange(theta));
        }
        let theta = theta.clamp(0.0, PI);
        let phi = if theta == 0.0 || theta == PI {
            0.0
        } else {
            wrap_angle(phi)
        };
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn to_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Inverse of [`to_vector`](Self::to_vector); the input need not be normalised.
    pub fn from_vector(v: [f64; 3]) -> Result<Self, GeometryError> {
        let rho = v[0].hypot(v[1]);
        let theta = rho.atan2(v[2]);
        let phi = v[1].atan2(v[0]);
        Self::new(theta, phi)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.theta, self.phi)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Great-circle distance in radians.
///
/// Same quantity as `arccos(cos θa cos θb + sin θa sin θb cos(φa − φb))`,
/// evaluated through `atan2(|a×b|, a·b)` so it stays accurate for nearly
/// coincident and nearly antipodal points.
pub fn geodesic_distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    let va = a.to_vector();
    let vb = b.to_vector();
    norm(cross(va, vb)).atan2(dot(va, vb))
}

/// A boundary piece of a tile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arc {
    /// Segment of the half great circle at longitude `phi`.
    Meridian { phi: f64, theta_lo: f64, theta_hi: f64 },
    /// Arc of the parallel at colatitude `theta`; `phi_hi - phi_lo ∈ (0, 2π]`.
    Parallel { theta: f64, phi_lo: f64, phi_hi: f64 },
}

impl Arc {
    /// Point at parameter `t ∈ [0, 1]` along the arc.
    pub fn point_at(&self, t: f64) -> SpherePoint {
        let (theta, phi) = match *self {
            Arc::Meridian { phi, theta_lo, theta_hi } => (theta_lo + t * (theta_hi - theta_lo), phi),
            Arc::Parallel { theta, phi_lo, phi_hi } => (theta, phi_lo + t * (phi_hi - phi_lo)),
        };
        SpherePoint::new(theta, phi).expect("arc parameters are in range")
    }

    pub fn endpoints(&self) -> (SpherePoint, SpherePoint) {
        (self.point_at(0.0), self.point_at(1.0))
    }

    /// Shortest geodesic distance from `p` to any point of the arc.
    pub fn distance_to(&self, p: &SpherePoint) -> f64 {
        let (a, b) = self.endpoints();
        let to_ends = || geodesic_distance(p, &a).min(geodesic_distance(p, &b));
        match *self {
            Arc::Meridian { phi, theta_lo, theta_hi } => {
                let v = p.to_vector();
                let (sp, cp) = phi.sin_cos();
                let along = v[0] * cp + v[1] * sp;
                let across = -v[0] * sp + v[1] * cp;
                let foot = along.atan2(v[2]);
                if foot >= theta_lo && foot <= theta_hi {
                    across.abs().atan2(along.hypot(v[2]))
                } else {
                    to_ends()
                }
            }
            Arc::Parallel { theta, phi_lo, phi_hi } => {
                let offset = (p.phi - phi_lo).rem_euclid(TAU);
                if offset <= phi_hi - phi_lo || p.theta == 0.0 || p.theta == PI {
                    (p.theta - theta).abs()
                } else {
                    to_ends()
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pole {
    North,
    South,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TileKind {
    PolarCap { pole: Pole, radius: f64 },
    Cell { row: i32, col: u32, theta: (f64, f64), phi: (f64, f64) },
}

/// A tile `I_i` together with its sampled point `Λ_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tile {
    index: usize,
    kind: TileKind,
    sampled_point: SpherePoint,
}

impl Tile {
    /// A cap of angular radius `radius ∈ (0, π]` around a pole, sampled at the pole.
    /// A radius of `π` covers the whole sphere.
    pub fn polar_cap(index: usize, pole: Pole, radius: f64) -> Self {
        assert!(radius > 0.0 && radius <= PI, "cap radius {radius} out of range");
        let sampled_point = match pole {
            Pole::North => SpherePoint::NORTH_POLE,
            Pole::South => SpherePoint::SOUTH_POLE,
        };
        Self { index, kind: TileKind::PolarCap { pole, radius }, sampled_point }
    }

    /// A latitude/longitude cell sampled at its coordinate midpoint.
    pub fn cell(index: usize, row: i32, col: u32, theta: (f64, f64), phi: (f64, f64)) -> Self {
        assert!(0.0 <= theta.0 && theta.0 < theta.1 && theta.1 <= PI, "bad theta interval");
        assert!(phi.0 < phi.1 && phi.1 - phi.0 <= TAU, "bad phi interval");
        let sampled_point = SpherePoint::new(0.5 * (theta.0 + theta.1), 0.5 * (phi.0 + phi.1))
            .expect("cell midpoint is on the sphere");
        Self { index, kind: TileKind::Cell { row, col, theta, phi }, sampled_point }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn kind(&self) -> &TileKind {
        &self.kind
    }

    pub fn sampled_point(&self) -> SpherePoint {
        self.sampled_point
    }

    pub fn theta_range(&self) -> (f64, f64) {
        match self.kind {
            TileKind::PolarCap { pole: Pole::North, radius } => (0.0, radius),
            TileKind::PolarCap { pole: Pole::South, radius } => (PI - radius, PI),
            TileKind::Cell { theta, .. } => theta,
        }
    }

    pub fn phi_range(&self) -> (f64, f64) {
        match self.kind {
            TileKind::PolarCap { .. } => (0.0, TAU),
            TileKind::Cell { phi, .. } => phi,
        }
    }

    /// Closed-set membership with an absolute slack of `tol` radians.
    pub fn contains_with_tolerance(&self, p: &SpherePoint, tol: f64) -> bool {
        let (t0, t1) = self.theta_range();
        if p.theta < t0 - tol || p.theta > t1 + tol {
            return false;
        }
        match self.kind {
            TileKind::PolarCap { .. } => true,
            TileKind::Cell { phi: (p0, p1), .. } => {
                let offset = (p.phi - p0).rem_euclid(TAU);
                offset <= p1 - p0 + tol || offset >= TAU - tol
            }
        }
    }

    pub fn contains(&self, p: &SpherePoint) -> bool {
        self.contains_with_tolerance(p, 0.0)
    }

    pub fn area(&self) -> f64 {
        let (t0, t1) = self.theta_range();
        let (p0, p1) = self.phi_range();
        (t0.cos() - t1.cos()) * (p1 - p0)
    }

    /// The arcs making up `∂I`. A full-sphere cap has an empty boundary.
    pub fn boundary(&self) -> Vec<Arc> {
        match self.kind {
            TileKind::PolarCap { radius, .. } if radius >= PI => Vec::new(),
            TileKind::PolarCap { pole, radius } => {
                let theta = if pole == Pole::North { radius } else { PI - radius };
                vec![Arc::Parallel { theta, phi_lo: 0.0, phi_hi: TAU }]
            }
            TileKind::Cell { theta: (t0, t1), phi: (p0, p1), .. } => {
                let mut arcs = Vec::with_capacity(4);
                if t0 > 0.0 {
                    arcs.push(Arc::Parallel { theta: t0, phi_lo: p0, phi_hi: p1 });
                }
                if t1 < PI {
                    arcs.push(Arc::Parallel { theta: t1, phi_lo: p0, phi_hi: p1 });
                }
                if p1 - p0 < TAU {
                    arcs.push(Arc::Meridian { phi: p0, theta_lo: t0, theta_hi: t1 });
                    arcs.push(Arc::Meridian { phi: p1, theta_lo: t0, theta_hi: t1 });
                }
                arcs
            }
        }
    }

    /// Corner points of a cell; empty for caps.
    pub fn vertices(&self) -> Vec<SpherePoint> {
        match self.kind {
            TileKind::PolarCap { .. } => Vec::new(),
            TileKind::Cell { theta: (t0, t1), phi: (p0, p1), .. } => [(t0, p0), (t0, p1), (t1, p0), (t1, p1)]
                .iter()
                .map(|&(t, p)| SpherePoint::new(t, p).expect("corner is on the sphere"))
                .collect(),
        }
    }

    /// Distance from `p` to the nearest point of `∂I`.
    pub fn boundary_distance(&self, p: &SpherePoint) -> f64 {
        distance_to_arcs(p, &self.boundary())
    }

    /// Distance from `p` to the closed tile (zero inside).
    pub fn distance_to(&self, p: &SpherePoint) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.boundary_distance(p)
        }
    }
}

/// Minimum distance from `p` to a set of arcs; `+∞` for an empty set.
pub fn distance_to_arcs(p: &SpherePoint, arcs: &[Arc]) -> f64 {
    arcs.iter().map(|a| a.distance_to(p)).fold(f64::INFINITY, f64::min)
}

/// `Ĩ_i`: a tile plus every tile touching it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    pub center_index: usize,
    pub member_indices: BTreeSet<usize>,
}

impl Patch {
    pub fn contains(&self, index: usize) -> bool {
        self.member_indices.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }
}

/// A boundary piece shared by exactly two tiles.
#[derive(Clone, Copy, Debug)]
struct Edge {
    arc: Arc,
    tiles: (usize, usize),
}

/// The tessellation `T(k)`.
#[derive(Clone, Debug)]
pub struct Tessellation {
    k: u32,
    tiles: Vec<Tile>,
    adjacency: Vec<BTreeSet<usize>>,
    edges: Vec<Edge>,
    cells: HashMap<(i32, u32), usize>,
}

/// Grid vertex: (parallel index `l`, meridian index `m`).
type Vertex = (i32, u32);

impl Tessellation {
    /// Builds `T(k)` with `2(4k² + 2k + 1)` tiles.
    ///
    /// Numbering: tile 1 is the cell `(row 0, col 2)`; then the remaining
    /// cells of its 3×3 block, then the rest of the 5×5 block around it,
    /// each row-major; then every other cell row-major; the north and
    /// south caps come last.
    pub fn new(k: u32) -> Result<Self, GeometryError> {
        if k == 0 {
            return Err(GeometryError::ZeroOrder);
        }
        let ki = k as i32;
        let step = PI / f64::from(2 * k + 1);
        let cols = 2 * (2 * k + 1);
        let parallel = |l: i32| FRAC_PI_2 + f64::from(l) * step;
        let meridian = |m: u32| f64::from(m) * step;

        let all_cells: Vec<(i32, u32)> =
            (-ki + 1..=ki).flat_map(|l| (0..cols).map(move |m| (l, m))).collect();
        let in_block = |c: &(i32, u32), r: i32| c.0.abs() <= r && (i64::from(c.1) - 2).abs() <= i64::from(r);
        let mut order: Vec<(i32, u32)> = vec![(0, 2)];
        for radius in [1, 2] {
            order.extend(all_cells.iter().filter(|c| in_block(c, radius) && !order.contains(c)).copied().collect::<Vec<_>>());
        }
        order.extend(all_cells.iter().filter(|c| !in_block(c, 2)).copied());

        let mut tiles = Vec::with_capacity(order.len() + 2);
        let mut cells = HashMap::with_capacity(order.len());
        for (i, &(l, m)) in order.iter().enumerate() {
            let index = i + 1;
            tiles.push(Tile::cell(index, l, m, (parallel(l - 1), parallel(l)), (meridian(m), meridian(m + 1))));
            cells.insert((l, m), index);
        }
        let cap_radius = parallel(-ki);
        let north = tiles.len() + 1;
        tiles.push(Tile::polar_cap(north, Pole::North, cap_radius));
        let south = tiles.len() + 1;
        tiles.push(Tile::polar_cap(south, Pole::South, cap_radius));

        let mut edges = Vec::new();
        for &(l, m) in &all_cells {
            let here = cells[&(l, m)];
            edges.push(Edge {
                arc: Arc::Meridian { phi: meridian(m + 1), theta_lo: parallel(l - 1), theta_hi: parallel(l) },
                tiles: (here, cells[&(l, (m + 1) % cols)]),
            });
            let below = if l < ki { cells[&(l + 1, m)] } else { south };
            edges.push(Edge {
                arc: Arc::Parallel { theta: parallel(l), phi_lo: meridian(m), phi_hi: meridian(m + 1) },
                tiles: (here, below),
            });
            if l == -ki + 1 {
                edges.push(Edge {
                    arc: Arc::Parallel { theta: parallel(-ki), phi_lo: meridian(m), phi_hi: meridian(m + 1) },
                    tiles: (north, here),
                });
            }
        }

        // Tiles are adjacent when they share at least one grid vertex.
        let mut touching: BTreeMap<Vertex, Vec<usize>> = BTreeMap::new();
        for &(l, m) in &all_cells {
            let here = cells[&(l, m)];
            for v in [(l - 1, m), (l - 1, (m + 1) % cols), (l, m), (l, (m + 1) % cols)] {
                touching.entry(v).or_default().push(here);
            }
        }
        for m in 0..cols {
            touching.entry((-ki, m)).or_default().push(north);
            touching.entry((ki, m)).or_default().push(south);
        }
        let mut adjacency = vec![BTreeSet::new(); tiles.len()];
        for group in touching.values() {
            for &a in group {
                for &b in group {
                    if a != b {
                        adjacency[a - 1].insert(b);
                    }
                }
            }
        }

        Ok(Self { k, tiles, adjacency, edges, cells })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of tiles `L`.
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// The angular step `Δ = π/(2k+1)`.
    pub fn step(&self) -> f64 {
        PI / f64::from(2 * self.k + 1)
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn tile(&self, index: usize) -> Result<&Tile, GeometryError> {
        index
            .checked_sub(1)
            .and_then(|i| self.tiles.get(i))
            .ok_or(GeometryError::UnknownTile(index))
    }

    pub fn cell_index(&self, row: i32, col: u32) -> Option<usize> {
        self.cells.get(&(row, col)).copied()
    }

    pub fn north_cap_index(&self) -> usize {
        self.tiles.len() - 1
    }

    pub fn south_cap_index(&self) -> usize {
        self.tiles.len()
    }

    pub fn neighbors(&self, index: usize) -> Result<&BTreeSet<usize>, GeometryError> {
        self.tile(index)?;
        Ok(&self.adjacency[index - 1])
    }

    pub fn patch(&self, index: usize) -> Result<Patch, GeometryError> {
        let mut member_indices = self.neighbors(index)?.clone();
        member_indices.insert(index);
        Ok(Patch { center_index: index, member_indices })
    }

    /// Index of the tile containing `p`; points on shared boundaries go to
    /// the lowest index among the touching tiles.
    pub fn locate(&self, p: &SpherePoint) -> usize {
        self.tiles
            .iter()
            .find(|t| t.contains_with_tolerance(p, BOUNDARY_TOLERANCE))
            .map(Tile::index)
            .expect("tiles cover the sphere")
    }

    /// Arcs of `∂I_i`.
    pub fn tile_boundary(&self, index: usize) -> Result<Vec<Arc>, GeometryError> {
        self.tile(index)?;
        Ok(self
            .edges
            .iter()
            .filter(|e| e.tiles.0 == index || e.tiles.1 == index)
            .map(|e| e.arc)
            .collect())
    }

    /// Arcs separating the patch from the rest of the sphere.
    pub fn patch_boundary(&self, patch: &Patch) -> Vec<Arc> {
        self.edges
            .iter()
            .filter(|e| patch.contains(e.tiles.0) != patch.contains(e.tiles.1))
            .map(|e| e.arc)
            .collect()
    }

    /// Radius of the largest circle around a sampled point that fits in its
    /// tile, minimised over tiles. Equals `arcsin(sin(Δ/2) sin Δ)` for `T(k)`.
    pub fn inscribed_delta(&self) -> f64 {
        self.tiles
            .iter()
            .map(|t| t.boundary_distance(&t.sampled_point))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest distance between `∂I_i` and `∂Ĩ_i`.
    pub fn boundary_gap(&self, index: usize) -> Result<f64, GeometryError> {
        let own = self.tile_boundary(index)?;
        let outer = self.patch_boundary(&self.patch(index)?);
        if outer.is_empty() {
            return Ok(f64::INFINITY);
        }
        Ok(own
            .iter()
            .map(|arc| minimise_along(arc, |p| distance_to_arcs(p, &outer)))
            .fold(f64::INFINITY, f64::min))
    }

    /// The stricter resolution: the inscribed radius or the smallest
    /// tile-to-patch boundary gap, whichever is smaller.
    pub fn strict_delta(&self) -> f64 {
        (1..=self.len())
            .map(|i| self.boundary_gap(i).expect("index in range"))
            .fold(self.inscribed_delta(), f64::min)
    }

    pub fn to_document(&self) -> TessellationDocument {
        let tiles = self
            .tiles
            .iter()
            .map(|t| {
                let (kind, row, col) = match t.kind {
                    TileKind::PolarCap { pole: Pole::North, .. } => ("north_cap", None, None),
                    TileKind::PolarCap { pole: Pole::South, .. } => ("south_cap", None, None),
                    TileKind::Cell { row, col, .. } => ("cell", Some(row), Some(col)),
                };
                let (t0, t1) = t.theta_range();
                let (p0, p1) = t.phi_range();
                TileRecord {
                    index: t.index,
                    kind,
                    row,
                    col,
                    theta_range: [sig15(t0), sig15(t1)],
                    phi_range: [sig15(p0), sig15(p1)],
                    sampled_point: PointRecord {
                        theta: sig15(t.sampled_point.theta),
                        phi: sig15(t.sampled_point.phi),
                    },
                }
            })
            .collect();
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .map(|(i, n)| ((i + 1).to_string(), n.iter().copied().collect()))
            .collect();
        TessellationDocument {
            k: self.k,
            tile_count: self.len(),
            delta_inscribed: sig15(self.inscribed_delta()),
            tiles,
            adjacency,
        }
    }
}

/// Minimises `f` along an arc: uniform sampling, golden-section polish around
/// the best sample, and doubling of the sample count until the minimum moves
/// by less than [`GAP_TOLERANCE`].
fn minimise_along<F: Fn(&SpherePoint) -> f64>(arc: &Arc, f: F) -> f64 {
    let g = |t: f64| f(&arc.point_at(t));
    let mut samples = 16usize;
    let mut previous = f64::INFINITY;
    loop {
        let (best_j, best) = (0..=samples)
            .map(|j| (j, g(j as f64 / samples as f64)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let h = 1.0 / samples as f64;
        let lo = (best_j as f64 - 1.0).max(0.0) * h;
        let hi = (best_j as f64 + 1.0).min(samples as f64) * h;
        let polished = golden_section(&g, lo, hi, 1e-10).min(best);
        if (previous - polished).abs() < GAP_TOLERANCE || samples >= 1 << 16 {
            return polished.min(previous);
        }
        previous = polished;
        samples *= 2;
    }
}

fn golden_section<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > tol {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - ratio * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + ratio * (b - a);
            gd = g(d);
        }
    }
    gc.min(gd)
}

/// Rounds to 15 significant digits.
fn sig15(x: f64) -> f64 {
    format!("{x:.14e}").parse().expect("formatted float parses")
}

#[derive(Debug, Serialize)]
pub struct PointRecord {
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Serialize)]
pub struct TileRecord {
    pub index: usize,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col: Option<u32>,
    pub theta_range: [f64; 2],
    pub phi_range: [f64; 2],
    pub sampled_point: PointRecord,
}

/// JSON export of a tessellation.
#[derive(Debug, Serialize)]
pub struct TessellationDocument {
    pub k: u32,
    #[serde(rename = "L")]
    pub tile_count: usize,
    pub delta_inscribed: f64,
    pub tiles: Vec<TileRecord>,
    pub adjacency: BTreeMap<String, Vec<usize>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(theta: f64, phi: f64) -> SpherePoint {
        SpherePoint::new(theta, phi).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_abs_diff_eq!(geodesic_distance(&pt(0.0, 0.0), &pt(PI / 3.0, 0.0)), PI / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(geodesic_distance(&pt(FRAC_PI_2, 0.0), &pt(FRAC_PI_2, FRAC_PI_2)), FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(geodesic_distance(&pt(0.0, 0.0), &pt(0.0, 1.3)), 0.0);
    }

    #[test]
    fn points_are_canonical() {
        assert_eq!(pt(0.0, 2.0).phi(), 0.0);
        assert_eq!(pt(PI, -1.0).phi(), 0.0);
        assert_abs_diff_eq!(pt(1.0, -0.5).phi(), TAU - 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pt(1.0, 7.0).phi(), 7.0 - TAU, epsilon = 1e-15);
        assert!(pt(1.0, -1e-300).phi() < TAU);
        assert!(SpherePoint::new(3.2, 0.0).is_err());
        assert!(SpherePoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn tile_counts() {
        assert_eq!(Tessellation::new(1).unwrap().len(), 14);
        assert_eq!(Tessellation::new(4).unwrap().len(), 146);
        assert_eq!(Tessellation::new(0).unwrap_err(), GeometryError::ZeroOrder);
    }

    #[test]
    fn first_tile_matches_reference_point() {
        let t = Tessellation::new(4).unwrap();
        let first = t.tile(1).unwrap();
        assert!(matches!(first.kind(), TileKind::Cell { row: 0, col: 2, .. }));
        let s = first.sampled_point();
        assert_abs_diff_eq!(s.theta(), 4.0 * PI / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.phi(), 5.0 * PI / 18.0, epsilon = 1e-15);
        match t.tile(t.north_cap_index()).unwrap().kind() {
            TileKind::PolarCap { pole: Pole::North, radius } => assert_abs_diff_eq!(*radius, PI / 18.0, epsilon = 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_numbering() {
        let t = Tessellation::new(4).unwrap();
        let patch = t.patch(1).unwrap();
        assert_eq!(patch.member_indices, (1..=9).collect());
        for i in 10..=25 {
            match t.tile(i).unwrap().kind() {
                TileKind::Cell { row, col, .. } => assert!(row.abs() <= 2 && (*col as i64 - 2).abs() <= 2),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn inscribed_delta_closed_form() {
        for k in 1..=6 {
            let t = Tessellation::new(k).unwrap();
            let d = t.step();
            assert_abs_diff_eq!(t.inscribed_delta(), ((d / 2.0).sin() * d.sin()).asin(), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(Tessellation::new(4).unwrap().inscribed_delta(), 0.059426145347819, epsilon = 1e-12);
        assert_abs_diff_eq!(Tessellation::new(2).unwrap().inscribed_delta(), 0.182649496075998, epsilon = 1e-12);
        assert_abs_diff_eq!(Tessellation::new(1).unwrap().inscribed_delta(), 0.447832396928932, epsilon = 1e-12);
    }

    #[test]
    fn strict_delta_not_above_inscribed() {
        for k in 1..=5 {
            let t = Tessellation::new(k).unwrap();
            assert!(t.strict_delta() <= t.inscribed_delta());
        }
    }

    #[test]
    fn cap_patch_gap_is_one_step() {
        let t = Tessellation::new(4).unwrap();
        let gap = t.boundary_gap(t.north_cap_index()).unwrap();
        assert_abs_diff_eq!(gap, t.step(), epsilon = 1e-9);
    }

    #[test]
    fn patch_sizes() {
        let t = Tessellation::new(4).unwrap();
        assert_eq!(t.patch(1).unwrap().len(), 9);
        assert_eq!(t.patch(t.north_cap_index()).unwrap().len(), 19);
        assert_eq!(t.patch(t.south_cap_index()).unwrap().len(), 19);
        assert_eq!(t.patch(999).unwrap_err(), GeometryError::UnknownTile(999));
        assert_eq!(t.patch(0).unwrap_err(), GeometryError::UnknownTile(0));
    }

    #[test]
    fn locate_examples() {
        let t = Tessellation::new(4).unwrap();
        assert_eq!(t.locate(&pt(4.0 * PI / 9.0, 5.0 * PI / 18.0)), 1);
        assert_eq!(t.locate(&pt(0.0, 0.0)), t.north_cap_index());
        assert_eq!(t.locate(&pt(PI, 0.0)), t.south_cap_index());
        // Meridian between tile 1 (col 2) and its col-3 neighbour.
        let on_meridian = pt(4.0 * PI / 9.0, 3.0 * t.step());
        let right = t.cell_index(0, 3).unwrap();
        assert_eq!(t.locate(&on_meridian), 1.min(right));
        // Corner shared by four cells.
        let corner = pt(FRAC_PI_2 - t.step(), 2.0 * t.step());
        let touching = [(0, 1), (0, 2), (-1, 1), (-1, 2)].map(|(l, m)| t.cell_index(l, m).unwrap());
        assert_eq!(t.locate(&corner), *touching.iter().min().unwrap());
    }

    #[test]
    fn arc_distance_matches_sampling() {
        let arcs = [
            Arc::Meridian { phi: 0.7, theta_lo: 0.3, theta_hi: 1.1 },
            Arc::Parallel { theta: 0.4, phi_lo: 6.0, phi_hi: 6.0 + 0.9 },
        ];
        let probes = [pt(0.1, 0.2), pt(1.5, 0.75), pt(0.35, 3.0), pt(2.9, 6.2), pt(0.5, 0.5)];
        for arc in &arcs {
            for p in &probes {
                let brute = (0..=20_000)
                    .map(|j| geodesic_distance(p, &arc.point_at(j as f64 / 20_000.0)))
                    .fold(f64::INFINITY, f64::min);
                let exact = arc.distance_to(p);
                assert!(exact <= brute + 1e-12);
                assert_abs_diff_eq!(exact, brute, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn json_document_shape() {
        let t = Tessellation::new(1).unwrap();
        let doc = serde_json::to_value(t.to_document()).unwrap();
        assert_eq!(doc["L"], 14);
        assert_eq!(doc["tiles"].as_array().unwrap().len(), 14);
        assert_eq!(doc["tiles"][0]["index"], 1);
        assert_eq!(doc["tiles"][13]["kind"], "south_cap");
        assert!(doc["adjacency"]["1"].as_array().unwrap().len() >= 3);
    }
}
