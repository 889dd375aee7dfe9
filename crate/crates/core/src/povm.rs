//! The coherent-state discrimination POVM: each tile `I_i` of a tessellation
//! defines an effect, and the probability of outcome `m_i` for the state
//! `|Σ⟩` is the Husimi function of `|Σ⟩` integrated over `I_i` with the
//! measure `(2J+1)/(4π) sin θ dθ dφ`.
//!
//! In truncated mode only the part of each tile inside the ε-support cap
//! of `|Σ⟩` counts; the probability left outside every cap is the null
//! outcome, `p(null) = ε^{2+1/J}`.
//!
//! Two integration routes are available. [`Route::Nested`] is adaptive
//! Gauss–Kronrod in `θ` outside and `φ` inside; the cap mask enters as
//! analytically clipped `φ` limits. [`Route::CapCentered`] works in polar
//! coordinates centred on `Σ`, where the radial integral has the closed
//! form `∫ cos^{4J}(Θ/2) sin Θ dΘ = −2 cos^{4J+2}(Θ/2)/(2J+1)`, leaving a
//! 1-D adaptive integral over the ray direction. [`Route::Auto`] uses the
//! second one for `2J > 1000`, where the Husimi function is too sharp for
//! the nested rule to be efficient.

use std::cell::Cell;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::gcs::{epsilon_support_radius, measure_density, pow_log, Epsilon, Spin, SpinEnsemble};
use crate::geometry::{cross, dot, GeometryError, SpherePoint, Tessellation, Tile};
use crate::quadrature::{integrate_with_breaks, QuadratureError, Tolerance};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// `2J` above which [`Route::Auto`] switches to the cap-centred route.
pub const SHARP_PEAK_TWICE_SPIN: u32 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PovmError {
    #[error("integration over tile {tile} failed: {source}")]
    Quadrature {
        tile: usize,
        #[source]
        source: QuadratureError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("quadrature tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("mask radius must lie in (0, π], got {0}")]
    InvalidMask(f64),
    #[error("malformed probability table: {0}")]
    MalformedTable(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Exact,
    Truncated(Epsilon),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Exact => write!(f, "exact"),
            Mode::Truncated(_) => write!(f, "truncated"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Auto,
    Nested,
    CapCentered,
}

/// `(2J+1)/(4π) ∫_{tile ∩ cap(σ, mask)} cos^{4J}(Θ/2) sin θ dθ dφ`.
pub fn integrate_husimi_over_region(
    spin: Spin,
    sigma: &SpherePoint,
    tile: &Tile,
    mask_radius: Option<f64>,
    tol: f64,
) -> Result<f64, PovmError> {
    integrate_husimi_over_region_via(spin, sigma, tile, mask_radius, tol, Route::Auto)
}

pub fn integrate_husimi_over_region_via(
    spin: Spin,
    sigma: &SpherePoint,
    tile: &Tile,
    mask_radius: Option<f64>,
    tol: f64,
    route: Route,
) -> Result<f64, PovmError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(PovmError::InvalidTolerance(tol));
    }
    if let Some(r) = mask_radius {
        if !(r > 0.0 && r <= PI) {
            return Err(PovmError::InvalidMask(r));
        }
        if tile.distance_to(sigma) >= r {
            return Ok(0.0);
        }
    }
    let route = match route {
        Route::Auto if spin.twice() > SHARP_PEAK_TWICE_SPIN => Route::CapCentered,
        Route::Auto => Route::Nested,
        other => other,
    };
    let result = match route {
        Route::CapCentered => cap_centered(spin, sigma, tile, mask_radius, tol),
        _ => nested(spin, sigma, tile, mask_radius, tol),
    };
    result.map_err(|source| PovmError::Quadrature { tile: tile.index(), source })
}

/// Longitude intervals of `[lo, hi]` where `a + b sin²((φ − center)/2) ≤ h`.
fn clipped_longitudes(a: f64, b: f64, h: f64, center: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    if b <= 1e-300 {
        return if a <= h { vec![(lo, hi)] } else { Vec::new() };
    }
    let s = (h - a) / b;
    if s < 0.0 {
        return Vec::new();
    }
    if s >= 1.0 {
        return vec![(lo, hi)];
    }
    let w = 2.0 * s.sqrt().asin();
    [-TAU, 0.0, TAU]
        .iter()
        .filter_map(|shift| {
            let (l, r) = ((center + shift - w).max(lo), (center + shift + w).min(hi));
            (r > l).then_some((l, r))
        })
        .collect()
}

fn nested(spin: Spin, sigma: &SpherePoint, tile: &Tile, mask: Option<f64>, tol: f64) -> Result<f64, QuadratureError> {
    let power = f64::from(spin.twice());
    let density = measure_density(spin);
    let (ts, ps) = (sigma.theta(), sigma.phi());
    let sin_ts = ts.sin();
    let (t0, t1) = tile.theta_range();
    let (p0, p1) = tile.phi_range();
    let cap_hav = mask.map(|r| (0.5 * r).sin().powi(2));
    let inner_tol = Tolerance { rel: 0.1 * tol, abs: 1e-18, max_panels: 2000 };
    let outer_tol = Tolerance { rel: tol, abs: 1e-15 / density, max_panels: 4000 };
    let failure = Cell::new(None);

    let outer = |theta: f64| -> f64 {
        let st = theta.sin();
        // haversine of the distance to σ: a + b sin²((φ − φσ)/2)
        let a = (0.5 * (theta - ts)).sin().powi(2);
        let b = st * sin_ts;
        let windows = match cap_hav {
            None => vec![(p0, p1)],
            Some(h) => clipped_longitudes(a, b, h, ps, p0, p1),
        };
        let husimi = |phi: f64| pow_log(1.0 - (a + b * (0.5 * (phi - ps)).sin().powi(2)), power);
        let mut total = 0.0;
        for (lo, hi) in windows {
            match integrate_with_breaks(husimi, lo, hi, &[ps - TAU, ps, ps + TAU], inner_tol) {
                Ok(r) => total += r.value,
                Err(e) => {
                    failure.set(Some(e));
                    return 0.0;
                }
            }
        }
        total * st
    };

    let mut breaks = vec![ts];
    if let Some(r) = mask {
        breaks.extend([ts - r, ts + r]);
    }
    let r = integrate_with_breaks(outer, t0, t1, &breaks, outer_tol)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(density * r.value)
}

/// Roots `x ∈ (0, limit)` of `a cos x + b sin x = c`.
fn trig_roots(a: f64, b: f64, c: f64, limit: f64, out: &mut Vec<f64>) {
    let amplitude = a.hypot(b);
    if amplitude < 1e-300 || c.abs() > amplitude {
        return;
    }
    let phase = b.atan2(a);
    let spread = (c / amplitude).clamp(-1.0, 1.0).acos();
    for x in [phase - spread, phase + spread] {
        let x = x.rem_euclid(TAU);
        if x > 0.0 && x < limit {
            out.push(x);
        }
    }
}

fn cap_centered(spin: Spin, sigma: &SpherePoint, tile: &Tile, mask: Option<f64>, tol: f64) -> Result<f64, QuadratureError> {
    let limit = mask.unwrap_or(PI);
    let exponent = f64::from(spin.twice()) + 1.0;
    let tail = |x: f64| {
        let c = (0.5 * x).cos();
        pow_log(c * c, exponent)
    };

    let center = sigma.to_vector();
    let (st, ct) = sigma.theta().sin_cos();
    let (sp, cp) = sigma.phi().sin_cos();
    let e1 = [ct * cp, ct * sp, -st];
    let e2 = cross(center, e1);

    // Each boundary arc lies on a set {P : P·normal = level}.
    let constraints: Vec<([f64; 3], f64)> = tile
        .boundary()
        .iter()
        .map(|arc| match *arc {
            crate::geometry::Arc::Parallel { theta, .. } => ([0.0, 0.0, 1.0], theta.cos()),
            crate::geometry::Arc::Meridian { phi, .. } => ([-phi.sin(), phi.cos(), 0.0], 0.0),
        })
        .collect();

    let mut crossings = Vec::with_capacity(2 * constraints.len() + 2);
    let mut radial = |psi: f64| -> f64 {
        let (s, c) = psi.sin_cos();
        let dir = [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]];
        crossings.clear();
        crossings.push(0.0);
        for (normal, level) in &constraints {
            trig_roots(dot(center, *normal), dot(dir, *normal), *level, limit, &mut crossings);
        }
        crossings.push(limit);
        crossings.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in crossings.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let (sm, cm) = (0.5 * (w[0] + w[1])).sin_cos();
            let p = [cm * center[0] + sm * dir[0], cm * center[1] + sm * dir[1], cm * center[2] + sm * dir[2]];
            let inside = SpherePoint::from_vector(p).map(|q| tile.contains(&q)).unwrap_or(false);
            if inside {
                total += tail(w[0]) - tail(w[1]);
            }
        }
        total
    };

    let breaks: Vec<f64> = tile
        .vertices()
        .iter()
        .map(|v| {
            let v = v.to_vector();
            dot(v, e2).atan2(dot(v, e1)).rem_euclid(TAU)
        })
        .collect();
    let tol = Tolerance { rel: tol, abs: 1e-15 * TAU, max_panels: 4000 };
    let r = integrate_with_breaks(&mut radial, 0.0, TAU, &breaks, tol)?;
    Ok(r.value / TAU)
}

/// Born-rule probability of outcome `m_i`.
pub fn effect_probability_exact(
    spin: Spin,
    sigma: &SpherePoint,
    tess: &Tessellation,
    index: usize,
    tol: f64,
) -> Result<f64, PovmError> {
    integrate_husimi_over_region(spin, sigma, tess.tile(index)?, None, tol)
}

/// Probability of `m_i` with overlaps below ε treated as zero.
pub fn effect_probability_truncated(
    spin: Spin,
    sigma: &SpherePoint,
    epsilon: Epsilon,
    tess: &Tessellation,
    index: usize,
    tol: f64,
) -> Result<f64, PovmError> {
    let radius = epsilon_support_radius(spin, epsilon);
    integrate_husimi_over_region(spin, sigma, tess.tile(index)?, Some(radius), tol)
}

/// `ε^{2+1/J}`, the weight of the Husimi function outside its ε-support cap.
/// Zero for `J = 0`, whose support is the whole sphere.
pub fn p_null_closed(spin: Spin, epsilon: Epsilon) -> f64 {
    if spin.twice() == 0 {
        return 0.0;
    }
    epsilon.value().powf(2.0 + 2.0 / f64::from(spin.twice()))
}

/// A complete set of outcome probabilities for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    pub ensemble: SpinEnsemble,
    pub state: SpherePoint,
    pub k: u32,
    pub mode: Mode,
    pub tolerance: f64,
    /// `entries[i - 1]` is the probability of outcome `m_i`.
    pub entries: Vec<f64>,
    pub p_null: f64,
}

impl ProbabilityTable {
    pub fn entry(&self, index: usize) -> Option<f64> {
        index.checked_sub(1).and_then(|i| self.entries.get(i)).copied()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum::<f64>() + self.p_null
    }

    pub fn weights(&self) -> OutcomeWeights {
        OutcomeWeights {
            entries: self.entries.iter().enumerate().map(|(i, &p)| (i + 1, p)).collect(),
            p_null: self.p_null,
        }
    }

    /// Writes the table as CSV. `rows` limits the tile rows to indices
    /// `1..=rows`; the null row is always written.
    pub fn write_csv<W: Write>(&self, mut w: W, seed: Option<u64>, rows: Option<usize>) -> io::Result<()> {
        writeln!(w, "# povm probability table")?;
        writeln!(w, "# J={}", self.ensemble.spin())?;
        writeln!(w, "# N={}", self.ensemble.size())?;
        writeln!(w, "# n={}", self.ensemble.reduction())?;
        match self.mode {
            Mode::Exact => writeln!(w, "# epsilon=none")?,
            Mode::Truncated(eps) => writeln!(w, "# epsilon={}", eps.value())?,
        }
        writeln!(w, "# mode={}", self.mode)?;
        writeln!(w, "# quadrature_tol={:e}", self.tolerance)?;
        match seed {
            Some(s) => writeln!(w, "# seed={s}")?,
            None => writeln!(w, "# seed=none")?,
        }
        writeln!(w, "# k={}", self.k)?;
        writeln!(w, "# sigma={},{}", self.state.theta(), self.state.phi())?;
        let shown = rows.unwrap_or(self.entries.len()).min(self.entries.len());
        writeln!(w, "# rows={shown}/{}", self.entries.len())?;
        writeln!(w, "tile_index,p")?;
        for (i, p) in self.entries.iter().take(shown).enumerate() {
            writeln!(w, "{},{:e}", i + 1, p)?;
        }
        writeln!(w, "NULL,{:e}", self.p_null)
    }
}

/// Assembles the table. Tiles are integrated in parallel; the results are
/// collected in index order, so the output does not depend on scheduling.
pub fn probability_table(
    ensemble: &SpinEnsemble,
    sigma: &SpherePoint,
    tess: &Tessellation,
    mode: Mode,
    tol: f64,
) -> Result<ProbabilityTable, PovmError> {
    let spin = ensemble.spin();
    let mask = match mode {
        Mode::Exact => None,
        Mode::Truncated(eps) => Some(epsilon_support_radius(spin, eps)),
    };
    let entries = tess
        .tiles()
        .par_iter()
        .map(|tile| integrate_husimi_over_region(spin, sigma, tile, mask, tol))
        .collect::<Result<Vec<f64>, PovmError>>()?;
    let p_null = match mode {
        Mode::Exact => 0.0,
        Mode::Truncated(eps) => p_null_closed(spin, eps),
    };
    Ok(ProbabilityTable { ensemble: *ensemble, state: *sigma, k: tess.k(), mode, tolerance: tol, entries, p_null })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Tile(usize),
    Null,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Tile(i) => write!(f, "{i}"),
            Outcome::Null => write!(f, "NULL"),
        }
    }
}

/// Categorical distribution over tile outcomes and the null outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeWeights {
    pub entries: Vec<(usize, f64)>,
    pub p_null: f64,
}

impl OutcomeWeights {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum::<f64>() + self.p_null
    }

    /// Draws one outcome; weights are normalised by their total.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Outcome {
        let u = rng.random::<f64>() * self.total();
        let mut acc = 0.0;
        for &(index, p) in &self.entries {
            acc += p;
            if u < acc {
                return Outcome::Tile(index);
            }
        }
        if self.p_null > 0.0 {
            return Outcome::Null;
        }
        // u landed in the rounding gap at the top: take the last nonzero entry.
        self.entries
            .iter()
            .rev()
            .find(|e| e.1 > 0.0)
            .map(|e| Outcome::Tile(e.0))
            .unwrap_or(Outcome::Null)
    }

    /// `shots` outcomes from a single ChaCha8 stream seeded with `seed`.
    pub fn sample_many(&self, seed: u64, shots: usize) -> Vec<Outcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..shots).map(|_| self.sample(&mut rng)).collect()
    }

    /// Reads a table written by [`ProbabilityTable::write_csv`].
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self, PovmError> {
        let bad = |msg: String| PovmError::MalformedTable(msg);
        let mut entries = Vec::new();
        let mut p_null = 0.0;
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "tile_index,p" {
                continue;
            }
            let (key, value) = line.split_once(',').ok_or_else(|| bad(format!("line {}: expected two columns", n + 1)))?;
            let p: f64 = value.trim().parse().map_err(|_| bad(format!("line {}: bad probability {value:?}", n + 1)))?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(bad(format!("line {}: probability must be non-negative", n + 1)));
            }
            if key.trim() == "NULL" {
                p_null = p;
            } else {
                let index = key.trim().parse().map_err(|_| bad(format!("line {}: bad tile index {key:?}", n + 1)))?;
                entries.push((index, p));
            }
        }
        let weights = Self { entries, p_null };
        if weights.total() <= 0.0 {
            return Err(bad("table has no probability mass".into()));
        }
        Ok(weights)
    }
}

/// One draw from `table`, deterministic in `seed`.
pub fn sample_outcome(table: &ProbabilityTable, seed: u64) -> Outcome {
    table.weights().sample_many(seed, 1)[0]
}
