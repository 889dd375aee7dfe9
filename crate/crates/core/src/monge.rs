//! Monge distances between su(2) coherent states.
//!
//! The closed form reduces the optimal transport between two Husimi
//! densities a geodesic distance `θ` apart to
//! `d_M(J; θ) = π sin(θ/2) W_J(sin²(θ/2))`, a finite double sum over
//! `u + v ≤ (2J − 1)/2` whose coefficients involve the slowly convergent
//! series `A(u, v)`. Two independent routes back it up: the 1-D Salvemini
//! formula `∫|Q₁ − Q₂|` and an exact discrete transport solver.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::gcs::{measure_density, Spin};
use crate::geometry::{dot, geodesic_distance, SpherePoint};
use crate::quadrature::{integrate_with_breaks, QuadratureError, Tolerance};

pub const DEFAULT_SERIES_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MongeError {
    #[error("theta must lie in [0, π], got {0}")]
    ThetaOutOfRange(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("transport is infeasible: total masses {supply} and {demand} differ")]
    Infeasible { supply: f64, demand: f64 },
    #[error("masses must be finite and non-negative")]
    InvalidMass,
    #[error("cost matrix is {rows}×{cols}, expected {expected_rows}×{expected_cols}")]
    ShapeMismatch { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("costs must be finite and non-negative")]
    InvalidCost,
    #[error("the difference of the two distributions is not integrable")]
    Divergent,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("transport grid needs at least two colatitude bands, got {0}")]
    InvalidGrid(usize),
}

fn check_theta(theta: f64) -> Result<(), MongeError> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(MongeError::ThetaOutOfRange(theta))
    }
}

fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// `C(2s, s)/4^s` for `s = 0..=last`.
fn central_ratios(last: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(last + 1);
    let mut c = 1.0;
    for s in 0..=last {
        out.push(c);
        c *= (2 * s + 1) as f64 / (2 * s + 2) as f64;
    }
    out
}

/// `Σ_{s>last} C(2s,s)/((u+s+1)4^s)`, from `C(2s,s)/4^s ≈ (πs)^{-1/2}(1 − 1/(8s))`
/// integrated from `last + 1/2`. The error decays like `last^{-5/2}`.
fn a_tail(u: u32, last: u64) -> f64 {
    let a = f64::from(u) + 1.0;
    let x = last as f64 + 0.5;
    let i1 = 2.0 / a.sqrt() * (a / x).sqrt().atan();
    let i3 = (2.0 / x.sqrt() - i1) / a;
    (i1 - i3 / 8.0) / PI.sqrt()
}

/// Number of explicit terms after which [`a_tail`] is accurate to `tol`.
fn a_cutoff(v: u32, tol: f64) -> u64 {
    let needed = (0.05 / tol).powf(0.4).ceil();
    u64::from(v).max(needed.min(1e9) as u64)
}

/// `A(u, v) = Σ_{s=v+1}^∞ C(2s, s)/((u + s + 1) 4^s)`.
pub fn a_series(u: u32, v: u32, tol: f64) -> Result<f64, MongeError> {
    if !(tol > 0.0) {
        return Err(MongeError::InvalidTolerance(tol));
    }
    let last = a_cutoff(v, tol);
    let mut c = central_ratios(v as usize + 1)[v as usize + 1];
    let mut sum = 0.0;
    for s in u64::from(v) + 1..=last {
        sum += c / (f64::from(u) + s as f64 + 1.0);
        c *= (2 * s + 1) as f64 / (2 * s + 2) as f64;
    }
    Ok(sum + a_tail(u, last))
}

/// `A(u, 0..=max_v)` from one series evaluation and the recurrence
/// `A(u, v) = A(u, v − 1) − C(2v, v)/((u + v + 1) 4^v)`.
fn a_row(u: u32, max_v: usize, ratios: &[f64], tol: f64) -> Result<Vec<f64>, MongeError> {
    let mut row = Vec::with_capacity(max_v + 1);
    row.push(a_series(u, 0, tol)?);
    for v in 1..=max_v {
        let prev = row[v - 1];
        row.push(prev - ratios[v] / (f64::from(u) + v as f64 + 1.0));
    }
    Ok(row)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MongeEvaluation {
    pub spin: Spin,
    pub theta: f64,
    pub value: f64,
    pub series_tolerance: f64,
}

/// `W_J(x)` with `x = sin²(θ/2)` supplied together with `1 − x = cos²(θ/2)`.
fn w_j(spin: Spin, x: f64, one_minus_x: f64, tol: f64) -> Result<f64, MongeError> {
    let two_j = u64::from(spin.twice());
    if two_j == 0 {
        return Ok(0.0);
    }
    // 2J − 2(u+v) − 1 ≥ 0
    let max_total = ((two_j - 1) / 2) as usize;
    let ln4 = 4f64.ln();
    let prefactor = ((two_j + 1) as f64).ln() - (spin.value() + 1.0) * ln4;
    let ln_two_j = ln_factorial(two_j);
    let ratios = central_ratios(max_total);
    let ln_power = |base: f64, n: usize| if n == 0 { 0.0 } else { n as f64 * base.ln() };
    let mut total = 0.0;
    for u in 0..=max_total {
        let row = a_row(u as u32, max_total - u, &ratios, tol)?;
        for (v, a) in row.iter().enumerate() {
            let uv = (u + v) as u64;
            let ln_s = ln_two_j
                - ln_factorial(two_j - 2 * uv - 1)
                - ln_factorial(u as u64)
                - ln_factorial(v as u64)
                - ln_factorial(uv + 1)
                - uv as f64 * ln4;
            let ln_term = prefactor + ln_s + a.ln() + ln_power(x, u) + ln_power(one_minus_x, v);
            total += ln_term.exp();
        }
    }
    Ok(total)
}

/// Monge distance between `|Ω⟩` and `|Ω′⟩` at geodesic distance `θ`.
pub fn monge_su2(spin: Spin, theta: f64, tol: f64) -> Result<MongeEvaluation, MongeError> {
    check_theta(theta)?;
    if !(tol > 0.0) {
        return Err(MongeError::InvalidTolerance(tol));
    }
    let (s, c) = (0.5 * theta).sin_cos();
    let value = if s == 0.0 { 0.0 } else { PI * s * w_j(spin, s * s, c * c, tol)? };
    Ok(MongeEvaluation { spin, theta, value, series_tolerance: tol })
}

/// `lim_{J→∞} d_M(J; θ) = θ`.
pub fn monge_large_j_limit(theta: f64) -> Result<f64, MongeError> {
    check_theta(theta)?;
    Ok(theta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MongeBound {
    pub holds: bool,
    /// `d(a, b) − d_M`.
    pub margin: f64,
    pub monge: f64,
    pub geodesic: f64,
}

/// Checks `d_M(|a⟩, |b⟩) ≤ d(a, b)` up to `10⁻⁹`.
pub fn check_monge_bound(spin: Spin, a: &SpherePoint, b: &SpherePoint) -> Result<MongeBound, MongeError> {
    let geodesic = geodesic_distance(a, b);
    let monge = monge_su2(spin, geodesic, DEFAULT_SERIES_TOLERANCE)?.value;
    Ok(MongeBound { holds: monge <= geodesic + 1e-9, margin: geodesic - monge, monge, geodesic })
}

/// A cumulative distribution function on the real line.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;

    /// Smallest interval outside which the CDF is constant; ends may be infinite.
    fn support(&self) -> (f64, f64);

    /// Points where the CDF has a jump or kink.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Distribution of finitely many weighted atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCdf {
    positions: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepCdf {
    /// Masses are normalised by their total.
    pub fn new(points: &[f64], masses: &[f64]) -> Result<Self, MongeError> {
        if points.len() != masses.len() || points.is_empty() {
            return Err(MongeError::ShapeMismatch { rows: points.len(), cols: masses.len(), expected_rows: masses.len(), expected_cols: points.len() });
        }
        if points.iter().any(|x| !x.is_finite()) || masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(MongeError::InvalidMass);
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(MongeError::InvalidMass);
        }
        let mut atoms: Vec<(f64, f64)> = points.iter().copied().zip(masses.iter().copied()).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let (positions, cumulative) = atoms
            .into_iter()
            .map(|(x, m)| {
                acc += m / total;
                (x, acc)
            })
            .unzip();
        Ok(Self { positions, cumulative })
    }
}

impl Cdf for StepCdf {
    fn cdf(&self, x: f64) -> f64 {
        match self.positions.partition_point(|&p| p <= x) {
            0 => 0.0,
            n if n == self.positions.len() => 1.0,
            n => self.cumulative[n - 1],
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.positions[0], self.positions[self.positions.len() - 1])
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.positions.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformCdf {
    pub lo: f64,
    pub hi: f64,
}

impl Cdf for UniformCdf {
    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// A CDF given by a closure.
pub struct FnCdf<F> {
    pub f: F,
    pub support: (f64, f64),
    pub breaks: Vec<f64>,
}

impl<F: Fn(f64) -> f64> Cdf for FnCdf<F> {
    fn cdf(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn support(&self) -> (f64, f64) {
        self.support
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// One-dimensional transport distance `∫ |Q₁(x) − Q₂(x)| dx`.
pub fn salvemini(a: &dyn Cdf, b: &dyn Cdf, tol: f64) -> Result<f64, MongeError> {
    if !(tol > 0.0) {
        return Err(MongeError::InvalidTolerance(tol));
    }
    let diff = |x: f64| (a.cdf(x) - b.cdf(x)).abs();
    let (la, ha) = a.support();
    let (lb, hb) = b.support();
    let (lo, hi) = (la.min(lb), ha.max(hb));
    let mut breaks: Vec<f64> = a.breakpoints().into_iter().chain(b.breakpoints()).filter(|x| x.is_finite()).collect();
    breaks.extend([la, ha, lb, hb].into_iter().filter(|x| x.is_finite()));
    breaks.sort_by(f64::total_cmp);
    let (first, last) = match (breaks.first(), breaks.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => (-1.0, 1.0),
    };
    let tolerance = Tolerance { rel: tol, abs: 1e-14, max_panels: 4000 };
    let mut total = integrate_with_breaks(diff, first, last, &breaks, tolerance)?.value;

    // Infinite tails: x = edge ∓ t/(1 − t), t ∈ [0, 1).
    let tail = |edge: f64, sign: f64| -> Result<f64, MongeError> {
        let mapped = |t: f64| {
            let w = 1.0 - t;
            diff(edge + sign * t / w) / (w * w)
        };
        // Any quadrature failure here means the tail mass does not decay fast enough.
        integrate_with_breaks(mapped, 0.0, 1.0, &[], tolerance).map(|r| r.value).map_err(|_| MongeError::Divergent)
    };
    if lo == f64::NEG_INFINITY {
        total += tail(first, -1.0)?;
    }
    if hi == f64::INFINITY {
        total += tail(last, 1.0)?;
    }
    Ok(total)
}

/// Dense row-major cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// Exact optimal transport cost between two discrete distributions with
/// equal total mass, by the primal network simplex method.
pub fn kantorovich_oracle(mass_a: &[f64], mass_b: &[f64], cost: &CostMatrix) -> Result<f64, MongeError> {
    if cost.rows != mass_a.len() || cost.cols != mass_b.len() {
        return Err(MongeError::ShapeMismatch {
            rows: cost.rows,
            cols: cost.cols,
            expected_rows: mass_a.len(),
            expected_cols: mass_b.len(),
        });
    }
    if mass_a.iter().chain(mass_b).any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(MongeError::InvalidMass);
    }
    if cost.data.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(MongeError::InvalidCost);
    }
    let (supply, demand): (f64, f64) = (mass_a.iter().sum(), mass_b.iter().sum());
    if (supply - demand).abs() > 1e-9 * supply.max(demand).max(1.0) {
        return Err(MongeError::Infeasible { supply, demand });
    }
    let sources: Vec<usize> = (0..mass_a.len()).filter(|&i| mass_a[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..mass_b.len()).filter(|&j| mass_b[j] > 0.0).collect();
    if sources.is_empty() || sinks.is_empty() {
        return Ok(0.0);
    }
    let reduced = CostMatrix::from_fn(sources.len(), sinks.len(), |i, j| cost.get(sources[i], sinks[j]));
    let a: Vec<f64> = sources.iter().map(|&i| mass_a[i]).collect();
    let b: Vec<f64> = sinks.iter().map(|&j| mass_b[j]).collect();
    Ok(NetworkSimplex::new(&a, &b, &reduced).solve())
}

/// Spanning-tree simplex on the complete bipartite graph sources → sinks,
/// with an artificial root joined to every node. Leaving arcs are chosen by
/// the strongly feasible rule, which rules out cycling on degenerate pivots.
struct NetworkSimplex<'a> {
    n_sources: usize,
    n_sinks: usize,
    root: usize,
    cost: &'a CostMatrix,
    artificial_cost: f64,
    /// Real arcs `i * n_sinks + j`, then one artificial arc per node.
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `pred[u]` points from `u` to its parent.
    upward: Vec<bool>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    children: Vec<Vec<usize>>,
    next_arc: usize,
    block: usize,
    optimality_slack: f64,
}

impl<'a> NetworkSimplex<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a CostMatrix) -> Self {
        let (ns, nd) = (supply.len(), demand.len());
        let nodes = ns + nd;
        let real = ns * nd;
        let max_cost = cost.data.iter().copied().fold(0.0, f64::max);
        let artificial_cost = (max_cost + 1.0) * nodes as f64;
        let mut flow = vec![0.0; real + nodes];
        let mut upward = vec![false; nodes + 1];
        let mut potential = vec![0.0; nodes + 1];
        for u in 0..nodes {
            if u < ns {
                flow[real + u] = supply[u];
                upward[u] = true;
            } else {
                flow[real + u] = demand[u - ns];
                potential[u] = artificial_cost;
            }
        }
        let mut children = vec![Vec::new(); nodes + 1];
        children[nodes] = (0..nodes).collect();
        Self {
            n_sources: ns,
            n_sinks: nd,
            root: nodes,
            cost,
            artificial_cost,
            flow,
            in_tree: vec![false; real],
            parent: vec![nodes; nodes + 1],
            pred: (real..real + nodes).chain([usize::MAX]).collect(),
            upward,
            depth: (0..=nodes).map(|u| usize::from(u != nodes)).collect(),
            potential,
            children,
            next_arc: 0,
            block: ((real as f64).sqrt().ceil() as usize).max(10),
            optimality_slack: 1e-12 * max_cost.max(1.0),
        }
    }

    fn real_arcs(&self) -> usize {
        self.n_sources * self.n_sinks
    }

    fn ends(&self, arc: usize) -> (usize, usize) {
        let real = self.real_arcs();
        if arc < real {
            (arc / self.n_sinks, self.n_sources + arc % self.n_sinks)
        } else if arc - real < self.n_sources {
            (arc - real, self.root)
        } else {
            (self.root, arc - real)
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        let real = self.real_arcs();
        if arc < real {
            self.cost.data[arc]
        } else if arc - real < self.n_sources {
            0.0
        } else {
            self.artificial_cost
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        let (s, t) = self.ends(arc);
        self.cost.data[arc] + self.potential[s] - self.potential[t]
    }

    /// Block search: scan `block` arcs at a time from where the last scan
    /// stopped and take the most negative reduced cost of the first block
    /// that has one.
    fn entering_arc(&mut self) -> Option<usize> {
        let m = self.real_arcs();
        let mut best = -self.optimality_slack;
        let mut chosen = None;
        let mut count = 0;
        for step in 0..m {
            let arc = (self.next_arc + step) % m;
            if !self.in_tree[arc] {
                let rc = self.reduced_cost(arc);
                if rc < best {
                    best = rc;
                    chosen = Some(arc);
                }
            }
            count += 1;
            if count == self.block {
                if chosen.is_some() {
                    self.next_arc = (arc + 1) % m;
                    return chosen;
                }
                count = 0;
            }
        }
        chosen
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        u
    }

    fn detach(&mut self, child: usize) {
        let list = &mut self.children[self.parent[child]];
        let at = list.iter().position(|&c| c == child).expect("tree child lists are consistent");
        list.swap_remove(at);
    }

    fn pivot(&mut self, entering: usize) {
        let (source, target) = self.ends(entering);
        let join = self.join(source, target);

        // Flow moves source → target along the entering arc and back up the
        // tree; arcs carrying it against their orientation may leave.
        let mut delta = f64::INFINITY;
        let mut leaving_node = usize::MAX;
        let mut on_source_side = true;
        let mut u = source;
        while u != join {
            if self.upward[u] && self.flow[self.pred[u]] < delta {
                delta = self.flow[self.pred[u]];
                leaving_node = u;
            }
            u = self.parent[u];
        }
        let mut u = target;
        while u != join {
            if !self.upward[u] && self.flow[self.pred[u]] <= delta {
                delta = self.flow[self.pred[u]];
                leaving_node = u;
                on_source_side = false;
            }
            u = self.parent[u];
        }
        assert!(leaving_node != usize::MAX, "transport problem with non-negative costs is bounded");

        self.flow[entering] += delta;
        let mut u = source;
        while u != join {
            let sign = if self.upward[u] { -1.0 } else { 1.0 };
            self.flow[self.pred[u]] += sign * delta;
            u = self.parent[u];
        }
        let mut u = target;
        while u != join {
            let sign = if self.upward[u] { 1.0 } else { -1.0 };
            self.flow[self.pred[u]] += sign * delta;
            u = self.parent[u];
        }
        let leaving = self.pred[leaving_node];
        self.flow[leaving] = 0.0;
        if leaving < self.real_arcs() {
            self.in_tree[leaving] = false;
        }
        self.in_tree[entering] = true;

        // Re-hang the cut-off subtree from the entering arc, reversing the
        // path between the new attachment point and the old subtree root.
        let (anchor, other) = if on_source_side { (source, target) } else { (target, source) };
        let mut path = vec![anchor];
        while *path.last().unwrap() != leaving_node {
            path.push(self.parent[*path.last().unwrap()]);
        }
        self.detach(leaving_node);
        for i in (1..path.len()).rev() {
            let (node, new_parent) = (path[i], path[i - 1]);
            self.detach(new_parent);
            self.parent[node] = new_parent;
            self.pred[node] = self.pred[new_parent];
            self.upward[node] = !self.upward[new_parent];
            self.children[new_parent].push(node);
        }
        self.parent[anchor] = other;
        self.pred[anchor] = entering;
        self.upward[anchor] = anchor == source;
        self.children[other].push(anchor);

        let mut stack = vec![anchor];
        while let Some(node) = stack.pop() {
            let p = self.parent[node];
            let c = self.arc_cost(self.pred[node]);
            self.potential[node] = if self.upward[node] { self.potential[p] - c } else { self.potential[p] + c };
            self.depth[node] = self.depth[p] + 1;
            stack.extend(self.children[node].iter().copied());
        }
    }

    fn solve(mut self) -> f64 {
        while let Some(arc) = self.entering_arc() {
            self.pivot(arc);
        }
        let real = self.real_arcs();
        self.flow[..real].iter().zip(&self.cost.data).map(|(f, c)| f * c).sum()
    }
}

/// Transport cost between the Husimi densities of `|N⟩` and `|θ, 0⟩` on an
/// `n_theta × 2n_theta` latitude/longitude grid. Cell masses are the density
/// at the cell centre times the cell area, normalised; only the signed
/// difference of the two distributions has to be moved.
pub fn sphere_grid_oracle(spin: Spin, theta: f64, n_theta: usize) -> Result<f64, MongeError> {
    check_theta(theta)?;
    if n_theta < 2 {
        return Err(MongeError::InvalidGrid(n_theta));
    }
    let n_phi = 2 * n_theta;
    let (dt, dp) = (PI / n_theta as f64, 2.0 * PI / n_phi as f64);
    let a = SpherePoint::NORTH_POLE;
    let b = SpherePoint::new(theta, 0.0).map_err(|_| MongeError::ThetaOutOfRange(theta))?;
    let density = measure_density(spin);
    let mut centers = Vec::with_capacity(n_theta * n_phi);
    let (mut ma, mut mb) = (Vec::new(), Vec::new());
    for i in 0..n_theta {
        let (lo, hi) = (i as f64 * dt, (i + 1) as f64 * dt);
        let area = (lo.cos() - hi.cos()) * dp;
        for j in 0..n_phi {
            let c = SpherePoint::new(0.5 * (lo + hi), (j as f64 + 0.5) * dp).expect("grid centres are valid");
            ma.push(density * crate::gcs::husimi(spin, &a, &c) * area);
            mb.push(density * crate::gcs::husimi(spin, &b, &c) * area);
            centers.push(c.to_vector());
        }
    }
    let (ta, tb): (f64, f64) = (ma.iter().sum(), mb.iter().sum());
    let mut excess = Vec::new();
    let mut deficit = Vec::new();
    for (k, (p, q)) in ma.iter().zip(&mb).enumerate() {
        let d = p / ta - q / tb;
        if d > 0.0 {
            excess.push((k, d));
        } else if d < 0.0 {
            deficit.push((k, -d));
        }
    }
    let (te, td): (f64, f64) = (excess.iter().map(|e| e.1).sum(), deficit.iter().map(|e| e.1).sum());
    let moved = te.min(td);
    if moved <= 0.0 {
        return Ok(0.0);
    }
    let supply: Vec<f64> = excess.iter().map(|e| e.1 / te).collect();
    let demand: Vec<f64> = deficit.iter().map(|e| e.1 / td).collect();
    let cost = CostMatrix::from_fn(excess.len(), deficit.len(), |i, j| {
        dot(centers[excess[i].0], centers[deficit[j].0]).clamp(-1.0, 1.0).acos()
    });
    Ok(moved * kantorovich_oracle(&supply, &demand, &cost)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleRun {
    pub value: f64,
    pub n_theta: usize,
    /// Change from the previous grid in the sequence.
    pub change: f64,
}

/// Runs [`sphere_grid_oracle`] on successively finer grids until two
/// consecutive values differ by less than `change_tol`; reports the last run
/// even if the sequence ends first.
pub fn refined_sphere_oracle(spin: Spin, theta: f64, grids: &[usize], change_tol: f64) -> Result<OracleRun, MongeError> {
    let mut last: Option<OracleRun> = None;
    for &n in grids {
        let value = sphere_grid_oracle(spin, theta, n)?;
        let change = last.map_or(f64::INFINITY, |r| (value - r.value).abs());
        let run = OracleRun { value, n_theta: n, change };
        if change < change_tol {
            return Ok(run);
        }
        last = Some(run);
    }
    last.ok_or(MongeError::InvalidGrid(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// `A(u, v) = B(u + 1, 1/2) − Σ_{s ≤ v} C(2s, s)/((u + s + 1) 4^s)`,
    /// from `Σ_s C(2s, s)(x/4)^s = (1 − x)^{-1/2}` integrated against `x^u`.
    fn a_exact(u: u32, v: u32) -> f64 {
        let u = f64::from(u);
        let beta = (libm::lgamma(u + 1.0) + libm::lgamma(0.5) - libm::lgamma(u + 1.5)).exp();
        let ratios = central_ratios(v as usize);
        beta - ratios.iter().enumerate().map(|(s, c)| c / (u + s as f64 + 1.0)).sum::<f64>()
    }

    #[test]
    fn a_series_matches_beta_identity() {
        for (u, v) in [(0, 0), (3, 2), (10, 0), (0, 30), (50, 50), (200, 3)] {
            assert_abs_diff_eq!(a_series(u, v, 1e-10).unwrap(), a_exact(u, v), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(a_series(0, 0, 1e-10).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn a_series_brackets_brute_force() {
        // Ten million explicit terms still leave a tail of about 2/√(πS).
        let terms = 10_000_000u64;
        let mut c = 0.5;
        let mut partial = 0.0;
        for s in 1..=terms {
            partial += c / (s as f64 + 1.0);
            c *= (2 * s + 1) as f64 / (2 * s + 2) as f64;
        }
        let a = a_series(0, 0, 1e-10).unwrap();
        let bound = 2.0 / (PI * terms as f64).sqrt();
        assert!(a > partial && a < partial + bound + 1e-10);
        assert_abs_diff_eq!(a, partial + a_tail(0, terms), epsilon = 1e-6);
    }

    #[test]
    fn a_series_halved_tolerance_and_monotone() {
        for (u, v) in [(0, 0), (4, 7), (20, 1)] {
            let (x, y) = (a_series(u, v, 1e-8).unwrap(), a_series(u, v, 5e-9).unwrap());
            assert!((x - y).abs() < 1e-8);
        }
        let row: Vec<f64> = (0..20).map(|v| a_series(3, v, 1e-10).unwrap()).collect();
        assert!(row.windows(2).all(|w| w[1] < w[0]));
        assert!(a_series(0, 0, 0.0).is_err());
    }

    #[test]
    fn half_spin_closed_form() {
        // J = 1/2: the only term is u = v = 0, giving π sin(θ/2)/4.
        for theta in [0.3, 1.0, 2.5] {
            let d = monge_su2(Spin::from_twice(1), theta, 1e-10).unwrap().value;
            assert_abs_diff_eq!(d, PI * (0.5 * theta).sin() / 4.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn monge_examples() {
        for j in [1, 5, 20] {
            assert_eq!(monge_su2(Spin::integer(j), 0.0, 1e-10).unwrap().value, 0.0);
        }
        let curve: Vec<f64> = (1..=20).map(|j| monge_su2(Spin::integer(j), PI / 3.0, 1e-10).unwrap().value).collect();
        assert!(curve.windows(2).all(|w| w[1] > w[0]));
        assert!(curve.iter().all(|&d| d < PI / 3.0));
        assert_abs_diff_eq!(curve[0], 0.58905, epsilon = 1e-5);
        assert_abs_diff_eq!(curve[9], 0.99010, epsilon = 1e-5);
        let far = monge_su2(Spin::integer(200), PI / 3.0, 1e-10).unwrap().value;
        assert!((far - PI / 3.0).abs() < 0.02 * PI / 3.0);
        assert!(monge_su2(Spin::integer(1), 3.5, 1e-10).is_err());
        assert_eq!(monge_large_j_limit(PI / 3.0).unwrap(), PI / 3.0);
        assert_eq!(monge_large_j_limit(0.0).unwrap(), 0.0);
    }

    #[test]
    fn bound_examples() {
        let a = SpherePoint::new(0.4, 1.0).unwrap();
        let same = check_monge_bound(Spin::integer(3), &a, &a).unwrap();
        assert!(same.holds);
        assert_eq!(same.margin, 0.0);
        let b = SpherePoint::new(0.4 + PI / 3.0, 1.0).unwrap();
        let m1 = check_monge_bound(Spin::integer(1), &a, &b).unwrap();
        let m20 = check_monge_bound(Spin::integer(20), &a, &b).unwrap();
        assert!(m20.holds && m20.margin > 0.0 && m20.margin < m1.margin);
    }

    #[test]
    fn salvemini_examples() {
        let u01 = UniformCdf { lo: 0.0, hi: 1.0 };
        assert_eq!(salvemini(&u01, &u01, 1e-10).unwrap(), 0.0);
        assert_abs_diff_eq!(salvemini(&u01, &UniformCdf { lo: 1.0, hi: 2.0 }, 1e-10).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(salvemini(&u01, &UniformCdf { lo: 0.0, hi: 2.0 }, 1e-10).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn salvemini_tails() {
        let normal = |mu: f64| FnCdf {
            f: move |x: f64| 0.5 * libm::erfc(-(x - mu) / std::f64::consts::SQRT_2),
            support: (f64::NEG_INFINITY, f64::INFINITY),
            breaks: vec![mu],
        };
        assert_abs_diff_eq!(salvemini(&normal(0.0), &normal(0.7), 1e-10).unwrap(), 0.7, epsilon = 1e-8);
        let cauchy = FnCdf { f: |x: f64| 0.5 + x.atan() / PI, support: (f64::NEG_INFINITY, f64::INFINITY), breaks: vec![0.0] };
        let atom = StepCdf::new(&[0.0], &[1.0]).unwrap();
        assert_eq!(salvemini(&atom, &cauchy, 1e-8), Err(MongeError::Divergent));
    }

    #[test]
    fn oracle_examples() {
        let zero = CostMatrix::from_fn(2, 2, |i, j| if i == j { 0.0 } else { 1.0 });
        assert_eq!(kantorovich_oracle(&[0.3, 0.7], &[0.3, 0.7], &zero).unwrap(), 0.0);
        let single = CostMatrix::from_fn(1, 1, |_, _| 2.5);
        assert_eq!(kantorovich_oracle(&[1.0], &[1.0], &single).unwrap(), 2.5);
        assert!(matches!(kantorovich_oracle(&[1.0], &[0.5], &single), Err(MongeError::Infeasible { .. })));
        assert!(matches!(kantorovich_oracle(&[1.0, 0.0], &[1.0], &single), Err(MongeError::ShapeMismatch { .. })));
    }

    #[test]
    fn oracle_matches_salvemini_on_uniforms() {
        // Midpoint atoms of n equal cells discretise uniforms on [0, 1] and [0.3, 1.8].
        let n = 60;
        let xa: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let xb: Vec<f64> = (0..n).map(|i| 0.3 + 1.5 * (i as f64 + 0.5) / n as f64).collect();
        let mass = vec![1.0 / n as f64; n];
        let cost = CostMatrix::from_fn(n, n, |i, j| (xa[i] - xb[j]).abs());
        let discrete = kantorovich_oracle(&mass, &mass, &cost).unwrap();
        let continuous = salvemini(&UniformCdf { lo: 0.0, hi: 1.0 }, &UniformCdf { lo: 0.3, hi: 1.8 }, 1e-12).unwrap();
        let stepped = salvemini(&StepCdf::new(&xa, &mass).unwrap(), &StepCdf::new(&xb, &mass).unwrap(), 1e-12).unwrap();
        assert_abs_diff_eq!(discrete, stepped, epsilon = 1e-12);
        assert!((discrete - continuous).abs() <= 1.5 / n as f64);
    }

    #[test]
    fn oracle_beats_brute_force_on_permutations() {
        // With uniform masses on n points the optimum is a permutation.
        let n = 6;
        let pts: Vec<(f64, f64)> = (0..2 * n).map(|k| ((k as f64 * 1.7).sin(), (k as f64 * 0.9).cos())).collect();
        let cost = CostMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (pts[i], pts[n + j]);
            (a.0 - b.0).hypot(a.1 - b.1)
        });
        let mut best = f64::INFINITY;
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, 0, &mut |p| {
            best = best.min(p.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum::<f64>() / n as f64);
        });
        let mass = vec![1.0 / n as f64; n];
        assert_abs_diff_eq!(kantorovich_oracle(&mass, &mass, &cost).unwrap(), best, epsilon = 1e-12);
    }

    fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            visit(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, visit);
            p.swap(k, i);
        }
    }

    #[test]
    fn sphere_oracle_near_closed_form() {
        let closed = monge_su2(Spin::integer(2), PI / 3.0, 1e-10).unwrap().value;
        let grid = sphere_grid_oracle(Spin::integer(2), PI / 3.0, 16).unwrap();
        assert!((closed - grid).abs() < 1e-2, "closed {closed} grid {grid}");
    }

    proptest! {
        #[test]
        fn salvemini_is_a_metric(
            xs in proptest::collection::vec(-5.0f64..5.0, 9),
            ms in proptest::collection::vec(0.01f64..1.0, 9),
        ) {
            let a = StepCdf::new(&xs[0..3], &ms[0..3]).unwrap();
            let b = StepCdf::new(&xs[3..6], &ms[3..6]).unwrap();
            let c = StepCdf::new(&xs[6..9], &ms[6..9]).unwrap();
            let d = |p: &StepCdf, q: &StepCdf| salvemini(p, q, 1e-12).unwrap();
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-10);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-10);
        }

        #[test]
        fn closed_form_within_bounds(twice in 1u32..=40, theta in 0.0f64..PI) {
            let d = monge_su2(Spin::from_twice(twice), theta, 1e-10).unwrap().value;
            prop_assert!(d >= 0.0 && d <= theta + 1e-9);
        }
    }
}
