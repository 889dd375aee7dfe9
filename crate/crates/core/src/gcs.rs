//! su(2) coherent states: expansion coefficients, overlaps, Husimi
//! functions and the ε-support of a state.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::SpherePoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GcsError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("delta must be a positive finite angle, got {0}")]
    InvalidDelta(f64),
    #[error("reduction n = {reduction} exceeds system size N = {size}")]
    InvalidEnsemble { size: u64, reduction: u64 },
    #[error("spin 2J = {0} does not fit the supported range")]
    SpinTooLarge(u64),
    #[error("size parameter must be positive and finite, got {0}")]
    InvalidSize(f64),
    #[error("grid needs at least two colatitudes and one longitude")]
    InvalidGrid,
}

/// Total spin `J`, stored as the integer `2J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Spin(u32);

impl Spin {
    pub const fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    pub const fn integer(j: u32) -> Self {
        Spin(2 * j)
    }

    pub const fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        0.5 * f64::from(self.0)
    }

    /// Dimension `2J + 1` of the irreducible representation.
    pub const fn dimension(self) -> u32 {
        self.0 + 1
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// `N` spin-½ constituents reduced by `n`, giving `J = (N − n)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SpinEnsemble {
    size: u64,
    reduction: u64,
}

impl SpinEnsemble {
    pub fn new(size: u64, reduction: u64) -> Result<Self, GcsError> {
        if reduction > size {
            return Err(GcsError::InvalidEnsemble { size, reduction });
        }
        if size - reduction > u64::from(u32::MAX) {
            return Err(GcsError::SpinTooLarge(size - reduction));
        }
        Ok(Self { size, reduction })
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn reduction(&self) -> u64 {
        self.reduction
    }

    pub fn spin(&self) -> Spin {
        Spin::from_twice((self.size - self.reduction) as u32)
    }
}

/// Neglect threshold `ε ∈ (0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self, GcsError> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(GcsError::InvalidEpsilon(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// The gauge pair (ε, δ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsilonDelta {
    pub epsilon: Epsilon,
    delta: f64,
}

impl EpsilonDelta {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, GcsError> {
        let epsilon = Epsilon::new(epsilon)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(GcsError::InvalidDelta(delta));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

pub(crate) fn ln_binomial(n: u32, k: u32) -> f64 {
    let lg = |x: u32| libm::lgamma(f64::from(x) + 1.0);
    lg(n) - lg(k) - lg(n - k)
}

/// `x^p` for `x ≥ 0`, with `0^0 = 1`, evaluated in the log domain.
pub(crate) fn pow_log(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if x <= 0.0 {
        0.0
    } else {
        (p * x.ln()).exp()
    }
}

/// `ln(x^n)` with `0^0 = 1`.
fn log_power(x: f64, n: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        f64::from(n) * x.ln()
    }
}

/// Amplitudes `g_m`, `m = −J..=J` (element `j` holds `m = j − J`), of the
/// coherent state `|Ω⟩` in the `|J, m⟩` basis.
pub fn su2_coefficients(spin: Spin, omega: &SpherePoint) -> Vec<Complex64> {
    let two_j = spin.twice();
    let (s, c) = (0.5 * omega.theta()).sin_cos();
    (0..=two_j)
        .map(|j| {
            // j = J + m, 2J − j = J − m
            let down = two_j - j;
            let log_modulus = 0.5 * ln_binomial(two_j, j) + log_power(c, j) + log_power(s, down);
            Complex64::from_polar(log_modulus.exp(), f64::from(down) * omega.phi())
        })
        .collect()
}

/// `cos(θ/2)cos(θ'/2) + sin(θ/2)sin(θ'/2)e^{−i(φ−φ')}`, the overlap for `J = 1/2`.
fn overlap_base(a: &SpherePoint, b: &SpherePoint) -> Complex64 {
    let (sa, ca) = (0.5 * a.theta()).sin_cos();
    let (sb, cb) = (0.5 * b.theta()).sin_cos();
    Complex64::new(ca * cb, 0.0) + Complex64::from_polar(sa * sb, -(a.phi() - b.phi()))
}

/// `⟨a|b⟩`, raised to the power `2J` through its modulus and argument.
pub fn su2_overlap(spin: Spin, a: &SpherePoint, b: &SpherePoint) -> Complex64 {
    let base = overlap_base(a, b);
    let p = f64::from(spin.twice());
    let (r, arg) = base.to_polar();
    Complex64::from_polar(pow_log(r, p), p * arg)
}

/// `|⟨σ|ω⟩|² = cos^{4J}(Θ/2)` with `Θ` the geodesic distance.
pub fn husimi(spin: Spin, sigma: &SpherePoint, omega: &SpherePoint) -> f64 {
    let r2 = overlap_base(sigma, omega).norm_sqr();
    pow_log(r2, f64::from(spin.twice()))
}

/// Husimi value as a function of the geodesic distance alone.
pub fn husimi_at_distance(spin: Spin, distance: f64) -> f64 {
    let c = (0.5 * distance).cos();
    pow_log(c * c, f64::from(spin.twice()))
}

/// Density `(2J+1)/(4π)` of the coherent-state measure with respect to `sin θ dθ dφ`.
pub fn measure_density(spin: Spin) -> f64 {
    f64::from(spin.dimension()) / (4.0 * PI)
}

/// Angular radius `2 arccos(ε^{1/(2J)})` of the cap where `|⟨Σ|Ω⟩| > ε`.
/// For `J = 0` every overlap is 1 and the cap is the whole sphere.
pub fn epsilon_support_radius(spin: Spin, epsilon: Epsilon) -> f64 {
    if spin.twice() == 0 {
        return PI;
    }
    2.0 * (epsilon.value().ln() / f64::from(spin.twice())).exp().acos()
}

/// `|⟨a|b⟩| ≤ ε`. The boundary counts as orthogonal, up to a relative
/// slack of `1e-12` on the overlap modulus.
pub fn epsilon_orthogonal(spin: Spin, epsilon: Epsilon, a: &SpherePoint, b: &SpherePoint) -> bool {
    let ln_modulus = f64::from(spin.twice()) * overlap_base(a, b).norm().ln();
    ln_modulus <= epsilon.value().ln() + 1e-12
}

/// Heisenberg–Weyl Husimi surface `exp(−N|ω − c|²)` for visualising how two
/// coherent states separate as `N` grows.
pub fn boson_husimi_demo(size: f64, center: Complex64, omega: Complex64) -> Result<f64, GcsError> {
    if !(size > 0.0 && size.is_finite()) {
        return Err(GcsError::InvalidSize(size));
    }
    Ok((-size * (omega - center).norm_sqr()).exp())
}

/// Summed Husimi surface sampled on a latitude/longitude lattice.
#[derive(Clone, Debug)]
pub struct HusimiGrid {
    pub spin: Spin,
    pub centers: Vec<SpherePoint>,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl HusimiGrid {
    /// Lattice nodes: `θ_i = iπ/(n_θ − 1)`, `φ_j = 2πj/n_φ`.
    pub fn nodes(&self) -> Result<Vec<SpherePoint>, GcsError> {
        if self.n_theta < 2 || self.n_phi < 1 {
            return Err(GcsError::InvalidGrid);
        }
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for i in 0..self.n_theta {
            let theta = PI * i as f64 / (self.n_theta - 1) as f64;
            for j in 0..self.n_phi {
                let phi = 2.0 * PI * j as f64 / self.n_phi as f64;
                out.push(SpherePoint::new(theta, phi).expect("lattice node is valid"));
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let nodes = self.nodes().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        writeln!(w, "# husimi grid")?;
        writeln!(w, "# J={}", self.spin)?;
        for c in &self.centers {
            writeln!(w, "# center={},{}", c.theta(), c.phi())?;
        }
        writeln!(w, "# n_theta={}", self.n_theta)?;
        writeln!(w, "# n_phi={}", self.n_phi)?;
        writeln!(w, "theta,phi,value")?;
        for (idx, node) in nodes.iter().enumerate() {
            // Raw lattice longitude, since nodes at the poles are canonicalised to φ = 0.
            let phi = 2.0 * PI * (idx % self.n_phi) as f64 / self.n_phi as f64;
            let value: f64 = self.centers.iter().map(|c| husimi(self.spin, c, node)).sum();
            writeln!(w, "{:e},{:e},{:e}", node.theta(), phi, value)?;
        }
        Ok(())
    }
}

/// Sum of two bosonic Husimi surfaces on a square window of the complex plane.
pub fn write_boson_grid<W: Write>(
    mut w: W,
    size: f64,
    centers: &[Complex64],
    half_width: f64,
    points_per_side: usize,
) -> io::Result<()> {
    let invalid = |e: GcsError| io::Error::new(io::ErrorKind::InvalidInput, e);
    if points_per_side < 2 {
        return Err(invalid(GcsError::InvalidGrid));
    }
    writeln!(w, "# boson husimi grid")?;
    writeln!(w, "# N={size}")?;
    for c in centers {
        writeln!(w, "# center={},{}", c.re, c.im)?;
    }
    writeln!(w, "re,im,value")?;
    let step = 2.0 * half_width / (points_per_side - 1) as f64;
    for i in 0..points_per_side {
        for j in 0..points_per_side {
            let z = Complex64::new(-half_width + i as f64 * step, -half_width + j as f64 * step);
            let mut value = 0.0;
            for c in centers {
                value += boson_husimi_demo(size, *c, z).map_err(invalid)?;
            }
            writeln!(w, "{:e},{:e},{:e}", z.re, z.im, value)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(theta: f64, phi: f64) -> SpherePoint {
        SpherePoint::new(theta, phi).unwrap()
    }

    #[test]
    fn coefficients_at_poles() {
        let spin = Spin::from_twice(7);
        let north = su2_coefficients(spin, &pt(0.0, 0.0));
        assert_abs_diff_eq!(north[7].norm(), 1.0, epsilon = 1e-15);
        assert!(north[..7].iter().all(|g| g.norm() == 0.0));
        let south = su2_coefficients(spin, &pt(PI, 0.0));
        assert_abs_diff_eq!(south[0].norm(), 1.0, epsilon = 1e-15);
        assert!(south[1..].iter().all(|g| g.norm() < 1e-15));
    }

    #[test]
    fn coefficients_normalised() {
        for (twice, theta, phi) in [(7, 0.7, 2.1), (1, 2.0, 0.3), (100, 1.1, 5.0), (3000, 0.05, 1.0)] {
            let total: f64 = su2_coefficients(Spin::from_twice(twice), &pt(theta, phi)).iter().map(|g| g.norm_sqr()).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn overlap_examples() {
        let a = pt(1.1, 0.4);
        assert_abs_diff_eq!(su2_overlap(Spin::integer(3), &a, &a).re, 1.0, epsilon = 1e-14);
        let anti = pt(PI - 1.1, 0.4 + PI);
        assert!(su2_overlap(Spin::integer(3), &a, &anti).norm() < 1e-14);
        let v = su2_overlap(Spin::integer(1), &pt(0.0, 0.0), &pt(PI / 3.0, 0.0));
        assert_abs_diff_eq!(v.re, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn overlap_matches_coefficient_sum() {
        let spin = Spin::from_twice(5);
        let (a, b) = (pt(0.9, 1.7), pt(2.2, 4.0));
        let ga = su2_coefficients(spin, &a);
        let gb = su2_coefficients(spin, &b);
        let sum: Complex64 = ga.iter().zip(&gb).map(|(x, y)| x.conj() * y).sum();
        let direct = su2_overlap(spin, &a, &b);
        assert_abs_diff_eq!(sum.re, direct.re, epsilon = 1e-13);
        assert_abs_diff_eq!(sum.im, direct.im, epsilon = 1e-13);
    }

    #[test]
    fn density_values() {
        assert_abs_diff_eq!(measure_density(Spin::integer(0)), 1.0 / (4.0 * PI));
        assert_abs_diff_eq!(measure_density(Spin::integer(1715)), 3431.0 / (4.0 * PI));
    }

    #[test]
    fn support_radius() {
        let eps = Epsilon::new(0.22).unwrap();
        assert_abs_diff_eq!(epsilon_support_radius(Spin::integer(15), eps), 0.6300955729256577, epsilon = 1e-12);
        assert_abs_diff_eq!(epsilon_support_radius(Spin::integer(1715), eps), 0.05942199627249142, epsilon = 1e-12);
        let near_one = Epsilon::new(1.0 - 1e-12).unwrap();
        assert!(epsilon_support_radius(Spin::integer(15), near_one) < 1e-6);
        assert_eq!(epsilon_support_radius(Spin::integer(0), eps), PI);
        assert!(Epsilon::new(1.0).is_err());
        assert!(Epsilon::new(0.0).is_err());
    }

    #[test]
    fn support_radius_by_bisection() {
        let spin = Spin::integer(15);
        let target = 0.22f64 * 0.22;
        let (mut lo, mut hi) = (0.0f64, PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (0.5 * mid).cos().powi(60) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(epsilon_support_radius(spin, Epsilon::new(0.22).unwrap()), lo, epsilon = 1e-12);
    }

    #[test]
    fn orthogonality_convention() {
        let spin = Spin::integer(15);
        let eps = Epsilon::new(0.22).unwrap();
        let a = pt(0.0, 0.0);
        assert!(!epsilon_orthogonal(spin, eps, &a, &a));
        assert!(epsilon_orthogonal(spin, eps, &pt(1.0, 0.5), &pt(PI - 1.0, 0.5 + PI)));
        let r = epsilon_support_radius(spin, eps);
        assert!(epsilon_orthogonal(spin, eps, &a, &pt(r, 0.0)));
        assert!(!epsilon_orthogonal(spin, eps, &a, &pt(r * (1.0 - 1e-6), 0.0)));
    }

    #[test]
    fn boson_demo() {
        let c = Complex64::new(0.3, -0.2);
        assert_eq!(boson_husimi_demo(5.0, c, c).unwrap(), 1.0);
        let w = Complex64::new(0.1, 0.4);
        let once = boson_husimi_demo(3.0, c, w).unwrap();
        assert_abs_diff_eq!(boson_husimi_demo(6.0, c, w).unwrap(), once * once, epsilon = 1e-15);
        assert!(boson_husimi_demo(0.0, c, w).is_err());
    }

    #[test]
    fn boson_pair_becomes_orthogonal() {
        let (a, b) = (Complex64::new(-0.5, 0.0), Complex64::new(0.5, 0.0));
        let eps2 = 0.22f64 * 0.22;
        let midpoint_sum = |n: f64| {
            (0..=100)
                .map(|i| Complex64::new(-0.5 + i as f64 / 100.0, 0.0))
                .map(|z| boson_husimi_demo(n, a, z).unwrap() + boson_husimi_demo(n, b, z).unwrap())
                .fold(f64::INFINITY, f64::min)
        };
        assert!(midpoint_sum(2.0) > 2.0 * eps2);
        assert!(midpoint_sum(40.0) < 2.0 * eps2);
    }

    #[test]
    fn grid_csv() {
        let grid = HusimiGrid { spin: Spin::integer(2), centers: vec![pt(1.0, 1.0)], n_theta: 3, n_phi: 4 };
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 12);
        assert!(text.contains("theta,phi,value"));
    }

    #[test]
    fn ensemble_spin() {
        let e = SpinEnsemble::new(3430, 0).unwrap();
        assert_eq!(e.spin(), Spin::integer(1715));
        assert_eq!(SpinEnsemble::new(7, 2).unwrap().spin().to_string(), "5/2");
        assert!(SpinEnsemble::new(3, 4).is_err());
    }
}
