//! Threshold system sizes `N_t(ε, δ)` above which coherent states that are
//! more than `δ` apart become ε-orthogonal, and checks of the two
//! discrimination conditions on a concrete tessellation.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gcs::{epsilon_support_radius, Epsilon, EpsilonDelta, Spin};
use crate::geometry::{distance_to_arcs, SpherePoint, Tessellation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("delta must lie in (0, π) for su(2), got {0}")]
    DeltaOutOfRange(f64),
    #[error("Bargmann index must be positive and finite, got {0}")]
    InvalidBargmann(f64),
    #[error("threshold {nt} must exceed the reduction n = {reduction}")]
    ThresholdBelowReduction { nt: f64, reduction: u64 },
}

/// A real threshold and its integer companion `⌈real⌉`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Threshold {
    pub real: f64,
    pub integer: u64,
}

impl Threshold {
    pub fn from_real(real: f64) -> Self {
        // `as` saturates, so an infinite threshold maps to u64::MAX.
        Self { real, integer: real.ceil() as u64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "algebra", rename_all = "lowercase")]
pub enum Algebra {
    Su2 { reduction: u64 },
    Su11 { bargmann: f64 },
    Boson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdQuery {
    pub algebra: Algebra,
    pub gauge: EpsilonDelta,
}

impl ThresholdQuery {
    pub fn evaluate(&self) -> Result<Threshold, ThresholdError> {
        let (eps, delta) = (self.gauge.epsilon, self.gauge.delta());
        match self.algebra {
            Algebra::Su2 { reduction } => nt_su2(eps, delta, reduction),
            Algebra::Su11 { bargmann } => nt_su11(eps, delta, bargmann),
            Algebra::Boson => Ok(nt_boson(eps, delta)),
        }
    }
}

/// `ln ε / ln cos(δ/2) + n`.
pub fn nt_su2(epsilon: Epsilon, delta: f64, reduction: u64) -> Result<Threshold, ThresholdError> {
    if !(delta > 0.0 && delta < std::f64::consts::PI) {
        return Err(ThresholdError::DeltaOutOfRange(delta));
    }
    // cos(δ/2) = 1 − 2 sin²(δ/4), kept accurate for small δ
    let ln_cos = (-2.0 * (0.25 * delta).sin().powi(2)).ln_1p();
    Ok(Threshold::from_real(epsilon.value().ln() / ln_cos + reduction as f64))
}

/// `−ln ε / (2k ln cosh(δ/2))` for Bargmann index `k`.
pub fn nt_su11(epsilon: Epsilon, delta: f64, bargmann: f64) -> Result<Threshold, ThresholdError> {
    if !(bargmann > 0.0 && bargmann.is_finite()) {
        return Err(ThresholdError::InvalidBargmann(bargmann));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ThresholdError::DeltaOutOfRange(delta));
    }
    let ln_cosh = (2.0 * (0.25 * delta).sinh().powi(2)).ln_1p();
    Ok(Threshold::from_real(-epsilon.value().ln() / (2.0 * bargmann * ln_cosh)))
}

/// `−ln ε / δ²`.
pub fn nt_boson(epsilon: Epsilon, delta: f64) -> Threshold {
    Threshold::from_real(-epsilon.value().ln() / (delta * delta))
}

/// Inverse of [`nt_su2`] in `δ`: `2 arccos(exp(ln ε / (N_t − n)))`.
pub fn delta_for_nt(epsilon: Epsilon, nt: f64, reduction: u64) -> Result<f64, ThresholdError> {
    let span = nt - reduction as f64;
    if !(span > 0.0) {
        return Err(ThresholdError::ThresholdBelowReduction { nt, reduction });
    }
    // 2 arccos(c) = 4 arcsin(√((1 − c)/2))
    let one_minus_c = -(epsilon.value().ln() / span).exp_m1();
    Ok(4.0 * (0.5 * one_minus_c).sqrt().asin())
}

/// Whether `|⟨Ω|Ω′⟩| > ε` forces `d(Ω, Ω′) ≤ δ`, i.e. `θ_ε ≤ δ`.
pub fn verify_implication_su2(spin: Spin, epsilon: Epsilon, delta: f64) -> bool {
    epsilon_support_radius(spin, epsilon) <= delta
}

/// [`verify_implication_su2`] with the tessellation's strict resolution,
/// which bounds the cap-to-boundary gap for every point rather than only the
/// sampled ones.
pub fn verify_implication_su2_strict(spin: Spin, epsilon: Epsilon, tess: &Tessellation) -> bool {
    verify_implication_su2(spin, epsilon, tess.strict_delta())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampledCheck {
    pub tile: usize,
    /// `d(Λ_i, ∂I_i) − θ_ε`.
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeCheck {
    pub probe: SpherePoint,
    pub tile: usize,
    /// `d(Σ, ∂Ĩ_i) − θ_ε` with `i` the tile containing `Σ`.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscriminationReport {
    pub support_radius: f64,
    pub sampled: Vec<SampledCheck>,
    pub probes: Vec<ProbeCheck>,
}

impl DiscriminationReport {
    /// Every sampled cap lies inside its own tile.
    pub fn sampled_passed(&self) -> bool {
        self.sampled.iter().all(|c| c.margin >= 0.0)
    }

    /// Every probe cap lies inside the patch of the tile containing the probe.
    pub fn probes_passed(&self) -> bool {
        self.probes.iter().all(|c| c.margin >= 0.0)
    }

    pub fn passed(&self) -> bool {
        self.sampled_passed() && self.probes_passed()
    }

    pub fn worst_margin(&self) -> f64 {
        self.sampled
            .iter()
            .map(|c| c.margin)
            .chain(self.probes.iter().map(|c| c.margin))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tile corners followed by the sampled points, corners deduplicated.
pub fn default_probes(tess: &Tessellation) -> Vec<SpherePoint> {
    let mut probes: Vec<SpherePoint> = Vec::new();
    for tile in tess.tiles() {
        for v in tile.vertices() {
            if !probes.iter().any(|p| crate::geometry::geodesic_distance(p, &v) < 1e-12) {
                probes.push(v);
            }
        }
    }
    probes.extend(tess.tiles().iter().map(|t| t.sampled_point()));
    probes
}

pub fn verify_tessellation_discrimination(
    tess: &Tessellation,
    spin: Spin,
    epsilon: Epsilon,
    probes: &[SpherePoint],
) -> DiscriminationReport {
    let radius = epsilon_support_radius(spin, epsilon);
    let sampled = tess
        .tiles()
        .par_iter()
        .map(|tile| SampledCheck { tile: tile.index(), margin: tile.boundary_distance(&tile.sampled_point()) - radius })
        .collect();
    let probes = probes
        .par_iter()
        .map(|probe| {
            let tile = tess.locate(probe);
            let patch = tess.patch(tile).expect("locate returns a valid index");
            let boundary = tess.patch_boundary(&patch);
            ProbeCheck { probe: *probe, tile, margin: distance_to_arcs(probe, &boundary) - radius }
        })
        .collect();
    DiscriminationReport { support_radius: radius, sampled, probes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn eps(v: f64) -> Epsilon {
        Epsilon::new(v).unwrap()
    }

    fn inscribed_t4() -> f64 {
        ((PI / 18.0).sin() * (PI / 9.0).sin()).asin()
    }

    #[test]
    fn su2_examples() {
        let t = nt_su2(eps(0.22), inscribed_t4(), 0).unwrap();
        assert_eq!(t.integer, 3430);
        assert_abs_diff_eq!(t.real, 3429.52, epsilon = 0.01);
        assert_eq!(nt_su2(eps(0.22), PI / 18.0, 0).unwrap().integer, 398);
        let shifted = nt_su2(eps(0.22), 0.3, 10).unwrap().real - nt_su2(eps(0.22), 0.3, 0).unwrap().real;
        assert_abs_diff_eq!(shifted, 10.0, epsilon = 1e-9);
        assert!(nt_su2(eps(0.22), PI, 0).is_err());
        assert!(nt_su2(eps(0.22), 0.0, 0).is_err());
    }

    #[test]
    fn su11_examples() {
        let t = nt_su11(eps(0.22), 0.0594261, 0.5).unwrap();
        assert_eq!(t.integer, 3431);
        let half = nt_su11(eps(0.22), 0.2, 2.0).unwrap().real / nt_su11(eps(0.22), 0.2, 1.0).unwrap().real;
        assert_relative_eq!(half, 0.5, max_relative = 1e-14);
        assert!(nt_su11(eps(0.22), 1e-6, 0.5).unwrap().real > 1e12);
        assert!(nt_su11(eps(0.22), 0.1, 0.0).is_err());
    }

    #[test]
    fn boson_examples() {
        assert_relative_eq!(nt_boson(eps((-1.0f64).exp()), 0.1).real, 100.0, max_relative = 1e-12);
        assert_abs_diff_eq!(nt_boson(eps(0.22), 0.0594261).real, 428.75, epsilon = 0.01);
        assert!(nt_boson(eps(1.0 - 1e-12), 0.1).real < 1e-9);
    }

    #[test]
    fn inverse_examples() {
        assert_abs_diff_eq!(delta_for_nt(eps(0.22), 3285.0, 0).unwrap(), 0.0607, epsilon = 1e-4);
        assert_abs_diff_eq!(delta_for_nt(eps(0.22), 3430.0, 0).unwrap(), inscribed_t4(), epsilon = 1e-4);
        assert!(delta_for_nt(eps(0.22), 5.0, 5).is_err());
        let back = nt_su2(eps(0.22), delta_for_nt(eps(0.22), 3285.0, 0).unwrap(), 0).unwrap().real;
        assert_relative_eq!(back, 3285.0, max_relative = 1e-9);
    }

    #[test]
    fn implication_examples() {
        let d = inscribed_t4();
        assert!(verify_implication_su2(Spin::integer(1715), eps(0.22), d));
        assert!(!verify_implication_su2(Spin::integer(150), eps(0.22), d));
        assert!(!verify_implication_su2(Spin::integer(15), eps(0.22), d));
    }

    #[test]
    fn small_delta_limits() {
        let e = eps(0.22);
        let scale = -e.value().ln();
        let d = 1e-4;
        assert_relative_eq!(nt_su2(e, d, 0).unwrap().real * d * d / scale, 8.0, max_relative = 1e-6);
        assert_relative_eq!(nt_boson(e, d).real * d * d / scale, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn discrimination_on_t4() {
        let t = Tessellation::new(4).unwrap();
        let probes = default_probes(&t);
        let sharp = verify_tessellation_discrimination(&t, Spin::integer(1715), eps(0.22), &probes);
        assert_eq!(sharp.sampled.len(), 146);
        assert!(sharp.passed(), "worst margin {}", sharp.worst_margin());

        let lambda1 = t.tile(1).unwrap().sampled_point();
        let loose = verify_tessellation_discrimination(&t, Spin::integer(150), eps(0.22), &[lambda1]);
        assert!(!loose.sampled_passed());
        assert!(loose.probes_passed());

        let blunt = verify_tessellation_discrimination(&t, Spin::integer(15), eps(0.22), &[lambda1]);
        assert!(!blunt.sampled_passed());
        assert!(!blunt.probes_passed());
    }

    proptest! {
        #[test]
        fn ceiling_is_where_the_implication_starts(e in 0.01f64..0.9, delta in 0.01f64..1.0) {
            let e = eps(e);
            let t = nt_su2(e, delta, 0).unwrap();
            for size in [t.integer, t.integer + 1, t.integer + 17] {
                prop_assert!(verify_implication_su2(Spin::from_twice(size as u32), e, delta));
            }
            if t.integer >= 2 {
                prop_assert!(!verify_implication_su2(Spin::from_twice((t.integer - 2) as u32), e, delta));
            }
        }

        #[test]
        fn inverse_roundtrip(e in 0.01f64..0.9, delta in 1e-3f64..1.0) {
            let e = eps(e);
            let nt = nt_su2(e, delta, 0).unwrap().real;
            prop_assert!((delta_for_nt(e, nt, 0).unwrap() / delta - 1.0).abs() < 1e-9);
        }

        #[test]
        fn thresholds_decrease(e in 0.01f64..0.8, delta in 0.01f64..1.0) {
            let (e1, e2) = (eps(e), eps(e + 0.05));
            let (d1, d2) = (delta, delta * 1.1);
            prop_assert!(nt_su2(e1, d2, 0).unwrap().real < nt_su2(e1, d1, 0).unwrap().real);
            prop_assert!(nt_su2(e2, d1, 0).unwrap().real < nt_su2(e1, d1, 0).unwrap().real);
            prop_assert!(nt_su11(e1, d2, 0.5).unwrap().real < nt_su11(e1, d1, 0.5).unwrap().real);
            prop_assert!(nt_su11(e2, d1, 0.5).unwrap().real < nt_su11(e1, d1, 0.5).unwrap().real);
            prop_assert!(nt_boson(e1, d2).real < nt_boson(e1, d1).real);
            prop_assert!(nt_boson(e2, d1).real < nt_boson(e1, d1).real);
        }
    }
}
