//! Joint azimuth/elevation scatterer density.
//!
//! Each scatterer population is described by a von Mises-Fisher density on the
//! unit sphere, written in (azimuth alpha, elevation beta) coordinates with
//! the cos(beta) area element:
//!
//! ```text
//! p(alpha, beta) = k cos(beta) / (4 pi sinh k)
//!                  * exp(k [cos b0 cos beta cos(alpha - a0) + sin b0 sin beta])
//! ```
//!
//! for alpha in [-pi, pi) and beta in [-pi/2, pi/2]. `k = 0` degenerates to
//! the isotropic density cos(beta)/(4 pi). Sampling draws the colatitude about
//! the mean direction by inverse CDF and rotates onto (a0, b0), which is exact
//! for every k >= 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::quadrature::GaussLegendre;

/// Below this concentration the sinh(k) normalizer is evaluated by its limit.
const K_ISOTROPIC: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AngularError {
    #[error("elevation {beta} rad outside [-pi/2, pi/2]")]
    ElevationOutOfRange { beta: f64 },
    #[error("concentration must be finite and >= 0, got {k}")]
    InvalidConcentration { k: f64 },
    #[error("quadrature spec requires at least 64 nodes per axis, got {nodes}")]
    QuadratureTooCoarse { nodes: usize },
}

/// Von Mises-Fisher direction density with mean azimuth `alpha0`, mean
/// elevation `beta0` and concentration `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesFisher {
    pub alpha0: f64,
    pub beta0: f64,
    pub k: f64,
}

impl VonMisesFisher {
    pub fn new(alpha0: f64, beta0: f64, k: f64) -> Result<Self, AngularError> {
        if !k.is_finite() || k < 0.0 {
            return Err(AngularError::InvalidConcentration { k });
        }
        Ok(Self { alpha0, beta0, k })
    }

    /// Isotropic density (`k = 0`) - uniform directions on the sphere.
    pub fn isotropic() -> Self {
        Self {
            alpha0: 0.0,
            beta0: 0.0,
            k: 0.0,
        }
    }

    /// Density value at `(alpha, beta)`, per d(alpha) d(beta).
    pub fn pdf(&self, alpha: f64, beta: f64) -> Result<f64, AngularError> {
        if !(-PI / 2.0..=PI / 2.0).contains(&beta) {
            return Err(AngularError::ElevationOutOfRange { beta });
        }
        Ok(self.pdf_unchecked(alpha, beta))
    }

    /// Density without the elevation range check; used by integrators whose
    /// grids are within the support by construction.
    pub fn pdf_unchecked(&self, alpha: f64, beta: f64) -> f64 {
        let k = self.k;
        if k < K_ISOTROPIC {
            return beta.cos() / (4.0 * PI);
        }
        let dot = self.beta0.cos() * beta.cos() * (alpha - self.alpha0).cos()
            + self.beta0.sin() * beta.sin();
        // k cos(beta) e^{k dot} / (4 pi sinh k), with sinh written via exp to
        // stay stable for large k: e^{k dot} / sinh k = 2 e^{k(dot-1)} / (1 - e^{-2k}).
        k * beta.cos() * (k * (dot - 1.0)).exp() / (2.0 * PI * (1.0 - (-2.0 * k).exp()))
    }

    /// Density at the mode, `k / (2 pi (1 - e^{-2k}))` for k > 0.
    pub fn mode_density(&self) -> f64 {
        self.pdf_unchecked(self.alpha0, self.beta0) / self.beta0.cos()
    }

    /// Mean resultant length `coth(k) - 1/k` of the Fisher distribution.
    pub fn mean_resultant_length(k: f64) -> f64 {
        if k < 1e-8 {
            // Series: k/3 - k^3/45 + ...
            return k / 3.0;
        }
        1.0 / k.tanh() - 1.0 / k
    }

    /// Draw `n` (alpha, beta) pairs. Deterministic for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    /// Draw `n` pairs from a caller-provided generator.
    pub fn sample_with<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<(f64, f64)> {
        let (e1, e2, mu) = self.mean_frame();
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let cos_t = if self.k < K_ISOTROPIC {
                    2.0 * u - 1.0
                } else {
                    // Inverse CDF of the Fisher colatitude density.
                    1.0 + (u + (1.0 - u) * (-2.0 * self.k).exp()).ln() / self.k
                };
                let cos_t = cos_t.clamp(-1.0, 1.0);
                let sin_t = (1.0 - cos_t * cos_t).sqrt();
                let phi: f64 = rng.gen::<f64>() * 2.0 * PI;
                let v = [
                    sin_t * (phi.cos() * e1[0] + phi.sin() * e2[0]) + cos_t * mu[0],
                    sin_t * (phi.cos() * e1[1] + phi.sin() * e2[1]) + cos_t * mu[1],
                    sin_t * (phi.cos() * e1[2] + phi.sin() * e2[2]) + cos_t * mu[2],
                ];
                (v[1].atan2(v[0]), v[2].clamp(-1.0, 1.0).asin())
            })
            .collect()
    }

    fn mean_frame(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let mu = [
            self.beta0.cos() * self.alpha0.cos(),
            self.beta0.cos() * self.alpha0.sin(),
            self.beta0.sin(),
        ];
        // Tangent basis at mu: e1 along decreasing elevation, e2 along azimuth.
        let e1 = [
            self.beta0.sin() * self.alpha0.cos(),
            self.beta0.sin() * self.alpha0.sin(),
            -self.beta0.cos(),
        ];
        let e2 = [-self.alpha0.sin(), self.alpha0.cos(), 0.0];
        (e1, e2, mu)
    }

    /// Integrate the density over its full support with tensor Gauss-Legendre
    /// rules of the given per-axis node counts (must be >= 64).
    pub fn normalization(&self, nodes_alpha: usize, nodes_beta: usize) -> Result<f64, AngularError> {
        let n = nodes_alpha.min(nodes_beta);
        if n < 64 {
            return Err(AngularError::QuadratureTooCoarse { nodes: n });
        }
        let ra = GaussLegendre::new(nodes_alpha);
        let rb = GaussLegendre::new(nodes_beta);
        let mut acc = 0.0;
        for (xa, wa) in ra.nodes.iter().zip(&ra.weights) {
            let alpha = PI * xa;
            let mut inner = 0.0;
            for (xb, wb) in rb.nodes.iter().zip(&rb.weights) {
                let beta = PI / 2.0 * xb;
                inner += self.pdf_unchecked(alpha, beta) * wb;
            }
            acc += inner * wa;
        }
        Ok(acc * PI * PI / 2.0)
    }

    /// Azimuth marginal at `alpha`: the density integrated over elevation.
    pub fn azimuth_marginal(&self, alpha: f64, nodes: usize) -> f64 {
        let rule = GaussLegendre::new(nodes.max(32));
        let mut acc = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += self.pdf_unchecked(alpha, PI / 2.0 * x) * w;
        }
        acc * PI / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn isotropic_density_is_uniform() {
        let d = VonMisesFisher::isotropic();
        assert_relative_eq!(d.pdf(1.0, 0.0).unwrap(), 1.0 / (4.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(
            d.pdf(-2.0, 0.7).unwrap(),
            0.7f64.cos() / (4.0 * PI),
            max_relative = 1e-14
        );
    }

    #[test]
    fn mode_value_matches_closed_form() {
        // k e^k / (4 pi sinh k) = k / (2 pi (1 - e^{-2k})).
        let k = 12.3;
        let d = VonMisesFisher::new(0.3, 0.0, k).unwrap();
        let expected = k / (2.0 * PI * (1.0 - (-2.0 * k).exp()));
        assert_relative_eq!(d.pdf(0.3, 0.0).unwrap(), expected, max_relative = 1e-13);
        assert_relative_eq!(expected, 1.9576, max_relative = 1e-4);
    }

    #[test]
    fn antipode_is_mode_times_exp_minus_2k() {
        let k = 12.3;
        let d = VonMisesFisher::new(0.0, 0.0, k).unwrap();
        let mode = d.pdf(0.0, 0.0).unwrap();
        let anti = d.pdf(PI, 0.0).unwrap();
        assert_relative_eq!(anti, mode * (-2.0 * k).exp(), max_relative = 1e-12);
    }

    #[test]
    fn pdf_even_about_mean_azimuth() {
        let d = VonMisesFisher::new(0.8, 0.25, 4.2).unwrap();
        for delta in [0.1, 0.5, 1.2, 2.9] {
            assert_relative_eq!(
                d.pdf_unchecked(0.8 + delta, 0.25),
                d.pdf_unchecked(0.8 - delta, 0.25),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn elevation_out_of_range_rejected() {
        let d = VonMisesFisher::isotropic();
        assert!(matches!(
            d.pdf(0.0, 2.0),
            Err(AngularError::ElevationOutOfRange { .. })
        ));
    }

    #[test]
    fn normalization_is_unity_for_table_concentrations() {
        for k in [0.0, 0.55, 1.21, 2.7, 8.9, 12.3] {
            let d = VonMisesFisher::new(0.4, 0.1, k).unwrap();
            let z = d.normalization(128, 128).unwrap();
            assert_abs_diff_eq!(z, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn coarse_quadrature_spec_rejected() {
        let d = VonMisesFisher::isotropic();
        assert!(matches!(
            d.normalization(32, 128),
            Err(AngularError::QuadratureTooCoarse { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = VonMisesFisher::new(1.0, 0.2, 8.9).unwrap();
        assert_eq!(d.sample(1000, 7), d.sample(1000, 7));
    }

    #[test]
    fn mean_resultant_length_matches_fisher() {
        let k = 12.3;
        let d = VonMisesFisher::new(0.6, -0.1, k).unwrap();
        let samples = d.sample(1_000_000, 42);
        let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
        for (a, b) in &samples {
            sx += b.cos() * a.cos();
            sy += b.cos() * a.sin();
            sz += b.sin();
        }
        let n = samples.len() as f64;
        let r = (sx * sx + sy * sy + sz * sz).sqrt() / n;
        let expected = VonMisesFisher::mean_resultant_length(k);
        assert_relative_eq!(expected, 0.9187, max_relative = 1e-4);
        assert_abs_diff_eq!(r, expected, epsilon = 2e-3);

        // The mean direction converges onto (alpha0, beta0).
        assert_abs_diff_eq!(sy.atan2(sx), 0.6, epsilon = 1e-2);
        assert_abs_diff_eq!((sz / n / r).asin(), -0.1, epsilon = 1e-2);
    }

    #[test]
    fn isotropic_samples_fill_azimuth_uniformly() {
        let d = VonMisesFisher::isotropic();
        let samples = d.sample(1_000_000, 3);
        let mut bins = [0usize; 36];
        for (a, _) in &samples {
            let idx = (((a + PI) / (2.0 * PI) * 36.0) as usize).min(35);
            bins[idx] += 1;
        }
        let expected = samples.len() as f64 / 36.0;
        let sigma = (samples.len() as f64 * (1.0 / 36.0) * (35.0 / 36.0)).sqrt();
        for count in bins {
            assert!(
                (count as f64 - expected).abs() < 3.0 * sigma,
                "azimuth bin count {count} deviates from {expected}"
            );
        }
    }

    #[test]
    fn histogram_matches_pdf_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};

        let d = VonMisesFisher::new(0.9, 0.15, 12.3).unwrap();
        let n = 1_000_000usize;
        let samples = d.sample(n, 2024);
        const NA: usize = 36;
        const NB: usize = 18;
        let mut counts = [[0u64; NB]; NA];
        for (a, b) in &samples {
            let ia = (((a + PI) / (2.0 * PI) * NA as f64) as usize).min(NA - 1);
            let ib = (((b + PI / 2.0) / PI * NB as f64) as usize).min(NB - 1);
            counts[ia][ib] += 1;
        }
        // Cell probabilities by 3x3 Gauss-Legendre per cell.
        let rule = GaussLegendre::new(3);
        let da = 2.0 * PI / NA as f64;
        let db = PI / NB as f64;
        let mut chi2 = 0.0;
        let mut dof: i64 = -1;
        let mut rest_expected = 0.0;
        let mut rest_count = 0u64;
        for ia in 0..NA {
            for ib in 0..NB {
                let a0 = -PI + ia as f64 * da;
                let b0 = -PI / 2.0 + ib as f64 * db;
                let mut p = 0.0;
                for (xa, wa) in rule.nodes.iter().zip(&rule.weights) {
                    for (xb, wb) in rule.nodes.iter().zip(&rule.weights) {
                        p += d.pdf_unchecked(a0 + da * 0.5 * (1.0 + xa), b0 + db * 0.5 * (1.0 + xb))
                            * wa
                            * wb;
                    }
                }
                p *= da * db / 4.0;
                let expected = p * n as f64;
                if expected < 5.0 {
                    rest_expected += expected;
                    rest_count += counts[ia][ib];
                } else {
                    chi2 += (counts[ia][ib] as f64 - expected).powi(2) / expected;
                    dof += 1;
                }
            }
        }
        if rest_expected > 5.0 {
            chi2 += (rest_count as f64 - rest_expected).powi(2) / rest_expected;
            dof += 1;
        }
        let dist = ChiSquared::new(dof as f64).unwrap();
        let p_value = 1.0 - dist.cdf(chi2);
        assert!(
            p_value > 0.001,
            "chi-square p-value {p_value:.5} too small (chi2 = {chi2:.1}, dof = {dof})"
        );
    }
}
