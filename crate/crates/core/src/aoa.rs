//! Marginal angle-of-arrival statistics.
//!
//! For a tap's ellipsoid population, read the configured density as the joint
//! arrival-angle density at the MR (folded onto the upper half space) and
//! marginalize over elevation. A directional transmit antenna restricts the
//! illuminated surface region to departure azimuths within `[-bw, +bw]`;
//! every arrival direction is mapped to its surface point by the exact
//! focus-to-surface ray intersection, kept when the point's departure azimuth
//! is inside the beam, and the surviving density is renormalized.

use std::f64::consts::PI;
use thiserror::Error;

use crate::curve::{CurveError, CurveSeries};
use crate::exec;
use crate::geometry::{self, GeometryError, Point3};
use crate::quadrature::GaussLegendre;
use crate::scenario::{ScenarioError, ValidatedScenario};

#[derive(Debug, Error)]
pub enum AoaError {
    #[error("beamwidth {0} rad outside (0, pi]")]
    DegenerateBeamwidth(f64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Marginal arrival-azimuth density of the tap-`l` ellipsoid population,
/// sampled on `n_points` azimuths over `[-pi, pi)`.
///
/// Without a beamwidth this is the plain elevation marginal. With a beamwidth
/// the density is truncated to the illuminated surface region (departure
/// azimuth within the beam) and renormalized; the full beam `bw = pi` is
/// identical to no truncation.
pub fn marginal_aoa_pdf(
    scenario: &ValidatedScenario,
    tap: usize,
    beamwidth: Option<f64>,
    n_points: usize,
) -> Result<CurveSeries, AoaError> {
    if let Some(bw) = beamwidth {
        if !(bw > 0.0 && bw <= PI) {
            return Err(AoaError::DegenerateBeamwidth(bw));
        }
    }
    let spec = *scenario.ellipsoid_population(tap)?;
    let vmf = spec.vmf;
    let mr0 = geometry::mr_center(scenario, 0.0);

    // Arrival directions with beta < 0 cannot see the semi-ellipsoid, so the
    // joint density folds onto beta in [0, pi/2].
    let folded = move |alpha: f64, beta: f64| {
        vmf.pdf_unchecked(alpha, beta) + vmf.pdf_unchecked(alpha, -beta)
    };
    let illuminated = |alpha: f64, beta: f64| -> Result<bool, AoaError> {
        let Some(bw) = beamwidth else {
            return Ok(true);
        };
        if bw >= PI {
            return Ok(true);
        }
        let dir = Point3::new(
            beta.cos() * alpha.cos(),
            beta.cos() * alpha.sin(),
            beta.sin(),
        );
        let s = geometry::ray_ellipsoid_intersection(mr0, dir, scenario, tap)?;
        let departure_azimuth = s.y.atan2(s.x);
        Ok(departure_azimuth.abs() <= bw)
    };

    let beta_rule = GaussLegendre::new(256);
    let marginal_at = |alpha: f64| -> Result<f64, AoaError> {
        let mut acc = 0.0;
        for (x, w) in beta_rule.nodes.iter().zip(&beta_rule.weights) {
            let beta = PI / 4.0 * (1.0 + x);
            if illuminated(alpha, beta)? {
                acc += folded(alpha, beta) * w;
            }
        }
        Ok(acc * PI / 4.0)
    };

    let n = n_points.max(16);
    let x: Vec<f64> = (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect();
    let raw = exec::map_collect(n, |i| marginal_at(x[i]))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    // Normalization mass of the (possibly truncated) joint density on a dense
    // azimuth grid; the emitted curve then genuinely integrates to one.
    let mass = {
        let nz = 4096;
        let da = 2.0 * PI / nz as f64;
        let col = exec::map_collect(nz, |i| marginal_at(-PI + (i as f64 + 0.5) * da))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        col.iter().sum::<f64>() * da
    };
    let values: Vec<f64> = raw.iter().map(|v| v / mass).collect();

    Ok(CurveSeries::real("alpha_r", "rad", "pdf", x, values)?
        .with_meta("scenario_hash", scenario.scenario_hash())
        .with_meta("tap", tap.to_string())
        .with_meta(
            "beamwidth",
            beamwidth.map_or("none".to_string(), |b| b.to_string()),
        )
        .with_meta("method", "quadrature"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature;
    use crate::scenario::{load_preset, load_validated_preset, Preset, ValidateOptions};
    use approx::assert_abs_diff_eq;

    fn validated(cfg: crate::scenario::ScenarioConfig) -> ValidatedScenario {
        cfg.validate(ValidateOptions {
            allow_tdl_violation: true,
        })
        .unwrap()
    }

    fn values(c: &CurveSeries) -> &[f64] {
        match &c.values {
            crate::curve::Values::Real(v) => v,
            _ => unreachable!(),
        }
    }

    #[test]
    fn isotropic_marginal_is_uniform() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.populations.ellipsoids[0].vmf.k = 0.0;
        let sc = validated(cfg);
        let curve = marginal_aoa_pdf(&sc, 1, None, 64).unwrap();
        for v in values(&curve) {
            assert_abs_diff_eq!(*v, 1.0 / (2.0 * PI), epsilon = 1e-9);
        }
    }

    #[test]
    fn marginal_integrates_to_one() {
        let sc = load_validated_preset(Preset::Tap1Highway);
        for bw in [None, Some(PI / 3.0), Some(PI / 8.0)] {
            let curve = marginal_aoa_pdf(&sc, 1, bw, 256).unwrap();
            // Closed trapezoid over the periodic domain.
            let mut x = curve.x.clone();
            let mut v = values(&curve).to_vec();
            x.push(PI);
            v.push(v[0]);
            let integral = quadrature::trapezoid(&x, &v);
            assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn full_beam_matches_unrestricted() {
        let sc = load_validated_preset(Preset::Tap1Urban);
        let free = marginal_aoa_pdf(&sc, 1, None, 128).unwrap();
        let beam = marginal_aoa_pdf(&sc, 1, Some(PI), 128).unwrap();
        for (a, b) in values(&free).iter().zip(values(&beam)) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }

    #[test]
    fn wider_road_lifts_broadside_arrivals() {
        // Doubling the road half-width widens the illuminated surface band,
        // so the beam-restricted arrival density gains mass on the broadside
        // arc [pi/3, 2pi/3].
        let curve_for = |b1: f64| {
            let mut cfg = load_preset(Preset::Tap1Highway);
            let f0 = cfg.f0;
            cfg.a[0] = (f0 * f0 + b1 * b1).sqrt();
            cfg.u[0] = b1;
            cfg.populations.ellipsoids[0].vmf.k = 0.0;
            let sc = validated(cfg);
            marginal_aoa_pdf(&sc, 1, Some(PI / 4.0), 180).unwrap()
        };
        let narrow = curve_for(40.0);
        let wide = curve_for(80.0);
        for (i, x) in narrow.x.iter().enumerate() {
            if *x >= PI / 3.0 && *x <= 2.0 * PI / 3.0 {
                assert!(
                    values(&wide)[i] > values(&narrow)[i],
                    "at alpha_R = {x}: wide {} <= narrow {}",
                    values(&wide)[i],
                    values(&narrow)[i]
                );
            }
        }
    }

    #[test]
    fn degenerate_beamwidth_rejected() {
        let sc = load_validated_preset(Preset::Tap1Highway);
        assert!(matches!(
            marginal_aoa_pdf(&sc, 1, Some(0.0), 64),
            Err(AoaError::DegenerateBeamwidth(_))
        ));
        assert!(marginal_aoa_pdf(&sc, 1, Some(4.0), 64).is_err());
    }

    #[test]
    fn beam_restricted_marginal_is_even_for_symmetric_geometry() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.populations.ellipsoids[0].vmf.alpha0 = 0.0;
        cfg.populations.ellipsoids[0].vmf.beta0 = 0.0;
        let sc = validated(cfg);
        let curve = marginal_aoa_pdf(&sc, 1, Some(PI / 4.0), 128).unwrap();
        let v = values(&curve);
        let n = v.len();
        // Grid spans [-pi, pi): index i and n - i mirror each other.
        for i in 1..n / 2 {
            assert_abs_diff_eq!(v[i], v[n - i], epsilon = 1e-9);
        }
    }
}
