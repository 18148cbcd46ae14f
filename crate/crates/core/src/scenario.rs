//! Scenario configuration, validation and presets.
//!
//! A scenario fixes the two-cylinder + confocal semi-ellipsoid geometry, the
//! relative motion of the receiver, the antenna arrays, the per-tap energy
//! split and the angular densities of every scatterer population. Validation
//! checks the physical and normalization constraints once; the returned
//! [`ValidatedScenario`] is immutable and safe to share across workers.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

use crate::vmf::VonMisesFisher;
use crate::SPEED_OF_LIGHT;

/// Energy split of the first tap: two cylinder bounces, the first-ellipsoid
/// bounce and the cylinder-to-cylinder double bounce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap1Energies {
    pub sb11: f64,
    pub sb12: f64,
    pub sb13: f64,
    pub db: f64,
}

impl Tap1Energies {
    pub fn sum(&self) -> f64 {
        self.sb11 + self.sb12 + self.sb13 + self.db
    }
}

/// Energy split of tap l >= 2: ellipsoid single bounce plus the two combined
/// cylinder/ellipsoid double bounces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapLEnergies {
    pub sb_l3: f64,
    pub db_l1: f64,
    pub db_l2: f64,
}

impl TapLEnergies {
    pub fn sum(&self) -> f64 {
        self.sb_l3 + self.db_l1 + self.db_l2
    }
}

/// Angular density of one scatterer population.
///
/// `collapse_elevation` restricts the population to the azimuth plane
/// (elevation identically zero with a von Mises azimuth density), which is the
/// degenerate 2D limit used for Clarke-spectrum checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub vmf: VonMisesFisher,
    #[serde(default)]
    pub collapse_elevation: bool,
}

impl PopulationSpec {
    pub fn new(alpha0: f64, beta0: f64, k: f64) -> Self {
        Self {
            vmf: VonMisesFisher { alpha0, beta0, k },
            collapse_elevation: false,
        }
    }
}

/// Per-population angular densities. Cylinder populations are parameterized in
/// their natural frames: departure angles for the transmit cylinder and the
/// ellipsoids, arrival angles for the receive cylinder. Ground scatterers use
/// only the azimuth marginal of their density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub t_cyl: PopulationSpec,
    pub r_cyl: PopulationSpec,
    pub ellipsoids: Vec<PopulationSpec>,
    pub ground: PopulationSpec,
}

/// Ground-reflection add-on: antenna heights and the energy share of the
/// ground-bounced rays (modeled on top of the per-tap splits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundConfig {
    pub h_t: f64,
    pub h_r: f64,
    pub eta_sb_g: f64,
}

/// Full model parameterization. Distances in meters, angles in radians,
/// frequencies in Hz, speeds in m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Distance between the MT and MR cylinder centers, `d = 2 * f0`.
    pub d: f64,
    /// Half focal distance of the confocal ellipsoid family.
    pub f0: f64,
    /// Semi-major axis of each tap's ellipsoid, strictly increasing.
    pub a: Vec<f64>,
    /// Vertical semi-axis of each tap's ellipsoid.
    pub u: Vec<f64>,
    /// Cylinder radius around the MT.
    pub r_t: f64,
    /// Cylinder radius around the MR.
    pub r_r: f64,
    /// Carrier frequency.
    pub f_c: f64,
    /// Signal bandwidth; sets the delay resolution.
    pub bandwidth: f64,
    /// Relative MR speed.
    pub v_r: f64,
    /// Relative MR moving direction.
    pub gamma_r: f64,
    /// Maximum Doppler frequency (stored, never derived).
    pub f_max: f64,
    /// Antenna element counts.
    pub m_t: usize,
    pub m_r: usize,
    /// Element spacings.
    pub delta_t: f64,
    pub delta_r: f64,
    /// Array orientations: azimuth relative to the x axis, elevation relative
    /// to the x-y plane.
    pub psi_t: f64,
    pub theta_t: f64,
    pub psi_r: f64,
    pub theta_r: f64,
    /// LoS-to-scatter power ratio (Ricean factor Omega).
    pub ricean_factor: f64,
    pub energy_tap1: Tap1Energies,
    /// One entry per tap l >= 2.
    pub energy_tapl: Vec<TapLEnergies>,
    pub populations: Populations,
    /// LoS arrival azimuth/elevation at the MR.
    pub alpha_r_los: f64,
    pub beta_r_los: f64,
    #[serde(default)]
    pub ground: Option<GroundConfig>,
    /// Per-tap attenuation weights, default all one.
    pub tap_weights: Vec<f64>,
}

/// Geometry derived for one tap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapGeometry {
    /// 1-based tap index.
    pub l: usize,
    pub a_l: f64,
    pub b_l: f64,
    pub u_l: f64,
    /// Tap delay: `d/c` for the first tap, then `2 (a_l - a_1) / c` extra.
    pub tau_l: f64,
    /// Inverse bandwidth.
    pub delay_resolution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub constraint: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.constraint, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario ({} constraint violation{}):\n{}",
        .issues.len(),
        if .issues.len() == 1 { "" } else { "s" },
        .issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid { issues: Vec<ValidationIssue> },
    #[error("tap index {l} out of range 1..={taps}")]
    TapOutOfRange { l: usize, taps: usize },
    #[error("unknown preset '{0}' (expected tap1-highway, tap1-urban, tap2-highway or tap2-urban)")]
    UnknownPreset(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Validation behavior switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Downgrade a violated TDL separability constraint to a warning. Always
    /// implied when loading the built-in presets, whose published radii
    /// violate the constraint.
    pub allow_tdl_violation: bool,
}

/// A scenario that passed validation, together with any warnings raised.
#[derive(Debug, Clone)]
pub struct ValidatedScenario {
    cfg: ScenarioConfig,
    warnings: Vec<ValidationIssue>,
}

const ENERGY_TOL: f64 = 1e-9;

impl ScenarioConfig {
    /// Number of configured taps.
    pub fn taps(&self) -> usize {
        self.a.len()
    }

    /// Carrier wavelength.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    /// Validate all type invariants plus the TDL constraints.
    pub fn validate(self, opts: ValidateOptions) -> Result<ValidatedScenario, ScenarioError> {
        let mut issues = Vec::new();
        let mut warnings = Vec::new();
        let mut check = |ok: bool, constraint: &str, message: String| {
            if !ok {
                issues.push(ValidationIssue {
                    constraint: constraint.to_string(),
                    message,
                });
            }
        };

        check(
            (self.d - 2.0 * self.f0).abs() <= 1e-9 * self.d.abs().max(1.0),
            "focal distance",
            format!("d = {} must equal 2*f0 = {}", self.d, 2.0 * self.f0),
        );
        check(!self.a.is_empty(), "taps", "at least one tap required".into());
        check(
            self.u.len() == self.a.len(),
            "vertical semi-axes",
            format!("u has {} entries for {} taps", self.u.len(), self.a.len()),
        );
        check(
            self.tap_weights.len() == self.a.len(),
            "tap weights",
            format!(
                "tap_weights has {} entries for {} taps",
                self.tap_weights.len(),
                self.a.len()
            ),
        );
        check(
            self.populations.ellipsoids.len() == self.a.len(),
            "ellipsoid populations",
            format!(
                "{} ellipsoid populations for {} taps",
                self.populations.ellipsoids.len(),
                self.a.len()
            ),
        );
        for (i, w) in self.a.windows(2).enumerate() {
            check(
                w[1] > w[0],
                "semi-major ordering",
                format!("a must increase strictly: a_{} = {} >= a_{} = {}", i + 1, w[0], i + 2, w[1]),
            );
        }
        for (i, &al) in self.a.iter().enumerate() {
            check(
                al > self.f0,
                "semi-major versus focus",
                format!("a_{} = {} must exceed f0 = {} (b_l would be degenerate)", i + 1, al, self.f0),
            );
        }
        for (i, &ul) in self.u.iter().enumerate() {
            check(ul > 0.0, "vertical semi-axis", format!("u_{} = {} must be positive", i + 1, ul));
        }
        check(self.r_t >= 0.0, "radius", format!("r_t = {} must be non-negative", self.r_t));
        check(self.r_r >= 0.0, "radius", format!("r_r = {} must be non-negative", self.r_r));
        check(self.f_c > 0.0, "carrier", format!("f_c = {} must be positive", self.f_c));
        check(self.bandwidth > 0.0, "bandwidth", format!("bandwidth = {} must be positive", self.bandwidth));
        check(self.v_r >= 0.0, "speed", format!("v_r = {} must be non-negative", self.v_r));
        check(self.f_max >= 0.0, "doppler", format!("f_max = {} must be non-negative", self.f_max));
        check(self.m_t >= 1, "array size", format!("m_t = {} must be >= 1", self.m_t));
        check(self.m_r >= 1, "array size", format!("m_r = {} must be >= 1", self.m_r));
        check(self.delta_t >= 0.0, "spacing", format!("delta_t = {} must be non-negative", self.delta_t));
        check(self.delta_r >= 0.0, "spacing", format!("delta_r = {} must be non-negative", self.delta_r));
        check(
            self.ricean_factor >= 0.0,
            "ricean factor",
            format!("ricean_factor = {} must be non-negative", self.ricean_factor),
        );

        let e1 = &self.energy_tap1;
        for (name, v) in [
            ("sb11", e1.sb11),
            ("sb12", e1.sb12),
            ("sb13", e1.sb13),
            ("db", e1.db),
        ] {
            check(v >= 0.0, "energy", format!("tap-1 energy {name} = {v} must be non-negative"));
        }
        check(
            (e1.sum() - 1.0).abs() <= ENERGY_TOL,
            "energy sum",
            format!("tap-1 energies sum to {} (expected 1 within {ENERGY_TOL:.0e})", e1.sum()),
        );
        check(
            self.energy_tapl.len() + 1 == self.a.len().max(1),
            "energy taps",
            format!(
                "energy_tapl has {} entries for {} taps",
                self.energy_tapl.len(),
                self.a.len()
            ),
        );
        for (i, el) in self.energy_tapl.iter().enumerate() {
            for (name, v) in [("sb_l3", el.sb_l3), ("db_l1", el.db_l1), ("db_l2", el.db_l2)] {
                check(
                    v >= 0.0,
                    "energy",
                    format!("tap-{} energy {name} = {v} must be non-negative", i + 2),
                );
            }
            check(
                (el.sum() - 1.0).abs() <= ENERGY_TOL,
                "energy sum",
                format!(
                    "tap-{} energies sum to {} (expected 1 within {ENERGY_TOL:.0e})",
                    i + 2,
                    el.sum()
                ),
            );
        }
        for (label, spec) in self.population_iter() {
            check(
                spec.vmf.k >= 0.0 && spec.vmf.k.is_finite(),
                "concentration",
                format!("population {label} has invalid k = {}", spec.vmf.k),
            );
        }
        if let Some(g) = &self.ground {
            check(g.h_t >= 0.0, "ground", format!("h_t = {} must be non-negative", g.h_t));
            check(g.h_r >= 0.0, "ground", format!("h_r = {} must be non-negative", g.h_r));
            check(
                g.eta_sb_g >= 0.0,
                "ground",
                format!("eta_sb_g = {} must be non-negative", g.eta_sb_g),
            );
        }

        // TDL structure: double bounces of tap 1 must stay shorter than the
        // next ellipsoid, and adjacent taps must be separable by the signal
        // bandwidth.
        if self.a.len() >= 2 {
            let min_gap = self
                .a
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            let max_r = self.r_t.max(self.r_r);
            let tau_gap = 2.0 * min_gap / SPEED_OF_LIGHT;
            check(
                tau_gap >= 1.0 / self.bandwidth,
                "delay resolution",
                format!(
                    "inter-tap delay {:.3e} s is below the delay resolution {:.3e} s",
                    tau_gap,
                    1.0 / self.bandwidth
                ),
            );
            drop(check);
            if max_r >= min_gap {
                let issue = ValidationIssue {
                    constraint: "tdl separability".into(),
                    message: format!(
                        "max(r_t, r_r) = {max_r} must be smaller than the minimum inter-tap gap {min_gap}"
                    ),
                };
                if opts.allow_tdl_violation {
                    warnings.push(issue);
                } else {
                    issues.push(issue);
                }
            }
        }

        if issues.is_empty() {
            Ok(ValidatedScenario {
                cfg: self,
                warnings,
            })
        } else {
            Err(ScenarioError::Invalid { issues })
        }
    }

    fn population_iter(&self) -> Vec<(String, &PopulationSpec)> {
        let mut v = vec![
            ("t_cyl".to_string(), &self.populations.t_cyl),
            ("r_cyl".to_string(), &self.populations.r_cyl),
            ("ground".to_string(), &self.populations.ground),
        ];
        for (i, e) in self.populations.ellipsoids.iter().enumerate() {
            v.push((format!("ellipsoid_{}", i + 1), e));
        }
        v
    }
}

impl ValidatedScenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn warnings(&self) -> &[ValidationIssue] {
        &self.warnings
    }

    pub fn taps(&self) -> usize {
        self.cfg.taps()
    }

    pub fn wavelength(&self) -> f64 {
        self.cfg.wavelength()
    }

    /// Minor horizontal semi-axis `sqrt(a_l^2 - f0^2)` of tap `l` (1-based).
    pub fn b(&self, l: usize) -> Result<f64, ScenarioError> {
        let a_l = self.tap_a(l)?;
        Ok((a_l * a_l - self.cfg.f0 * self.cfg.f0).sqrt())
    }

    fn tap_a(&self, l: usize) -> Result<f64, ScenarioError> {
        self.cfg
            .a
            .get(l.wrapping_sub(1))
            .copied()
            .ok_or(ScenarioError::TapOutOfRange {
                l,
                taps: self.cfg.taps(),
            })
    }

    /// Derived geometry of tap `l` (1-based).
    pub fn tap_geometry(&self, l: usize) -> Result<TapGeometry, ScenarioError> {
        let a_l = self.tap_a(l)?;
        let b_l = self.b(l)?;
        let u_l = self.cfg.u[l - 1];
        let tau_l = self.cfg.d / SPEED_OF_LIGHT + 2.0 * (a_l - self.cfg.a[0]) / SPEED_OF_LIGHT;
        Ok(TapGeometry {
            l,
            a_l,
            b_l,
            u_l,
            tau_l,
            delay_resolution: 1.0 / self.cfg.bandwidth,
        })
    }

    /// Angular spec of the tap-`l` ellipsoid population.
    pub fn ellipsoid_population(&self, l: usize) -> Result<&PopulationSpec, ScenarioError> {
        self.cfg
            .populations
            .ellipsoids
            .get(l.wrapping_sub(1))
            .ok_or(ScenarioError::TapOutOfRange {
                l,
                taps: self.cfg.taps(),
            })
    }

    /// Stable digest of the resolved configuration.
    pub fn scenario_hash(&self) -> String {
        let canonical = toml::to_string(&self.cfg).expect("config is serializable");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// The four built-in measurement-campaign presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Tap1Highway,
    Tap1Urban,
    Tap2Highway,
    Tap2Urban,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Tap1Highway,
        Preset::Tap1Urban,
        Preset::Tap2Highway,
        Preset::Tap2Urban,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Tap1Highway => "tap1-highway",
            Preset::Tap1Urban => "tap1-urban",
            Preset::Tap2Highway => "tap2-highway",
            Preset::Tap2Urban => "tap2-urban",
        }
    }

    pub fn parse(name: &str) -> Result<Preset, ScenarioError> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == name)
            .ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))
    }

    /// The default tap the CLI operates on for this preset.
    pub fn default_tap(&self) -> usize {
        match self {
            Preset::Tap1Highway | Preset::Tap1Urban => 1,
            Preset::Tap2Highway | Preset::Tap2Urban => 2,
        }
    }

    fn is_highway(&self) -> bool {
        matches!(self, Preset::Tap1Highway | Preset::Tap2Highway)
    }
}

/// Load one of the published preset parameterizations.
///
/// Values not fixed by the published table (array size and spacing, moving
/// direction, vertical semi-axes, population mean angles) take the defaults
/// the simulation figures use: two-element arrays at one-wavelength spacing,
/// `gamma_r = pi/3`, prolate ellipsoids (`u_l = b_l`) and mean scatter
/// directions broadside at the cylinders / along-road at the ellipsoids.
pub fn load_preset(preset: Preset) -> ScenarioConfig {
    let f_c = 5.4e9;
    let wavelength = SPEED_OF_LIGHT / f_c;
    let f0: f64 = 100.0;
    let a = vec![120.0, 140.0];
    let u: Vec<f64> = a.iter().map(|al| (al * al - f0 * f0).sqrt()).collect();

    let (r, v_r, f_max, ricean, e1, el, ks) = if preset.is_highway() {
        (
            40.0,
            25.0,
            433.0,
            3.942,
            Tap1Energies {
                sb11: 0.371,
                sb12: 0.212,
                sb13: 0.402,
                db: 0.015,
            },
            TapLEnergies {
                sb_l3: 0.724,
                db_l1: 0.138,
                db_l2: 0.138,
            },
            (8.9, 2.7, 12.3),
        )
    } else {
        (
            20.0,
            8.3,
            144.0,
            1.062,
            Tap1Energies {
                sb11: 0.142,
                sb12: 0.142,
                sb13: 0.085,
                db: 0.631,
            },
            TapLEnergies {
                sb_l3: 0.056,
                db_l1: 0.472,
                db_l2: 0.472,
            },
            (0.55, 1.21, 12.3),
        )
    };

    ScenarioConfig {
        d: 200.0,
        f0,
        a,
        u,
        r_t: r,
        r_r: r,
        f_c,
        bandwidth: 50.0e6,
        v_r,
        gamma_r: PI / 3.0,
        f_max,
        m_t: 2,
        m_r: 2,
        delta_t: wavelength,
        delta_r: wavelength,
        psi_t: PI / 3.0,
        theta_t: PI / 3.0,
        psi_r: PI / 3.0,
        theta_r: PI / 3.0,
        ricean_factor: ricean,
        energy_tap1: e1,
        energy_tapl: vec![el],
        populations: Populations {
            t_cyl: PopulationSpec::new(PI / 2.0, 0.0, ks.0),
            r_cyl: PopulationSpec::new(PI / 2.0, 0.0, ks.1),
            ellipsoids: vec![
                PopulationSpec::new(0.0, 0.0, ks.2),
                PopulationSpec::new(0.0, 0.0, ks.2),
            ],
            ground: PopulationSpec::new(0.0, 0.0, 0.0),
        },
        alpha_r_los: PI,
        beta_r_los: 0.0,
        ground: None,
        tap_weights: vec![1.0, 1.0],
    }
}

/// Load and validate a preset (TDL separability violations become warnings).
pub fn load_validated_preset(preset: Preset) -> ValidatedScenario {
    load_preset(preset)
        .validate(ValidateOptions {
            allow_tdl_violation: true,
        })
        .expect("presets validate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn presets_load_with_published_values() {
        let hw = load_preset(Preset::Tap1Highway);
        assert_eq!(hw.d, 200.0);
        assert_eq!(hw.a, vec![120.0, 140.0]);
        assert_eq!(hw.f_c, 5.4e9);
        assert_eq!(hw.r_t, 40.0);
        assert_eq!(hw.v_r, 25.0);
        assert_eq!(hw.f_max, 433.0);
        assert_eq!(hw.ricean_factor, 3.942);
        assert_eq!(
            hw.energy_tap1,
            Tap1Energies {
                sb11: 0.371,
                sb12: 0.212,
                sb13: 0.402,
                db: 0.015
            }
        );
        assert_eq!(hw.populations.t_cyl.vmf.k, 8.9);
        assert_eq!(hw.populations.r_cyl.vmf.k, 2.7);
        assert_eq!(hw.populations.ellipsoids[0].vmf.k, 12.3);

        let urbun2 = load_preset(Preset::Tap2Urban);
        assert_eq!(
            urbun2.energy_tapl[0],
            TapLEnergies {
                sb_l3: 0.056,
                db_l1: 0.472,
                db_l2: 0.472
            }
        );
        assert_eq!(load_preset(Preset::Tap1Urban).ricean_factor, 1.062);
    }

    #[test]
    fn preset_energy_sums_are_unity() {
        for p in Preset::ALL {
            let cfg = load_preset(p);
            assert_abs_diff_eq!(cfg.energy_tap1.sum(), 1.0, epsilon = 1e-9);
            for el in &cfg.energy_tapl {
                assert_abs_diff_eq!(el.sum(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn presets_validate_with_tdl_warning() {
        for p in Preset::ALL {
            let v = load_validated_preset(p);
            // Published radii (40 or 20) violate max(r) < a_2 - a_1 = 20 in
            // the highway case only.
            if p.is_highway() {
                assert!(
                    v.warnings().iter().any(|w| w.constraint == "tdl separability"),
                    "{} should warn",
                    p.name()
                );
            }
        }
        // Without the loophole the highway preset is rejected.
        assert!(load_preset(Preset::Tap1Highway)
            .validate(ValidateOptions::default())
            .is_err());
    }

    #[test]
    fn energy_sum_violation_is_an_error() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.energy_tap1.db = 0.02; // sum = 1.005
        let err = cfg
            .validate(ValidateOptions {
                allow_tdl_violation: true,
            })
            .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("energy sum"), "got: {text}");
        assert!(text.contains("1.005"), "got: {text}");
    }

    #[test]
    fn degenerate_ellipse_is_an_error() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.a[0] = 100.0; // = f0
        let err = cfg
            .validate(ValidateOptions {
                allow_tdl_violation: true,
            })
            .unwrap_err();
        assert!(err.to_string().contains("must exceed f0"));
    }

    #[test]
    fn tap_geometry_matches_published_identities() {
        let v = load_validated_preset(Preset::Tap1Highway);
        let g1 = v.tap_geometry(1).unwrap();
        assert_relative_eq!(g1.b_l, 4400.0f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(g1.b_l, 66.332, max_relative = 1e-4);
        assert_relative_eq!(g1.tau_l, 200.0 / 3.0e8, max_relative = 1e-12);
        let g2 = v.tap_geometry(2).unwrap();
        assert_relative_eq!(g2.tau_l - g1.tau_l, 2.0 * 20.0 / 3.0e8, max_relative = 1e-12);
        assert!(v.tap_geometry(3).is_err());
        assert!(g2.tau_l > g1.tau_l);
    }

    #[test]
    fn semi_axis_identity_at_root_two() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.a = vec![100.0 * 2.0f64.sqrt(), 200.0];
        cfg.u = vec![10.0, 12.0];
        let v = cfg
            .validate(ValidateOptions {
                allow_tdl_violation: true,
            })
            .unwrap();
        assert_relative_eq!(v.b(1).unwrap(), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn scenario_hash_is_stable_and_sensitive() {
        let v1 = load_validated_preset(Preset::Tap1Highway);
        let v2 = load_validated_preset(Preset::Tap1Highway);
        assert_eq!(v1.scenario_hash(), v2.scenario_hash());
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.v_r = 26.0;
        let v3 = cfg
            .validate(ValidateOptions {
                allow_tdl_violation: true,
            })
            .unwrap();
        assert_ne!(v1.scenario_hash(), v3.scenario_hash());
    }

    #[test]
    fn unknown_preset_name_rejected() {
        assert!(matches!(
            Preset::parse("tap3-desert"),
            Err(ScenarioError::UnknownPreset(_))
        ));
    }
}
