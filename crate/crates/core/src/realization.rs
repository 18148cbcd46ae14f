//! Finite-scatterer (sum-of-sinusoids) channel realization.
//!
//! Draws one scatterer set per population from the configured angular
//! densities, attaches an i.i.d. uniform phase to every scatterer (switchable
//! off for literal-equation studies) and sums per-ray phasors into the
//! complex tap coefficients
//!
//! ```text
//! h(t) = sum_rays amp * exp(-j 2 pi f_c xi(t) / c + j phi + j 2 pi t f_d)
//! ```
//!
//! with `f_d = f_max cos(alpha_R - gamma_R) cos(beta_R)` evaluated at the
//! scatterer's time-zero arrival direction. Amplitude prefactors follow the
//! tap energy split, so the ensemble-average tap power is exactly one.
//! Double-bounce ray sets default to random pairing of the two populations
//! (O(N) rays, slightly higher finite-N variance); the full product is
//! available for small ensembles.
//!
//! Everything is deterministic in `(config, seed)`: sub-streams are derived
//! with a fixed stream-id table and per-sample sums run in index order.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;
use thiserror::Error;

use crate::curve::{CurveSeries, CurveError};
use crate::exec;
use crate::geometry::{
    self, arrival_angles, scatterer_position, ElementPair, GeometryError, PathModel, Point3,
    Population, RayClass,
};
use crate::scenario::{ScenarioError, ValidatedScenario};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error)]
pub enum RealizationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("ensemble counts must be >= 1")]
    EmptyEnsemble,
    #[error("tap {0} is not configured")]
    UnknownTap(usize),
    #[error("scenario has no ground configuration")]
    MissingGround,
    #[error("duplicate tap index {0} in TDL assembly")]
    DuplicateTap(usize),
    #[error("taps must share one time grid")]
    GridMismatch,
    #[error("tap weight list has {got} entries, need {need}")]
    WeightMismatch { got: usize, need: usize },
}

/// Scatterer counts per population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleCounts {
    pub t_cyl: usize,
    pub r_cyl: usize,
    /// Count per ellipsoid (every configured tap gets its own set).
    pub ellipsoid: usize,
    pub ground: usize,
}

impl EnsembleCounts {
    pub fn uniform(n: usize) -> Self {
        Self {
            t_cyl: n,
            r_cyl: n,
            ellipsoid: n,
            ground: n,
        }
    }
}

/// Double-bounce ray enumeration strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DbPairing {
    /// Random one-to-one pairing of the two populations: O(N) rays.
    #[default]
    Random,
    /// Every scatterer pair: O(N^2) rays, exact but expensive.
    FullProduct,
}

/// Realization switches.
#[derive(Debug, Clone, Copy)]
pub struct RealizationOptions {
    pub path_model: PathModel,
    /// Attach an i.i.d. uniform phase per scatterer. Disabling reproduces the
    /// printed equations literally but loses the complex-Gaussian limit.
    pub random_phase: bool,
    pub db_pairing: DbPairing,
}

impl Default for RealizationOptions {
    fn default() -> Self {
        Self {
            path_model: PathModel::Exact,
            random_phase: true,
            db_pairing: DbPairing::Random,
        }
    }
}

/// One population draw: population-frame angles, per-scatterer phases and the
/// time-zero arrival directions feeding the Doppler term.
#[derive(Debug, Clone)]
pub struct PopulationDraw {
    pub angles: Vec<(f64, f64)>,
    pub phases: Vec<f64>,
    pub arrival0: Vec<(f64, f64)>,
}

impl PopulationDraw {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// A full scatterer ensemble for one seed.
#[derive(Debug, Clone)]
pub struct ScattererEnsemble {
    pub seed: u64,
    pub counts: EnsembleCounts,
    pub t_cyl: PopulationDraw,
    pub r_cyl: PopulationDraw,
    pub ellipsoids: Vec<PopulationDraw>,
    pub ground: Option<PopulationDraw>,
    /// Pair index maps for the random-pairing double-bounce mode.
    pub pair_cyl_cyl: Vec<(usize, usize)>,
    pub pair_tcyl_ell: Vec<Vec<(usize, usize)>>,
    pub pair_ell_rcyl: Vec<Vec<(usize, usize)>>,
}

/// Stream-id table for sub-seed derivation.
mod stream {
    pub const ANGLES: u64 = 0x10;
    pub const PHASES: u64 = 0x20;
    pub const PAIRING: u64 = 0x30;
    pub const POP_T_CYL: u64 = 0;
    pub const POP_R_CYL: u64 = 1;
    pub const POP_GROUND: u64 = 2;
    pub const POP_ELL_BASE: u64 = 3;
}

fn stream_rng(seed: u64, kind: u64, pop: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((kind << 32) | pop);
    rng
}

fn draw_population(
    scenario: &ValidatedScenario,
    pop: Population,
    n: usize,
    seed: u64,
    stream_pop: u64,
) -> Result<PopulationDraw, RealizationError> {
    let spec = match pop {
        Population::TransmitCylinder => scenario.config().populations.t_cyl,
        Population::ReceiveCylinder => scenario.config().populations.r_cyl,
        Population::Ellipsoid(l) => *scenario.ellipsoid_population(l)?,
        Population::Ground => scenario.config().populations.ground,
    };
    let mut rng = stream_rng(seed, stream::ANGLES, stream_pop);
    let mut angles = spec.vmf.sample_with(&mut rng, n);
    for (alpha, beta) in angles.iter_mut() {
        if matches!(pop, Population::Ellipsoid(_)) {
            // Semi-ellipsoid: fold onto the upper half space.
            *beta = beta.abs();
        }
        if spec.collapse_elevation || matches!(pop, Population::Ground) {
            *beta = 0.0;
        }
        let _ = alpha;
    }
    let mut phase_rng = stream_rng(seed, stream::PHASES, stream_pop);
    let phases = (0..n).map(|_| phase_rng.gen::<f64>() * 2.0 * PI).collect();
    let arrival0 = angles
        .iter()
        .map(|&(alpha, beta)| {
            let s = scatterer_position(pop, alpha, beta, scenario, 0.0)?;
            match pop {
                // Receive-cylinder angles are arrival angles by construction
                // and ride with the MR.
                Population::ReceiveCylinder => Ok((alpha, beta)),
                Population::Ground => {
                    let g = scenario.config().ground.ok_or(RealizationError::MissingGround)?;
                    let mr = geometry::mr_center(scenario, 0.0) + Point3::new(0.0, 0.0, g.h_r);
                    let v = s - mr;
                    Ok(v.to_angles())
                }
                _ => Ok(arrival_angles(s, scenario, 0.0)?),
            }
        })
        .collect::<Result<Vec<_>, RealizationError>>()?;
    Ok(PopulationDraw {
        angles,
        phases,
        arrival0,
    })
}

fn random_pairs(n_a: usize, n_b: usize, seed: u64, pop_tag: u64) -> Vec<(usize, usize)> {
    let n = n_a.min(n_b);
    let mut rng = stream_rng(seed, stream::PAIRING, pop_tag);
    let mut right: Vec<usize> = (0..n_b).collect();
    right.shuffle(&mut rng);
    (0..n).map(|i| (i, right[i])).collect()
}

/// Draw a deterministic scatterer ensemble.
pub fn build_ensemble(
    scenario: &ValidatedScenario,
    counts: EnsembleCounts,
    seed: u64,
) -> Result<ScattererEnsemble, RealizationError> {
    if counts.t_cyl == 0 || counts.r_cyl == 0 || counts.ellipsoid == 0 {
        return Err(RealizationError::EmptyEnsemble);
    }
    let t_cyl = draw_population(
        scenario,
        Population::TransmitCylinder,
        counts.t_cyl,
        seed,
        stream::POP_T_CYL,
    )?;
    let r_cyl = draw_population(
        scenario,
        Population::ReceiveCylinder,
        counts.r_cyl,
        seed,
        stream::POP_R_CYL,
    )?;
    let taps = scenario.taps();
    let mut ellipsoids = Vec::with_capacity(taps);
    for l in 1..=taps {
        ellipsoids.push(draw_population(
            scenario,
            Population::Ellipsoid(l),
            counts.ellipsoid,
            seed,
            stream::POP_ELL_BASE + l as u64,
        )?);
    }
    let ground = if scenario.config().ground.is_some() && counts.ground > 0 {
        Some(draw_population(
            scenario,
            Population::Ground,
            counts.ground,
            seed,
            stream::POP_GROUND,
        )?)
    } else {
        None
    };
    let pair_cyl_cyl = random_pairs(counts.t_cyl, counts.r_cyl, seed, 0);
    let pair_tcyl_ell = (1..=taps)
        .map(|l| random_pairs(counts.t_cyl, counts.ellipsoid, seed, 100 + l as u64))
        .collect();
    let pair_ell_rcyl = (1..=taps)
        .map(|l| random_pairs(counts.ellipsoid, counts.r_cyl, seed, 200 + l as u64))
        .collect();
    Ok(ScattererEnsemble {
        seed,
        counts,
        t_cyl,
        r_cyl,
        ellipsoids,
        ground,
        pair_cyl_cyl,
        pair_tcyl_ell,
        pair_ell_rcyl,
    })
}

impl ScattererEnsemble {
    fn population(&self, pop: Population) -> Result<&PopulationDraw, RealizationError> {
        Ok(match pop {
            Population::TransmitCylinder => &self.t_cyl,
            Population::ReceiveCylinder => &self.r_cyl,
            Population::Ellipsoid(l) => self
                .ellipsoids
                .get(l - 1)
                .ok_or(RealizationError::UnknownTap(l))?,
            Population::Ground => self.ground.as_ref().ok_or(RealizationError::MissingGround)?,
        })
    }

    fn pairs(&self, class: RayClass, mode: DbPairing) -> Result<Vec<(usize, usize)>, RealizationError> {
        let (n_a, n_b, random) = match class {
            RayClass::DbCylinderCylinder => {
                (self.t_cyl.len(), self.r_cyl.len(), &self.pair_cyl_cyl)
            }
            RayClass::DbTransmitCylinderEllipsoid(l) => (
                self.t_cyl.len(),
                self.population(Population::Ellipsoid(l))?.len(),
                self.pair_tcyl_ell
                    .get(l - 1)
                    .ok_or(RealizationError::UnknownTap(l))?,
            ),
            RayClass::DbEllipsoidReceiveCylinder(l) => (
                self.population(Population::Ellipsoid(l))?.len(),
                self.r_cyl.len(),
                self.pair_ell_rcyl
                    .get(l - 1)
                    .ok_or(RealizationError::UnknownTap(l))?,
            ),
            _ => return Ok(vec![]),
        };
        Ok(match mode {
            DbPairing::Random => random.clone(),
            DbPairing::FullProduct => {
                let mut v = Vec::with_capacity(n_a * n_b);
                for i in 0..n_a {
                    for j in 0..n_b {
                        v.push((i, j));
                    }
                }
                v
            }
        })
    }
}

/// Complex samples of one tap coefficient on a time grid.
#[derive(Debug, Clone)]
pub struct TapCoefficientSeries {
    pub tap: usize,
    pub p: usize,
    pub q: usize,
    pub t_grid: Vec<f64>,
    pub samples: Vec<Complex64>,
    pub tau_l: f64,
    pub ricean_factor: f64,
}

/// Default uniform time grid: `samples` points at step `1 / (8 f_max)`.
pub fn default_time_grid(scenario: &ValidatedScenario, samples: usize) -> Vec<f64> {
    let f_max = scenario.config().f_max.max(1.0);
    let dt = 1.0 / (8.0 * f_max);
    (0..samples).map(|i| i as f64 * dt).collect()
}

struct ClassTerm {
    class: RayClass,
    amplitude: f64,
}

fn tap_terms(scenario: &ValidatedScenario, tap: usize) -> Result<Vec<ClassTerm>, RealizationError> {
    let c = scenario.config();
    if tap == 0 || tap > scenario.taps() {
        return Err(RealizationError::UnknownTap(tap));
    }
    Ok(if tap == 1 {
        let denom = c.ricean_factor + 1.0;
        vec![
            ClassTerm {
                class: RayClass::LoS,
                amplitude: (c.ricean_factor / denom).sqrt(),
            },
            ClassTerm {
                class: RayClass::SbTransmitCylinder,
                amplitude: (c.energy_tap1.sb11 / denom).sqrt(),
            },
            ClassTerm {
                class: RayClass::SbReceiveCylinder,
                amplitude: (c.energy_tap1.sb12 / denom).sqrt(),
            },
            ClassTerm {
                class: RayClass::SbEllipsoid(1),
                amplitude: (c.energy_tap1.sb13 / denom).sqrt(),
            },
            ClassTerm {
                class: RayClass::DbCylinderCylinder,
                amplitude: (c.energy_tap1.db / denom).sqrt(),
            },
        ]
    } else {
        let e = c.energy_tapl[tap - 2];
        vec![
            ClassTerm {
                class: RayClass::SbEllipsoid(tap),
                amplitude: e.sb_l3.sqrt(),
            },
            ClassTerm {
                class: RayClass::DbTransmitCylinderEllipsoid(tap),
                amplitude: e.db_l1.sqrt(),
            },
            ClassTerm {
                class: RayClass::DbEllipsoidReceiveCylinder(tap),
                amplitude: e.db_l2.sqrt(),
            },
        ]
    })
}

/// Doppler frequency of one frozen arrival direction.
fn doppler_freq(scenario: &ValidatedScenario, arrival: (f64, f64)) -> f64 {
    let c = scenario.config();
    c.f_max * (arrival.0 - c.gamma_r).cos() * arrival.1.cos()
}

/// One tap coefficient sample with split path/Doppler evaluation times.
///
/// `t` drives the geometry (path lengths); `doppler_t` drives the explicit
/// Doppler rotation. The analytical statistics freeze the geometry at the
/// evaluation instant and let only the Doppler term rotate over the
/// correlation lag, so the Monte Carlo estimators mirror that convention.
pub fn tap_coefficient_at(
    scenario: &ValidatedScenario,
    ensemble: &ScattererEnsemble,
    tap: usize,
    p: usize,
    q: usize,
    t: f64,
    doppler_t: f64,
    opts: &RealizationOptions,
) -> Result<Complex64, RealizationError> {
    let kappa = 2.0 * PI * scenario.config().f_c / SPEED_OF_LIGHT;
    let pair = ElementPair::from_elements(scenario, p, q);
    let mut acc = Complex64::new(0.0, 0.0);
    for term in tap_terms(scenario, tap)? {
        if term.amplitude == 0.0 {
            continue;
        }
        acc += term.amplitude
            * class_phasor_sum(
                scenario, ensemble, term.class, pair, t, doppler_t, opts, kappa,
            )?;
    }
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn class_phasor_sum(
    scenario: &ValidatedScenario,
    ensemble: &ScattererEnsemble,
    class: RayClass,
    pair: ElementPair,
    t: f64,
    doppler_t: f64,
    opts: &RealizationOptions,
    kappa: f64,
) -> Result<Complex64, RealizationError> {
    let phase_of = |xi_total: f64, phi: f64, f_d: f64| -> Complex64 {
        Complex64::from_polar(1.0, -kappa * xi_total + phi + 2.0 * PI * doppler_t * f_d)
    };
    Ok(match class {
        RayClass::LoS => {
            let c = scenario.config();
            let path = geometry::path_length(opts.path_model, class, pair, &[], scenario, t)?;
            let f_d = doppler_freq(scenario, (c.alpha_r_los, c.beta_r_los));
            phase_of(path.total, 0.0, f_d)
        }
        RayClass::SbTransmitCylinder
        | RayClass::SbReceiveCylinder
        | RayClass::SbEllipsoid(_)
        | RayClass::SbGround => {
            let pop = class.populations()[0];
            let draw = ensemble.population(pop)?;
            let mut sum = Complex64::new(0.0, 0.0);
            for i in 0..draw.len() {
                let path = geometry::path_length(
                    opts.path_model,
                    class,
                    pair,
                    &[draw.angles[i]],
                    scenario,
                    t,
                )?;
                let phi = if opts.random_phase { draw.phases[i] } else { 0.0 };
                let f_d = doppler_freq(scenario, draw.arrival0[i]);
                sum += phase_of(path.total, phi, f_d);
            }
            sum / (draw.len() as f64).sqrt()
        }
        RayClass::DbCylinderCylinder
        | RayClass::DbTransmitCylinderEllipsoid(_)
        | RayClass::DbEllipsoidReceiveCylinder(_) => {
            let pops = class.populations();
            let a = ensemble.population(pops[0])?;
            let b = ensemble.population(pops[1])?;
            let pairs = ensemble.pairs(class, opts.db_pairing)?;
            let mut sum = Complex64::new(0.0, 0.0);
            for &(i, j) in &pairs {
                let path = geometry::path_length(
                    opts.path_model,
                    class,
                    pair,
                    &[a.angles[i], b.angles[j]],
                    scenario,
                    t,
                )?;
                let phi = if opts.random_phase {
                    (a.phases[i] + b.phases[j]).rem_euclid(2.0 * PI)
                } else {
                    0.0
                };
                // Doppler follows the last bounce before the receiver.
                let f_d = doppler_freq(scenario, b.arrival0[j]);
                sum += phase_of(path.total, phi, f_d);
            }
            sum / (pairs.len() as f64).sqrt()
        }
    })
}

/// Complex tap coefficient series over a time grid.
pub fn tap_coefficient(
    scenario: &ValidatedScenario,
    ensemble: &ScattererEnsemble,
    tap: usize,
    p: usize,
    q: usize,
    t_grid: &[f64],
    opts: &RealizationOptions,
) -> Result<TapCoefficientSeries, RealizationError> {
    let samples = exec::map_collect(t_grid.len(), |i| {
        tap_coefficient_at(scenario, ensemble, tap, p, q, t_grid[i], t_grid[i], opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(TapCoefficientSeries {
        tap,
        p,
        q,
        t_grid: t_grid.to_vec(),
        samples,
        tau_l: scenario.tap_geometry(tap)?.tau_l,
        ricean_factor: scenario.config().ricean_factor,
    })
}

/// Ground-reflection coefficient series (the add-on single-bounce class).
pub fn ground_coefficient(
    scenario: &ValidatedScenario,
    ensemble: &ScattererEnsemble,
    p: usize,
    q: usize,
    t_grid: &[f64],
    opts: &RealizationOptions,
) -> Result<TapCoefficientSeries, RealizationError> {
    let c = scenario.config();
    let g = c.ground.ok_or(RealizationError::MissingGround)?;
    let amp = (g.eta_sb_g / (c.ricean_factor + 1.0)).sqrt();
    let kappa = 2.0 * PI * c.f_c / SPEED_OF_LIGHT;
    let pair = ElementPair::from_elements(scenario, p, q);
    let samples = exec::map_collect(t_grid.len(), |i| {
        class_phasor_sum(
            scenario,
            ensemble,
            RayClass::SbGround,
            pair,
            t_grid[i],
            t_grid[i],
            opts,
            kappa,
        )
        .map(|s| s * amp)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(TapCoefficientSeries {
        tap: 0,
        p,
        q,
        t_grid: t_grid.to_vec(),
        samples,
        tau_l: 0.0,
        ricean_factor: c.ricean_factor,
    })
}

/// Sparse tapped-delay-line impulse response: one delay per tap.
#[derive(Debug, Clone)]
pub struct TdlResponse {
    pub t_grid: Vec<f64>,
    /// (tap delay seconds, weighted coefficient samples) per retained tap.
    pub taps: Vec<(f64, Vec<Complex64>)>,
}

/// Combine per-tap series into `h(t, tau)`; taps with zero weight drop out.
pub fn assemble_tdl(
    taps: &[TapCoefficientSeries],
    weights: &[f64],
) -> Result<TdlResponse, RealizationError> {
    if weights.len() != taps.len() {
        return Err(RealizationError::WeightMismatch {
            got: weights.len(),
            need: taps.len(),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut grid: Option<&[f64]> = None;
    let mut out = Vec::new();
    for (series, &w) in taps.iter().zip(weights) {
        if !seen.insert(series.tap) {
            return Err(RealizationError::DuplicateTap(series.tap));
        }
        match grid {
            None => grid = Some(&series.t_grid),
            Some(g) if g == series.t_grid.as_slice() => {}
            _ => return Err(RealizationError::GridMismatch),
        }
        if w == 0.0 {
            continue;
        }
        out.push((
            series.tau_l,
            series.samples.iter().map(|s| s * w).collect(),
        ));
    }
    Ok(TdlResponse {
        t_grid: grid.map(|g| g.to_vec()).unwrap_or_default(),
        taps: out,
    })
}

/// Bin per-ray power by propagation delay at time `t`.
///
/// Ray power is the squared class prefactor split uniformly across the class
/// rays, scaled by the tap weight; the LoS ray carries the Ricean share. The
/// axis holds bin centers on a grid of width `resolution` anchored at zero
/// delay.
pub fn power_delay_profile(
    scenario: &ValidatedScenario,
    ensemble: &ScattererEnsemble,
    resolution: f64,
    t: f64,
    path_model: PathModel,
) -> Result<CurveSeries, RealizationError> {
    let c = scenario.config();
    let pair = ElementPair::CENTER;
    let mut contributions: Vec<(f64, f64)> = Vec::new();
    for tap in 1..=scenario.taps() {
        let w2 = c.tap_weights[tap - 1] * c.tap_weights[tap - 1];
        if w2 == 0.0 {
            continue;
        }
        for term in tap_terms(scenario, tap)? {
            let power = term.amplitude * term.amplitude * w2;
            if power == 0.0 {
                continue;
            }
            match term.class {
                RayClass::LoS => {
                    let path =
                        geometry::path_length(path_model, term.class, pair, &[], scenario, t)?;
                    contributions.push((path.total / SPEED_OF_LIGHT, power));
                }
                RayClass::SbTransmitCylinder
                | RayClass::SbReceiveCylinder
                | RayClass::SbEllipsoid(_) => {
                    let draw = ensemble.population(term.class.populations()[0])?;
                    let share = power / draw.len() as f64;
                    for angles in &draw.angles {
                        let path = geometry::path_length(
                            path_model,
                            term.class,
                            pair,
                            &[*angles],
                            scenario,
                            t,
                        )?;
                        contributions.push((path.total / SPEED_OF_LIGHT, share));
                    }
                }
                RayClass::DbCylinderCylinder
                | RayClass::DbTransmitCylinderEllipsoid(_)
                | RayClass::DbEllipsoidReceiveCylinder(_) => {
                    let pops = term.class.populations();
                    let a = ensemble.population(pops[0])?;
                    let b = ensemble.population(pops[1])?;
                    let pairs = ensemble.pairs(term.class, DbPairing::Random)?;
                    let share = power / pairs.len() as f64;
                    for &(i, j) in &pairs {
                        let path = geometry::path_length(
                            path_model,
                            term.class,
                            pair,
                            &[a.angles[i], b.angles[j]],
                            scenario,
                            t,
                        )?;
                        contributions.push((path.total / SPEED_OF_LIGHT, share));
                    }
                }
                RayClass::SbGround => unreachable!("ground is not a tap class"),
            }
        }
    }
    if let (Some(g), Some(draw)) = (c.ground, ensemble.ground.as_ref()) {
        let power = g.eta_sb_g / (c.ricean_factor + 1.0);
        let share = power / draw.len() as f64;
        for angles in &draw.angles {
            let path = geometry::path_length(
                path_model,
                RayClass::SbGround,
                pair,
                &[*angles],
                scenario,
                t,
            )?;
            contributions.push((path.total / SPEED_OF_LIGHT, share));
        }
    }

    let min_bin = contributions
        .iter()
        .map(|(d, _)| (d / resolution).floor() as i64)
        .min()
        .unwrap_or(0);
    let max_bin = contributions
        .iter()
        .map(|(d, _)| (d / resolution).floor() as i64)
        .max()
        .unwrap_or(0);
    let n_bins = (max_bin - min_bin + 1) as usize;
    let mut bins = vec![0.0; n_bins];
    for (delay, power) in contributions {
        let idx = ((delay / resolution).floor() as i64 - min_bin) as usize;
        bins[idx] += power;
    }
    let x: Vec<f64> = (0..n_bins)
        .map(|i| (min_bin + i as i64) as f64 * resolution + 0.5 * resolution)
        .collect();
    Ok(CurveSeries::real("delay", "s", "power", x, bins)?
        .with_meta("seed", ensemble.seed.to_string())
        .with_meta("scenario_hash", scenario.scenario_hash())
        .with_meta("method", "ray-binning")
        .with_meta("t", t.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{load_preset, load_validated_preset, Preset, ValidateOptions};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn validated(cfg: crate::scenario::ScenarioConfig) -> ValidatedScenario {
        cfg.validate(ValidateOptions {
            allow_tdl_violation: true,
        })
        .unwrap()
    }

    #[test]
    fn ensembles_are_seed_deterministic() {
        let sc = load_validated_preset(Preset::Tap1Highway);
        let a = build_ensemble(&sc, EnsembleCounts::uniform(64), 9).unwrap();
        let b = build_ensemble(&sc, EnsembleCounts::uniform(64), 9).unwrap();
        assert_eq!(a.t_cyl.angles, b.t_cyl.angles);
        assert_eq!(a.r_cyl.phases, b.r_cyl.phases);
        assert_eq!(a.pair_cyl_cyl, b.pair_cyl_cyl);
        let c = build_ensemble(&sc, EnsembleCounts::uniform(64), 10).unwrap();
        assert_ne!(a.t_cyl.angles, c.t_cyl.angles);
    }

    #[test]
    fn ensemble_mean_azimuth_converges() {
        let sc = load_validated_preset(Preset::Tap1Highway);
        let ens = build_ensemble(&sc, EnsembleCounts::uniform(100_000), 4).unwrap();
        // k = 12.3 population folded onto beta >= 0; azimuth mean unaffected.
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(a, _) in &ens.ellipsoids[0].angles {
            sx += a.cos();
            sy += a.sin();
        }
        let mean = sy.atan2(sx);
        assert_abs_diff_eq!(
            mean,
            sc.config().populations.ellipsoids[0].vmf.alpha0,
            epsilon = 0.01
        );
    }

    #[test]
    fn degenerate_single_scatterer_ensemble_is_valid() {
        let sc = load_validated_preset(Preset::Tap1Urban);
        let ens = build_ensemble(&sc, EnsembleCounts::uniform(1), 1).unwrap();
        assert_eq!(ens.t_cyl.len(), 1);
        assert_eq!(ens.pair_cyl_cyl.len(), 1);
    }

    #[test]
    fn pure_los_has_unit_magnitude() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.ricean_factor = 1e12;
        let sc = validated(cfg);
        let ens = build_ensemble(&sc, EnsembleCounts::uniform(16), 3).unwrap();
        let grid = default_time_grid(&sc, 16);
        let series =
            tap_coefficient(&sc, &ens, 1, 1, 1, &grid, &RealizationOptions::default()).unwrap();
        for s in &series.samples {
            assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn single_bounce_single_scatterer_magnitude_is_flat() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.energy_tap1 = crate::scenario::Tap1Energies {
            sb11: 1.0,
            sb12: 0.0,
            sb13: 0.0,
            db: 0.0,
        };
        let omega = cfg.ricean_factor;
        let sc = validated(cfg);
        let ens = build_ensemble(&sc, EnsembleCounts::uniform(1), 1).unwrap();
        let grid = default_time_grid(&sc, 32);
        let series =
            tap_coefficient(&sc, &ens, 1, 1, 2, &grid, &RealizationOptions::default()).unwrap();
        let expected = (1.0 / (omega + 1.0)).sqrt();
        // The LoS phasor still contributes sqrt(omega/(omega+1)); isolate the
        // scattered part by subtracting it sample-wise.
        let kappa = 2.0 * PI * sc.config().f_c / crate::SPEED_OF_LIGHT;
        for (i, s) in series.samples.iter().enumerate() {
            let t = grid[i];
            let path = geometry::path_length(
                PathModel::Exact,
                RayClass::LoS,
                ElementPair::from_elements(&sc, 1, 2),
                &[],
                &sc,
                t,
            )
            .unwrap();
            let f_d = sc.config().f_max
                * (sc.config().alpha_r_los - sc.config().gamma_r).cos()
                * sc.config().beta_r_los.cos();
            let los = Complex64::from_polar(
                (omega / (omega + 1.0)).sqrt(),
                -kappa * path.total + 2.0 * PI * t * f_d,
            );
            assert_abs_diff_eq!((s - los).norm(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn tap_one_power_normalizes() {
        let sc = load_validated_preset(Preset::Tap1Highway);
        let realizations = 100;
        let n = 2000;
        let grid = default_time_grid(&sc, 4);
        let opts = RealizationOptions::default();
        let powers = exec::map_collect(realizations, |r| {
            let ens = build_ensemble(&sc, EnsembleCounts::uniform(n), 1000 + r as u64).unwrap();
            let series = tap_coefficient(&sc, &ens, 1, 1, 1, &grid, &opts).unwrap();
            series.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / grid.len() as f64
        });
        let mean: f64 = powers.iter().sum::<f64>() / realizations as f64;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 0.03);
    }

    #[test]
    fn tap_two_power_normalizes() {
        let sc = load_validated_preset(Preset::Tap2Highway);
        let realizations = 400;
        // Samples spaced well beyond the coherence time so the time average
        // actually decorrelates; a fully scattered tap has Var(|h|^2) ~ 1.
        let step = 2.0 / sc.config().f_max;
        let grid: Vec<f64> = (0..8).map(|i| i as f64 * step).collect();
        let opts = RealizationOptions::default();
        let powers = exec::map_collect(realizations, |r| {
            let ens = build_ensemble(&sc, EnsembleCounts::uniform(500), 2000 + r as u64).unwrap();
            let series = tap_coefficient(&sc, &ens, 2, 1, 1, &grid, &opts).unwrap();
            series.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / grid.len() as f64
        });
        let mean: f64 = powers.iter().sum::<f64>() / realizations as f64;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 0.05);
    }

    #[test]
    fn full_product_pairing_matches_power() {
        let sc = load_validated_preset(Preset::Tap1Urban);
        let opts = RealizationOptions {
            db_pairing: DbPairing::FullProduct,
            ..Default::default()
        };
        let grid = [0.0];
        let powers: Vec<f64> = exec::map_collect(200, |r| {
            let ens = build_ensemble(&sc, EnsembleCounts::uniform(64), 40 + r as u64).unwrap();
            let series = tap_coefficient(&sc, &ens, 1, 1, 1, &grid, &opts).unwrap();
            series.samples[0].norm_sqr()
        });
        let mean: f64 = powers.iter().sum::<f64>() / powers.len() as f64;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 0.05);
    }

    #[test]
    fn ground_specular_midpoint_path() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.ground = Some(crate::scenario::GroundConfig {
            h_t: 10.0,
            h_r: 10.0,
            eta_sb_g: 0.1,
        });
        let sc = validated(cfg);
        let path = geometry::path_length(
            PathModel::Exact,
            RayClass::SbGround,
            ElementPair::CENTER,
            &[(PI, 0.0)],
            &sc,
            0.0,
        )
        .unwrap();
        let expected = 2.0 * (100.0f64 * 100.0 + 10.0 * 10.0).sqrt();
        assert_relative_eq!(path.total, expected, max_relative = 1e-12);
        assert_relative_eq!(path.total, 200.998, max_relative = 1e-5);
    }

    #[test]
    fn ground_zero_heights_degenerate_to_planar_path() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.ground = Some(crate::scenario::GroundConfig {
            h_t: 0.0,
            h_r: 0.0,
            eta_sb_g: 0.1,
        });
        let sc = validated(cfg);
        let s = scatterer_position(Population::Ground, 1.1, 0.0, &sc, 0.0).unwrap();
        let path = geometry::path_length(
            PathModel::Exact,
            RayClass::SbGround,
            ElementPair::CENTER,
            &[(1.1, 0.0)],
            &sc,
            0.0,
        )
        .unwrap();
        let planar = s.norm() + (Point3::new(200.0, 0.0, 0.0) - s).norm();
        assert_relative_eq!(path.total, planar, max_relative = 1e-12);
    }

    #[test]
    fn ground_coefficient_is_deterministic() {
        let mut cfg = load_preset(Preset::Tap1Urban);
        cfg.ground = Some(crate::scenario::GroundConfig {
            h_t: 10.0,
            h_r: 10.0,
            eta_sb_g: 0.1,
        });
        let sc = validated(cfg);
        let grid = default_time_grid(&sc, 8);
        let opts = RealizationOptions::default();
        let e1 = build_ensemble(&sc, EnsembleCounts::uniform(128), 5).unwrap();
        let e2 = build_ensemble(&sc, EnsembleCounts::uniform(128), 5).unwrap();
        let g1 = ground_coefficient(&sc, &e1, 1, 1, &grid, &opts).unwrap();
        let g2 = ground_coefficient(&sc, &e2, 1, 1, &grid, &opts).unwrap();
        assert_eq!(g1.samples, g2.samples);
    }

    #[test]
    fn tdl_assembly_rules() {
        let sc = load_validated_preset(Preset::Tap1Highway);
        let ens = build_ensemble(&sc, EnsembleCounts::uniform(32), 6).unwrap();
        let grid = default_time_grid(&sc, 4);
        let opts = RealizationOptions::default();
        let t1 = tap_coefficient(&sc, &ens, 1, 1, 1, &grid, &opts).unwrap();
        let t2 = tap_coefficient(&sc, &ens, 2, 1, 1, &grid, &opts).unwrap();

        let tdl = assemble_tdl(&[t1.clone(), t2.clone()], &[1.0, 1.0]).unwrap();
        assert_eq!(tdl.taps.len(), 2);
        let gap = tdl.taps[1].0 - tdl.taps[0].0;
        assert_relative_eq!(gap, 133.33e-9, max_relative = 1e-3);

        // Zero weight drops the tap; one tap passes through unchanged.
        let tdl = assemble_tdl(&[t1.clone(), t2.clone()], &[1.0, 0.0]).unwrap();
        assert_eq!(tdl.taps.len(), 1);
        assert_eq!(tdl.taps[0].1, t1.samples);

        assert!(matches!(
            assemble_tdl(&[t1.clone(), t1.clone()], &[1.0, 1.0]),
            Err(RealizationError::DuplicateTap(1))
        ));
    }

    #[test]
    fn pdp_first_bin_is_los_delay() {
        let sc = load_validated_preset(Preset::Tap1Highway);
        let ens = build_ensemble(&sc, EnsembleCounts::uniform(512), 12).unwrap();
        let pdp = power_delay_profile(&sc, &ens, 20e-9, 0.0, PathModel::Exact).unwrap();
        let first = pdp.x[0];
        assert!((first - 666.7e-9).abs() < 20e-9, "first bin at {first}");
        // The cylinder height model R tan(beta) has heavy tails, so read the
        // support at the 99% mass level: within a few cylinder crossings of
        // the farthest ellipsoid delay.
        let v = match &pdp.values {
            crate::curve::Values::Real(v) => v,
            _ => unreachable!(),
        };
        let total: f64 = v.iter().sum();
        let mut acc = 0.0;
        let mut q99 = pdp.x[0];
        for (x, val) in pdp.x.iter().zip(v) {
            acc += val;
            if acc <= 0.99 * total {
                q99 = *x;
            }
        }
        let bound = (2.0 * 140.0 + 6.0 * (40.0 + 40.0)) / 3.0e8;
        assert!(q99 < bound, "99% support ends at {q99}");
    }

    #[test]
    fn pdp_single_ellipsoid_delays_are_focal() {
        let mut cfg = load_preset(Preset::Tap1Highway);
        cfg.energy_tap1 = crate::scenario::Tap1Energies {
            sb11: 0.0,
            sb12: 0.0,
            sb13: 1.0,
            db: 0.0,
        };
        cfg.ricean_factor = 0.0;
        cfg.tap_weights = vec![1.0, 0.0];
        let sc = validated(cfg);
        let ens = build_ensemble(&sc, EnsembleCounts::uniform(256), 3).unwrap();
        let pdp = power_delay_profile(&sc, &ens, 1e-9, 0.0, PathModel::Exact).unwrap();
        let expected = 2.0 * 120.0 / 3.0e8;
        let total: f64 = match &pdp.values {
            crate::curve::Values::Real(v) => v.iter().sum(),
            _ => unreachable!(),
        };
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        for (x, v) in pdp.x.iter().zip(match &pdp.values {
            crate::curve::Values::Real(v) => v,
            _ => unreachable!(),
        }) {
            if *v > 0.0 {
                assert!((x - expected).abs() <= 1.5e-9, "mass at {x} not at {expected}");
            }
        }
    }
}
