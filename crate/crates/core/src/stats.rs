//! Analytical channel statistics with Monte Carlo cross-checks.
//!
//! All correlation functions are the exact ensemble expectations of the
//! sum-of-sinusoids realization: per ray class the independent random phases
//! wipe the cross terms, leaving a weighted angular integral of
//!
//! ```text
//! exp(-j 2 pi f_c [xi_pq(t) - xi_p'q'(t)] / c) * exp(j 2 pi f_max tau cos(alpha_R(t) - gamma_R) cos(beta_R(t)))
//! ```
//!
//! over the population density. Path geometry is frozen at the evaluation
//! instant `t`; the correlation lag `tau` only rotates the Doppler term, and
//! non-stationarity enters through the element-to-element path difference and
//! the arrival directions, both of which move with the MR. The published
//! integrand brackets keep an absolute path phase that breaks the zero-lag
//! normalization; the expectation form used here restores it while leaving
//! every printed offset and motion term in place (see the geometry module's
//! path models).
//!
//! Frequency correlations are power-weighted delay characteristic functions
//! `E[exp(j 2 pi df xi_total(t) / c)]`, and Doppler spectra are the exact
//! angular pushforward of the per-ray Doppler frequency (the infinite-window
//! Fourier transform of the temporal ACF), with a windowed-DFT route for
//! sampled ACF curves.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::curve::{CurveError, CurveSeries, Values};
use crate::exec;
use crate::geometry::{
    self, ElementPair, GeometryError, PathModel, Population, RayClass,
};
use crate::quadrature::{self, GaussLegendre, QuadratureError};
use crate::realization::{
    self, EnsembleCounts, RealizationError, RealizationOptions,
};
use crate::scenario::{PopulationSpec, ScenarioConfig, ScenarioError, ValidatedScenario};
use crate::special::bessel_i0;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Realization(#[from] RealizationError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("component {component:?} is not part of tap {tap}")]
    InvalidComponent { component: CfComponent, tap: usize },
    #[error("scenario has no ground configuration")]
    MissingGround,
    #[error("gamma grid reaches {requested:.1} Hz but the ACF sampling supports {nyquist:.1} Hz")]
    NyquistViolation { requested: f64, nyquist: f64 },
    #[error("need at least 10 Monte Carlo realizations, got {0}")]
    TooFewRealizations(usize),
}

/// Correlation-function component selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfComponent {
    Los,
    /// Single bounce off the transmit cylinder (tap 1).
    SbTCyl,
    /// Single bounce off the receive cylinder (tap 1).
    SbRCyl,
    /// Single bounce off the tap's ellipsoid.
    SbEllipsoid,
    /// Cylinder-to-cylinder double bounce (tap 1).
    Db,
    /// Transmit cylinder to ellipsoid double bounce (tap >= 2).
    DbTCylEll,
    /// Ellipsoid to receive cylinder double bounce (tap >= 2).
    DbEllRCyl,
    /// Ground-reflection single bounce (add-on class).
    Ground,
    Total,
}

impl CfComponent {
    /// Ray class of this component within tap `tap`.
    pub fn ray_class(&self, tap: usize) -> Option<RayClass> {
        match (self, tap) {
            (CfComponent::Los, 1) => Some(RayClass::LoS),
            (CfComponent::SbTCyl, 1) => Some(RayClass::SbTransmitCylinder),
            (CfComponent::SbRCyl, 1) => Some(RayClass::SbReceiveCylinder),
            (CfComponent::SbEllipsoid, l) => Some(RayClass::SbEllipsoid(l)),
            (CfComponent::Db, 1) => Some(RayClass::DbCylinderCylinder),
            (CfComponent::DbTCylEll, l) if l >= 2 => {
                Some(RayClass::DbTransmitCylinderEllipsoid(l))
            }
            (CfComponent::DbEllRCyl, l) if l >= 2 => {
                Some(RayClass::DbEllipsoidReceiveCylinder(l))
            }
            (CfComponent::Ground, _) => Some(RayClass::SbGround),
            _ => None,
        }
    }

    /// Components contributing to a tap's total.
    pub fn tap_components(tap: usize) -> Vec<CfComponent> {
        if tap == 1 {
            vec![
                CfComponent::Los,
                CfComponent::SbTCyl,
                CfComponent::SbRCyl,
                CfComponent::SbEllipsoid,
                CfComponent::Db,
            ]
        } else {
            vec![
                CfComponent::SbEllipsoid,
                CfComponent::DbTCylEll,
                CfComponent::DbEllRCyl,
            ]
        }
    }
}

/// Energy weight of a component inside its tap (LoS share included for tap 1;
/// tap l >= 2 components carry their raw energy fractions).
pub fn component_weight(
    scenario: &ValidatedScenario,
    tap: usize,
    component: CfComponent,
) -> Result<f64, StatsError> {
    let c = scenario.config();
    let denom = c.ricean_factor + 1.0;
    let w = match (component, tap) {
        (CfComponent::Los, 1) => c.ricean_factor / denom,
        (CfComponent::SbTCyl, 1) => c.energy_tap1.sb11 / denom,
        (CfComponent::SbRCyl, 1) => c.energy_tap1.sb12 / denom,
        (CfComponent::SbEllipsoid, 1) => c.energy_tap1.sb13 / denom,
        (CfComponent::Db, 1) => c.energy_tap1.db / denom,
        (CfComponent::SbEllipsoid, l) if l >= 2 && l <= scenario.taps() => {
            c.energy_tapl[l - 2].sb_l3
        }
        (CfComponent::DbTCylEll, l) if l >= 2 && l <= scenario.taps() => {
            c.energy_tapl[l - 2].db_l1
        }
        (CfComponent::DbEllRCyl, l) if l >= 2 && l <= scenario.taps() => {
            c.energy_tapl[l - 2].db_l2
        }
        (CfComponent::Ground, _) => {
            c.ground.ok_or(StatsError::MissingGround)?.eta_sb_g / denom
        }
        _ => {
            return Err(StatsError::InvalidComponent { component, tap });
        }
    };
    Ok(w)
}

/// Numerical options for the analytical statistics.
#[derive(Debug, Clone, Copy)]
pub struct CfOptions {
    /// Absolute quadrature tolerance per component.
    pub tol: f64,
    pub max_panels: usize,
    pub path_model: PathModel,
}

impl Default for CfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_panels: 40_000,
            path_model: PathModel::Exact,
        }
    }
}

/// Space-lag selector: effective antenna offsets in meters applied along the
/// configured array orientations, symmetric about the array centers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpacingLag {
    pub delta_t: f64,
    pub delta_r: f64,
}

/// Correlation request: evaluation time, Doppler lag and space lag.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CfRequest {
    pub t: f64,
    pub tau: f64,
    pub lag: SpacingLag,
}

fn spaced_scenario(
    scenario: &ValidatedScenario,
    lag: SpacingLag,
) -> Result<ValidatedScenario, StatsError> {
    let mut cfg: ScenarioConfig = scenario.config().clone();
    cfg.delta_t = lag.delta_t.abs();
    cfg.delta_r = lag.delta_r.abs();
    cfg.m_t = 2;
    cfg.m_r = 2;
    Ok(cfg.validate(crate::scenario::ValidateOptions {
        allow_tdl_violation: true,
    })?)
}

/// Doppler arrival direction of a population node at evaluation time `t`.
fn doppler_arrival(
    scenario: &ValidatedScenario,
    pop: Population,
    alpha: f64,
    beta: f64,
    t: f64,
) -> Result<(f64, f64), StatsError> {
    Ok(match pop {
        // Rides with the MR: its arrival angles are the population angles.
        Population::ReceiveCylinder => (alpha, beta),
        Population::Ground => {
            let g = scenario
                .config()
                .ground
                .ok_or(StatsError::MissingGround)?;
            let s = geometry::scatterer_position(pop, alpha, beta, scenario, t)?;
            let mr = geometry::mr_center(scenario, t) + geometry::Point3::new(0.0, 0.0, g.h_r);
            (s - mr).to_angles()
        }
        _ => {
            let s = geometry::scatterer_position(pop, alpha, beta, scenario, t)?;
            geometry::arrival_angles(s, scenario, t)?
        }
    })
}

/// Smallest signed difference between two angles.
fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + PI).rem_euclid(2.0 * PI) - PI
}

fn los_doppler_direction(scenario: &ValidatedScenario, t: f64) -> (f64, f64) {
    let c = scenario.config();
    let geo0 = geometry::los_arrival_azimuth(scenario, 0.0);
    if angle_diff(c.alpha_r_los, geo0).abs() < 1e-9 && c.beta_r_los.abs() < 1e-9 {
        (geometry::los_arrival_azimuth(scenario, t), 0.0)
    } else {
        // Configured LoS direction disagrees with the geometry; honor it as a
        // fixed parameter.
        (c.alpha_r_los, c.beta_r_los)
    }
}

struct PopQuad {
    spec: PopulationSpec,
    pop: Population,
    /// Elevation support (folded for the semi-ellipsoids).
    beta_range: (f64, f64),
    folded: bool,
}

impl PopQuad {
    fn new(scenario: &ValidatedScenario, pop: Population) -> Result<Self, StatsError> {
        let spec = match pop {
            Population::TransmitCylinder => scenario.config().populations.t_cyl,
            Population::ReceiveCylinder => scenario.config().populations.r_cyl,
            Population::Ellipsoid(l) => *scenario.ellipsoid_population(l)?,
            Population::Ground => scenario.config().populations.ground,
        };
        let (beta_range, folded) = match pop {
            Population::Ellipsoid(_) => ((0.0, PI / 2.0), true),
            _ => ((-PI / 2.0, PI / 2.0), false),
        };
        Ok(Self {
            spec,
            pop,
            beta_range,
            folded,
        })
    }

    fn density(&self, alpha: f64, beta: f64) -> f64 {
        if self.folded {
            self.spec.vmf.pdf_unchecked(alpha, beta) + self.spec.vmf.pdf_unchecked(alpha, -beta)
        } else {
            self.spec.vmf.pdf_unchecked(alpha, beta)
        }
    }

    /// Azimuth-only density for collapsed-elevation populations: the proper
    /// 2D von Mises law.
    fn density_2d(&self, alpha: f64) -> f64 {
        let k = self.spec.vmf.k;
        if k < 1e-12 {
            1.0 / (2.0 * PI)
        } else {
            (k * ((alpha - self.spec.vmf.alpha0).cos() - 1.0)).exp()
                / (2.0 * PI * bessel_i0(k) * (-k).exp())
        }
    }

    fn collapsed(&self) -> bool {
        self.spec.collapse_elevation || matches!(self.pop, Population::Ground)
    }

    /// Integrate `f(alpha, beta) * density` over the population support.
    fn integrate<F>(&self, f: F, opts: &CfOptions) -> Result<Complex64, StatsError>
    where
        F: Fn(f64, f64) -> Complex64 + Sync + Send,
    {
        if self.collapsed() {
            let g = |alpha: f64| f(alpha, 0.0) * self.density_2d(alpha);
            let (v, _err) = quadrature::adaptive_1d(g, -PI, PI, opts.tol, 16, opts.max_panels)?;
            Ok(v)
        } else {
            let peaked = self.spec.vmf.k > 8.0;
            let initial = if peaked { (24, 12) } else { (12, 6) };
            let g = |alpha: f64, beta: f64| f(alpha, beta) * self.density(alpha, beta);
            let (v, _err) = quadrature::adaptive_2d(
                g,
                -PI,
                PI,
                self.beta_range.0,
                self.beta_range.1,
                opts.tol,
                initial,
                opts.max_panels,
            )?;
            Ok(v)
        }
    }
}

/// Per-element path difference `xi(pair_a) - xi(pair_b)` restricted to the
/// given component index of the ray class (side separation for the
/// double-bounce factorization; `None` sums all components).
#[allow(clippy::too_many_arguments)]
fn path_difference(
    scenario: &ValidatedScenario,
    class: RayClass,
    comp_idx: Option<usize>,
    pair_a: ElementPair,
    pair_b: ElementPair,
    angles: &[(f64, f64)],
    t: f64,
    model: PathModel,
) -> Result<f64, StatsError> {
    let a = geometry::path_length(model, class, pair_a, angles, scenario, t)?;
    let b = geometry::path_length(model, class, pair_b, angles, scenario, t)?;
    Ok(match comp_idx {
        Some(i) => a.components[i] - b.components[i],
        None => a.total - b.total,
    })
}

/// Normalized time-variant space correlation of one component between the
/// element pairs `(1,1)` and `(2,2)` of a two-element probe array with the
/// requested spacings: the exact expectation of the realization model.
pub fn space_cf_component(
    scenario: &ValidatedScenario,
    tap: usize,
    component: CfComponent,
    req: CfRequest,
    opts: &CfOptions,
) -> Result<Complex64, StatsError> {
    let sc = spaced_scenario(scenario, req.lag)?;
    let weight = component_weight(&sc, tap, component)?;
    if weight == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let class = component
        .ray_class(tap)
        .ok_or(StatsError::InvalidComponent { component, tap })?;
    let pair_a = ElementPair::from_elements(&sc, 1, 1);
    let pair_b = ElementPair::from_elements(&sc, 2, 2);
    let kappa = 2.0 * PI * sc.config().f_c / SPEED_OF_LIGHT;
    let f_max = sc.config().f_max;
    let gamma = sc.config().gamma_r;
    let t = req.t;
    let tau = req.tau;

    let value = match class {
        RayClass::LoS => {
            let delta = path_difference(&sc, class, None, pair_a, pair_b, &[], t, opts.path_model)?;
            let (a_los, b_los) = los_doppler_direction(&sc, t);
            let doppler = 2.0 * PI * f_max * tau * (a_los - gamma).cos() * b_los.cos();
            Complex64::from_polar(1.0, -kappa * delta + doppler)
        }
        RayClass::SbTransmitCylinder
        | RayClass::SbReceiveCylinder
        | RayClass::SbEllipsoid(_)
        | RayClass::SbGround => {
            let pop = class.populations()[0];
            let quad = PopQuad::new(&sc, pop)?;
            quad.integrate(
                |alpha, beta| {
                    let delta = match path_difference(
                        &sc,
                        class,
                        None,
                        pair_a,
                        pair_b,
                        &[(alpha, beta)],
                        t,
                        opts.path_model,
                    ) {
                        Ok(d) => d,
                        Err(_) => return Complex64::new(0.0, 0.0),
                    };
                    let (ar, br) = match doppler_arrival(&sc, pop, alpha, beta, t) {
                        Ok(v) => v,
                        Err(_) => return Complex64::new(0.0, 0.0),
                    };
                    let doppler = 2.0 * PI * f_max * tau * (ar - gamma).cos() * br.cos();
                    Complex64::from_polar(1.0, -kappa * delta + doppler)
                },
                opts,
            )?
        }
        RayClass::DbCylinderCylinder
        | RayClass::DbTransmitCylinderEllipsoid(_)
        | RayClass::DbEllipsoidReceiveCylinder(_) => {
            // The middle hop carries no element offsets, so the path
            // difference splits into independent transmit- and receive-side
            // factors.
            let pops = class.populations();
            let quad_a = PopQuad::new(&sc, pops[0])?;
            let quad_b = PopQuad::new(&sc, pops[1])?;
            let partner_b = quad_b.spec.vmf.alpha0;
            let partner_a = quad_a.spec.vmf.alpha0;
            let factor_t = quad_a.integrate(
                |alpha, beta| {
                    let delta = match path_difference(
                        &sc,
                        class,
                        Some(0),
                        pair_a,
                        pair_b,
                        &[(alpha, beta), (partner_b, 0.0)],
                        t,
                        opts.path_model,
                    ) {
                        Ok(d) => d,
                        Err(_) => return Complex64::new(0.0, 0.0),
                    };
                    Complex64::from_polar(1.0, -kappa * delta)
                },
                opts,
            )?;
            let factor_r = quad_b.integrate(
                |alpha, beta| {
                    let delta = match path_difference(
                        &sc,
                        class,
                        Some(2),
                        pair_a,
                        pair_b,
                        &[(partner_a, 0.0), (alpha, beta)],
                        t,
                        opts.path_model,
                    ) {
                        Ok(d) => d,
                        Err(_) => return Complex64::new(0.0, 0.0),
                    };
                    let (ar, br) = match doppler_arrival(&sc, pops[1], alpha, beta, t) {
                        Ok(v) => v,
                        Err(_) => return Complex64::new(0.0, 0.0),
                    };
                    let doppler = 2.0 * PI * f_max * tau * (ar - gamma).cos() * br.cos();
                    Complex64::from_polar(1.0, -kappa * delta + doppler)
                },
                opts,
            )?;
            factor_t * factor_r
        }
    };
    Ok(value * weight)
}

/// Total normalized space CF of a tap: the weighted component sum.
pub fn space_cf_total(
    scenario: &ValidatedScenario,
    tap: usize,
    req: CfRequest,
    opts: &CfOptions,
) -> Result<Complex64, StatsError> {
    let mut acc = Complex64::new(0.0, 0.0);
    for component in CfComponent::tap_components(tap) {
        acc += space_cf_component(scenario, tap, component, req, opts)?;
    }
    Ok(acc)
}

/// Space CF for one component or the total.
pub fn space_cf(
    scenario: &ValidatedScenario,
    tap: usize,
    component: CfComponent,
    req: CfRequest,
    opts: &CfOptions,
) -> Result<Complex64, StatsError> {
    match component {
        CfComponent::Total => space_cf_total(scenario, tap, req, opts),
        c => space_cf_component(scenario, tap, c, req, opts),
    }
}

/// Sweep the space CF over antenna spacings (in wavelengths).
pub fn space_cf_sweep(
    scenario: &ValidatedScenario,
    tap: usize,
    component: CfComponent,
    t: f64,
    tau: f64,
    spacings_wl: &[f64],
    sweep_both: bool,
    opts: &CfOptions,
) -> Result<CurveSeries, StatsError> {
    let wl = scenario.wavelength();
    let values = exec::map_collect(spacings_wl.len(), |i| {
        let d = spacings_wl[i] * wl;
        let lag = SpacingLag {
            delta_t: d,
            delta_r: if sweep_both { d } else { 0.0 },
        };
        space_cf(scenario, tap, component, CfRequest { t, tau, lag }, opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(CurveSeries::complex(
        "spacing",
        "wavelengths",
        "rho",
        spacings_wl.to_vec(),
        values,
    )?
    .with_meta("scenario_hash", scenario.scenario_hash())
    .with_meta("tap", tap.to_string())
    .with_meta("component", format!("{component:?}"))
    .with_meta("t", t.to_string())
    .with_meta("tau", tau.to_string())
    .with_meta("method", "quadrature"))
}

/// Temporal auto-correlation: the total space CF at zero antenna offsets over
/// a Doppler-lag grid.
pub fn temporal_acf(
    scenario: &ValidatedScenario,
    tap: usize,
    component: CfComponent,
    t: f64,
    tau_grid: &[f64],
    opts: &CfOptions,
) -> Result<CurveSeries, StatsError> {
    let values = exec::map_collect(tau_grid.len(), |i| {
        space_cf(
            scenario,
            tap,
            component,
            CfRequest {
                t,
                tau: tau_grid[i],
                lag: SpacingLag::default(),
            },
            opts,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(CurveSeries::complex("tau", "s", "acf", tau_grid.to_vec(), values)?
        .with_meta("scenario_hash", scenario.scenario_hash())
        .with_meta("tap", tap.to_string())
        .with_meta("component", format!("{component:?}"))
        .with_meta("t", t.to_string())
        .with_meta("method", "quadrature"))
}

// ---------------------------------------------------------------------------
// Delay spectra: shared node sets for frequency CFs and Doppler pushforwards.
// ---------------------------------------------------------------------------

/// One quadrature node of a component's ray set: probability mass and total
/// path delay at the evaluation time.
#[derive(Debug, Clone, Copy)]
struct RayNode {
    mass: f64,
    delay: f64,
}

fn gl_nodes(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| (c + h * x, w * h))
        .collect()
}

/// Tensor node set over one population (or its collapsed azimuth line).
fn population_nodes(quad: &PopQuad, n_alpha: usize, n_beta: usize) -> Vec<(f64, f64, f64)> {
    if quad.collapsed() {
        gl_nodes(n_alpha, -PI, PI)
            .into_iter()
            .map(|(a, w)| (a, 0.0, w * quad.density_2d(a)))
            .collect()
    } else {
        let alphas = gl_nodes(n_alpha, -PI, PI);
        let betas = gl_nodes(n_beta, quad.beta_range.0, quad.beta_range.1);
        let mut out = Vec::with_capacity(alphas.len() * betas.len());
        for &(a, wa) in &alphas {
            for &(b, wb) in &betas {
                out.push((a, b, wa * wb * quad.density(a, b)));
            }
        }
        out
    }
}

/// Node counts for the delay spectra, scaled with the concentration.
fn spectra_counts(k: f64) -> (usize, usize) {
    if k > 8.0 {
        (96, 48)
    } else {
        (64, 32)
    }
}

fn component_ray_nodes(
    scenario: &ValidatedScenario,
    tap: usize,
    component: CfComponent,
    t: f64,
    pair: ElementPair,
    model: PathModel,
) -> Result<Vec<RayNode>, StatsError> {
    let class = component
        .ray_class(tap)
        .ok_or(StatsError::InvalidComponent { component, tap })?;
    Ok(match class {
        RayClass::LoS => {
            let path = geometry::path_length(model, class, pair, &[], scenario, t)?;
            vec![RayNode {
                mass: 1.0,
                delay: path.total / SPEED_OF_LIGHT,
            }]
        }
        RayClass::SbTransmitCylinder
        | RayClass::SbReceiveCylinder
        | RayClass::SbEllipsoid(_)
        | RayClass::SbGround => {
            let pop = class.populations()[0];
            let quad = PopQuad::new(scenario, pop)?;
            let (na, nb) = spectra_counts(quad.spec.vmf.k);
            population_nodes(&quad, na, nb)
                .into_iter()
                .filter(|(_, _, w)| *w > 0.0)
                .map(|(a, b, w)| {
                    let path = geometry::path_length(model, class, pair, &[(a, b)], scenario, t)?;
                    Ok(RayNode {
                        mass: w,
                        delay: path.total / SPEED_OF_LIGHT,
                    })
                })
                .collect::<Result<Vec<_>, StatsError>>()?
        }
        RayClass::DbCylinderCylinder
        | RayClass::DbTransmitCylinderEllipsoid(_)
        | RayClass::DbEllipsoidReceiveCylinder(_) => {
            let pops = class.populations();
            let quad_a = PopQuad::new(scenario, pops[0])?;
            let quad_b = PopQuad::new(scenario, pops[1])?;
            let (naa, nab) = spectra_counts(quad_a.spec.vmf.k);
            let (nba, nbb) = spectra_counts(quad_b.spec.vmf.k);
            // Joint tensor set, kept at moderate order per axis.
            let nodes_a = population_nodes(&quad_a, naa.min(48), nab.min(24));
            let nodes_b = population_nodes(&quad_b, nba.min(48), nbb.min(24));
            let rows = exec::map_collect(nodes_a.len(), |ia| {
                let (a1, b1, w1) = nodes_a[ia];
                if w1 <= 0.0 {
                    return Ok(Vec::new());
                }
                let mut row = Vec::with_capacity(nodes_b.len());
                for &(a2, b2, w2) in &nodes_b {
                    if w2 <= 0.0 {
                        continue;
                    }
                    let path = geometry::path_length(
                        model,
                        class,
                        pair,
                        &[(a1, b1), (a2, b2)],
                        scenario,
                        t,
                    )?;
                    row.push(RayNode {
                        mass: w1 * w2,
                        delay: path.total / SPEED_OF_LIGHT,
                    });
                }
                Ok::<_, StatsError>(row)
            });
            let mut out = Vec::new();
            for row in rows {
                out.extend(row?);
            }
            out
        }
    })
}

/// Time-variant frequency correlation of one component or the total: the
/// power-weighted delay characteristic function, unity at zero lag.
pub fn frequency_cf(
    scenario: &ValidatedScenario,
    tap: usize,
    component: CfComponent,
    t: f64,
    df_grid: &[f64],
    p: usize,
    q: usize,
    opts: &CfOptions,
) -> Result<CurveSeries, StatsError> {
    let pair = ElementPair::from_elements(scenario, p, q);
    let comps = match component {
        CfComponent::Total => CfComponent::tap_components(tap),
        c => vec![c],
    };
    let mut weighted: Vec<(f64, Vec<RayNode>)> = Vec::new();
    for comp in comps {
        let w = component_weight(scenario, tap, comp)?;
        if w == 0.0 {
            continue;
        }
        let nodes = component_ray_nodes(scenario, tap, comp, t, pair, opts.path_model)?;
        weighted.push((w, nodes));
    }
    let total_mass: f64 = weighted
        .iter()
        .map(|(w, nodes)| w * nodes.iter().map(|n| n.mass).sum::<f64>())
        .sum();
    let values = exec::map_collect(df_grid.len(), |i| {
        let df = df_grid[i];
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, nodes) in &weighted {
            let mut comp_acc = Complex64::new(0.0, 0.0);
            for n in nodes {
                comp_acc += Complex64::from_polar(n.mass, 2.0 * PI * df * n.delay);
            }
            acc += comp_acc * *w;
        }
        acc / total_mass
    });
    Ok(CurveSeries::complex("df", "Hz", "rho", df_grid.to_vec(), values)?
        .with_meta("scenario_hash", scenario.scenario_hash())
        .with_meta("tap", tap.to_string())
        .with_meta("component", format!("{component:?}"))
        .with_meta("t", t.to_string())
        .with_meta("method", "quadrature"))
}

/// Characteristic function of a sampled frequency correlation:
/// `integral rho(df) e^{j omega df} d df` over the curve's support.
pub fn characteristic_function(
    curve: &CurveSeries,
    omega_grid: &[f64],
) -> Result<CurveSeries, StatsError> {
    let rho = match &curve.values {
        Values::Complex(v) => v.clone(),
        Values::Real(v) => v.iter().map(|r| Complex64::new(*r, 0.0)).collect(),
    };
    let values: Vec<Complex64> = omega_grid
        .iter()
        .map(|&omega| {
            let integrand: Vec<Complex64> = curve
                .x
                .iter()
                .zip(&rho)
                .map(|(&df, &r)| r * Complex64::from_polar(1.0, omega * df))
                .collect();
            quadrature::trapezoid_complex(&curve.x, &integrand)
        })
        .collect();
    Ok(CurveSeries::complex(
        "omega",
        "rad/Hz",
        "cf",
        omega_grid.to_vec(),
        values,
    )?)
}

/// Doppler spectrum through the published characteristic-function chain: the
/// three tap-l component frequency CFs on `df in [-pi, pi]` are transformed,
/// multiplied, inverted at zero frequency lag per time sample, and the time
/// series is Fourier transformed over the printed `[-pi, pi]` window.
pub fn doppler_psd_characteristic_chain(
    scenario: &ValidatedScenario,
    tap: usize,
    gamma_grid: &[f64],
    opts: &CfOptions,
) -> Result<CurveSeries, StatsError> {
    if tap < 2 || tap > scenario.taps() {
        return Err(StatsError::InvalidComponent {
            component: CfComponent::DbTCylEll,
            tap,
        });
    }
    let n_df = 33;
    let df_grid: Vec<f64> = (0..n_df)
        .map(|i| -PI + 2.0 * PI * i as f64 / (n_df - 1) as f64)
        .collect();
    let omega_grid = df_grid.clone();
    let n_t = 33;
    let t_grid: Vec<f64> = (0..n_t)
        .map(|i| -PI + 2.0 * PI * i as f64 / (n_t - 1) as f64)
        .collect();
    let components = [
        CfComponent::SbEllipsoid,
        CfComponent::DbTCylEll,
        CfComponent::DbEllRCyl,
    ];
    let rho_t: Vec<Complex64> = t_grid
        .iter()
        .map(|&t| {
            let mut omega_product = vec![Complex64::new(1.0, 0.0); omega_grid.len()];
            for comp in components {
                let fcf = frequency_cf(scenario, tap, comp, t, &df_grid, 1, 1, opts)?;
                let cf = characteristic_function(&fcf, &omega_grid)?;
                let v = match cf.values {
                    Values::Complex(v) => v,
                    _ => unreachable!(),
                };
                for (p, c) in omega_product.iter_mut().zip(v) {
                    *p *= c;
                }
            }
            // Inverse transform at zero frequency lag.
            Ok(quadrature::trapezoid_complex(&omega_grid, &omega_product) / (2.0 * PI))
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    let values: Vec<f64> = gamma_grid
        .iter()
        .map(|&gamma| {
            let integrand: Vec<Complex64> = t_grid
                .iter()
                .zip(&rho_t)
                .map(|(&t, &r)| r * Complex64::from_polar(1.0, -2.0 * PI * t * gamma))
                .collect();
            quadrature::trapezoid_complex(&t_grid, &integrand).re
        })
        .collect();
    CurveSeries::real("gamma", "Hz", "psd", gamma_grid.to_vec(), values)
        .map(|c| {
            c.with_meta("scenario_hash", scenario.scenario_hash())
                .with_meta("tap", tap.to_string())
                .with_meta("method", "characteristic-chain")
        })
        .map_err(StatsError::from)
}

/// Doppler power spectral density as the exact angular pushforward of the
/// instantaneous per-ray Doppler frequency, normalized to unit area. The LoS
/// ray lands as a discrete line in its bin.
///
/// The Doppler term of every class depends only on the arrival direction of
/// the bounce nearest the receiver, so the partner population of the
/// double-bounce classes integrates out and each component reduces to one
/// dense integral over its arriving population. Node mass is spread over the
/// two nearest bins (linear binning) to keep the histogram smooth.
pub fn doppler_psd(
    scenario: &ValidatedScenario,
    tap: usize,
    component: CfComponent,
    t: f64,
    gamma_grid: &[f64],
    opts: &CfOptions,
) -> Result<CurveSeries, StatsError> {
    let _ = opts;
    if gamma_grid.len() < 2 {
        return Err(StatsError::NyquistViolation {
            requested: 0.0,
            nyquist: 0.0,
        });
    }
    let c = scenario.config();
    let comps = match component {
        CfComponent::Total => CfComponent::tap_components(tap),
        comp => vec![comp],
    };
    let bin_width = gamma_grid[1] - gamma_grid[0];
    let mut bins = vec![0.0; gamma_grid.len()];
    let mut total_mass = 0.0;
    let mut deposit = |f_d: f64, mass: f64, bins: &mut [f64]| {
        total_mass += mass;
        let pos = (f_d - gamma_grid[0]) / bin_width;
        let i0 = pos.floor();
        let frac = pos - i0;
        let i0 = i0 as i64;
        if i0 >= 0 && (i0 as usize) < bins.len() {
            bins[i0 as usize] += mass * (1.0 - frac);
        }
        if i0 + 1 >= 0 && ((i0 + 1) as usize) < bins.len() {
            bins[(i0 + 1) as usize] += mass * frac;
        }
    };

    let n_alpha = (16 * gamma_grid.len()).clamp(8192, 65_536);
    let n_beta = 192;
    for comp in comps {
        let w = component_weight(scenario, tap, comp)?;
        if w == 0.0 {
            continue;
        }
        let class = comp
            .ray_class(tap)
            .ok_or(StatsError::InvalidComponent { component: comp, tap })?;
        if matches!(class, RayClass::LoS) {
            let arrival = los_doppler_direction(scenario, t);
            let f_d = c.f_max * (arrival.0 - c.gamma_r).cos() * arrival.1.cos();
            deposit(f_d, w, &mut bins);
            continue;
        }
        // Arriving population: the bounce next to the receiver.
        let pop = *class.populations().last().expect("scattered class");
        let quad = PopQuad::new(scenario, pop)?;
        let rows: Vec<Vec<(f64, f64)>> = if quad.collapsed() {
            let da = 2.0 * PI / n_alpha as f64;
            exec::map_collect(n_alpha, |i| {
                let alpha = -PI + (i as f64 + 0.5) * da;
                let mass = quad.density_2d(alpha) * da;
                match doppler_arrival(scenario, pop, alpha, 0.0, t) {
                    Ok((ar, br)) => {
                        let f_d = c.f_max * (ar - c.gamma_r).cos() * br.cos();
                        vec![(f_d, mass)]
                    }
                    Err(_) => vec![],
                }
            })
        } else {
            let da = 2.0 * PI / n_alpha as f64;
            let betas = gl_nodes(n_beta, quad.beta_range.0, quad.beta_range.1);
            exec::map_collect(n_alpha, |i| {
                let alpha = -PI + (i as f64 + 0.5) * da;
                let mut row = Vec::with_capacity(betas.len());
                for &(beta, wb) in &betas {
                    let mass = quad.density(alpha, beta) * da * wb;
                    if mass <= 0.0 {
                        continue;
                    }
                    if let Ok((ar, br)) = doppler_arrival(scenario, pop, alpha, beta, t) {
                        let f_d = c.f_max * (ar - c.gamma_r).cos() * br.cos();
                        row.push((f_d, mass));
                    }
                }
                row
            })
        };
        for row in rows {
            for (f_d, mass) in row {
                deposit(f_d, w * mass, &mut bins);
            }
        }
    }
    let norm = total_mass * bin_width;
    for b in bins.iter_mut() {
        *b /= norm;
    }
    Ok(CurveSeries::real(
        "gamma",
        "Hz",
        "psd",
        gamma_grid.to_vec(),
        bins,
    )?
    .with_meta("scenario_hash", scenario.scenario_hash())
    .with_meta("tap", tap.to_string())
    .with_meta("component", format!("{component:?}"))
    .with_meta("t", t.to_string())
    .with_meta("method", "angular-pushforward"))
}

/// Doppler PSD as the windowed discrete transform of a sampled temporal ACF,
/// normalized to unit area. The tau grid must satisfy Nyquist for the
/// requested frequency range.
pub fn doppler_psd_from_acf(
    acf: &CurveSeries,
    gamma_grid: &[f64],
) -> Result<CurveSeries, StatsError> {
    let tau = &acf.x;
    if tau.len() < 2 {
        return Err(StatsError::NyquistViolation {
            requested: 0.0,
            nyquist: 0.0,
        });
    }
    let dtau = tau[1] - tau[0];
    let nyquist = 0.5 / dtau;
    let requested = gamma_grid.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if requested > nyquist {
        return Err(StatsError::NyquistViolation { requested, nyquist });
    }
    let rho: Vec<Complex64> = match &acf.values {
        Values::Complex(v) => v.clone(),
        Values::Real(v) => v.iter().map(|r| Complex64::new(*r, 0.0)).collect(),
    };
    let mut values: Vec<f64> = gamma_grid
        .iter()
        .map(|&gamma| {
            let integrand: Vec<Complex64> = tau
                .iter()
                .zip(&rho)
                .map(|(&tv, &r)| r * Complex64::from_polar(1.0, -2.0 * PI * gamma * tv))
                .collect();
            quadrature::trapezoid_complex(tau, &integrand).re
        })
        .collect();
    let area = quadrature::trapezoid(gamma_grid, &values);
    if area.abs() > 0.0 {
        for v in values.iter_mut() {
            *v /= area;
        }
    }
    Ok(CurveSeries::real(
        "gamma",
        "Hz",
        "psd",
        gamma_grid.to_vec(),
        values,
    )?
    .with_meta("method", "acf-dft"))
}

// ---------------------------------------------------------------------------
// Monte Carlo estimators.
// ---------------------------------------------------------------------------

/// A Monte Carlo correlation estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: Complex64,
    /// One standard error of the complex mean (combined re/im).
    pub sigma: f64,
    pub realizations: usize,
}

impl McEstimate {
    pub fn three_sigma(&self) -> f64 {
        3.0 * self.sigma
    }
}

/// Monte Carlo space-CF estimator across independent ensembles: the sample
/// correlation of the two probe links, normalized by the sample powers.
/// Mirrors the analytical convention (geometry frozen at `t`, Doppler rotated
/// over the lag).
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_space_cf(
    scenario: &ValidatedScenario,
    tap: usize,
    req: CfRequest,
    realizations: usize,
    n_scatterers: usize,
    seed: u64,
    opts: &RealizationOptions,
) -> Result<McEstimate, StatsError> {
    if realizations < 10 {
        return Err(StatsError::TooFewRealizations(realizations));
    }
    let sc = spaced_scenario(scenario, req.lag)?;
    let products = exec::map_collect(realizations, |r| {
        let ens = realization::build_ensemble(
            &sc,
            EnsembleCounts::uniform(n_scatterers),
            seed.wrapping_add(r as u64),
        )?;
        let h_a = realization::tap_coefficient_at(
            &sc,
            &ens,
            tap,
            1,
            1,
            req.t,
            req.t + req.tau,
            opts,
        )?;
        let h_b = realization::tap_coefficient_at(&sc, &ens, tap, 2, 2, req.t, req.t, opts)?;
        Ok::<_, StatsError>((h_a * h_b.conj(), h_a.norm_sqr(), h_b.norm_sqr()))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let n = products.len() as f64;
    let mean_corr = products.iter().map(|(c, _, _)| *c).sum::<Complex64>() / n;
    let mean_pa = products.iter().map(|(_, a, _)| *a).sum::<f64>() / n;
    let mean_pb = products.iter().map(|(_, _, b)| *b).sum::<f64>() / n;
    let norm = (mean_pa * mean_pb).sqrt();
    let var = products
        .iter()
        .map(|(c, _, _)| (c - mean_corr).norm_sqr())
        .sum::<f64>()
        / (n - 1.0);
    Ok(McEstimate {
        value: mean_corr / norm,
        sigma: (var / n).sqrt() / norm,
        realizations,
    })
}
