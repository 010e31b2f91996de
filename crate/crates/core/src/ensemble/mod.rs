//! Monte Carlo trajectory ensembles, trapped/untrapped classification and
//! trapping-time statistics.

pub mod survival;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coefficients::CoefficientProvider;
use crate::error::{Error, Result};
use crate::fields::Vec3;
use crate::params::{PhysicalParams, SurvivalSubset};
use crate::sde::{simulate, EscapeKind, PhaseState, SdeOptions, Trajectory, WellSpec};

pub use survival::{kaplan_meier, survival_and_fit, survival_at, SurvivalFit, SurvivalPoint};

/// Well in which every trajectory starts.
pub const START_WELL: usize = 5;
/// Largest tolerated fraction of trajectories lost to numerical blow-up.
pub const MAX_BLOW_UP_FRACTION: f64 = 0.01;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Azimuth {
    Uniform,
    Fixed(f64),
}

/// Starting point on the ring ρ = ρ₀ in the plane x = x₀.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialConditionSpec {
    pub x0: f64,
    pub rho0: f64,
    pub azimuth: Azimuth,
    pub v0: Vec3,
}

impl InitialConditionSpec {
    /// λ_S/8 before the centre of well 5, at ρ_max, moving along z at 0.1 μm/μs.
    pub fn standard(p: &PhysicalParams) -> Self {
        InitialConditionSpec {
            x0: 2.125 * p.lambda_s,
            rho0: p.rho_max(),
            azimuth: Azimuth::Uniform,
            v0: [0.0, 0.0, 0.1],
        }
    }

    /// Start on the y axis, so the initial velocity is tangential to the ring.
    pub fn tangential(p: &PhysicalParams) -> Self {
        InitialConditionSpec {
            azimuth: Azimuth::Fixed(0.0),
            ..Self::standard(p)
        }
    }

    /// Start on the z axis, so the initial velocity points radially.
    pub fn orthogonal(p: &PhysicalParams) -> Self {
        InitialConditionSpec {
            azimuth: Azimuth::Fixed(std::f64::consts::FRAC_PI_2),
            ..Self::standard(p)
        }
    }

    pub fn at_azimuth(&self, theta: f64) -> PhaseState {
        PhaseState {
            t: 0.0,
            r: [self.x0, self.rho0 * theta.cos(), self.rho0 * theta.sin()],
            v: self.v0,
        }
    }
}

/// Draw θ₀ (when uniform) and return the Cartesian starting state.
pub fn sample_initial<R: Rng + ?Sized>(spec: &InitialConditionSpec, rng: &mut R) -> PhaseState {
    let theta = match spec.azimuth {
        Azimuth::Uniform => rng.random_range(0.0..TAU),
        Azimuth::Fixed(t) => t,
    };
    spec.at_azimuth(theta)
}

/// Thresholds separating trapped atoms from atoms lost during loading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapThresholds {
    /// [μm/μs]
    pub v_rms: f64,
    /// [μs]
    pub time: f64,
}

impl Default for TrapThresholds {
    fn default() -> Self {
        TrapThresholds { v_rms: 0.20, time: 2000.0 }
    }
}

impl TrapThresholds {
    pub fn is_trapped(&self, escape_time: f64, vx_rms: f64) -> bool {
        escape_time >= self.time && vx_rms < self.v_rms
    }
}

/// Summary of one trajectory of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub master_seed: u64,
    pub theta0: f64,
    /// [μs]
    pub escape_time: f64,
    pub escape_kind: EscapeKind,
    /// Post-equilibration rms v_x, or the full-trajectory value for short runs [μm/μs].
    pub vx_rms: f64,
    pub g_range_post: Option<(f64, f64)>,
    pub g_moments_post: Option<(f64, f64)>,
}

impl TrajectoryRecord {
    fn from_trajectory(index: u64, master_seed: u64, theta0: f64, traj: &Trajectory) -> Self {
        TrajectoryRecord {
            index,
            master_seed,
            theta0,
            escape_time: traj.escape_time,
            escape_kind: traj.escape_kind,
            vx_rms: traj.diagnostics.vx_rms(),
            g_range_post: traj.diagnostics.g_range_post,
            g_moments_post: traj.diagnostics.g_moments_post,
        }
    }

    pub fn censored(&self) -> bool {
        self.escape_kind == EscapeKind::MaxTime
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowUp {
    pub index: u64,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleOptions {
    pub n: usize,
    pub master_seed: u64,
    pub sde: SdeOptions,
    pub well: usize,
    pub initial: InitialConditionSpec,
    pub thresholds: TrapThresholds,
    pub subset: SurvivalSubset,
    pub resamples: usize,
}

impl EnsembleOptions {
    pub fn new(p: &PhysicalParams, n: usize, master_seed: u64, subset: SurvivalSubset) -> Self {
        EnsembleOptions {
            n,
            master_seed,
            sde: SdeOptions::default(),
            well: START_WELL,
            initial: InitialConditionSpec::standard(p),
            thresholds: TrapThresholds::default(),
            subset,
            resamples: BOOTSTRAP_RESAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub trapped: Vec<usize>,
    pub untrapped: Vec<usize>,
}

impl Partition {
    pub fn trapped_fraction(&self) -> f64 {
        let n = self.trapped.len() + self.untrapped.len();
        if n == 0 {
            0.0
        } else {
            self.trapped.len() as f64 / n as f64
        }
    }
}

/// Split records into trapped and untrapped index sets.
pub fn classify_trapped(records: &[TrajectoryRecord], thresholds: &TrapThresholds) -> Partition {
    let (trapped, untrapped) = (0..records.len())
        .partition(|&i| thresholds.is_trapped(records[i].escape_time, records[i].vx_rms));
    Partition { trapped, untrapped }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    /// Completed trajectories ordered by index.
    pub records: Vec<TrajectoryRecord>,
    pub blow_ups: Vec<BlowUp>,
    pub partition: Partition,
    pub subset: SurvivalSubset,
    /// Fit over the chosen subset; `None` when the subset is empty.
    pub survival: Option<SurvivalFit>,
    /// Why the fit was skipped or should be read with care.
    pub notices: Vec<String>,
}

impl EnsembleResult {
    pub fn trapped_fraction(&self) -> f64 {
        self.partition.trapped_fraction()
    }

    /// Indices of the records entering the survival fit.
    pub fn subset_indices(&self) -> Vec<usize> {
        match self.subset {
            SurvivalSubset::Trapped => self.partition.trapped.clone(),
            SurvivalSubset::All => (0..self.records.len()).collect(),
        }
    }

    /// Median Δg over trapped records with a post-equilibration window.
    pub fn median_coupling_variation(&self) -> Option<f64> {
        let mut dg: Vec<f64> = self
            .partition
            .trapped
            .iter()
            .filter_map(|&i| self.records[i].g_range_post.map(range_fraction))
            .collect();
        median(&mut dg)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn run_one<C: CoefficientProvider + ?Sized>(
    field: &C,
    well: &WellSpec,
    opts: &EnsembleOptions,
    index: u64,
) -> Result<std::result::Result<TrajectoryRecord, BlowUp>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.master_seed);
    rng.set_stream(index);
    let theta0 = match opts.initial.azimuth {
        Azimuth::Uniform => rng.random_range(0.0..TAU),
        Azimuth::Fixed(t) => t,
    };
    let initial = opts.initial.at_azimuth(theta0);
    match simulate(field, initial, well, &opts.sde, &mut rng) {
        Ok(traj) => Ok(Ok(TrajectoryRecord::from_trajectory(
            index,
            opts.master_seed,
            theta0,
            &traj,
        ))),
        Err(e @ Error::BlowUp { .. }) => Ok(Err(BlowUp { index, message: e.to_string() })),
        Err(e) => Err(e),
    }
}

/// Run `opts.n` trajectories on disjoint streams of one master seed.
pub fn run_ensemble<C: CoefficientProvider + ?Sized>(
    field: &C,
    opts: &EnsembleOptions,
) -> Result<EnsembleResult> {
    if opts.n == 0 {
        return Err(Error::invalid("ensemble size must be at least 1"));
    }
    let well = WellSpec::new(field.params(), opts.well)?;
    let outcomes: Vec<_> = (0..opts.n as u64)
        .into_par_iter()
        .map(|i| run_one(field, &well, opts, i))
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(opts.n);
    let mut blow_ups = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(b) => blow_ups.push(b),
        }
    }
    if blow_ups.len() as f64 > MAX_BLOW_UP_FRACTION * opts.n as f64 {
        return Err(Error::Numerical(format!(
            "{} of {} trajectories blew up (limit {:.0}%); first: {}",
            blow_ups.len(),
            opts.n,
            100.0 * MAX_BLOW_UP_FRACTION,
            blow_ups[0].message
        )));
    }
    summarize(records, blow_ups, opts)
}

/// Classification and survival fit for a set of completed records.
pub fn summarize(
    records: Vec<TrajectoryRecord>,
    blow_ups: Vec<BlowUp>,
    opts: &EnsembleOptions,
) -> Result<EnsembleResult> {
    let partition = classify_trapped(&records, &opts.thresholds);
    let mut notices = Vec::new();
    if !blow_ups.is_empty() {
        notices.push(format!("{} trajectories blew up and were excluded", blow_ups.len()));
    }
    let mut result = EnsembleResult {
        records,
        blow_ups,
        partition,
        subset: opts.subset,
        survival: None,
        notices,
    };
    let idx = result.subset_indices();
    if idx.is_empty() {
        result.notices.push("no trajectories in the fitted subset; fit skipped".into());
        return Ok(result);
    }
    let times: Vec<f64> = idx.iter().map(|&i| result.records[i].escape_time).collect();
    let censored: Vec<bool> = idx.iter().map(|&i| result.records[i].censored()).collect();
    match survival_and_fit(&times, &censored, opts.resamples, opts.master_seed) {
        Ok(fit) => {
            if fit.few_events {
                result.notices.push(format!(
                    "only {} escapes observed; lifetime poorly constrained",
                    fit.events
                ));
            }
            if fit.tau_lsq.is_none() {
                result.notices.push("least-squares lifetime degenerate".into());
            }
            result.survival = Some(fit);
        }
        Err(Error::Statistics(msg)) => result.notices.push(format!("fit skipped: {msg}")),
        Err(e) => return Err(e),
    }
    Ok(result)
}

fn range_fraction((g_min, g_max): (f64, f64)) -> f64 {
    if g_max > 0.0 {
        (g_max - g_min) / g_max
    } else {
        0.0
    }
}

/// Relative coupling variation (g_max − g_min)/g_max of |g| after equilibration.
pub fn coupling_variation(traj: &Trajectory, thresholds: &TrapThresholds) -> Result<f64> {
    let d = &traj.diagnostics;
    if !thresholds.is_trapped(traj.escape_time, d.vx_rms()) {
        return Err(Error::invalid(format!(
            "trajectory is not trapped (T = {:.3} μs, v_x rms = {:.4} μm/μs)",
            traj.escape_time,
            d.vx_rms()
        )));
    }
    d.g_range_post
        .map(range_fraction)
        .ok_or_else(|| Error::invalid("trajectory has no post-equilibration window"))
}

/// Δg over an explicit sample sequence, using samples with t ≥ `equilibration`.
pub fn coupling_variation_of_samples<C: CoefficientProvider + ?Sized>(
    field: &C,
    samples: &[PhaseState],
    equilibration: f64,
) -> Result<f64> {
    let (lo, hi) = samples
        .iter()
        .filter(|s| s.t >= equilibration)
        .map(|s| field.coupling(&s.r).abs())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), g| (a.min(g), b.max(g)));
    if hi < lo {
        return Err(Error::invalid("no samples in the post-equilibration window"));
    }
    Ok(range_fraction((lo, hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{BlochSolver, CoefficientField};
    use crate::params::Scenario;
    use crate::sde::{FrozenHarmonic, TrajectoryDiagnostics};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn record(t_ms: f64, v: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            index: 0,
            master_seed: 0,
            theta0: 0.0,
            escape_time: t_ms * 1000.0,
            escape_kind: EscapeKind::Axial,
            vx_rms: v,
            g_range_post: None,
            g_moments_post: None,
        }
    }

    #[test]
    fn initial_ring() {
        let p = Scenario::CaseA.params();
        let s = InitialConditionSpec::tangential(&p).at_azimuth(0.0);
        assert!((s.r[1] - 14.142_135_623_730_95).abs() < 1e-12);
        assert_eq!(s.r[2], 0.0);
        let o = InitialConditionSpec::orthogonal(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_initial(&o, &mut rng);
        assert!(s.r[1].abs() < 1e-12 && (s.r[2] - p.rho_max()).abs() < 1e-12);
        let well = WellSpec::new(&p, START_WELL).unwrap();
        assert!((s.r[0] - well.center).abs() < well.half_width);
    }

    #[test]
    fn azimuth_is_uniform() {
        let p = Scenario::CaseA.params();
        let spec = InitialConditionSpec::standard(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bins = 20;
        let mut counts = vec![0.0; bins];
        let n = 10_000;
        for _ in 0..n {
            let s = sample_initial(&spec, &mut rng);
            assert!((s.rho() - p.rho_max()).abs() < 1e-12);
            let th = s.r[2].atan2(s.r[1]).rem_euclid(TAU);
            counts[((th / TAU * bins as f64) as usize).min(bins - 1)] += 1.0;
        }
        let e = n as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        let pval = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(pval > 0.01, "chi2 {chi2}, p {pval}");
    }

    #[test]
    fn classification_thresholds() {
        let th = TrapThresholds::default();
        let recs = vec![record(17.0, 0.14), record(0.5, 0.28), record(1.0, 0.1), record(5.0, 0.25)];
        let part = classify_trapped(&recs, &th);
        assert_eq!(part.trapped, vec![0]);
        assert_eq!(part.untrapped, vec![1, 2, 3]);
        assert!((part.trapped_fraction() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_trapped_subset_skips_fit() {
        let p = Scenario::CaseA.params();
        let opts = EnsembleOptions::new(&p, 2, 1, SurvivalSubset::Trapped);
        let res = summarize(vec![record(0.5, 0.28), record(0.3, 0.3)], vec![], &opts).unwrap();
        assert_eq!(res.trapped_fraction(), 0.0);
        assert!(res.survival.is_none());
        assert!(res.notices.iter().any(|n| n.contains("fit skipped")));
    }

    #[test]
    fn frozen_atom_has_no_coupling_variation() {
        let p = Scenario::CaseB.params();
        let well = WellSpec::new(&p, START_WELL).unwrap();
        let field = CoefficientField::new(&p, BlochSolver::new(&p).unwrap());
        let c = [well.center, 0.0, p.rho_max()];
        let samples: Vec<PhaseState> = (0..10)
            .map(|k| PhaseState { t: 2000.0 + k as f64, r: c, v: [0.0; 3] })
            .collect();
        assert_eq!(coupling_variation_of_samples(&field, &samples, 2000.0).unwrap(), 0.0);
    }

    #[test]
    fn two_position_coupling_variation() {
        let p = Scenario::CaseB.params();
        let well = WellSpec::new(&p, START_WELL).unwrap();
        let field = CoefficientField::new(&p, BlochSolver::new(&p).unwrap());
        let kg = p.k_g();
        let rho = p.rho_max();
        let x1 = well.center;
        let x2 = well.center + 0.05;
        let gauss = p.g0 * (-(rho * rho) / (p.waist_g * p.waist_g)).exp();
        let g1 = (gauss * (kg * x1).sin()).abs();
        let g2 = (gauss * (kg * x2).sin()).abs();
        let expect = (g1.max(g2) - g1.min(g2)) / g1.max(g2);
        let samples: Vec<PhaseState> = (0..40)
            .map(|k| PhaseState {
                t: 1990.0 + k as f64,
                r: [if k % 2 == 0 { x1 } else { x2 }, 0.0, rho],
                v: [0.0; 3],
            })
            .collect();
        let dg = coupling_variation_of_samples(&field, &samples, 2000.0).unwrap();
        assert!((dg - expect).abs() < 1e-12, "{dg} vs {expect}");
    }

    #[test]
    fn coupling_variation_requires_trapping() {
        let p = Scenario::CaseB.params();
        let traj = Trajectory {
            initial: InitialConditionSpec::standard(&p).at_azimuth(0.0),
            stride: 0,
            samples: vec![],
            escape_time: 500.0,
            escape_kind: EscapeKind::Axial,
            diagnostics: TrajectoryDiagnostics {
                vx_rms_full: 0.28,
                ..Default::default()
            },
        };
        assert!(coupling_variation(&traj, &TrapThresholds::default()).is_err());
        let trapped = Trajectory {
            escape_time: 5000.0,
            diagnostics: TrajectoryDiagnostics {
                vx_rms_full: 0.1,
                vx_rms_post: Some(0.1),
                g_range_post: Some((50.0, 200.0)),
                ..Default::default()
            },
            ..traj
        };
        let dg = coupling_variation(&trapped, &TrapThresholds::default()).unwrap();
        assert!((dg - 0.75).abs() < 1e-15);
    }

    #[test]
    fn ensemble_is_reproducible_and_ordered() {
        let p = Scenario::CaseA.params();
        let well = WellSpec::new(&p, START_WELL).unwrap();
        let field = FrozenHarmonic::axial(&p, &well);
        let mut opts = EnsembleOptions::new(&p, 6, 42, SurvivalSubset::All);
        opts.sde.t_max = 50.0;
        let a = run_ensemble(&field, &opts).unwrap();
        let b = run_ensemble(&field, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.records.iter().enumerate().all(|(i, r)| r.index == i as u64));
        let thetas: Vec<f64> = a.records.iter().map(|r| r.theta0).collect();
        assert!(thetas.windows(2).all(|w| w[0] != w[1]));
        assert!(a.notices.iter().any(|n| n.contains("fit skipped")));
    }

    #[test]
    fn single_trajectory_ensemble_matches_simulate() {
        let p = Scenario::CaseA.params();
        let well = WellSpec::new(&p, START_WELL).unwrap();
        let field = FrozenHarmonic::axial(&p, &well);
        let mut opts = EnsembleOptions::new(&p, 1, 7, SurvivalSubset::All);
        opts.sde.t_max = 20.0;
        let res = run_ensemble(&field, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        rng.set_stream(0);
        let init = sample_initial(&opts.initial, &mut rng);
        let traj = simulate(&field, init, &well, &opts.sde, &mut rng).unwrap();
        assert_eq!(res.records.len(), 1);
        assert_eq!(res.records[0].escape_time, traj.escape_time);
        assert_eq!(res.records[0].vx_rms, traj.diagnostics.vx_rms());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
