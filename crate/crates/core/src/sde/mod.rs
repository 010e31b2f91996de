//! Stochastic centre-of-mass trajectories in velocity form.
//!
//! The update is Euler-Maruyama with the position advanced by the updated
//! velocity (kick then drift). Coefficients and noise amplitudes are taken at
//! the pre-step position, so the scheme stays non-anticipating. Wiener
//! increments have variance 2 dt.

pub mod analysis;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::coefficients::{CoefficientProvider, LocalCoefficients};
use crate::error::{Error, Result};
use crate::fields::Vec3;
use crate::params::PhysicalParams;

/// Default integration step [μs].
pub const DEFAULT_DT: f64 = 0.005;
/// Start of the window used for post-equilibration diagnostics [μs].
pub const EQUILIBRATION_TIME: f64 = 2000.0;
/// Standard gravity [μm/μs²].
pub const GRAVITY: f64 = 9.806_65e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseState {
    /// Time [μs].
    pub t: f64,
    /// Position [μm].
    pub r: Vec3,
    /// Velocity [μm/μs].
    pub v: Vec3,
}

impl PhaseState {
    pub fn rho(&self) -> f64 {
        self.r[1].hypot(self.r[2])
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.r.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
    }
}

/// The trapping region around one FORT antinode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellSpec {
    /// Antinode index n ≥ 1.
    pub index: usize,
    /// Axial centre (n − ½) λ_S/2 [μm].
    pub center: f64,
    /// λ_S/4 [μm].
    pub half_width: f64,
    /// Escape radius [μm].
    pub radial_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EscapeKind {
    Axial,
    Radial,
    MaxTime,
}

impl EscapeKind {
    pub fn name(self) -> &'static str {
        match self {
            EscapeKind::Axial => "axial",
            EscapeKind::Radial => "radial",
            EscapeKind::MaxTime => "max-time",
        }
    }
}

impl WellSpec {
    /// Well `index` with radial bound 2√2 ρ_max, which is 2W_S for the LG₀₁
    /// mode and stays outside the ring for every LG₀ₘ.
    pub fn new(p: &PhysicalParams, index: usize) -> Result<Self> {
        if index == 0 || index > p.n_wells() {
            return Err(Error::invalid(format!(
                "well index {index} outside 1..={}",
                p.n_wells()
            )));
        }
        Ok(WellSpec {
            index,
            center: p.well_center(index),
            half_width: p.lambda_s / 4.0,
            radial_bound: 2.0 * 2f64.sqrt() * p.rho_max(),
        })
    }

    /// The exit condition met at `r`, if any. Axial exits take precedence.
    pub fn exit(&self, r: &Vec3) -> Option<EscapeKind> {
        if (r[0] - self.center).abs() > self.half_width {
            Some(EscapeKind::Axial)
        } else if r[1].hypot(r[2]) > self.radial_bound {
            Some(EscapeKind::Radial)
        } else {
            None
        }
    }
}

/// Switches and step controls for a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdeOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Record every `stride` steps; 0 records nothing beyond the endpoints.
    pub stride: usize,
    pub friction: bool,
    pub dipole_noise: bool,
    pub spontaneous_noise: bool,
    /// Adds g along −z.
    pub gravity: bool,
    pub equilibration: f64,
}

impl Default for SdeOptions {
    fn default() -> Self {
        SdeOptions {
            dt: DEFAULT_DT,
            t_max: 2.0e5,
            stride: 0,
            friction: true,
            dipole_noise: true,
            spontaneous_noise: true,
            gravity: false,
            equilibration: EQUILIBRATION_TIME,
        }
    }
}

impl SdeOptions {
    /// Deterministic mean dynamics: noise off, friction kept.
    pub fn noiseless(self) -> Self {
        SdeOptions {
            dipole_noise: false,
            spontaneous_noise: false,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step {} must be positive", self.dt)));
        }
        if !(self.t_max >= 0.0) {
            return Err(Error::invalid(format!("t_max {} must be nonnegative", self.t_max)));
        }
        Ok(())
    }
}

/// Draw (dW₁, dW_x, dW_y, dW_z), each N(0, 2 dt).
pub fn draw_increments(rng: &mut ChaCha8Rng, dt: f64) -> [f64; 4] {
    let s = (2.0 * dt).sqrt();
    let mut out = [0.0; 4];
    for w in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *w = s * z;
    }
    out
}

/// Advance one step with given coefficients and increments.
pub fn advance(
    state: &PhaseState,
    c: &LocalCoefficients,
    dt: f64,
    dw: &[f64; 4],
    opts: &SdeOptions,
) -> Result<PhaseState> {
    let mut a = c.phi;
    if opts.friction {
        a[0] -= c.gamma_xx * state.v[0];
    }
    if opts.gravity {
        a[2] -= GRAVITY;
    }
    let mut v = [
        state.v[0] + a[0] * dt,
        state.v[1] + a[1] * dt,
        state.v[2] + a[2] * dt,
    ];
    if opts.dipole_noise {
        v[0] += c.d_xx.max(0.0).sqrt() * dw[0];
    }
    if opts.spontaneous_noise {
        for i in 0..3 {
            v[i] += c.d_spont[i].max(0.0).sqrt() * dw[1 + i];
        }
    }
    let r = [
        state.r[0] + v[0] * dt,
        state.r[1] + v[1] * dt,
        state.r[2] + v[2] * dt,
    ];
    let next = PhaseState {
        t: state.t + dt,
        r,
        v,
    };
    if !next.is_finite() {
        return Err(Error::BlowUp {
            t: state.t,
            r: state.r,
            v: state.v,
        });
    }
    Ok(next)
}

/// One step drawing its own increments.
pub fn step<C: CoefficientProvider + ?Sized>(
    state: &PhaseState,
    field: &C,
    dt: f64,
    rng: &mut ChaCha8Rng,
    opts: &SdeOptions,
) -> Result<PhaseState> {
    let c = field.local(&state.r)?;
    let dw = draw_increments(rng, dt);
    advance(state, &c, dt, &dw, opts)
}

/// Running diagnostics accumulated along a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrajectoryDiagnostics {
    pub steps: u64,
    /// rms v_x over the whole trajectory [μm/μs].
    pub vx_rms_full: f64,
    /// rms v_x for t ≥ equilibration, if the trajectory got there.
    pub vx_rms_post: Option<f64>,
    /// min and max |g| for t ≥ equilibration [rad/μs].
    pub g_range_post: Option<(f64, f64)>,
    /// mean and standard deviation of |g| for t ≥ equilibration [rad/μs].
    pub g_moments_post: Option<(f64, f64)>,
}

impl TrajectoryDiagnostics {
    /// The post-equilibration rms when available, else the full-trajectory rms.
    pub fn vx_rms(&self) -> f64 {
        self.vx_rms_post.unwrap_or(self.vx_rms_full)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: PhaseState,
    pub stride: usize,
    pub samples: Vec<PhaseState>,
    /// First exit time, or t_max when censored [μs].
    pub escape_time: f64,
    pub escape_kind: EscapeKind,
    pub diagnostics: TrajectoryDiagnostics,
}

impl Trajectory {
    pub fn censored(&self) -> bool {
        self.escape_kind == EscapeKind::MaxTime
    }
}

#[derive(Default)]
struct Accumulator {
    steps: u64,
    vx2_full: f64,
    n_post: u64,
    vx2_post: f64,
    g_min: f64,
    g_max: f64,
    g_sum: f64,
    g2_sum: f64,
}

impl Accumulator {
    fn push(&mut self, s: &PhaseState, g: f64, equilibration: f64) {
        let vx2 = s.v[0] * s.v[0];
        self.vx2_full += vx2;
        self.steps += 1;
        if s.t >= equilibration {
            let ga = g.abs();
            if self.n_post == 0 {
                self.g_min = ga;
                self.g_max = ga;
            } else {
                self.g_min = self.g_min.min(ga);
                self.g_max = self.g_max.max(ga);
            }
            self.g_sum += ga;
            self.g2_sum += ga * ga;
            self.vx2_post += vx2;
            self.n_post += 1;
        }
    }

    fn finish(&self, last: &PhaseState) -> TrajectoryDiagnostics {
        let vx_rms_full = if self.steps == 0 {
            last.v[0].abs()
        } else {
            (self.vx2_full / self.steps as f64).sqrt()
        };
        let (vx_rms_post, g_range_post, g_moments_post) = if self.n_post == 0 {
            (None, None, None)
        } else {
            let n = self.n_post as f64;
            let mean = self.g_sum / n;
            (
                Some((self.vx2_post / n).sqrt()),
                Some((self.g_min, self.g_max)),
                Some((mean, (self.g2_sum / n - mean * mean).max(0.0).sqrt())),
            )
        };
        TrajectoryDiagnostics {
            steps: self.steps,
            vx_rms_full,
            vx_rms_post,
            g_range_post,
            g_moments_post,
        }
    }
}

/// Integrate from `initial` until the atom leaves `well` or t_max is reached.
pub fn simulate<C: CoefficientProvider + ?Sized>(
    field: &C,
    initial: PhaseState,
    well: &WellSpec,
    opts: &SdeOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    simulate_with(field, initial, well, opts, |dt| draw_increments(rng, dt))
}

/// As [`simulate`] with an explicit increment source.
pub fn simulate_with<C, F>(
    field: &C,
    initial: PhaseState,
    well: &WellSpec,
    opts: &SdeOptions,
    mut increments: F,
) -> Result<Trajectory>
where
    C: CoefficientProvider + ?Sized,
    F: FnMut(f64) -> [f64; 4],
{
    opts.validate()?;
    if let Some(kind) = well.exit(&initial.r) {
        return Err(Error::invalid(format!(
            "initial position {:?} already outside the well ({})",
            initial.r,
            kind.name()
        )));
    }
    let dt = opts.dt;
    let n_steps = (opts.t_max / dt).round() as u64;
    let mut state = initial;
    let mut samples = vec![initial];
    let mut acc = Accumulator::default();
    let mut escape = None;
    for k in 1..=n_steps {
        let c = field.local(&state.r)?;
        acc.push(&state, c.g, opts.equilibration);
        let dw = increments(dt);
        let mut next = advance(&state, &c, dt, &dw, opts)?;
        next.t = initial.t + k as f64 * dt;
        state = next;
        if opts.stride > 0 && k % opts.stride as u64 == 0 {
            samples.push(state);
        }
        if let Some(kind) = well.exit(&state.r) {
            escape = Some(kind);
            break;
        }
    }
    if samples.last() != Some(&state) {
        samples.push(state);
    }
    let (escape_time, escape_kind) = match escape {
        Some(kind) => (state.t - initial.t, kind),
        None => (opts.t_max, EscapeKind::MaxTime),
    };
    Ok(Trajectory {
        initial,
        stride: opts.stride,
        samples,
        escape_time,
        escape_kind,
        diagnostics: acc.finish(&state),
    })
}

/// A purely conservative harmonic force about `center`, with no friction,
/// diffusion or excitation. Serves as an exactly solvable stand-in field.
#[derive(Clone, Debug)]
pub struct FrozenHarmonic {
    params: PhysicalParams,
    pub center: Vec3,
    /// ω² per axis [1/μs²].
    pub omega2: Vec3,
}

impl FrozenHarmonic {
    /// Axial curvature of the FORT at the bottom of `well`:
    /// ω² = 2(ħ/M) S_max k_S². The transverse directions are free.
    pub fn axial(p: &PhysicalParams, well: &WellSpec) -> Self {
        let k = p.k_s();
        FrozenHarmonic {
            params: p.clone(),
            center: [well.center, 0.0, p.rho_max()],
            omega2: [2.0 * p.hbar_over_mass() * p.s_max() * k * k, 0.0, 0.0],
        }
    }

    /// Potential energy per unit mass.
    pub fn potential(&self, r: &Vec3) -> f64 {
        (0..3)
            .map(|i| 0.5 * self.omega2[i] * (r[i] - self.center[i]).powi(2))
            .sum()
    }

    /// Period of the axial oscillation [μs].
    pub fn axial_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega2[0].sqrt()
    }
}

impl CoefficientProvider for FrozenHarmonic {
    fn local(&self, r: &Vec3) -> Result<LocalCoefficients> {
        let mut phi = [0.0; 3];
        for i in 0..3 {
            phi[i] = -self.omega2[i] * (r[i] - self.center[i]);
        }
        Ok(LocalCoefficients {
            phi,
            ..Default::default()
        })
    }

    fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn coupling(&self, _r: &Vec3) -> f64 {
        0.0
    }
}

/// Total energy per unit mass along a noiseless kick-drift run under a
/// conservative field with potential `u`. The velocity is synchronised to the
/// position time by adding half a kick, which removes the O(dt) offset of the
/// staggered scheme.
pub fn energy_series<C, U>(
    field: &C,
    initial: PhaseState,
    dt: f64,
    t_end: f64,
    u: U,
) -> Result<Vec<(f64, f64)>>
where
    C: CoefficientProvider + ?Sized,
    U: Fn(&Vec3) -> f64,
{
    let opts = SdeOptions {
        dt,
        t_max: t_end,
        friction: false,
        ..SdeOptions::default()
    }
    .noiseless();
    opts.validate()?;
    let n = (t_end / dt).round() as u64;
    let mut state = initial;
    let mut out = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        let c = field.local(&state.r)?;
        let vs = [
            state.v[0] + 0.5 * c.phi[0] * dt,
            state.v[1] + 0.5 * c.phi[1] * dt,
            state.v[2] + 0.5 * c.phi[2] * dt,
        ];
        let kin = 0.5 * (vs[0] * vs[0] + vs[1] * vs[1] + vs[2] * vs[2]);
        let e = kin + u(&state.r);
        if !e.is_finite() {
            return Err(Error::BlowUp {
                t: state.t,
                r: state.r,
                v: state.v,
            });
        }
        out.push((initial.t + k as f64 * dt, e));
        if k < n {
            state = advance(&state, &c, dt, &[0.0; 4], &opts)?;
        }
    }
    Ok(out)
}

/// Largest tolerated energy excursion relative to the oscillation energy
/// before a step is declared outside the scheme's usable range.
pub const ENERGY_TOLERANCE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub dt: f64,
    pub horizon: f64,
    /// Largest |r_dt − r_dt/2| over the horizon for the matched-noise pair [μm].
    pub noisy_divergence: f64,
    /// Noiseless final-position differences |r_dt − r_dt/2| and |r_dt/2 − r_dt/4| [μm].
    pub deterministic_differences: [f64; 2],
    /// Ratio of the two deterministic differences; ≈ 2 for a first-order scheme.
    pub order_ratio: f64,
    /// Period-averaged energy change of the frozen oscillator per ms, relative
    /// to its oscillation energy.
    pub energy_drift_per_ms: f64,
    /// Largest instantaneous relative energy deviation of the frozen oscillator.
    pub energy_excursion: f64,
    pub unstable: bool,
}

/// Compare runs at dt and dt/2 driven by the same Wiener path, check the
/// noiseless order of convergence, and measure energy fidelity on the frozen
/// axial oscillator of `well`.
pub fn convergence_probe<C: CoefficientProvider + ?Sized>(
    field: &C,
    initial: PhaseState,
    well: &WellSpec,
    dt: f64,
    horizon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ConvergenceReport> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("probe step and horizon must be positive"));
    }
    let opts = SdeOptions {
        dt,
        t_max: horizon,
        stride: 1,
        ..SdeOptions::default()
    };
    let unbounded = WellSpec {
        half_width: f64::INFINITY,
        radial_bound: f64::INFINITY,
        ..*well
    };

    // matched noise: each coarse increment is the sum of two fine ones
    let n_coarse = (horizon / dt).round() as usize;
    let fine: Vec<[f64; 4]> = (0..2 * n_coarse).map(|_| draw_increments(rng, dt / 2.0)).collect();
    let mut it = fine.iter();
    let coarse_run = simulate_with(field, initial, &unbounded, &opts, |_| {
        let a = it.next().expect("fine path long enough");
        let b = it.next().expect("fine path long enough");
        [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
    })?;
    let mut it = fine.iter();
    let fine_opts = SdeOptions {
        dt: dt / 2.0,
        stride: 2,
        ..opts
    };
    let fine_run = simulate_with(field, initial, &unbounded, &fine_opts, |_| {
        *it.next().expect("fine path long enough")
    })?;
    let noisy_divergence = coarse_run
        .samples
        .iter()
        .zip(&fine_run.samples)
        .map(|(a, b)| distance(&a.r, &b.r))
        .fold(0.0, f64::max);

    let quiet = |h: f64| -> Result<Vec3> {
        let o = SdeOptions {
            dt: h,
            stride: 0,
            ..opts
        }
        .noiseless();
        let t = simulate_with(field, initial, &unbounded, &o, |_| [0.0; 4])?;
        Ok(t.samples.last().expect("endpoint recorded").r)
    };
    let r1 = quiet(dt)?;
    let r2 = quiet(dt / 2.0)?;
    let r4 = quiet(dt / 4.0)?;
    let d1 = distance(&r1, &r2);
    let d2 = distance(&r2, &r4);

    let oscillator = FrozenHarmonic::axial(field.params(), well);
    let start = PhaseState {
        t: 0.0,
        r: [
            oscillator.center[0] + well.half_width / 2.0,
            oscillator.center[1],
            oscillator.center[2],
        ],
        v: [0.0; 3],
    };
    let (drift, excursion, finite) =
        match energy_series(&oscillator, start, dt, horizon, |r| oscillator.potential(r)) {
            Ok(series) => {
                let e0 = series[0].1;
                let period = oscillator.axial_period();
                let excursion = series
                    .iter()
                    .map(|(_, e)| (e - e0).abs() / e0)
                    .fold(0.0, f64::max);
                let first = window_mean(&series, 0.0, period);
                let last = window_mean(&series, horizon - period, horizon);
                let drift = (last - first).abs() / e0 / (horizon / 1000.0);
                (drift, excursion, excursion.is_finite())
            }
            Err(Error::BlowUp { .. }) => (f64::INFINITY, f64::INFINITY, false),
            Err(e) => return Err(e),
        };

    Ok(ConvergenceReport {
        dt,
        horizon,
        noisy_divergence,
        deterministic_differences: [d1, d2],
        order_ratio: d1 / d2,
        energy_drift_per_ms: drift,
        energy_excursion: excursion,
        unstable: !finite || excursion > ENERGY_TOLERANCE,
    })
}

fn distance(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn window_mean(series: &[(f64, f64)], from: f64, to: f64) -> f64 {
    let (sum, n) = series
        .iter()
        .filter(|(t, _)| *t >= from && *t <= to)
        .fold((0.0, 0usize), |(s, n), (_, e)| (s + e, n + 1));
    sum / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Scenario;
    use rand::SeedableRng;

    /// Uniform force field with constant coefficients.
    struct Constant {
        params: PhysicalParams,
        c: LocalCoefficients,
    }

    impl CoefficientProvider for Constant {
        fn local(&self, _r: &Vec3) -> Result<LocalCoefficients> {
            Ok(self.c)
        }
        fn params(&self) -> &PhysicalParams {
            &self.params
        }
        fn coupling(&self, _r: &Vec3) -> f64 {
            0.0
        }
    }

    fn origin() -> PhaseState {
        PhaseState {
            t: 0.0,
            r: [0.0; 3],
            v: [0.0; 3],
        }
    }

    #[test]
    fn well_geometry() {
        let p = Scenario::CaseA.params();
        let w = WellSpec::new(&p, 5).unwrap();
        assert!((w.center - 2.25 * p.lambda_s).abs() < 1e-12);
        assert!((w.radial_bound - 2.0 * p.waist_s).abs() < 1e-12);
        assert_eq!(w.exit(&[w.center, 0.0, p.rho_max()]), None);
        assert_eq!(w.exit(&[w.center + 0.26 * p.lambda_s, 0.0, 0.0]), Some(EscapeKind::Axial));
        assert_eq!(w.exit(&[w.center, 41.0, 0.0]), Some(EscapeKind::Radial));
        assert!(WellSpec::new(&p, 0).is_err());
        assert!(WellSpec::new(&p, 31).is_err());
    }

    #[test]
    fn uniform_acceleration_is_exact_to_first_order() {
        let a = [0.01, -0.02, 0.005];
        let field = Constant {
            params: Scenario::CaseA.params(),
            c: LocalCoefficients {
                phi: a,
                ..Default::default()
            },
        };
        let dt = 0.01;
        let mut s = PhaseState {
            v: [0.1, 0.0, -0.1],
            ..origin()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = SdeOptions::default();
        let n = 1000;
        for _ in 0..n {
            s = step(&s, &field, dt, &mut rng, &opts).unwrap();
        }
        let t = n as f64 * dt;
        for i in 0..3 {
            let v0 = [0.1, 0.0, -0.1][i];
            assert!((s.v[i] - (v0 + a[i] * t)).abs() < 1e-12);
            // kick-drift gives x = v₀t + a t²/2 + a t dt/2
            let exact = v0 * t + 0.5 * a[i] * t * t;
            assert!((s.r[i] - exact - 0.5 * a[i] * t * dt).abs() < 1e-10);
        }
    }

    #[test]
    fn friction_damps_axial_velocity_only() {
        let field = Constant {
            params: Scenario::CaseA.params(),
            c: LocalCoefficients {
                gamma_xx: 0.5,
                ..Default::default()
            },
        };
        let mut s = PhaseState {
            v: [1.0, 1.0, 1.0],
            ..origin()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = SdeOptions::default();
        s = step(&s, &field, 0.1, &mut rng, &opts).unwrap();
        assert!((s.v[0] - 0.95).abs() < 1e-15);
        assert_eq!(s.v[1], 1.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let field = Constant {
            params: Scenario::CaseA.params(),
            c: LocalCoefficients {
                phi: [f64::NAN, 0.0, 0.0],
                ..Default::default()
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = step(&origin(), &field, 0.01, &mut rng, &SdeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }

    #[test]
    fn frozen_oscillator_period() {
        let p = Scenario::CaseB.params();
        let well = WellSpec::new(&p, 5).unwrap();
        let osc = FrozenHarmonic::axial(&p, &well);
        // a ~2 μs axial period
        assert!((osc.axial_period() - 1.66).abs() < 0.02, "{}", osc.axial_period());

        let opts = SdeOptions {
            t_max: 20.0,
            stride: 1,
            ..SdeOptions::default()
        }
        .noiseless();
        let start = PhaseState {
            t: 0.0,
            r: [well.center + 0.05, 0.0, p.rho_max()],
            v: [0.0; 3],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = simulate(&osc, start, &well, &opts, &mut rng).unwrap();
        let crossings: Vec<f64> = traj
            .samples
            .windows(2)
            .filter(|w| (w[0].r[0] - well.center) > 0.0 && (w[1].r[0] - well.center) <= 0.0)
            .map(|w| w[1].t)
            .collect();
        let measured = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        assert!((measured / osc.axial_period() - 1.0).abs() < 1e-3, "{measured}");
    }

    #[test]
    fn spontaneous_diffusion_matches_variance_convention() {
        let d = [0.4e-6, 0.3e-6, 0.3e-6];
        let field = Constant {
            params: Scenario::CaseA.params(),
            c: LocalCoefficients {
                d_spont: d,
                ..Default::default()
            },
        };
        let opts = SdeOptions::default();
        let (dt, n_steps, walkers) = (0.05, 200, 10_000);
        let mut sum = [0.0; 3];
        for w in 0..walkers {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            rng.set_stream(w);
            let mut s = origin();
            for _ in 0..n_steps {
                s = step(&s, &field, dt, &mut rng, &opts).unwrap();
            }
            for i in 0..3 {
                sum[i] += s.v[i] * s.v[i];
            }
        }
        let t = n_steps as f64 * dt;
        for i in 0..3 {
            let expected = d[i] * 2.0 * t;
            let measured = sum[i] / walkers as f64;
            // four standard errors of a chi-square mean with 10⁴ samples
            assert!((measured / expected - 1.0).abs() < 4.0 * (2.0f64 / walkers as f64).sqrt());
        }
    }

    #[test]
    fn equilibrium_is_stationary_without_noise() {
        let p = Scenario::CaseB.params();
        let well = WellSpec::new(&p, 5).unwrap();
        let osc = FrozenHarmonic::axial(&p, &well);
        let start = PhaseState {
            t: 0.0,
            r: osc.center,
            v: [0.0; 3],
        };
        let opts = SdeOptions {
            t_max: 50.0,
            ..SdeOptions::default()
        }
        .noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = simulate(&osc, start, &well, &opts, &mut rng).unwrap();
        assert_eq!(traj.escape_kind, EscapeKind::MaxTime);
        assert_eq!(traj.escape_time, 50.0);
        assert_eq!(traj.samples.last().unwrap().r, osc.center);
    }

    #[test]
    fn diagnostics_windows() {
        let field = Constant {
            params: Scenario::CaseA.params(),
            c: LocalCoefficients::default(),
        };
        let p = Scenario::CaseA.params();
        let well = WellSpec {
            index: 1,
            center: 0.0,
            half_width: f64::INFINITY,
            radial_bound: f64::INFINITY,
        };
        let start = PhaseState {
            t: 0.0,
            r: [0.0, 0.0, p.rho_max()],
            v: [0.3, 0.0, 0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = SdeOptions {
            t_max: 10.0,
            dt: 0.01,
            equilibration: 5.0,
            ..SdeOptions::default()
        };
        let traj = simulate(&field, start, &well, &opts, &mut rng).unwrap();
        let d = traj.diagnostics;
        assert!((d.vx_rms_full - 0.3).abs() < 1e-12);
        assert!((d.vx_rms_post.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(d.g_range_post, Some((0.0, 0.0)));
        let short = SdeOptions {
            t_max: 4.0,
            ..opts
        };
        let traj = simulate(&field, start, &well, &short, &mut rng).unwrap();
        assert_eq!(traj.diagnostics.vx_rms_post, None);
        assert!((traj.diagnostics.vx_rms() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn probe_on_frozen_oscillator() {
        let p = Scenario::CaseB.params();
        let well = WellSpec::new(&p, 5).unwrap();
        let osc = FrozenHarmonic::axial(&p, &well);
        let start = PhaseState {
            t: 0.0,
            r: [well.center + 0.05, 0.0, p.rho_max()],
            v: [0.0, 0.0, 0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = convergence_probe(&osc, start, &well, DEFAULT_DT, 1000.0, &mut rng).unwrap();
        assert!(!rep.unstable, "{rep:?}");
        assert!(rep.energy_drift_per_ms < 0.01, "{rep:?}");
        let coarse = convergence_probe(&osc, start, &well, 0.1, 1000.0, &mut rng).unwrap();
        assert!(coarse.unstable, "{coarse:?}");
    }
}
