//! Fokker-Planck inputs at a position: mean force, axial friction, axial
//! dipole diffusion and spontaneous-emission diffusion, all per unit mass.

mod cache;

pub use cache::{cache_file_name, CoefficientCache, GridSpec, MAX_STENCIL, MIN_GRID};

use crate::error::{Error, Result};
use crate::fields::{FieldPoint, Fields, Vec3};
use crate::hilbert::{
    build_operators, correlation_chi, correlation_xi, liouvillian_at, steady_state, OperatorSet,
    Resolvent,
};
use crate::params::{PhysicalParams, StarkCase, EMISSION_PATTERN};

/// Steady-state expectations and correlation integrals at one (g, S).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlochPoint {
    pub exp_phi: f64,
    pub exp_psi: f64,
    pub exp_ee: f64,
    pub chi_gg: f64,
    pub chi_gs: f64,
    pub chi_sg: f64,
    pub chi_ss: f64,
    pub xi_gg: f64,
    pub xi_gs: f64,
    pub xi_sg: f64,
    pub xi_ss: f64,
}

/// Number of scalars in a [`BlochPoint`].
pub const BLOCH_LEN: usize = 11;

/// Sign picked up by each scalar under g → −g (σ → −σ).
pub const PARITY: [f64; BLOCH_LEN] = [-1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0];

pub const BLOCH_NAMES: [&str; BLOCH_LEN] = [
    "exp_phi", "exp_psi", "exp_ee", "chi_gg", "chi_gs", "chi_sg", "chi_ss", "xi_gg", "xi_gs",
    "xi_sg", "xi_ss",
];

impl BlochPoint {
    pub fn to_array(&self) -> [f64; BLOCH_LEN] {
        [
            self.exp_phi,
            self.exp_psi,
            self.exp_ee,
            self.chi_gg,
            self.chi_gs,
            self.chi_sg,
            self.chi_ss,
            self.xi_gg,
            self.xi_gs,
            self.xi_sg,
            self.xi_ss,
        ]
    }

    pub fn from_array(a: &[f64; BLOCH_LEN]) -> Self {
        BlochPoint {
            exp_phi: a[0],
            exp_psi: a[1],
            exp_ee: a[2],
            chi_gg: a[3],
            chi_gs: a[4],
            chi_sg: a[5],
            chi_ss: a[6],
            xi_gg: a[7],
            xi_gs: a[8],
            xi_sg: a[9],
            xi_ss: a[10],
        }
    }

    /// The point at −g, given this point at g.
    pub fn parity_flipped(&self) -> Self {
        let mut a = self.to_array();
        for (v, s) in a.iter_mut().zip(PARITY) {
            *v *= s;
        }
        BlochPoint::from_array(&a)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let a = self.to_array();
        if let Some(i) = a.iter().position(|v| !v.is_finite()) {
            return Err(Error::Consistency(format!("{} is not finite", BLOCH_NAMES[i])));
        }
        let tol = 1e-10;
        if self.exp_ee < -tol || self.exp_ee > 1.0 + tol {
            return Err(Error::Consistency(format!("<ee> = {} outside [0, 1]", self.exp_ee)));
        }
        if self.exp_psi.abs() > 1.0 + tol {
            return Err(Error::Consistency(format!("<Psi> = {} outside [-1, 1]", self.exp_psi)));
        }
        if self.xi_gg < -1e-9 {
            return Err(Error::Consistency(format!("xi_gg = {} is negative", self.xi_gg)));
        }
        Ok(())
    }
}

/// Source of Bloch-level quantities; shared read-only across trajectories.
pub trait BlochProvider: Sync {
    fn bloch(&self, g: f64, s: f64) -> Result<BlochPoint>;
}

/// Solves the steady state and correlation integrals from scratch each call.
#[derive(Clone, Debug)]
pub struct BlochSolver {
    params: PhysicalParams,
    ops: OperatorSet,
    s_max: f64,
}

/// Relative slack on the (g, S) domain bounds.
const DOMAIN_SLACK: f64 = 1e-9;

impl BlochSolver {
    pub fn new(params: &PhysicalParams) -> Result<Self> {
        params.validate()?;
        Ok(BlochSolver {
            params: params.clone(),
            ops: build_operators(params.n_max)?,
            s_max: params.s_max(),
        })
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn operators(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn in_domain(&self, g: f64, s: f64) -> bool {
        g.abs() <= self.params.g0 * (1.0 + DOMAIN_SLACK)
            && s >= 0.0
            && s <= self.s_max * (1.0 + DOMAIN_SLACK)
    }

    /// Steady state, ⟨Φ⟩, ⟨Ψ⟩, ⟨σ†σ⟩ and the eight χ, ξ integrals.
    pub fn bloch_point(&self, g: f64, s: f64) -> Result<BlochPoint> {
        if !self.in_domain(g, s) {
            return Err(Error::OutOfRange { g, s });
        }
        let ops = &self.ops;
        let l = liouvillian_at(ops, &self.params, g, s)?;
        let eta = steady_state(&l)?;
        let r = Resolvent::new(&l)?;
        let pair = [&ops.phi, &ops.psi];
        let mut chi = [[0.0; 2]; 2];
        let mut xi = [[0.0; 2]; 2];
        for (i, a) in pair.iter().enumerate() {
            for (j, b) in pair.iter().enumerate() {
                chi[i][j] = correlation_chi(&r, &eta, a, b)?;
                xi[i][j] = correlation_xi(&r, &eta, a, b)?;
            }
        }
        let point = BlochPoint {
            exp_phi: eta.expect(&ops.phi).re,
            exp_psi: eta.expect(&ops.psi).re,
            exp_ee: eta.expect(&ops.excited).re,
            chi_gg: chi[0][0],
            chi_gs: chi[0][1],
            chi_sg: chi[1][0],
            chi_ss: chi[1][1],
            xi_gg: xi[0][0],
            xi_gs: xi[0][1],
            xi_sg: xi[1][0],
            xi_ss: xi[1][1],
        };
        point.check_invariants()?;
        Ok(point)
    }
}

impl<T: BlochProvider + ?Sized> BlochProvider for &T {
    fn bloch(&self, g: f64, s: f64) -> Result<BlochPoint> {
        (**self).bloch(g, s)
    }
}

impl<T: BlochProvider + ?Sized> BlochProvider for Box<T> {
    fn bloch(&self, g: f64, s: f64) -> Result<BlochPoint> {
        (**self).bloch(g, s)
    }
}

impl BlochProvider for BlochSolver {
    fn bloch(&self, g: f64, s: f64) -> Result<BlochPoint> {
        self.bloch_point(g, s)
    }
}

/// Everything the stochastic integrator needs at one position. Force and
/// diffusion are divided by M and M² respectively.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalCoefficients {
    /// φ/M [μm/μs²].
    pub phi: Vec3,
    /// Γ_xx [1/μs].
    pub gamma_xx: f64,
    /// Dipole-force D_xx/M² [μm²/μs³].
    pub d_xx: f64,
    /// Spontaneous-emission diffusion per axis, (ħk_a/M)² γ⟨σ†σ⟩ E_ii [μm²/μs³].
    pub d_spont: Vec3,
    pub exp_ee: f64,
    pub g: f64,
    pub s: f64,
}

/// Which parts of the dipole force enter the mean force.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForceTerms {
    pub cavity: bool,
    pub fort: bool,
}

impl Default for ForceTerms {
    fn default() -> Self {
        ForceTerms {
            cavity: true,
            fort: true,
        }
    }
}

/// φ/M = −(ħ/M)[∇g⟨Φ⟩ + ∇S⟨Ψ⟩] in case (a), −(ħ/M)∇g⟨Φ⟩ + (ħ/M)∇S in case (b).
pub fn assemble_force(
    case: StarkCase,
    hbar_over_mass: f64,
    f: &FieldPoint,
    b: &BlochPoint,
    terms: ForceTerms,
) -> Vec3 {
    let cg = if terms.cavity { -b.exp_phi } else { 0.0 };
    let cs = if terms.fort {
        match case {
            StarkCase::A => -b.exp_psi,
            StarkCase::B => 1.0,
        }
    } else {
        0.0
    };
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = hbar_over_mass * (cg * f.grad_g[i] + cs * f.grad_s[i]);
    }
    out
}

/// Γ_xx = (ħ/M)[(∂ₓg)²χ^gg + ∂ₓg∂ₓS(χ^gS + χ^Sg) + (∂ₓS)²χ^SS]; case (b)
/// keeps only the gg term.
pub fn assemble_friction_xx(
    case: StarkCase,
    hbar_over_mass: f64,
    f: &FieldPoint,
    b: &BlochPoint,
) -> f64 {
    let dg = f.grad_g[0];
    let ds = f.grad_s[0];
    let gg = dg * dg * b.chi_gg;
    match case {
        StarkCase::A => {
            hbar_over_mass * (gg + dg * ds * (b.chi_gs + b.chi_sg) + ds * ds * b.chi_ss)
        }
        StarkCase::B => hbar_over_mass * gg,
    }
}

/// Allowed negativity of the dipole diffusion, relative to the sum of the
/// magnitudes of its terms.
pub const DIFFUSION_CLAMP_GATE: f64 = 1e-9;

/// Dipole D_xx/M² = (ħ/M)²[(∂ₓg)²ξ^gg + ∂ₓg∂ₓS(ξ^gS + ξ^Sg) + (∂ₓS)²ξ^SS];
/// case (b) keeps only the gg term. Round-off negativity within the gate is
/// clamped to zero; anything beyond it is an error.
pub fn assemble_diffusion_xx(
    case: StarkCase,
    hbar_over_mass: f64,
    f: &FieldPoint,
    b: &BlochPoint,
) -> Result<f64> {
    let dg = f.grad_g[0];
    let ds = f.grad_s[0];
    let k = hbar_over_mass * hbar_over_mass;
    let terms = match case {
        StarkCase::A => [
            dg * dg * b.xi_gg,
            dg * ds * b.xi_gs,
            dg * ds * b.xi_sg,
            ds * ds * b.xi_ss,
        ],
        StarkCase::B => [dg * dg * b.xi_gg, 0.0, 0.0, 0.0],
    };
    let value = k * terms.iter().sum::<f64>();
    let scale = k * terms.iter().map(|t| t.abs()).sum::<f64>();
    if value >= 0.0 {
        Ok(value)
    } else if value >= -DIFFUSION_CLAMP_GATE * scale {
        Ok(0.0)
    } else {
        Err(Error::Consistency(format!(
            "dipole diffusion {value:.3e} below clamp gate (scale {scale:.3e})"
        )))
    }
}

/// Spontaneous-emission diffusion per axis, (ħk_a/M)² γ⟨σ†σ⟩ E_ii.
pub fn spontaneous_diffusion(p: &PhysicalParams, exp_ee: f64) -> Vec3 {
    let vr = p.recoil_velocity();
    let base = vr * vr * p.gamma * exp_ee.max(0.0);
    EMISSION_PATTERN.map(|e| base * e)
}

/// Position-resolved coefficients backed by a direct solver or a cache.
pub struct CoefficientField<P> {
    params: PhysicalParams,
    fields: Fields,
    provider: P,
    hbar_over_mass: f64,
    recoil_sq_gamma: f64,
    force_terms: ForceTerms,
}

impl<P: BlochProvider> CoefficientField<P> {
    pub fn new(params: &PhysicalParams, provider: P) -> Self {
        let vr = params.recoil_velocity();
        CoefficientField {
            params: params.clone(),
            fields: Fields::new(params),
            provider,
            hbar_over_mass: params.hbar_over_mass(),
            recoil_sq_gamma: vr * vr * params.gamma,
            force_terms: ForceTerms::default(),
        }
    }

    pub fn with_force_terms(mut self, terms: ForceTerms) -> Self {
        self.force_terms = terms;
        self
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn fields(&self) -> &Fields {
        &self.fields
    }

    pub fn provider(&self) -> &P {
        &self.provider
    }

    pub fn local_coefficients(&self, r: &Vec3) -> Result<LocalCoefficients> {
        let f = self.fields.at(r);
        let b = self.provider.bloch(f.g, f.s)?;
        let case = self.params.stark_case;
        let ee = b.exp_ee.max(0.0);
        let spont = self.recoil_sq_gamma * ee;
        Ok(LocalCoefficients {
            phi: assemble_force(case, self.hbar_over_mass, &f, &b, self.force_terms),
            gamma_xx: assemble_friction_xx(case, self.hbar_over_mass, &f, &b),
            d_xx: assemble_diffusion_xx(case, self.hbar_over_mass, &f, &b)?,
            d_spont: EMISSION_PATTERN.map(|e| spont * e),
            exp_ee: ee,
            g: f.g,
            s: f.s,
        })
    }
}

/// A coefficient field usable by the integrator.
pub trait CoefficientProvider: Sync {
    fn local(&self, r: &Vec3) -> Result<LocalCoefficients>;
    fn params(&self) -> &PhysicalParams;
    fn coupling(&self, r: &Vec3) -> f64;
}

impl<P: BlochProvider> CoefficientProvider for CoefficientField<P> {
    fn local(&self, r: &Vec3) -> Result<LocalCoefficients> {
        self.local_coefficients(r)
    }

    fn params(&self) -> &PhysicalParams {
        &self.params
    }

    fn coupling(&self, r: &Vec3) -> f64 {
        self.fields.coupling(r).0
    }
}

/// Axial scan at fixed (y, z) = (0, ρ) over x ∈ [x_start, x_end] with `points` samples.
pub fn axial_scan<C: CoefficientProvider + ?Sized>(
    field: &C,
    rho: f64,
    x_start: f64,
    x_end: f64,
    points: usize,
) -> Result<Vec<(f64, LocalCoefficients)>> {
    if points < 2 {
        return Err(Error::invalid("axial scan needs at least two points"));
    }
    (0..points)
        .map(|i| {
            let x = x_start + (x_end - x_start) * i as f64 / (points - 1) as f64;
            field.local(&[x, 0.0, rho]).map(|c| (x, c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Scenario;

    #[test]
    fn empty_cavity_point() {
        let p = Scenario::CaseA.params();
        let solver = BlochSolver::new(&p).unwrap();
        let b = solver.bloch_point(0.0, 0.0).unwrap();
        assert!(b.exp_phi.abs() < 1e-14);
        assert!(b.exp_ee.abs() < 1e-14);
        assert!((b.exp_psi + 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_is_enforced() {
        let p = Scenario::CaseA.params();
        let solver = BlochSolver::new(&p).unwrap();
        assert!(matches!(
            solver.bloch_point(1.01 * p.g0, 0.0),
            Err(Error::OutOfRange { .. })
        ));
        assert!(solver.bloch_point(0.0, -1.0).is_err());
        assert!(solver.bloch_point(0.0, 1.01 * p.s_max()).is_err());
    }

    #[test]
    fn parity_under_sign_of_g() {
        for sc in [Scenario::CaseA, Scenario::CaseB] {
            let p = sc.params();
            let solver = BlochSolver::new(&p).unwrap();
            for &(g, s) in &[(120.0, 40.0), (30.0, 250.0), (290.0, 310.0)] {
                let plus = solver.bloch_point(g, s).unwrap().to_array();
                let minus = solver.bloch_point(-g, s).unwrap().to_array();
                let scale = plus.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for i in 0..BLOCH_LEN {
                    let err = (minus[i] - PARITY[i] * plus[i]).abs();
                    assert!(
                        err <= 1e-9 * plus[i].abs().max(1e-6 * scale),
                        "{sc} {}: {} vs {}",
                        BLOCH_NAMES[i],
                        plus[i],
                        minus[i]
                    );
                }
            }
        }
    }

    #[test]
    fn weak_driving_excitation_bound() {
        // ⟨σ†σ⟩ stays within an O(1) multiple of N_e g²/(Δ_p² + γ²)
        let p = Scenario::CaseA.params();
        let solver = BlochSolver::new(&p).unwrap();
        let ne = p.empty_cavity_photons();
        for &g in &[5.0, 20.0, 60.0] {
            let b = solver.bloch_point(g, 0.0).unwrap();
            let bound = ne * g * g / (p.delta_p * p.delta_p + p.gamma * p.gamma);
            assert!(b.exp_ee > 0.0 && b.exp_ee < 10.0 * bound, "{g}: {} vs {bound}", b.exp_ee);
        }
    }

    #[test]
    fn force_and_transport_algebra() {
        let f = FieldPoint {
            g: 10.0,
            grad_g: [2.0, 0.5, -0.5],
            s: 3.0,
            grad_s: [-1.0, 4.0, 1.0],
        };
        let b = BlochPoint {
            exp_phi: 0.2,
            exp_psi: -0.9,
            exp_ee: 0.01,
            chi_gg: 1.0,
            chi_gs: 2.0,
            chi_sg: 3.0,
            chi_ss: 4.0,
            xi_gg: 5.0,
            xi_gs: -1.0,
            xi_sg: -2.0,
            xi_ss: 6.0,
        };
        let k = 0.5;
        let fa = assemble_force(StarkCase::A, k, &f, &b, ForceTerms::default());
        let fb = assemble_force(StarkCase::B, k, &f, &b, ForceTerms::default());
        for i in 0..3 {
            assert!((fa[i] - k * (-0.2 * f.grad_g[i] + 0.9 * f.grad_s[i])).abs() < 1e-15);
            // the FORT part in case (b) does not depend on the internal state
            assert!((fb[i] - k * (-0.2 * f.grad_g[i] + f.grad_s[i])).abs() < 1e-15);
        }
        let ga = assemble_friction_xx(StarkCase::A, k, &f, &b);
        assert!((ga - k * (4.0 * 1.0 - 2.0 * 5.0 + 1.0 * 4.0)).abs() < 1e-14);
        let gb = assemble_friction_xx(StarkCase::B, k, &f, &b);
        assert!((gb - k * 4.0).abs() < 1e-15);
        let da = assemble_diffusion_xx(StarkCase::A, k, &f, &b).unwrap();
        assert!((da - k * k * (4.0 * 5.0 + 2.0 * 3.0 + 6.0)).abs() < 1e-14);

        let flat = FieldPoint {
            grad_g: [0.0, 1.0, 1.0],
            grad_s: [0.0, 2.0, 2.0],
            ..f
        };
        assert_eq!(assemble_friction_xx(StarkCase::A, k, &flat, &b), 0.0);
        assert_eq!(assemble_diffusion_xx(StarkCase::A, k, &flat, &b).unwrap(), 0.0);
    }

    #[test]
    fn diffusion_clamp_gate() {
        let f = FieldPoint {
            g: 1.0,
            grad_g: [1.0, 0.0, 0.0],
            s: 0.0,
            grad_s: [0.0; 3],
        };
        let tiny = BlochPoint {
            xi_gg: -1e-12,
            ..Default::default()
        };
        // a pure negative term exceeds any relative gate
        assert!(assemble_diffusion_xx(StarkCase::B, 1.0, &f, &tiny).is_err());
        let f2 = FieldPoint {
            grad_s: [1.0, 0.0, 0.0],
            ..f
        };
        let nearly = BlochPoint {
            xi_gg: 1.0,
            xi_gs: -0.5,
            xi_sg: -0.5 - 1e-12,
            xi_ss: 0.0,
            ..Default::default()
        };
        assert_eq!(assemble_diffusion_xx(StarkCase::A, 1.0, &f2, &nearly).unwrap(), 0.0);
        let bad = BlochPoint {
            xi_sg: -0.6,
            ..nearly
        };
        assert!(assemble_diffusion_xx(StarkCase::A, 1.0, &f2, &bad).is_err());
    }

    #[test]
    fn spontaneous_pattern() {
        let p = Scenario::CaseA.params();
        let d = spontaneous_diffusion(&p, 0.1);
        let vr = p.recoil_velocity();
        let base = vr * vr * p.gamma * 0.1;
        assert!((d[0] - 0.4 * base).abs() < 1e-20);
        assert!((d[1] - 0.3 * base).abs() < 1e-20);
        assert_eq!(d[1], d[2]);
    }
}
