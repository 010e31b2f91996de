//! Spatial structure of the cavity QED mode and the LG₀ₘ FORT mode.
//!
//! Coordinates are Cartesian with x along the cavity axis and ρ² = y² + z².
//! Lengths are in μm, angular frequencies in rad/μs.

use std::f64::consts::PI;

use crate::params::{CavityProfile, PhysicalParams, StarkCase};

pub type Vec3 = [f64; 3];

/// LG₀ₘ intensity 4P·2^(m+1)/(π m!)·ρ^(2m)/W^(2(m+1))·exp(−2ρ²/W²)·sin²(k_S x)
/// in the nearly-planar approximation W(x) = W.
pub fn lg_intensity(rho: f64, x: f64, power: f64, m: u32, waist: f64, k_s: f64) -> f64 {
    let factorial: f64 = (1..=m).map(f64::from).product();
    let w2 = waist * waist;
    4.0 * power * 2f64.powi(m as i32 + 1) / (PI * factorial) * rho.powi(2 * m as i32)
        / w2.powi(m as i32 + 1)
        * (-2.0 * rho * rho / w2).exp()
        * (k_s * x).sin().powi(2)
}

/// Coupling and Stark shift with their gradients at one position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldPoint {
    pub g: f64,
    pub grad_g: Vec3,
    pub s: f64,
    pub grad_s: Vec3,
}

/// Field evaluator bound to one parameter set.
#[derive(Clone, Debug)]
pub struct Fields {
    g0: f64,
    k_g: f64,
    waist_g: f64,
    profile: CavityProfile,
    s0: f64,
    k_s: f64,
    waist_s: f64,
    m: u32,
    stark_case: StarkCase,
}

impl Fields {
    pub fn new(p: &PhysicalParams) -> Self {
        Fields {
            g0: p.g0,
            k_g: p.k_g(),
            waist_g: p.waist_g,
            profile: p.cavity_profile,
            s0: p.s0,
            k_s: p.k_s(),
            waist_s: p.waist_s,
            m: p.m,
            stark_case: p.stark_case,
        }
    }

    /// g(r) and ∇g(r). The Gaussian profile is g₀ sin(k_g x) e^(−ρ²/W_g²); the
    /// LG₀₁ profile is g₀ √2 (ρ/W_g) e^(−ρ²/W_g²) sin(k_g x), which equals the
    /// Gaussian at ρ = W_g/√2. Its transverse gradient is set to zero on axis.
    pub fn coupling(&self, r: &Vec3) -> (f64, Vec3) {
        let [x, y, z] = *r;
        let rho2 = y * y + z * z;
        let w2 = self.waist_g * self.waist_g;
        let (sin, cos) = (self.k_g * x).sin_cos();
        let gauss = (-rho2 / w2).exp();
        match self.profile {
            CavityProfile::Gaussian => {
                let g = self.g0 * sin * gauss;
                let radial = -2.0 * g / w2;
                (g, [self.g0 * self.k_g * cos * gauss, radial * y, radial * z])
            }
            CavityProfile::Lg01 => {
                let rho = rho2.sqrt();
                let amp = self.g0 * 2f64.sqrt() / self.waist_g;
                let radial_part = rho * gauss;
                let g = amp * radial_part * sin;
                let (gy, gz) = if rho > 0.0 {
                    // d/dρ[ρ e^(−ρ²/W²)] · (y, z)/ρ
                    let d = amp * sin * gauss * (1.0 - 2.0 * rho2 / w2) / rho;
                    (d * y, d * z)
                } else {
                    (0.0, 0.0)
                };
                (g, [amp * radial_part * self.k_g * cos, gy, gz])
            }
        }
    }

    /// S(r) = S₀ ρ^(2m) sin²(k_S x) e^(−2ρ²/W_S²) and ∇S(r).
    pub fn stark_shift(&self, r: &Vec3) -> (f64, Vec3) {
        let [x, y, z] = *r;
        let rho2 = y * y + z * z;
        let w2 = self.waist_s * self.waist_s;
        let m = self.m as i32;
        let envelope = self.s0 * (-2.0 * rho2 / w2).exp();
        let (sin, cos) = (self.k_s * x).sin_cos();
        let sin2 = sin * sin;
        let s = envelope * rho2.powi(m) * sin2;
        let dx = envelope * rho2.powi(m) * self.k_s * 2.0 * sin * cos;
        // ∂_y[ρ^(2m) e^(−2ρ²/W²)] = ρ^(2m−2) e^(−2ρ²/W²) y (2m − 4ρ²/W²)
        let radial = envelope * sin2 * rho2.powi(m - 1) * (2.0 * m as f64 - 4.0 * rho2 / w2);
        (s, [dx, radial * y, radial * z])
    }

    pub fn at(&self, r: &Vec3) -> FieldPoint {
        let (g, grad_g) = self.coupling(r);
        let (s, grad_s) = self.stark_shift(r);
        FieldPoint {
            g,
            grad_g,
            s,
            grad_s,
        }
    }

    /// One-excitation dressed-state transition frequencies (Δ₊, Δ₋) relative
    /// to the atomic resonance.
    pub fn dressed_detunings(&self, r: &Vec3) -> (f64, f64) {
        let (g, _) = self.coupling(r);
        let (s, _) = self.stark_shift(r);
        dressed_detunings(self.stark_case, g, s)
    }
}

/// Case (a): S ± √(g² + S²); case (b): ±g.
pub fn dressed_detunings(case: StarkCase, g: f64, s: f64) -> (f64, f64) {
    match case {
        StarkCase::A => {
            let root = g.hypot(s);
            (s + root, s - root)
        }
        StarkCase::B => (g.abs(), -g.abs()),
    }
}

/// Ratios bounding the quasi-classical adiabatic description for a velocity
/// spread Δv = Δp/M.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiclassicalReport {
    /// ħk/Δp.
    pub eps1: f64,
    /// kΔp/(Mγ).
    pub eps2_gamma: f64,
    /// kΔp/(Mκ).
    pub eps2_kappa: f64,
    /// (ħk²/2M)/γ.
    pub recoil_over_gamma: f64,
    /// (ħk²/2M)/κ.
    pub recoil_over_kappa: f64,
    pub pass: bool,
    /// Names of the failing conditions.
    pub failures: Vec<&'static str>,
}

/// Largest recoil-to-linewidth ratio accepted as "much smaller".
pub const RECOIL_RATIO_LIMIT: f64 = 0.01;
/// Largest ε₁, ε₂ accepted as small.
pub const EPSILON_LIMIT: f64 = 0.1;

/// Evaluate the small parameters at velocity spread `delta_v` [μm/μs], with
/// k taken as the atomic wavenumber.
pub fn validate_quasiclassical(p: &PhysicalParams, delta_v: f64) -> QuasiclassicalReport {
    let k = p.k_a();
    let recoil_freq = p.hbar_over_mass() * k * k / 2.0;
    let eps1 = p.recoil_velocity() / delta_v;
    let eps2_gamma = k * delta_v / p.gamma;
    let eps2_kappa = k * delta_v / p.kappa;
    let recoil_over_gamma = recoil_freq / p.gamma;
    let recoil_over_kappa = recoil_freq / p.kappa;

    let mut failures = Vec::new();
    let checks = [
        ("eps1", eps1, EPSILON_LIMIT),
        ("eps2_gamma", eps2_gamma, EPSILON_LIMIT),
        ("eps2_kappa", eps2_kappa, EPSILON_LIMIT),
        ("recoil_over_gamma", recoil_over_gamma, RECOIL_RATIO_LIMIT),
        ("recoil_over_kappa", recoil_over_kappa, RECOIL_RATIO_LIMIT),
    ];
    for (name, value, limit) in checks {
        if !(value < limit) {
            failures.push(name);
        }
    }
    QuasiclassicalReport {
        eps1,
        eps2_gamma,
        eps2_kappa,
        recoil_over_gamma,
        recoil_over_kappa,
        pass: failures.is_empty(),
        failures,
    }
}

/// Velocity spread at which ε₁ = kΔp/(Mγ), the geometric mean of the bounds.
pub fn balanced_velocity_spread(p: &PhysicalParams) -> f64 {
    (p.recoil_velocity() * p.gamma / p.k_a()).sqrt()
}
