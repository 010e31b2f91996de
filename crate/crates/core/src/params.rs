//! Physical parameters and the four scenario presets.
//!
//! Units throughout the crate: lengths in μm, times in μs, angular
//! frequencies in rad/μs, velocities in μm/μs (numerically equal to m/s).
//! Planck's constant never appears on its own; the dynamics only needs
//! ħ/M and the recoil velocity ħk/M.

use std::f64::consts::{E as EULER, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant [J s].
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit [kg].
pub const ATOMIC_MASS_UNIT_SI: f64 = 1.660_539_066_60e-27;
/// Mass of ¹³³Cs in atomic mass units.
pub const CESIUM_MASS_U: f64 = 132.905;
/// Cs D2 wavelength [μm]; the cavity QED mode is resonant with it.
pub const CESIUM_D2_WAVELENGTH_UM: f64 = 0.8524;

/// Spontaneous-emission dipole pattern weights along (x, y, z).
pub const EMISSION_PATTERN: [f64; 3] = [2.0 / 5.0, 3.0 / 10.0, 3.0 / 10.0];

/// M/ħ for cesium in μs/μm².
pub fn cesium_mass_over_hbar() -> f64 {
    // s/m² -> μs/μm²: 1 s/m² = 1e6 μs / 1e12 μm²
    CESIUM_MASS_U * ATOMIC_MASS_UNIT_SI / HBAR_SI * 1e-6
}

/// How the FORT light shifts the two atomic levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarkCase {
    /// Ground state shifted down, excited state up by the same amount.
    A,
    /// Both levels shifted down by the same amount.
    B,
}

impl fmt::Display for StarkCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StarkCase::A => f.write_str("a"),
            StarkCase::B => f.write_str("b"),
        }
    }
}

/// Transverse profile of the quantized cavity mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CavityProfile {
    /// Fundamental Gaussian, g ∝ exp(−ρ²/W_g²).
    Gaussian,
    /// LG₀₁ doughnut normalized to the Gaussian's coupling at ρ = W_g/√2.
    Lg01,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Atomic amplitude decay rate γ [rad/μs].
    pub gamma: f64,
    /// Cavity field decay rate κ [rad/μs].
    pub kappa: f64,
    /// Peak single-photon coupling g₀ [rad/μs].
    pub g0: f64,
    /// Cavity drive E [rad/μs].
    pub drive: f64,
    /// Probe detuning from the atomic (and cavity) resonance [rad/μs];
    /// negative is red.
    pub delta_p: f64,
    /// Cavity QED mode wavelength [μm].
    pub lambda_g: f64,
    /// FORT wavelength [μm].
    pub lambda_s: f64,
    /// Cavity QED mode waist [μm].
    pub waist_g: f64,
    /// FORT mode waist [μm].
    pub waist_s: f64,
    /// FORT Stark-shift prefactor [rad/μs/μm^(2m)].
    pub s0: f64,
    /// LG₀ₘ radial index of the FORT mode.
    pub m: u32,
    pub stark_case: StarkCase,
    pub cavity_profile: CavityProfile,
    /// M/ħ [μs/μm²].
    pub mass_over_hbar: f64,
    /// Fock-space truncation.
    pub n_max: usize,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("g0", self.g0),
            ("lambda_g", self.lambda_g),
            ("lambda_s", self.lambda_s),
            ("waist_g", self.waist_g),
            ("waist_s", self.waist_s),
            ("s0", self.s0),
            ("mass_over_hbar", self.mass_over_hbar),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.drive.is_finite() && self.drive >= 0.0) {
            return Err(Error::invalid(format!("drive must be nonnegative, got {}", self.drive)));
        }
        if !self.delta_p.is_finite() {
            return Err(Error::invalid("delta_p must be finite"));
        }
        if self.m < 1 {
            return Err(Error::invalid("FORT radial index m must be >= 1"));
        }
        if self.n_max < 1 {
            return Err(Error::invalid("n_max must be >= 1"));
        }
        let ratio = self.lambda_s / self.lambda_g;
        if (ratio - 16.0 / 15.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "lambda_s / lambda_g must be 16/15 (cavity of 16 QED and 15 FORT wavelengths), got {ratio}"
            )));
        }
        Ok(())
    }

    /// Atomic detuning from the probe, ω_eg − ω_p.
    pub fn omega_ap(&self) -> f64 {
        -self.delta_p
    }

    /// Cavity detuning from the probe, ω_c − ω_p.
    pub fn omega_gp(&self) -> f64 {
        -self.delta_p
    }

    pub fn k_g(&self) -> f64 {
        2.0 * PI / self.lambda_g
    }

    pub fn k_s(&self) -> f64 {
        2.0 * PI / self.lambda_s
    }

    /// Wavenumber of the atomic transition (equal to the QED mode's).
    pub fn k_a(&self) -> f64 {
        self.k_g()
    }

    pub fn hbar_over_mass(&self) -> f64 {
        1.0 / self.mass_over_hbar
    }

    /// ħk_a/M [μm/μs].
    pub fn recoil_velocity(&self) -> f64 {
        self.k_a() / self.mass_over_hbar
    }

    /// Radius of the FORT intensity maximum, W_S √(m/2).
    pub fn rho_max(&self) -> f64 {
        self.waist_s * (self.m as f64 / 2.0).sqrt()
    }

    /// Peak Stark shift S₀ (W_S² m/2)^m e^(−m), reached at ρ_max on an antinode.
    pub fn s_max(&self) -> f64 {
        peak_stark_shift(self.s0, self.m, self.waist_s)
    }

    /// Empty-cavity photon number E²/(κ² + Δ_p²).
    pub fn empty_cavity_photons(&self) -> f64 {
        self.drive * self.drive / (self.kappa * self.kappa + self.delta_p * self.delta_p)
    }

    /// Cavity length L = 16 λ_g = 15 λ_S.
    pub fn cavity_length(&self) -> f64 {
        16.0 * self.lambda_g
    }

    /// Number of FORT wells between the mirrors, 2L/λ_S.
    pub fn n_wells(&self) -> usize {
        (2.0 * self.cavity_length() / self.lambda_s).round() as usize
    }

    /// Axial position of the n-th FORT antinode (n ≥ 1), (n − ½) λ_S/2.
    pub fn well_center(&self, n: usize) -> f64 {
        (n as f64 - 0.5) * self.lambda_s / 2.0
    }
}

/// 64-bit FNV-1a digest of `bytes`; stable across platforms and releases.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl PhysicalParams {
    /// Digest of every field at round-trip precision.
    pub fn digest(&self) -> u64 {
        fnv1a64(format!("{self:?}").as_bytes())
    }
}

/// S₀ (W² m/2)^m e^(−m).
pub fn peak_stark_shift(s0: f64, m: u32, waist: f64) -> f64 {
    let mf = m as f64;
    s0 * (waist * waist * mf / 2.0).powi(m as i32) * (-mf).exp()
}

/// Prefactor S₀ that places a peak shift `s_max` at ρ_max for an LG₀ₘ mode of waist `waist`.
pub fn s0_for_peak(s_max: f64, m: u32, waist: f64) -> f64 {
    s_max / peak_stark_shift(1.0, m, waist)
}

/// The four parameter sets studied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "case-a")]
    CaseA,
    #[serde(rename = "case-b")]
    CaseB,
    #[serde(rename = "case-b-lg012")]
    CaseBLg012,
    #[serde(rename = "case-b-intense")]
    CaseBIntense,
}

/// Which trajectories enter the survival curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurvivalSubset {
    Trapped,
    All,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::CaseA,
        Scenario::CaseB,
        Scenario::CaseBLg012,
        Scenario::CaseBIntense,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CaseA => "case-a",
            Scenario::CaseB => "case-b",
            Scenario::CaseBLg012 => "case-b-lg012",
            Scenario::CaseBIntense => "case-b-intense",
        }
    }

    pub fn params(self) -> PhysicalParams {
        let two_pi = 2.0 * PI;
        let lambda_g = CESIUM_D2_WAVELENGTH_UM;
        let base = PhysicalParams {
            gamma: two_pi * 2.6,
            kappa: two_pi * 4.0,
            g0: two_pi * 30.0 * EULER.sqrt(),
            drive: 6.77,
            delta_p: -two_pi * 10.0,
            lambda_g,
            lambda_s: lambda_g * 16.0 / 15.0,
            waist_g: 20.0,
            waist_s: 20.0,
            s0: PI * EULER / 2.0,
            m: 1,
            stark_case: StarkCase::A,
            cavity_profile: CavityProfile::Gaussian,
            mass_over_hbar: cesium_mass_over_hbar(),
            n_max: 4,
        };
        match self {
            Scenario::CaseA => base,
            Scenario::CaseB => PhysicalParams {
                drive: 22.13,
                delta_p: -two_pi * 35.0,
                stark_case: StarkCase::B,
                ..base
            },
            Scenario::CaseBLg012 => {
                let waist_s = 20.0 / 12f64.sqrt();
                PhysicalParams {
                    drive: 22.13,
                    delta_p: -two_pi * 35.0,
                    stark_case: StarkCase::B,
                    m: 12,
                    waist_s,
                    // ≈ 1.248e-20; pinned to the same 2π×50 peak at the same radius
                    s0: s0_for_peak(two_pi * 50.0, 12, waist_s),
                    ..base
                }
            }
            Scenario::CaseBIntense => PhysicalParams {
                drive: 22.13,
                delta_p: -two_pi * 35.0,
                stark_case: StarkCase::B,
                s0: 4.0 * PI * EULER,
                ..base
            },
        }
    }

    /// Censoring horizon for trajectory simulation [μs].
    pub fn default_t_max(self) -> f64 {
        match self {
            Scenario::CaseBIntense => 3.0e6,
            _ => 2.0e5,
        }
    }

    pub fn survival_subset(self) -> SurvivalSubset {
        match self {
            Scenario::CaseA => SurvivalSubset::Trapped,
            _ => SurvivalSubset::All,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "case-a" | "a" => Ok(Scenario::CaseA),
            "case-b" | "b" => Ok(Scenario::CaseB),
            "case-b-lg012" | "lg012" => Ok(Scenario::CaseBLg012),
            "case-b-intense" | "intense" => Ok(Scenario::CaseBIntense),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}
