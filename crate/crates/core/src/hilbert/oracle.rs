//! Brute-force time propagation under L, used to cross-check steady states
//! and the resolvent-based correlation integrals.

use num_complex::Complex64;

use super::{chi_source, xi_source, CMatrix, DensityOperator, OperatorSet, Superoperator};
use crate::error::{Error, Result};
use crate::params::{PhysicalParams, StarkCase};

/// The rates that bound the oracle's step and set its horizon.
#[derive(Clone, Copy, Debug)]
pub struct RateScales {
    pub kappa: f64,
    pub gamma: f64,
    pub delta_p: f64,
    pub g0: f64,
    /// Largest Stark shift entering L; `None` when the shift is a scalar
    /// (equal-shift case) and drops out of the commutator.
    pub s_max: Option<f64>,
}

impl RateScales {
    pub fn from_params(p: &PhysicalParams) -> Self {
        RateScales {
            kappa: p.kappa,
            gamma: p.gamma,
            delta_p: p.delta_p,
            g0: p.g0,
            s_max: match p.stark_case {
                StarkCase::A => Some(p.s_max()),
                StarkCase::B => None,
            },
        }
    }

    /// 0.05 · min{1/κ, 1/γ, 1/|Δ_p|, 1/g₀, 1/S_max}.
    pub fn max_step(&self) -> f64 {
        let mut fastest = self.kappa.max(self.gamma).max(self.delta_p.abs()).max(self.g0);
        if let Some(s) = self.s_max {
            fastest = fastest.max(s);
        }
        0.05 / fastest
    }

    /// 40 · max{1/κ, 1/γ}.
    pub fn horizon(&self) -> f64 {
        40.0 / self.kappa.min(self.gamma)
    }
}

/// One classical RK4 step for the linear autonomous system ẋ = Lx is exactly
/// multiplication by the degree-4 Taylor polynomial of e^{hL}; it is formed
/// once and reused for every step.
fn rk4_step_matrix(l: &Superoperator, h: f64) -> CMatrix {
    let n = l.matrix.nrows();
    let id = CMatrix::identity(n, n);
    let hl = &l.matrix * Complex64::new(h, 0.0);
    let mut p = &id + &hl * Complex64::new(0.25, 0.0);
    p = &id + &hl * &p * Complex64::new(1.0 / 3.0, 0.0);
    p = &id + &hl * &p * Complex64::new(0.5, 0.0);
    &id + &hl * &p
}

fn check_step(dt: f64, t_max: f64, rates: &RateScales) -> Result<usize> {
    let limit = rates.max_step();
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "oracle step {dt:.3e} us outside (0, {limit:.3e}]"
        )));
    }
    if !(t_max >= 0.0) {
        return Err(Error::invalid(format!("oracle horizon {t_max} must be nonnegative")));
    }
    Ok((t_max / dt).ceil() as usize)
}

#[derive(Clone, Debug)]
pub struct PropagationSeries {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
}

/// e^{Lτ}X sampled every `stride` RK4 steps of size `dt` up to `t_max`.
pub fn propagate_oracle(
    l: &Superoperator,
    x: &CMatrix,
    t_max: f64,
    dt: f64,
    rates: &RateScales,
    stride: usize,
) -> Result<PropagationSeries> {
    let steps = check_step(dt, t_max, rates)?;
    let stride = stride.max(1);
    let step = rk4_step_matrix(l, dt);
    let mut v = super::vec(x);
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    for k in 1..=steps {
        v = &step * &v;
        if k % stride == 0 || k == steps {
            times.push(k as f64 * dt);
            states.push(super::unvec(&v, l.dim));
        }
    }
    Ok(PropagationSeries { times, states })
}

/// Time-integrated χ and ξ for (A, B) ∈ {Φ, Ψ}²; index 0 is Φ, 1 is Ψ,
/// first index A, second B.
#[derive(Clone, Debug)]
pub struct OracleCorrelations {
    pub chi: [[f64; 2]; 2],
    pub xi: [[f64; 2]; 2],
    /// Largest discarded imaginary part.
    pub max_imag: f64,
    /// Largest |integrand| (τ-weighted for χ) at the horizon.
    pub tail: f64,
    pub steps: usize,
}

/// ∫₀^T τ·i⟨[A(τ), B]⟩ dτ and ∫₀^T [½⟨{A(τ), B}⟩ − ⟨A⟩⟨B⟩] dτ by RK4 and
/// the endpoint-corrected trapezoidal rule. `dt` defaults to the largest admissible step and
/// `t_max` to the rate horizon.
pub fn oracle_correlations(
    l: &Superoperator,
    eta: &DensityOperator,
    ops: &OperatorSet,
    rates: &RateScales,
    dt: Option<f64>,
    t_max: Option<f64>,
) -> Result<OracleCorrelations> {
    let t_max = t_max.unwrap_or_else(|| rates.horizon());
    let steps_hint = (t_max / rates.max_step()).ceil().max(1.0);
    let dt = dt.unwrap_or(t_max / steps_hint);
    let steps = check_step(dt, t_max, rates)?;
    let dt = t_max / steps as f64;

    let d = ops.dim;
    let n = d * d;
    let ops_ab = [&ops.phi, &ops.psi];

    // columns: χ-source(Φ), χ-source(Ψ), ξ-source(Φ), ξ-source(Ψ)
    let mut sources = CMatrix::zeros(n, 4);
    for (k, b) in ops_ab.iter().enumerate() {
        sources.set_column(k, &super::vec(&chi_source(eta, b)));
        sources.set_column(2 + k, &super::vec(&xi_source(eta, b)));
    }
    // Tr[A X] = vec(Aᵀ) · vec(X)
    let mut readout = CMatrix::zeros(2, n);
    for (k, a) in ops_ab.iter().enumerate() {
        readout.set_row(k, &super::vec(&a.transpose()).transpose());
    }

    let step = rk4_step_matrix(l, dt);
    let sources0 = sources.clone();
    let first = &readout * &sources;
    let mut plain = CMatrix::zeros(2, 4);
    let mut weighted = CMatrix::zeros(2, 4);
    let mut state = sources;
    let mut last = CMatrix::zeros(2, 4);
    for k in 0..=steps {
        if k > 0 {
            state = &step * &state;
        }
        let f = &readout * &state;
        let tau = k as f64 * dt;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        plain += &f * Complex64::new(w * dt, 0.0);
        weighted += &f * Complex64::new(w * dt * tau, 0.0);
        if k == steps {
            last = f;
        }
    }

    // Euler-Maclaurin endpoint correction −dt²/12·[F'(T) − F'(0)] lifts the
    // trapezoidal rule to fourth order; F' = readout·L·state.
    let deriv0 = &readout * &l.matrix * &sources0;
    let deriv_t = &readout * &l.matrix * &state;
    let c = Complex64::new(dt * dt / 12.0, 0.0);
    plain -= (&deriv_t - &deriv0) * c;
    // (τF)' = F + τF'; at τ = 0 only F(0) survives
    weighted -= (&last + &deriv_t * Complex64::new(t_max, 0.0) - &first) * c;

    let mut chi = [[0.0; 2]; 2];
    let mut xi = [[0.0; 2]; 2];
    let mut max_imag = 0.0f64;
    let mut tail = 0.0f64;
    for a in 0..2 {
        for b in 0..2 {
            let c = weighted[(a, b)] * Complex64::new(0.0, 1.0);
            let x = plain[(a, 2 + b)];
            max_imag = max_imag.max(c.im.abs()).max(x.im.abs());
            chi[a][b] = c.re;
            xi[a][b] = x.re;
            tail = tail
                .max(last[(a, b)].norm() * t_max)
                .max(last[(a, 2 + b)].norm());
        }
    }
    Ok(OracleCorrelations {
        chi,
        xi,
        max_imag,
        tail,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_operators, liouvillian_at, steady_state, MaxModulus};
    use crate::params::Scenario;

    #[test]
    fn step_bound_is_enforced() {
        let p = Scenario::CaseA.params();
        let rates = RateScales::from_params(&p);
        let ops = build_operators(2).unwrap();
        let l = liouvillian_at(&ops, &p, 0.0, 0.0).unwrap();
        let x = CMatrix::zeros(ops.dim, ops.dim);
        assert!(propagate_oracle(&l, &x, 1.0, 2.0 * rates.max_step(), &rates, 1).is_err());
        assert!(propagate_oracle(&l, &x, 1.0, -1.0, &rates, 1).is_err());
        // the bound is set by the largest Stark shift in case (a)
        assert!((rates.max_step() - 0.05 / p.s_max()).abs() < 1e-15);
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let p = Scenario::CaseA.params();
        let rates = RateScales::from_params(&p);
        let ops = build_operators(4).unwrap();
        let l = liouvillian_at(&ops, &p, 150.0, 200.0).unwrap();
        let eta = steady_state(&l).unwrap();
        let series = propagate_oracle(&l, &eta.matrix, 0.5, rates.max_step(), &rates, 100).unwrap();
        for s in &series.states {
            let dev = (s - &eta.matrix).max_modulus();
            assert!(dev < 1e-11, "{dev}");
        }
    }

    #[test]
    fn traceless_input_decays_and_trace_is_conserved() {
        let p = Scenario::CaseA.params();
        let rates = RateScales::from_params(&p);
        let ops = build_operators(4).unwrap();
        let l = liouvillian_at(&ops, &p, 150.0, 200.0).unwrap();
        let eta = steady_state(&l).unwrap();
        let x = chi_source(&eta, &ops.phi) + xi_source(&eta, &ops.psi);
        let norm0 = x.max_modulus();
        let series =
            propagate_oracle(&l, &x, rates.horizon(), rates.max_step(), &rates, 500).unwrap();
        let last = series.states.last().unwrap();
        assert!(last.max_modulus() < 1e-8 * norm0, "{}", last.max_modulus() / norm0);
        for s in &series.states {
            assert!(s.trace().norm() < 1e-12);
        }

        // a state with unit trace keeps it
        let mut rho = CMatrix::zeros(ops.dim, ops.dim);
        rho[(ops.n_max + 1, ops.n_max + 1)] = Complex64::new(1.0, 0.0);
        let series = propagate_oracle(&l, &rho, 1.0, rates.max_step(), &rates, 200).unwrap();
        for s in &series.states {
            assert!((s.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn long_time_propagation_reaches_steady_state() {
        // case (a) at the doughnut radius on an antinode
        let p = Scenario::CaseA.params();
        let rates = RateScales::from_params(&p);
        let ops = build_operators(4).unwrap();
        let g = p.g0 * (-0.5f64).exp();
        let l = liouvillian_at(&ops, &p, g, p.s_max()).unwrap();
        let eta = steady_state(&l).unwrap();
        let mut rho = CMatrix::zeros(ops.dim, ops.dim);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        let series =
            propagate_oracle(&l, &rho, 3.0 * rates.horizon(), rates.max_step(), &rates, 100_000)
                .unwrap();
        let last = DensityOperator {
            matrix: series.states.last().unwrap().clone(),
        };
        let ee_prop = last.expect(&ops.excited).re;
        let ee = eta.expect(&ops.excited).re;
        assert!(ee > 0.0);
        assert!((ee_prop - ee).abs() < 1e-8, "{ee_prop} vs {ee}");
    }
}
