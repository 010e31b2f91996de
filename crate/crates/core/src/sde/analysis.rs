//! Oscillation periods and amplitudes read off recorded trajectories.

use std::f64::consts::{PI, TAU};

use super::PhaseState;

/// Times at which `f` crosses `level` downward, linearly interpolated.
fn downward_crossings<F: Fn(&PhaseState) -> f64>(samples: &[PhaseState], level: f64, f: F) -> Vec<f64> {
    samples
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (f(&w[0]) - level, f(&w[1]) - level);
            (a > 0.0 && b <= 0.0).then(|| w[0].t + (w[1].t - w[0].t) * a / (a - b))
        })
        .collect()
}

fn mean_interval(times: &[f64]) -> Option<f64> {
    (times.len() >= 2).then(|| (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64)
}

fn window(samples: &[PhaseState], t_end: f64) -> &[PhaseState] {
    let n = samples.partition_point(|s| s.t <= t_end);
    &samples[..n]
}

/// Mean period of the axial motion about `center`, over samples with t ≤ `t_end`.
pub fn axial_period(samples: &[PhaseState], center: f64, t_end: f64) -> Option<f64> {
    mean_interval(&downward_crossings(window(samples, t_end), center, |s| s.r[0]))
}

/// Mean period of ρ(t) about its window average.
pub fn radial_period(samples: &[PhaseState], t_end: f64) -> Option<f64> {
    let w = window(samples, t_end);
    if w.is_empty() {
        return None;
    }
    let mean = w.iter().map(PhaseState::rho).sum::<f64>() / w.len() as f64;
    mean_interval(&downward_crossings(w, mean, PhaseState::rho))
}

/// Half the peak-to-peak excursion of ρ over t ≤ `t_end`.
pub fn radial_amplitude(samples: &[PhaseState], t_end: f64) -> Option<f64> {
    let w = window(samples, t_end);
    let (lo, hi) = w
        .iter()
        .map(PhaseState::rho)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
    (hi >= lo).then(|| 0.5 * (hi - lo))
}

/// Period of the azimuthal rotation about the cavity axis from the unwrapped
/// angle atan2(z, y); `None` if the atom does not turn.
pub fn rotation_period(samples: &[PhaseState]) -> Option<f64> {
    let angle = |s: &PhaseState| s.r[2].atan2(s.r[1]);
    let first = samples.first()?;
    let last = samples.last()?;
    let mut total = 0.0;
    let mut prev = angle(first);
    for s in &samples[1..] {
        let a = angle(s);
        let mut d = a - prev;
        if d > PI {
            d -= TAU;
        } else if d < -PI {
            d += TAU;
        }
        total += d;
        prev = a;
    }
    (total != 0.0).then(|| TAU * (last.t - first.t) / total.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> ([f64; 3], [f64; 3]), t_end: f64, dt: f64) -> Vec<PhaseState> {
        (0..=((t_end / dt) as usize))
            .map(|k| {
                let t = k as f64 * dt;
                let (r, v) = f(t);
                PhaseState { t, r, v }
            })
            .collect()
    }

    #[test]
    fn periods_of_synthetic_motion() {
        let (w_ax, w_rad, w_rot) = (TAU / 2.0, TAU / 100.0, TAU / 1000.0);
        let s = series(
            |t| {
                let rho = 14.0 + 0.5 * (w_rad * t).sin();
                let th = w_rot * t;
                ([2.0 + 0.1 * (w_ax * t).cos(), rho * th.cos(), rho * th.sin()], [0.0; 3])
            },
            3000.0,
            0.01,
        );
        assert!((axial_period(&s, 2.0, 3000.0).unwrap() - 2.0).abs() < 1e-6);
        assert!((radial_period(&s, 3000.0).unwrap() - 100.0).abs() < 1e-3);
        assert!((radial_amplitude(&s, 500.0).unwrap() - 0.5).abs() < 1e-6);
        assert!((rotation_period(&s).unwrap() - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn static_atom_has_no_periods() {
        let s = series(|_| ([2.0, 14.0, 0.0], [0.0; 3]), 10.0, 0.1);
        assert_eq!(axial_period(&s, 1.0, 10.0), None);
        assert_eq!(rotation_period(&s), None);
        assert_eq!(radial_amplitude(&s, 10.0), Some(0.0));
    }
}
