//! Survival curves and exponential lifetime fits for right-censored times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Minimum number of observed escapes for a well-conditioned fit.
pub const MIN_EVENTS: usize = 10;

/// One step of the Kaplan-Meier estimator: P(T > t) just after `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalPoint {
    pub t: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalFit {
    /// Kaplan-Meier curve starting at (0, 1).
    pub curve: Vec<SurvivalPoint>,
    pub n: usize,
    pub events: usize,
    pub censored: usize,
    /// Censoring-adjusted maximum-likelihood lifetime Σtᵢ / #events.
    pub tau_mle: f64,
    /// Least-squares lifetime from log P(t) = −t/τ, when the curve has
    /// interior points.
    pub tau_lsq: Option<f64>,
    /// Bootstrap standard deviation of τ_MLE.
    pub sigma: f64,
    /// Fewer than [`MIN_EVENTS`] escapes were observed.
    pub few_events: bool,
}

/// P(T > t) from the Kaplan-Meier estimator.
pub fn kaplan_meier(times: &[f64], censored: &[bool]) -> Result<Vec<SurvivalPoint>> {
    if times.len() != censored.len() {
        return Err(Error::invalid("times and censoring flags differ in length"));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::invalid(format!("survival time {t} must be finite and nonnegative")));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    // events before censorings at equal times
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(censored[a].cmp(&censored[b])));
    let mut curve = vec![SurvivalPoint { t: 0.0, p: 1.0 }];
    let mut at_risk = times.len();
    let mut p = 1.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0;
        let mut leaving = 0;
        while i < order.len() && times[order[i]] == t {
            if !censored[order[i]] {
                deaths += 1;
            }
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            p *= 1.0 - deaths as f64 / at_risk as f64;
            curve.push(SurvivalPoint { t, p });
        }
        at_risk -= leaving;
    }
    Ok(curve)
}

/// Value of a Kaplan-Meier step function at `t`.
pub fn survival_at(curve: &[SurvivalPoint], t: f64) -> f64 {
    curve
        .iter()
        .take_while(|pt| pt.t <= t)
        .last()
        .map_or(1.0, |pt| pt.p)
}

fn mle(times: &[f64], censored: &[bool]) -> Option<f64> {
    let events = censored.iter().filter(|c| !**c).count();
    (events > 0).then(|| times.iter().sum::<f64>() / events as f64)
}

/// Fit log P = −t/τ through the origin over the curve's interior points.
fn lsq(curve: &[SurvivalPoint]) -> Option<f64> {
    let (num, den) = curve
        .iter()
        .filter(|pt| pt.t > 0.0 && pt.p > 0.0 && pt.p < 1.0)
        .fold((0.0, 0.0), |(n, d), pt| (n - pt.t * pt.p.ln(), d + pt.t * pt.t));
    (num > 0.0).then(|| den / num)
}

/// Kaplan-Meier curve with maximum-likelihood and least-squares exponential
/// lifetimes and a bootstrap error from `resamples` resamples.
pub fn survival_and_fit(
    times: &[f64],
    censored: &[bool],
    resamples: usize,
    seed: u64,
) -> Result<SurvivalFit> {
    let curve = kaplan_meier(times, censored)?;
    let tau_mle = mle(times, censored).ok_or_else(|| {
        Error::Statistics(format!(
            "all {} survival times are censored; no lifetime can be fitted",
            times.len()
        ))
    })?;
    let events = censored.iter().filter(|c| !**c).count();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = times.len();
    let mut taus = Vec::with_capacity(resamples);
    let mut bt = vec![0.0; n];
    let mut bc = vec![false; n];
    for _ in 0..resamples {
        for j in 0..n {
            let k = rng.random_range(0..n);
            bt[j] = times[k];
            bc[j] = censored[k];
        }
        if let Some(t) = mle(&bt, &bc) {
            taus.push(t);
        }
    }
    let sigma = if taus.len() > 1 {
        let mean = taus.iter().sum::<f64>() / taus.len() as f64;
        (taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (taus.len() - 1) as f64).sqrt()
    } else {
        0.0
    };

    Ok(SurvivalFit {
        tau_lsq: lsq(&curve),
        curve,
        n,
        events,
        censored: n - events,
        tau_mle,
        sigma,
        few_events: events < MIN_EVENTS,
    })
}

impl SurvivalFit {
    /// Half-width of the Dvoretzky-Kiefer-Wolfowitz band at level 1 − α.
    pub fn dkw_epsilon(&self, alpha: f64) -> f64 {
        ((2.0 / alpha).ln() / (2.0 * self.n as f64)).sqrt()
    }

    /// Largest gap between the empirical curve and exp(−t/τ_MLE), checked on
    /// both sides of every step.
    pub fn max_model_gap(&self) -> f64 {
        let model = |t: f64| (-t / self.tau_mle).exp();
        let mut gap = 0.0f64;
        let mut prev = 1.0;
        for pt in &self.curve {
            let m = model(pt.t);
            gap = gap.max((prev - m).abs()).max((pt.p - m).abs());
            prev = pt.p;
        }
        gap
    }

    pub fn within_dkw_band(&self, alpha: f64) -> bool {
        self.max_model_gap() <= self.dkw_epsilon(alpha)
    }
}
