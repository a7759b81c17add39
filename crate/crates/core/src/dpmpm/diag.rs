//! Convergence diagnostics for scalar MCMC traces: Geweke's two-window
//! z-score, a Heidelberger–Welch style stationarity test, and the sample
//! autocorrelation function. Standard errors and long-run variances use
//! batch means (20 batches) rather than spectral estimation, which is
//! adequate for pass/fail monitoring.

use crate::error::{Error, Result};

const BATCHES: usize = 20;

/// Asymptotic 5% critical value of the Cramer-von Mises distribution.
const CVM_CRITICAL_5PCT: f64 = 0.461;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Batch-means estimate of the squared standard error of the window mean.
fn batch_se_sq(window: &[f64]) -> f64 {
    let b = BATCHES.min(window.len());
    let len = window.len() / b;
    let means: Vec<f64> = (0..b)
        .map(|i| mean(&window[i * len..(i + 1) * len]))
        .collect();
    let grand = mean(&means);
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    var / b as f64
}

/// Geweke's convergence z-score: standardized difference between the mean
/// of the first `frac_a` and the last `frac_b` of the chain.
pub fn geweke_z(chain: &[f64], frac_a: f64, frac_b: f64) -> Result<f64> {
    if chain.len() < 20 {
        return Err(Error::invalid("geweke_z needs a chain of length >= 20"));
    }
    if !(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0) {
        return Err(Error::invalid("geweke_z window fractions must be positive and sum to <= 1"));
    }
    let n = chain.len();
    let a = &chain[..((n as f64 * frac_a) as usize).max(2)];
    let b = &chain[n - ((n as f64 * frac_b) as usize).max(2)..];
    let (se_a, se_b) = (batch_se_sq(a), batch_se_sq(b));
    let denom = se_a + se_b;
    if denom == 0.0 {
        return Err(Error::DegenerateChain(
            "zero variance in both Geweke windows".into(),
        ));
    }
    Ok((mean(a) - mean(b)) / denom.sqrt())
}

/// Outcome of the stationarity test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HwResult {
    pub pass: bool,
    /// First chain index from which the retained portion looks stationary;
    /// meaningful only when `pass` is true.
    pub start_index: usize,
    /// Cramer-von Mises statistic of the decisive segment.
    pub statistic: f64,
}

/// Cramer-von Mises statistic of the Brownian bridge formed from partial
/// sums, with the long-run variance estimated by batch means.
fn cvm_statistic(seg: &[f64]) -> f64 {
    let n = seg.len();
    let m = mean(seg);
    let b = BATCHES.min(n);
    let len = n / b;
    let batch_means: Vec<f64> = (0..b).map(|i| mean(&seg[i * len..(i + 1) * len])).collect();
    let grand = mean(&batch_means);
    let var_bm = batch_means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    let long_run_var = len as f64 * var_bm;

    let mut bridge_sq_sum = 0.0;
    let mut partial = 0.0;
    for (j, &x) in seg.iter().enumerate() {
        partial += x;
        let bridge = partial - (j + 1) as f64 * m;
        bridge_sq_sum += bridge * bridge;
    }
    if long_run_var == 0.0 {
        return if bridge_sq_sum == 0.0 { 0.0 } else { f64::INFINITY };
    }
    bridge_sq_sum / (n as f64 * n as f64 * long_run_var)
}

/// Heidelberger–Welch style stationarity test: the Cramer-von Mises
/// statistic is evaluated on the full chain, then with successive initial
/// 10% blocks discarded (up to half the chain). Returns the first passing
/// start index, or a failed result.
pub fn heidelberger_welch(chain: &[f64]) -> Result<HwResult> {
    if chain.len() < 50 {
        return Err(Error::invalid("heidelberger_welch needs a chain of length >= 50"));
    }
    let n = chain.len();
    let mut last_stat = f64::INFINITY;
    for tenths in 0..=5 {
        let start = n * tenths / 10;
        let stat = cvm_statistic(&chain[start..]);
        last_stat = stat;
        if stat < CVM_CRITICAL_5PCT {
            return Ok(HwResult {
                pass: true,
                start_index: start,
                statistic: stat,
            });
        }
    }
    Ok(HwResult {
        pass: false,
        start_index: 0,
        statistic: last_stat,
    })
}

/// Sample autocorrelation function normalized by lag 0.
pub fn autocorrelation(chain: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if chain.len() <= max_lag {
        return Err(Error::invalid("autocorrelation needs length > max_lag"));
    }
    let n = chain.len();
    let m = mean(chain);
    let centered: Vec<f64> = chain.iter().map(|x| x - m).collect();
    let denom: f64 = centered.iter().map(|x| x * x).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateChain("zero variance chain has no ACF".into()));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            let num: f64 = (0..n - lag).map(|i| centered[i] * centered[i + lag]).sum();
            num / denom
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_chain(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn geweke_iid_chain_rarely_flags() {
        let mut ok = 0;
        for seed in 0..100 {
            let chain = normal_chain(10_000, seed);
            if geweke_z(&chain, 0.1, 0.5).unwrap().abs() < 3.0 {
                ok += 1;
            }
        }
        assert!(ok >= 99, "only {ok}/100 within 3 sigma");
    }

    #[test]
    fn geweke_flags_trend() {
        let n = 10_000;
        let ramp: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let z = geweke_z(&ramp, 0.1, 0.5).unwrap();
        assert!(z.abs() > 5.0, "z = {z}");
    }

    #[test]
    fn geweke_errors() {
        let constant = vec![3.5; 1000];
        assert!(matches!(
            geweke_z(&constant, 0.1, 0.5),
            Err(Error::DegenerateChain(_))
        ));
        assert!(geweke_z(&[1.0; 10], 0.1, 0.5).is_err());
    }

    #[test]
    fn hw_iid_passes_at_zero_most_of_the_time() {
        let mut pass0 = 0;
        for seed in 1000..1100 {
            let chain = normal_chain(1_000, seed);
            let res = heidelberger_welch(&chain).unwrap();
            if res.pass && res.start_index == 0 {
                pass0 += 1;
            }
        }
        assert!(pass0 >= 95, "only {pass0}/100 pass at index 0");
    }

    #[test]
    fn hw_rejects_ramp_and_accepts_constant() {
        let n = 1_000;
        let ramp: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let res = heidelberger_welch(&ramp).unwrap();
        assert!(!res.pass);
        assert!(res.statistic > CVM_CRITICAL_5PCT);

        let constant = vec![7.0; 200];
        let res = heidelberger_welch(&constant).unwrap();
        assert!(res.pass);
        assert_eq!(res.start_index, 0);
        assert_eq!(res.statistic, 0.0);
    }

    #[test]
    fn acf_iid_and_lag_zero() {
        let chain = normal_chain(10_000, 5);
        let acf = autocorrelation(&chain, 3).unwrap();
        assert_eq!(acf[0], 1.0);
        assert!(acf[1].abs() < 0.05, "acf1 = {}", acf[1]);
    }

    #[test]
    fn acf_ar1_recovers_coefficient() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let n = 10_000;
        let mut x = 0.0f64;
        let chain: Vec<f64> = (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = 0.9 * x + e;
                x
            })
            .collect();
        let acf = autocorrelation(&chain, 1).unwrap();
        assert!((acf[1] - 0.9).abs() < 0.05, "acf1 = {}", acf[1]);
    }

    #[test]
    fn acf_errors() {
        assert!(autocorrelation(&[1.0, 1.0, 1.0], 1).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 5).is_err());
    }
}
