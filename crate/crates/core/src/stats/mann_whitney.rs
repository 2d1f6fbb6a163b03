use statrs::function::erf::erfc;

use super::{Method, StatsError, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwMode {
    Exact,
    NormalApprox,
    /// Exact when tie-free and `n1 + n2 <= EXACT_LIMIT`, otherwise normal.
    Auto,
}

pub const EXACT_LIMIT: usize = 20;

/// Midranks of the pooled sample (1-based), plus the tie-correction sum
/// `sum(t^3 - t)` over tie groups.
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && pooled[idx[end]] == pooled[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = rank;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

/// `(U_a, U_b)` with midranks; they always sum to `n1 * n2`.
pub fn u_statistics(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, _) = midranks(&pooled);
    let n1 = a.len() as f64;
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u_a = r1 - n1 * (n1 + 1.0) / 2.0;
    (u_a, n1 * b.len() as f64 - u_a)
}

/// Number of arrangements giving each value of `U` for tie-free samples of
/// sizes `n1`, `n2` (index = U).
pub fn exact_u_counts(n1: usize, n2: usize) -> Vec<f64> {
    // f[j][u]: arrangements of i items from the first sample and j from the
    // second with statistic u, built up one first-sample item at a time.
    let max_u = n1 * n2;
    let mut f = vec![vec![0.0f64; max_u + 1]; n2 + 1];
    for row in f.iter_mut() {
        row[0] = 1.0;
    }
    for _i in 1..=n1 {
        let mut g = vec![vec![0.0f64; max_u + 1]; n2 + 1];
        for j in 0..=n2 {
            for u in 0..=max_u {
                // the largest item is from sample one (it beats all j) or two
                let mut c = if u >= j { f[j][u - j] } else { 0.0 };
                if j > 0 {
                    c += g[j - 1][u];
                }
                g[j][u] = c;
            }
        }
        f = g;
    }
    f[n2].clone()
}

fn exact_p(u_a: f64, n1: usize, n2: usize) -> f64 {
    let counts = exact_u_counts(n1, n2);
    let total: f64 = counts.iter().sum();
    let u = u_a.round() as usize;
    let lower: f64 = counts[..=u].iter().sum::<f64>() / total;
    let upper: f64 = counts[u..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(u_a: f64, n1: usize, n2: usize, tie_sum: f64) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u_a - n1f * n2f / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided Mann-Whitney U test.
pub fn mann_whitney_u(a: &[f64], b: &[f64], mode: MwMode) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (_, tie_sum) = midranks(&pooled);
    let ties_present = tie_sum > 0.0;
    let (u_a, u_b) = u_statistics(a, b);
    let mut warning = None;
    let exact = match mode {
        MwMode::Exact if ties_present => {
            warning = Some(
                "ties present: exact distribution unavailable, used normal approximation"
                    .to_string(),
            );
            false
        }
        MwMode::Exact => true,
        MwMode::NormalApprox => false,
        MwMode::Auto => !ties_present && n1 + n2 <= EXACT_LIMIT,
    };
    let (p, method) = if exact {
        (exact_p(u_a, n1, n2), Method::MwExact)
    } else {
        (normal_p(u_a, n1, n2, tie_sum), Method::MwNormalApprox)
    };
    Ok(TestResult {
        statistic: u_a.min(u_b),
        p_value: p.clamp(0.0, 1.0),
        method,
        n1,
        n2,
        ties_present,
        degenerate: false,
        warning,
    })
}
