use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{Method, StatsError, TestResult};

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (
        m,
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0),
    )
}

/// Two-sided Welch t-test with Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NotANumber);
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / n1, vb / n2);
    let se2 = sa + sb;
    let base = TestResult {
        statistic: 0.0,
        p_value: 1.0,
        method: Method::WelchT,
        n1: a.len(),
        n2: b.len(),
        ties_present: false,
        degenerate: false,
        warning: None,
    };
    if se2 == 0.0 {
        let equal = ma == mb;
        return Ok(TestResult {
            statistic: if equal {
                0.0
            } else {
                (ma - mb).signum() * f64::INFINITY
            },
            p_value: if equal { 1.0 } else { 0.0 },
            degenerate: true,
            warning: Some("both samples have zero variance".into()),
            ..base
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (n1 - 1.0) + sb * sb / (n2 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| StatsError::Distribution(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic: t,
        p_value: p,
        ..base
    })
}
