use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean and standard error (0 with fewer than two values).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-tailed paired t-test of `mean(a - b) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `None` when fewer than two pairs are given or lengths differ.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Option<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean_diff, se) = mean_and_stderr(&diffs);
    let df = diffs.len() - 1;
    if se == 0.0 {
        let (t, p_value) = match mean_diff.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => (f64::INFINITY, 0.0),
            Some(std::cmp::Ordering::Less) => (f64::NEG_INFINITY, 1.0),
            _ => (0.0, 0.5),
        };
        return Some(TTest { mean_diff, t, df, p_value });
    }
    let t = mean_diff / se;
    let dist = StudentsT::new(0.0, 1.0, df as f64).ok()?;
    Some(TTest {
        mean_diff,
        t,
        df,
        p_value: 1.0 - dist.cdf(t),
    })
}
