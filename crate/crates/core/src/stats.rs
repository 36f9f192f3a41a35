//! Paired-difference statistics for directional comparisons.

/// Summary of paired differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedStats {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// t statistic for H0: mean difference = 0.
    pub t: f64,
}

/// Compute paired statistics; `None` for fewer than two pairs or a
/// degenerate (zero-variance) sample with zero mean.
pub fn paired_stats(diffs: &[f64]) -> Option<PairedStats> {
    let n = diffs.len();
    if n < 2 {
        return None;
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    let t = if sd > 0.0 {
        mean / (sd / (n as f64).sqrt())
    } else if mean > 0.0 {
        f64::INFINITY
    } else if mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        return None;
    };
    Some(PairedStats {
        n,
        mean_diff: mean,
        sd_diff: sd,
        t,
    })
}

/// One-sided critical value of Student's t at the 0.05 level.
///
/// Table lookup rounding degrees of freedom down, which is conservative.
pub fn one_sided_t_crit_05(df: usize) -> f64 {
    const TABLE: &[(usize, f64)] = &[
        (1, 6.314),
        (2, 2.920),
        (3, 2.353),
        (4, 2.132),
        (5, 2.015),
        (6, 1.943),
        (7, 1.895),
        (8, 1.860),
        (9, 1.833),
        (10, 1.812),
        (12, 1.782),
        (15, 1.753),
        (20, 1.725),
        (25, 1.708),
        (30, 1.697),
        (40, 1.684),
        (60, 1.671),
        (120, 1.658),
        (1000, 1.646),
    ];
    let mut crit = TABLE[0].1;
    for &(table_df, value) in TABLE {
        if df >= table_df {
            crit = value;
        }
    }
    crit
}

/// One-sided paired test: is the mean difference significantly above zero
/// at the 0.05 level?
pub fn significantly_greater(diffs: &[f64]) -> bool {
    match paired_stats(diffs) {
        Some(stats) => stats.t > one_sided_t_crit_05(stats.n - 1),
        None => false,
    }
}

/// One-sided paired test in the opposite direction: is the mean difference
/// significantly below zero at the 0.05 level?
pub fn significantly_less(diffs: &[f64]) -> bool {
    let negated: Vec<f64> = diffs.iter().map(|d| -d).collect();
    significantly_greater(&negated)
}
