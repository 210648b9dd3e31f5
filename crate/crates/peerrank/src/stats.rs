//! Self-contained statistical kernel: correlation, rank, group-difference
//! tests, and the special functions backing their p-values.
//!
//! Everything here is pure and dependency-free. The regularized incomplete
//! beta / gamma functions are implemented directly (Lanczos log-gamma,
//! continued fractions, series) so the kernel carries its own numerics;
//! accuracy is enforced against independent quadrature oracles in the
//! integration suite.

/// Result of a hypothesis test or correlation.
///
/// `effect_size` is test-specific: `r` for correlations, eta-squared for
/// Kruskal-Wallis, absent for Welch's t (Cohen's d is its own function).
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
    pub n: usize,
    pub effect_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    NotEnoughData { needed: usize, got: usize },
    #[error("input slices have mismatched lengths ({left} vs {right})")]
    MismatchedLengths { left: usize, right: usize },
    #[error("inputs must be finite")]
    NonFinite,
    #[error("{side} has zero variance; the statistic is undefined (not 0)")]
    ZeroVariance { side: &'static str },
    #[error("all observations are identical across groups; the test is degenerate")]
    DegenerateAllTied,
    #[error("need at least {needed} groups, got {got}")]
    NotEnoughGroups { needed: usize, got: usize },
    #[error("group {index} is empty")]
    EmptyGroup { index: usize },
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// Arithmetic mean. Panics on empty input (callers guard).
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n-1) sample variance; 0 for fewer than two observations.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Unbiased sample standard deviation; 0 for fewer than two observations.
pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Pearson product-moment correlation with a two-sided p-value from the
/// exact t transform (t = r * sqrt((n-2)/(1-r^2)) on n-2 degrees of
/// freedom). Zero variance on either side is an explicit error, never a 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::MismatchedLengths {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(StatsError::NotEnoughData {
            needed: 3,
            got: x.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len();
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance { side: "x" });
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance { side: "y" });
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    // Two-sided p via the incomplete-beta identity
    // p = I_{df/(df+t^2)}(df/2, 1/2), which stays precise for tiny p.
    let p_value = if (1.0 - r * r) <= 0.0 {
        0.0
    } else {
        let t2 = r * r * df / (1.0 - r * r);
        reg_inc_beta(df / 2.0, 0.5, df / (df + t2))
    };
    Ok(TestResult {
        statistic: r,
        p_value,
        df,
        n,
        effect_size: Some(r),
    })
}

/// Average ranks (1-based) with ties sharing the mean of the positions they
/// occupy. `[10, 20, 20, 30]` ranks as `[1, 2.5, 2.5, 4]`.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average 1-based rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson on average ranks. Constant input on
/// either side is an error (rank variance zero).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::MismatchedLengths {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(StatsError::NotEnoughData {
            needed: 3,
            got: x.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    pearson(&rx, &ry)
}

/// Kruskal-Wallis H test across `k >= 2` groups with tie correction
/// `1 - sum(t^3 - t) / (n^3 - n)` and a chi-squared p on k-1 degrees of
/// freedom. Effect size is eta-squared `(H - k + 1) / (n - k)` (absent when
/// `n == k`).
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<TestResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::NotEnoughGroups { needed: 2, got: k });
    }
    for (index, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(StatsError::EmptyGroup { index });
        }
        check_finite(g)?;
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let ranks = average_ranks(&pooled);

    let nf = n as f64;
    let mut h0 = 0.0;
    let mut offset = 0;
    for g in groups {
        let r_sum: f64 = ranks[offset..offset + g.len()].iter().sum();
        h0 += r_sum * r_sum / g.len() as f64;
        offset += g.len();
    }
    h0 = 12.0 / (nf * (nf + 1.0)) * h0 - 3.0 * (nf + 1.0);

    // Tie correction over tie-group sizes in the pooled sample.
    let mut sorted = pooled.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let correction = 1.0 - tie_term / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Err(StatsError::DegenerateAllTied);
    }
    // Exact arithmetic keeps H >= 0; guard the floating-point residue.
    let h = (h0 / correction).max(0.0);
    let df = (k - 1) as f64;
    let p_value = chi2_sf(h, df);
    let effect_size = if n > k {
        Some((h - k as f64 + 1.0) / (nf - k as f64))
    } else {
        None
    };
    Ok(TestResult {
        statistic: h,
        p_value,
        df,
        n,
        effect_size,
    })
}

/// Cohen's d with the pooled standard deviation weighted by
/// (n_a - 1, n_b - 1). Identical constant groups give 0; distinct means over
/// zero pooled variance are undefined.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::NotEnoughData {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    check_finite(a)?;
    check_finite(b)?;
    let diff = mean(a) - mean(b);
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let pooled_var =
        ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
    if pooled_var == 0.0 {
        if diff == 0.0 {
            return Ok(0.0);
        }
        return Err(StatsError::ZeroVariance { side: "both groups" });
    }
    Ok(diff / pooled_var.sqrt())
}

/// Welch's unequal-variance t test with Welch-Satterthwaite degrees of
/// freedom and a two-sided p.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::NotEnoughData {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    check_finite(a)?;
    check_finite(b)?;
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let va = sample_variance(a);
    let vb = sample_variance(b);
    let diff = mean(a) - mean(b);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        if diff == 0.0 {
            // Identical constant samples: no evidence of difference.
            return Ok(TestResult {
                statistic: 0.0,
                p_value: 1.0,
                df: na + nb - 2.0,
                n: a.len() + b.len(),
                effect_size: None,
            });
        }
        return Err(StatsError::ZeroVariance { side: "both groups" });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2
        / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let p_value = student_t_two_sided_p(t, df);
    Ok(TestResult {
        statistic: t,
        p_value,
        df,
        n: a.len() + b.len(),
        effect_size: None,
    })
}

/// Conventional significance stars with strict thresholds:
/// `***` p < 0.001, `**` p < 0.01, `*` p < 0.05, `ns` otherwise.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "ns"
    }
}

/// Two-sided p for a Student t statistic on `df` degrees of freedom,
/// computed directly through the incomplete beta for tail precision.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// CDF of the Student t distribution with `df > 0` degrees of freedom,
/// via the regularized incomplete beta function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * reg_inc_beta(df / 2.0, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Survival function (upper tail) of the chi-squared distribution with
/// `df > 0` degrees of freedom, via the regularized upper incomplete gamma.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    reg_gamma_q(df / 2.0, x / 2.0)
}

// ── special functions ────────────────────────────────────────────────────

/// Natural log of the gamma function (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection formula keeps the small-argument branch accurate.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const SF_EPS: f64 = 1e-16;
const SF_MAX_ITER: usize = 100_000;

/// Regularized lower incomplete beta function I_x(a, b) for a, b > 0 and
/// x in [0, 1]. Continued fraction with the symmetry switch at
/// x = (a + 1) / (a + b + 2).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Lentz continued fraction for the incomplete beta.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=SF_MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < SF_EPS {
            break;
        }
    }
    h
}

/// Regularized upper incomplete gamma Q(a, x) for a > 0, x >= 0.
pub fn reg_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape parameter must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

/// Series expansion of the regularized lower incomplete gamma P(a, x),
/// accurate for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..SF_MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * SF_EPS {
            break;
        }
    }
    let ln_val = -x + a * x.ln() - ln_gamma(a);
    sum * ln_val.exp()
}

/// Lentz continued fraction for the regularized upper incomplete gamma
/// Q(a, x), accurate for x >= a + 1.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=SF_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < SF_EPS {
            break;
        }
    }
    let ln_val = -x + a * x.ln() - ln_gamma(a);
    ln_val.exp() * h
}
