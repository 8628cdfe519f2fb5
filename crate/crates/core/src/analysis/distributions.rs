//! Special functions behind coefficient significance tests.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments (Lanczos).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const CF_MAX_ITER: usize = 10_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` where the caller supplies both
/// `x` and `y = 1 - x`, so that values of `x` near 1 keep full precision.
fn regularized_incomplete_beta_xy(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, y) / b
    }
}

/// Regularized incomplete beta function `I_x(a, b)` for `a, b > 0`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    regularized_incomplete_beta_xy(a, b, x, 1.0 - x)
}

/// Two-sided p-value of a Student-t statistic: `I_{ν/(ν+t²)}(ν/2, 1/2)`.
pub fn student_t_two_sided_pvalue(t: f64, dof: usize) -> f64 {
    assert!(dof >= 1, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    let nu = dof as f64;
    let t2 = t * t;
    if t2.is_infinite() {
        return 0.0;
    }
    let x = nu / (nu + t2);
    let y = t2 / (nu + t2);
    regularized_incomplete_beta_xy(nu / 2.0, 0.5, x, y).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(100.5) - 361.435_540_467_777_6).abs() < 1e-10);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x and I_x(a, 1) = x^a.
        for &x in &[0.0, 0.1, 0.5, 0.93, 1.0] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(3.0, 1.0, x) - x.powi(3)).abs() < 1e-14);
        }
        // Symmetry I_x(a, b) = 1 - I_{1-x}(b, a).
        let v = regularized_incomplete_beta(2.5, 4.0, 0.3);
        let w = regularized_incomplete_beta(4.0, 2.5, 0.7);
        assert!((v + w - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pvalue_limits() {
        assert_eq!(student_t_two_sided_pvalue(0.0, 10), 1.0);
        assert!(student_t_two_sided_pvalue(1e8, 10) < 1e-12);
        assert!(student_t_two_sided_pvalue(-1e8, 10) < 1e-12);
        assert_eq!(student_t_two_sided_pvalue(f64::INFINITY, 3), 0.0);
    }

    #[test]
    fn pvalue_matches_t_table() {
        assert!((student_t_two_sided_pvalue(2.228, 10) - 0.05).abs() < 1e-3);
        assert!((student_t_two_sided_pvalue(-2.228, 10) - 0.05).abs() < 1e-3);
        // dof = 1 is the Cauchy distribution: p = 1 - 2 atan(|t|) / π.
        for &t in &[0.1, 1.0, 3.0, 40.0] {
            let exact = 1.0 - 2.0 * f64::atan(t) / PI;
            assert!((student_t_two_sided_pvalue(t, 1) - exact).abs() < 1e-12);
        }
        // dof = 2 has p = 1 - |t| / sqrt(2 + t²).
        for &t in &[0.05f64, 0.7, 2.0, 25.0] {
            let exact = 1.0 - t / (2.0 + t * t).sqrt();
            assert!((student_t_two_sided_pvalue(t, 2) - exact).abs() < 1e-12);
        }
    }
}
