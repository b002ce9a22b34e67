//! Logarithm of the modified Bessel function of the first kind, `ln I_nu(x)`,
//! evaluated without overflow for the orders that arise on spheres of up to a
//! few thousand dimensions.
//!
//! Three regimes:
//! * `x <= max(nu, 20)`: ascending power series, summed relative to its first
//!   term so the magnitude stays in range.
//! * `x > max(nu, 20)` and `nu >= 8`: Debye uniform asymptotic expansion in
//!   `1/nu`, with the polynomials `u_k(t)` generated by their recurrence.
//! * `x > 20` and `nu < 8`: Hankel large-argument expansion, truncated at its
//!   smallest term.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

const SERIES_MIN_CROSSOVER: f64 = 20.0;
const DEBYE_MIN_ORDER: f64 = 8.0;
const DEBYE_TERMS: usize = 14;
const SERIES_MAX_TERMS: usize = 10_000;

/// `ln I_nu(x)` for `nu >= 0`, `x >= 0`. Returns `-inf` for `I_nu(0) = 0`.
pub fn ln_bessel_i(nu: f64, x: f64) -> f64 {
    debug_assert!(nu >= 0.0 && x >= 0.0);
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x <= nu.max(SERIES_MIN_CROSSOVER) {
        ln_bessel_i_series(nu, x)
    } else if nu >= DEBYE_MIN_ORDER {
        ln_bessel_i_debye(nu, x)
    } else {
        ln_bessel_i_hankel(nu, x)
    }
}

/// `I_{nu+1}(x) / I_nu(x)`.
pub fn bessel_i_ratio(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    (ln_bessel_i(nu + 1.0, x) - ln_bessel_i(nu, x)).exp()
}

pub(crate) fn ln_bessel_i_series(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        // Terms are decreasing once k(k + nu) > q.
        if term < sum * 1e-17 && kf * (kf + nu) > q {
            break;
        }
    }
    nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) + sum.ln()
}

pub(crate) fn ln_bessel_i_hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for k in 1..500 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next == 0.0 {
            break;
        }
        // Past the hump the terms shrink until the smallest one, then diverge.
        if odd * odd > mu && next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

pub(crate) fn ln_bessel_i_debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let root = (1.0 + z * z).sqrt();
    let t = 1.0 / root;
    let eta = root + (z / (1.0 + root)).ln();
    let polys = debye_polynomials();
    let mut sum = 0.0;
    let mut scale = 1.0;
    for p in polys.iter() {
        let term = eval_poly(p, t) * scale;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        scale /= nu;
    }
    -0.5 * (2.0 * PI * nu).ln() + nu * eta - 0.25 * (1.0 + z * z).ln() + sum.ln()
}

fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Coefficients (ascending powers of `t`) of the Debye polynomials
/// `u_0..u_{DEBYE_TERMS-1}`, from
/// `u_{k+1} = t^2 (1 - t^2) u_k' / 2 + (1/8) int_0^t (1 - 5 s^2) u_k(s) ds`.
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS - 1 {
            let u = &polys[k];
            let mut next = vec![0.0; u.len() + 3];
            // t^2 (1 - t^2) u' / 2
            for (i, &c) in u.iter().enumerate().skip(1) {
                let d = c * i as f64;
                next[i + 1] += 0.5 * d;
                next[i + 3] -= 0.5 * d;
            }
            // (1/8) int_0^t (1 - 5 s^2) u(s) ds
            for (i, &c) in u.iter().enumerate() {
                next[i + 1] += c / (8.0 * (i + 1) as f64);
                next[i + 3] -= 5.0 * c / (8.0 * (i + 3) as f64);
            }
            polys.push(next);
        }
        polys
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from 50-digit evaluation of ln(besseli(nu, x)).
    const REFERENCE: &[(f64, f64, f64)] = &[
        (0.0, 0.001, 2.499_999_843_750_017_5e-7),
        (0.0, 1.0, 0.235_914_358_507_178_65),
        (0.0, 20.0, 17.589_610_428_244_274),
        (0.0, 19.99, 17.579_863_787_380_871),
        (0.0, 20.01, 17.599_357_197_495_26),
        (0.0, 50.0, 47.127_575_501_871_805),
        (0.0, 700.0, 695.805_699_998_443_4),
        (0.0, 1e6, 999_992.173_306_312_8),
        (0.5, 1.0, -0.064_351_991_073_531_8),
        (0.5, 25.0, 22.471_623_554_361_227),
        (0.5, 1e3, 995.627_183_827_304_3),
        (1.0, 2.0, 0.464_134_473_546_159_74),
        (1.0, 100.0, 96.774_707_457_591_45),
        (6.5, 40.0, 36.706_119_167_179_68),
        (7.0, 10.0, 5.472_378_166_951_772_6),
        (19.5, 19.5, 7.813_639_003_260_083_6),
        (19.5, 30.0, 21.155_812_294_078_569),
        (19.5, 500.0, 495.593_425_056_826_33),
        (20.0, 19.99, 8.053_363_762_315_82),
        (20.0, 20.01, 8.081_401_445_534_537),
        (20.0, 80.0, 74.389_048_656_102_65),
        (255.0, 1.0, -1_338.463_655_600_542),
        (255.0, 50.0, -338.468_811_985_361_64),
        (255.0, 200.0, 49.171_668_525_274_4),
        (255.0, 254.9, 131.870_056_734_524_92),
        (255.0, 255.1, 132.152_703_582_000_49),
        (255.0, 1000.0, 963.271_879_799_704_8),
        (255.0, 1e6, 999_992.140_793_796_7),
        (7.0, 1e6, 999_992.173_281_812_8),
        (0.5, 1e6, 999_992.173_306_187_8),
        (100.0, 1e-5, -1_584.346_640_108_580_6),
    ];

    #[test]
    fn matches_high_precision_reference() {
        for &(nu, x, expected) in REFERENCE {
            let got = ln_bessel_i(nu, x);
            let tol = 1e-10 * expected.abs().max(1.0);
            assert!(
                (got - expected).abs() <= tol,
                "ln I_{nu}({x}) = {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn regimes_agree_at_crossovers() {
        for &nu in &[8.0_f64, 10.5, 19.5, 20.0, 63.0, 255.0, 1000.0] {
            for &x in &[nu.max(20.0), nu.max(20.0) * 1.5, nu.max(20.0) * 3.0] {
                let series = ln_bessel_i_series(nu, x);
                let debye = ln_bessel_i_debye(nu, x);
                assert!(
                    (series - debye).abs() <= 1e-10 * series.abs().max(1.0),
                    "nu {nu} x {x}: series {series} debye {debye}"
                );
            }
        }
        for &nu in &[0.0, 0.5, 1.0, 3.5, 7.0, 7.5] {
            for &x in &[20.0, 30.0, 60.0] {
                let series = ln_bessel_i_series(nu, x);
                let hankel = ln_bessel_i_hankel(nu, x);
                assert!(
                    (series - hankel).abs() <= 1e-10 * series.abs().max(1.0),
                    "nu {nu} x {x}: series {series} hankel {hankel}"
                );
            }
        }
    }

    #[test]
    fn half_order_closed_form() {
        // I_{1/2}(x) = sqrt(2 / (pi x)) sinh(x)
        for &x in &[0.1, 1.0, 5.0, 19.0, 21.0, 60.0] {
            let expected = 0.5 * (2.0 / (PI * x)).ln() + x.sinh().ln();
            assert!((ln_bessel_i(0.5, x) - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn ratio_reference_values() {
        // I_{3/2}(10) / I_{1/2}(10) = coth(10) - 1/10
        assert!((bessel_i_ratio(0.5, 10.0) - 0.900_000_004_122_307_3).abs() < 1e-12);
        assert!((bessel_i_ratio(0.0, 2.0) - 0.697_774_657_964_008).abs() < 1e-12);
        assert!((bessel_i_ratio(255.0, 200.0) - 0.344_427_428_907_452_44).abs() < 1e-10);
        assert_eq!(bessel_i_ratio(3.0, 0.0), 0.0);
    }

    #[test]
    fn zero_argument() {
        assert_eq!(ln_bessel_i(0.0, 0.0), 0.0);
        assert_eq!(ln_bessel_i(2.0, 0.0), f64::NEG_INFINITY);
    }
}
