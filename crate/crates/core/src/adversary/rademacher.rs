use crate::measures::{DistributionModel, Interval, SignedMeasureModel};
use crate::regression::RegressionModel;

/// `h_k(x)`: for `k >= 1` the indicator of `[2j 2^-k, (2j+1) 2^-k)` for some
/// `0 <= j < 2^(k-1)`; `h_0` is `0.5` on `[0, 1]`. Both vanish off `[0, 1]`.
pub fn rademacher_eval(k: u32, x: f64) -> f64 {
    if k == 0 {
        return if (0.0..=1.0).contains(&x) { 0.5 } else { 0.0 };
    }
    if !(0.0..1.0).contains(&x) {
        return 0.0;
    }
    let t = (x * 2f64.powi(k as i32)).floor() as u64;
    if t.is_multiple_of(2) {
        1.0
    } else {
        0.0
    }
}

/// `nu_k((-inf, t]) = integral of h_k over (-inf, t]` against Lebesgue measure on `[0, 1]`.
fn cumulative(k: u32, t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    if k == 0 {
        return 0.5 * t;
    }
    let scale = 2f64.powi(k as i32);
    let s = t * scale;
    let c = s.floor();
    // Pieces 0..c are complete and the even ones are on; piece c is on iff c is even.
    let full = (c / 2.0).ceil();
    let partial = if c % 2.0 == 0.0 { s - c } else { 0.0 };
    (full + partial) / scale
}

/// `nu_k(A)`, exact.
pub fn nu_k(k: u32, a: Interval) -> f64 {
    let hi = cumulative(k, a.upper());
    match a {
        Interval::UpTo { .. } => hi,
        Interval::Between { a, .. } => hi - cumulative(k, a),
    }
}

/// `nu_k` as a signed measure against the uniform distribution on `[0, 1]`.
pub fn rademacher_measure(k: u32) -> SignedMeasureModel {
    SignedMeasureModel::new(DistributionModel::lebesgue(), RegressionModel::Rademacher { k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(rademacher_eval(2, 0.3), 0.0);
        assert_eq!(rademacher_eval(1, 0.49), 1.0);
        assert_eq!(rademacher_eval(1, 0.5), 0.0);
        assert_eq!(rademacher_eval(0, 0.3), 0.5);
        assert_eq!(rademacher_eval(0, 1.0), 0.5);
        assert_eq!(rademacher_eval(3, 1.0), 0.0);
        assert_eq!(rademacher_eval(3, 0.0), 1.0);
        assert_eq!(rademacher_eval(3, -0.1), 0.0);
    }

    #[test]
    fn nu_examples() {
        let unit = Interval::between(0.0, 1.0).unwrap();
        assert_eq!(nu_k(3, unit), 0.5);
        assert_eq!(nu_k(1, Interval::between(0.0, 0.5).unwrap()), 0.5);
        let a = Interval::between(0.1, 0.37).unwrap();
        assert!((nu_k(5, a) - nu_k(0, a)).abs() <= 2f64.powi(-4));
    }

    #[test]
    fn closed_form_matches_signed_measure() {
        for k in 0..7 {
            let nu = rademacher_measure(k);
            for (a, b) in [(0.1, 0.37), (-1.0, 0.5), (0.3, 2.0), (0.125, 0.625), (0.0, 1e-3)] {
                let iv = Interval::between(a, b).unwrap();
                assert!((nu.nu(iv) - nu_k(k, iv)).abs() < 1e-14, "k={k} ({a},{b}]");
            }
        }
    }
}
