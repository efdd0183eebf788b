//! Real polynomials in monomial form, with the handful of operations the
//! nonlinearity models need: Horner evaluation, calculus, Taylor shifts and
//! real-root isolation on an interval.

use std::f64::consts::PI;

/// Polynomial `Σ c_k x^k`, coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc.mul_add(x, c))
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::new(vec![0.0]);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Self {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        out.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k as f64 + 1.0)),
        );
        Self::new(out)
    }

    /// Coefficients of `p(center + y)` in powers of `y`, i.e. `p^{(n)}(center)/n!`.
    pub fn taylor_coeffs(&self, center: f64) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] = c[j + 1].mul_add(center, c[j]);
            }
        }
        c
    }

    /// `(p(x + d) - p(x)) / d` evaluated without forming the difference.
    pub fn divided_difference(&self, x: f64, d: f64) -> f64 {
        let t = self.taylor_coeffs(x);
        t[1..].iter().rev().fold(0.0, |acc, &c| acc.mul_add(d, c))
    }

    /// All real roots in the closed interval `[lo, hi]`, ascending.
    ///
    /// Works by recursion on the derivative: between consecutive critical
    /// points the polynomial is monotone, so each sign change there brackets
    /// exactly one root.
    pub fn real_roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        if lo > hi {
            return Vec::new();
        }
        match self.degree() {
            0 => Vec::new(),
            1 => {
                let r = -self.coeffs[0] / self.coeffs[1];
                if (lo..=hi).contains(&r) {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let mut knots = vec![lo];
                knots.extend(self.derivative().real_roots_in(lo, hi));
                knots.push(hi);
                let mut roots: Vec<f64> = Vec::new();
                for w in knots.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (fa, fb) = (self.eval(a), self.eval(b));
                    let r = if fa == 0.0 {
                        Some(a)
                    } else if fb == 0.0 {
                        Some(b)
                    } else if fa.signum() != fb.signum() {
                        Some(bisect_monotone(|x| self.eval(x), a, b, fa))
                    } else {
                        None
                    };
                    if let Some(r) = r {
                        if roots.last().is_none_or(|&last| r > last) {
                            roots.push(r);
                        }
                    }
                }
                roots
            }
        }
    }

    /// `(min, max)` of the polynomial over `[lo, hi]`.
    pub fn range_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut min = self.eval(lo).min(self.eval(hi));
        let mut max = self.eval(lo).max(self.eval(hi));
        for c in self.derivative().real_roots_in(lo, hi) {
            let v = self.eval(c);
            min = min.min(v);
            max = max.max(v);
        }
        (min, max)
    }
}

/// Bisection to full floating-point resolution on a bracket with a sign change.
pub(crate) fn bisect_monotone<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64, mut ga: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Real roots of the depressed cubic `t³ + p t + q = 0` when it has three of
/// them (`4p³ + 27q² < 0`), descending, by the trigonometric formula.
pub fn depressed_cubic_three_roots(p: f64, q: f64) -> Option<[f64; 3]> {
    if p >= 0.0 || 4.0 * p * p * p + 27.0 * q * q > 0.0 {
        return None;
    }
    let m = 2.0 * (-p / 3.0).sqrt();
    let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    Some([
        m * theta.cos(),
        m * (theta - 2.0 * PI / 3.0).cos(),
        m * (theta - 4.0 * PI / 3.0).cos(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calculus_round_trip() {
        let p = Polynomial::new(vec![0.0, -1.0, 0.0, 1.0]);
        let big_f = p.antiderivative();
        assert_eq!(big_f.eval(1.0), -0.25);
        assert_eq!(big_f.derivative(), p);
    }

    #[test]
    fn divided_difference_matches_cubic_identity() {
        let p = Polynomial::new(vec![0.0, -1.0, 0.0, 1.0]);
        let (v, d) = (0.3, 1e-3);
        let want = 3.0 * v * v - 1.0 + 3.0 * v * d + d * d;
        assert!((p.divided_difference(v, d) - want).abs() < 1e-15);
    }

    #[test]
    fn roots_of_quartic_on_interval() {
        // (x^2 - 1)(x^2 - 4)
        let p = Polynomial::new(vec![4.0, 0.0, -5.0, 0.0, 1.0]);
        let r = p.real_roots_in(-3.0, 3.0);
        assert_eq!(r.len(), 4);
        for (got, want) in r.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
        assert_eq!(p.real_roots_in(-0.5, 0.5), Vec::<f64>::new());
    }

    #[test]
    fn trig_cubic_roots() {
        let r = depressed_cubic_three_roots(-1.0, 0.0).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);
        assert!(r[1].abs() < 1e-15);
        assert!((r[2] + 1.0).abs() < 1e-15);
        assert!(depressed_cubic_three_roots(1.0, 0.0).is_none());
    }
}
