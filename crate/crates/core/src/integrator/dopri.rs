//! Dormand–Prince 5(4) with FSAL and Hairer's 4th-order continuous extension.

#[cfg(test)]
const C2: f64 = 1.0 / 5.0;
#[cfg(test)]
const C3: f64 = 3.0 / 10.0;
#[cfg(test)]
const C4: f64 = 4.0 / 5.0;
#[cfg(test)]
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

pub(crate) const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];

const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Right-hand side: fills `dy` and returns a scalar side output (the
/// dissipation rate) evaluated at the same point.
pub(crate) trait Rhs {
    fn eval(&self, y: &[f64], dy: &mut [f64]) -> f64;
}

/// Continuous extension on one step; `θ ∈ [0, 1]` maps to `t0 + θ·h`.
#[derive(Clone, Debug)]
pub struct DenseOutput {
    pub t0: f64,
    pub h: f64,
    y0: Vec<f64>,
    ydiff: Vec<f64>,
    bspl: Vec<f64>,
    rc4: Vec<f64>,
    rc5: Vec<f64>,
}

impl DenseOutput {
    /// Straight-line interpolant between two states; handy for tests.
    pub fn linear(t0: f64, h: f64, y0: Vec<f64>, y1: &[f64]) -> Self {
        let n = y0.len();
        let ydiff = y0.iter().zip(y1).map(|(a, b)| b - a).collect();
        Self { t0, h, y0, ydiff, bspl: vec![0.0; n], rc4: vec![0.0; n], rc5: vec![0.0; n] }
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn len(&self) -> usize {
        self.y0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y0.is_empty()
    }

    #[inline]
    pub fn component_at_theta(&self, j: usize, th: f64) -> f64 {
        let s = 1.0 - th;
        self.y0[j] + th * (self.ydiff[j] + s * (self.bspl[j] + th * (self.rc4[j] + s * self.rc5[j])))
    }

    pub fn component(&self, j: usize, t: f64) -> f64 {
        self.component_at_theta(j, (t - self.t0) / self.h)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (0..self.len()).map(|j| self.component(j, t)).collect()
    }
}

pub(crate) struct StepOutcome {
    pub y1: Vec<f64>,
    /// Weighted RMS error norm; the step is acceptable when `≤ 1`.
    pub err: f64,
    /// `h·Σ b_i·D_i` with `D_i` the stage dissipation rates.
    pub dissipated: f64,
    pub dense: DenseOutput,
}

/// One trial step from `(t, y)` with FSAL derivative `k1` and its
/// dissipation `d1`. `scale` gives per-component error scales given the
/// start and end values.
pub(crate) fn step<R: Rhs, S: Fn(usize, f64, f64) -> f64>(
    rhs: &R,
    t: f64,
    y: &[f64],
    k1: &[f64],
    d1: f64,
    h: f64,
    scale: S,
) -> StepOutcome {
    let n = y.len();
    let mut tmp = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];

    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    rhs.eval(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    let d3 = rhs.eval(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    let d4 = rhs.eval(&tmp, &mut k4);
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    let d5 = rhs.eval(&tmp, &mut k5);
    for i in 0..n {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    let d6 = rhs.eval(&tmp, &mut k6);
    let mut y1 = vec![0.0; n];
    for i in 0..n {
        y1[i] = y[i] + h * (B[0] * k1[i] + B[2] * k3[i] + B[3] * k4[i] + B[4] * k5[i] + B[5] * k6[i]);
    }
    rhs.eval(&y1, &mut k7);

    let mut acc = 0.0;
    for i in 0..n {
        let e = h
            * (E[0] * k1[i] + E[2] * k3[i] + E[3] * k4[i] + E[4] * k5[i] + E[5] * k6[i] + E[6] * k7[i]);
        let sc = scale(i, y[i], y1[i]);
        acc += (e / sc) * (e / sc);
    }
    let err = if n == 0 { 0.0 } else { (acc / n as f64).sqrt() };

    let dissipated = h * (B[0] * d1 + B[2] * d3 + B[3] * d4 + B[4] * d5 + B[5] * d6);

    let mut ydiff = vec![0.0; n];
    let mut bspl = vec![0.0; n];
    let mut rc4 = vec![0.0; n];
    let mut rc5 = vec![0.0; n];
    for i in 0..n {
        ydiff[i] = y1[i] - y[i];
        bspl[i] = h * k1[i] - ydiff[i];
        rc4[i] = ydiff[i] - h * k7[i] - bspl[i];
        rc5[i] = h * (D[0] * k1[i] + D[2] * k3[i] + D[3] * k4[i] + D[4] * k5[i] + D[5] * k6[i] + D[6] * k7[i]);
    }
    let dense = DenseOutput { t0: t, h, y0: y.to_vec(), ydiff, bspl, rc4, rc5 };

    StepOutcome { y1, err, dissipated, dense }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl Rhs for Decay {
        fn eval(&self, y: &[f64], dy: &mut [f64]) -> f64 {
            dy[0] = -y[0];
            dy[1] = y[0];
            0.0
        }
    }

    #[test]
    fn tableau_consistency() {
        let b: f64 = B.iter().sum();
        assert!((b - 1.0).abs() < 1e-15);
        let e: f64 = E.iter().sum();
        assert!(e.abs() < 1e-16);
        let rows = [
            (C2, A21),
            (C3, A31 + A32),
            (C4, A41 + A42 + A43),
            (C5, A51 + A52 + A53 + A54),
            (1.0, A61 + A62 + A63 + A64 + A65),
        ];
        for (c, s) in rows {
            assert!((c - s).abs() < 1e-14);
        }
    }

    #[test]
    fn fifth_order_on_linear_decay() {
        let y = [1.0, 0.0];
        let mut k1 = [0.0; 2];
        Decay.eval(&y, &mut k1);
        let h = 0.1;
        let out = step(&Decay, 0.0, &y, &k1, 0.0, h, |_, _, _| 1.0);
        let exact = (-h).exp();
        assert!((out.y1[0] - exact).abs() < 1e-9);
        assert!((out.y1[0] + out.y1[1] - 1.0).abs() < 1e-15);
        // Dense output reproduces both ends and is accurate in between.
        assert_eq!(out.dense.component_at_theta(0, 0.0), 1.0);
        assert!((out.dense.component_at_theta(0, 1.0) - out.y1[0]).abs() < 1e-16);
        assert!((out.dense.component(0, 0.05) - (-0.05f64).exp()).abs() < 5e-9);
    }
}
