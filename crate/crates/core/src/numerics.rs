//! Small f64 kernel: parameter storage, softmax / cross-entropy, Adam, a
//! seeded generator and a central-difference gradient checker.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type SeededRng = ChaCha8Rng;

/// All randomness in the crate flows from generators built here.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamView {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamView {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat parameter array with an ordered list of named views. Views tile the
/// array in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    views: Vec<ParamView>,
}

impl ParamVector {
    /// Zero-initialised vector with the given views laid out back to back.
    pub fn zeros<S: Into<String>>(layout: impl IntoIterator<Item = (S, Vec<usize>)>) -> Self {
        let mut offset = 0;
        let views: Vec<ParamView> = layout
            .into_iter()
            .map(|(name, shape)| {
                let view = ParamView {
                    name: name.into(),
                    offset,
                    shape,
                };
                offset += view.len();
                view
            })
            .collect();
        Self {
            values: vec![0.0; offset],
            views,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn views(&self) -> &[ParamView] {
        &self.views
    }

    pub fn find(&self, name: &str) -> Option<&ParamView> {
        self.views.iter().find(|v| v.name == name)
    }

    pub fn view(&self, name: &str) -> &[f64] {
        let v = self
            .find(name)
            .unwrap_or_else(|| panic!("no parameter view {name}"));
        &self.values[v.range()]
    }

    pub fn view_mut(&mut self, name: &str) -> &mut [f64] {
        let range = self
            .find(name)
            .unwrap_or_else(|| panic!("no parameter view {name}"))
            .range();
        &mut self.values[range]
    }

    /// Replaces all values, keeping the layout.
    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                actual: values.len(),
            });
        }
        self.values = values;
        Ok(())
    }

    /// Checks exact tiling and finiteness.
    pub fn validate(&self) -> Result<()> {
        let mut offset = 0;
        for v in &self.views {
            if v.offset != offset {
                return Err(Error::DimensionMismatch(format!(
                    "view {} starts at {} but previous view ends at {offset}",
                    v.name, v.offset
                )));
            }
            offset += v.len();
        }
        if offset != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: offset,
                actual: self.values.len(),
            });
        }
        check_finite(&self.values)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

pub fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits)?;
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    Ok(out)
}

/// Softmax without input validation. `out` must be as long as `logits`.
pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    let inv = 1.0 / sum;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

/// `-log softmax(logits)[target]` with its gradient `softmax - one_hot`.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::BadClass {
            class: target,
            classes: logits.len(),
        });
    }
    check_finite(logits)?;
    let mut grad = vec![0.0; logits.len()];
    let loss = cross_entropy_into(logits, target, &mut grad);
    Ok((loss, grad))
}

/// Writes `softmax - one_hot(target)` into `grad` and returns the loss.
pub(crate) fn cross_entropy_into(logits: &[f64], target: usize, grad: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (g, &z) in grad.iter_mut().zip(logits) {
        *g = (z - max).exp();
        sum += *g;
    }
    let inv = 1.0 / sum;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    grad[target] -= 1.0;
    // log-sum-exp form stays accurate when the target dominates
    sum.ln() - (logits[target] - max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            actual: state.m.len(),
        });
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Largest relative error between an analytic gradient and central
/// differences over `samples` randomly chosen coordinates. The denominator is
/// floored at 1e-8.
pub fn grad_check<F>(f: F, params: &[f64], h: f64, samples: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    let mut rng = rng_from_seed(seed);
    let count = samples.min(params.len());
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for k in sample(&mut rng, params.len(), count).into_iter() {
        let orig = probe[k];
        probe[k] = orig + h;
        let plus = f(&probe).0;
        probe[k] = orig - h;
        let minus = f(&probe).0;
        probe[k] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[k].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    worst
}

/// Formats like C's `%.17g`: 17 significant digits, enough to round-trip
/// any f64.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-5..17).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{x:.*}", (16 - exp) as usize);
        trim_fraction(&fixed).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Fills `out` with draws from `U(-bound, bound)`.
pub fn fill_uniform(out: &mut [f64], bound: f64, rng: &mut impl Rng) {
    for x in out {
        *x = rng.gen_range(-bound..=bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, proptest};

    /// Independent reference: p_i = 1 / sum_j exp(x_j - x_i), summed with
    /// Neumaier compensation.
    fn softmax_reference(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&xi| {
                let mut sum = 0.0f64;
                let mut comp = 0.0f64;
                for &xj in x {
                    let term = (xj - xi).exp();
                    let t = sum + term;
                    if sum.abs() >= term.abs() {
                        comp += (sum - t) + term;
                    } else {
                        comp += (term - t) + sum;
                    }
                    sum = t;
                }
                1.0 / (sum + comp)
            })
            .collect()
    }

    #[test]
    fn softmax_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rejects_nan() {
        assert!(matches!(
            softmax(&[0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(softmax(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn softmax_matches_reference() {
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            let x: Vec<f64> = (0..33).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let p = softmax(&x).unwrap();
            let r = softmax_reference(&x);
            for (a, b) in p.iter().zip(&r) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cross_entropy_uniform_is_ln_classes() {
        let (loss, grad) = cross_entropy(&[0.0; 33], 5).unwrap();
        assert!((loss - 33f64.ln()).abs() < 1e-12);
        assert!((grad[5] - (1.0 / 33.0 - 1.0)).abs() < 1e-15);
        assert!((loss - 3.4965).abs() < 1e-4);
    }

    #[test]
    fn cross_entropy_confident_target() {
        let mut logits = vec![0.0; 33];
        logits[7] = 40.0;
        let (loss, _) = cross_entropy(&logits, 7).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn cross_entropy_bad_class() {
        assert!(matches!(
            cross_entropy(&[0.0; 3], 3),
            Err(Error::BadClass {
                class: 3,
                classes: 3
            })
        ));
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(11);
        let h = 1e-5;
        for _ in 0..20 {
            let x: Vec<f64> = (0..33).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let target = rng.gen_range(0..33);
            let (_, grad) = cross_entropy(&x, target).unwrap();
            for k in 0..x.len() {
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                let num = (cross_entropy(&xp, target).unwrap().0
                    - cross_entropy(&xm, target).unwrap().0)
                    / (2.0 * h);
                let rel = (num - grad[k]).abs() / grad[k].abs().max(num.abs()).max(1e-8);
                assert!(rel <= 1e-7, "coord {k}: analytic {} numeric {num}", grad[k]);
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut p = vec![0.5, -1.25, 3.0];
        let before = p.clone();
        let mut s = AdamState::new(3, AdamConfig::default());
        for _ in 0..5 {
            adam_step(&mut p, &[0.0; 3], &mut s).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.t, 5);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(
            1,
            AdamConfig {
                lr: 0.1,
                ..AdamConfig::default()
            },
        );
        adam_step(&mut p, &[1.0], &mut s).unwrap();
        assert!((p[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut w = vec![1.0];
        let mut s = AdamState::new(
            1,
            AdamConfig {
                lr: 0.1,
                ..AdamConfig::default()
            },
        );
        for _ in 0..100 {
            let g = 2.0 * w[0];
            adam_step(&mut w, &[g], &mut s).unwrap();
        }
        assert!(w[0].abs() < 0.1, "w = {}", w[0]);
    }

    #[test]
    fn adam_length_mismatch() {
        let mut s = AdamState::new(2, AdamConfig::default());
        assert!(adam_step(&mut [0.0, 0.0], &[1.0], &mut s).is_err());
    }

    #[test]
    fn grad_check_quadratic() {
        let f = |p: &[f64]| (0.5 * p.iter().map(|x| x * x).sum::<f64>(), p.to_vec());
        let params: Vec<f64> = (0..10).map(|k| (k as f64 - 4.5) / 5.0).collect();
        assert!(grad_check(f, &params, 1e-4, 10, 1) < 1e-9);
    }

    #[test]
    fn grad_check_sine_layer() {
        // loss = sum_j sin(w_j * x + b_j), x fixed
        let x = 0.7;
        let f = |p: &[f64]| {
            let (w, b) = p.split_at(p.len() / 2);
            let mut loss = 0.0;
            let mut grad = vec![0.0; p.len()];
            for j in 0..w.len() {
                let z = w[j] * x + b[j];
                loss += z.sin();
                grad[j] = z.cos() * x;
                grad[w.len() + j] = z.cos();
            }
            (loss, grad)
        };
        let mut rng = rng_from_seed(5);
        let params: Vec<f64> = (0..32).map(|_| rng.gen_range(-2.0..2.0)).collect();
        assert!(grad_check(f, &params, 1e-5, 32, 2) < 1e-6);
    }

    #[test]
    fn grad_check_detects_corruption() {
        let f = |p: &[f64]| {
            (
                0.5 * p.iter().map(|x| x * x).sum::<f64>(),
                p.iter().map(|x| x * 1.01).collect(),
            )
        };
        let params = vec![1.0, -2.0, 0.5];
        assert!(grad_check(f, &params, 1e-5, 3, 1) > 1e-3);
    }

    #[test]
    fn param_vector_views_tile() {
        let mut p = ParamVector::zeros([("a", vec![2, 3]), ("b", vec![4])]);
        assert_eq!(p.len(), 10);
        p.view_mut("b")[0] = 1.5;
        assert_eq!(p.values()[6], 1.5);
        assert!(p.validate().is_ok());
        p.values_mut()[0] = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn seeded_rng_is_deterministic() {
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = rng_from_seed(9);
                move |_| r.gen()
            })
            .collect();
        let b: Vec<u64> = (0..4)
            .map({
                let mut r = rng_from_seed(9);
                move |_| r.gen()
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn format_float_matches_printf_g17() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(1.0 / 33.0), "0.030303030303030304");
        assert_eq!(format_float(0.1), "0.10000000000000001");
        assert_eq!(format_float(-2.5e-7), "-2.4999999999999999e-07");
        assert_eq!(format_float(1e20), "1e+20");
        assert_eq!(format_float(123456.0), "123456");
    }

    proptest! {
        #[test]
        fn softmax_normalised_and_shift_invariant(
            x in prop::collection::vec(-50.0f64..50.0, 1..40),
            c in -100.0f64..100.0,
        ) {
            let p = softmax(&x).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn cross_entropy_non_negative(
            x in prop::collection::vec(-50.0f64..50.0, 2..40),
            t in 0usize..40,
        ) {
            let t = t % x.len();
            let (loss, _) = cross_entropy(&x, t).unwrap();
            prop_assert!(loss >= 0.0);
        }
    }
}
