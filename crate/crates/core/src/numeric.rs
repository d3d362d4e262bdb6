//! Small numerical helpers shared by the analytic and oracle layers.

use num_complex::Complex64;

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(1 - e^{-x}) / x`, equal to 1 at the origin.
pub(crate) fn one_minus_exp_neg_over(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `x / (1 - e^{-x})`, equal to 1 at the origin.
pub(crate) fn over_one_minus_exp_neg(x: f64) -> f64 {
    1.0 / one_minus_exp_neg_over(x)
}

/// Neumaier-compensated accumulator. The result depends only on the order
/// values are pushed, never on how work was scheduled.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of a slice, in slice order.
pub fn stable_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().value()
}

/// Compensated complex sum, in slice order.
pub fn stable_sum_complex(values: &[Complex64]) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for v in values {
        re.add(v.re);
        im.add(v.im);
    }
    Complex64::new(re.value(), im.value())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive. `n == 1` yields `[lo]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Composite Simpson rule on `intervals` (rounded up to even) subintervals.
pub fn simpson_complex<F>(f: &F, a: f64, b: f64, intervals: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let v = f(a + h * i as f64) * w;
        re.add(v.re);
        im.add(v.im);
    }
    Complex64::new(re.value(), im.value()) * (h / 3.0)
}

/// Outcome of a node-doubling quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Converged {
    pub value: Complex64,
    pub intervals: usize,
    /// `|I(2n) - I(n)|` at termination.
    pub last_change: f64,
}

/// Simpson quadrature with interval doubling, starting at `start` intervals,
/// until successive estimates agree to `tol * max(|I|, scale)`.
///
/// Returns `Err(last_change)` when `max_intervals` is reached first.
pub fn simpson_doubling<F>(
    f: F,
    a: f64,
    b: f64,
    start: usize,
    max_intervals: usize,
    tol: f64,
    scale: f64,
) -> Result<Converged, f64>
where
    F: Fn(f64) -> Complex64,
{
    let mut n = start.max(2);
    let mut prev = simpson_complex(&f, a, b, n);
    loop {
        let next_n = n * 2;
        let next = simpson_complex(&f, a, b, next_n);
        let change = (next - prev).norm();
        if change <= tol * next.norm().max(scale) {
            return Ok(Converged {
                value: next,
                intervals: next_n,
                last_change: change,
            });
        }
        if next_n >= max_intervals {
            return Err(change);
        }
        n = next_n;
        prev = next;
    }
}

/// Trapezoid rule over (possibly non-uniform) samples.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .collect::<CompensatedSum>()
        .value()
}

/// `Cin(x) = ∫₀ˣ (1 - cos t)/t dt`, by its power series (fine for |x| ≲ 10).
pub fn cin(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x2 / 2.0; // x^{2k}/(2k)! for k = 1
    let mut acc = CompensatedSum::new();
    let mut k = 1u32;
    loop {
        let contribution = term / (2.0 * k as f64);
        let signed = if k % 2 == 1 {
            contribution
        } else {
            -contribution
        };
        acc.add(signed);
        if contribution.abs() < 1e-18 * acc.value().abs().max(1e-300) || k > 60 {
            break;
        }
        let kk = 2.0 * k as f64;
        term *= x2 / ((kk + 1.0) * (kk + 2.0));
        k += 1;
    }
    acc.value()
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
