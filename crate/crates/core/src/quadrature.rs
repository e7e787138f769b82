//! Adaptive Gauss–Kronrod quadrature for vector-valued integrands, plus a
//! cycle-summation routine for slowly decaying oscillatory tails.
//!
//! Several integrands that share expensive factors (the spectral density,
//! the thermal factor, the trigonometric kernels) are integrated together;
//! subdivision is driven by the worst component.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae of the 21-point rule, positive half, descending.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_938_252_551,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Weights of the embedded 10-point Gauss rule (nodes `XGK[1], XGK[3], …`).
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Absolute and relative accuracy goal; a component is converged when its
/// error estimate is below `max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn bound(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-10, 1e-8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
}

/// Default cap on the number of live subintervals.
pub const DEFAULT_LIMIT: usize = 50_000;

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    key: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl<const N: usize> Eq for Panel<N> {}

impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// One 21-point Gauss–Kronrod panel on `[a, b]`.
fn gk21<const N: usize, F>(f: &F, a: f64, b: f64) -> Panel<N>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv1 = [[0.0; N]; 10];
    let mut fv2 = [[0.0; N]; 10];
    let fc = f(center);

    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let mut res_abs = [0.0; N];
    for k in 0..N {
        kronrod[k] = fc[k] * WGK[10];
        res_abs[k] = (fc[k] * WGK[10]).abs();
    }
    for j in 0..10 {
        let x = half * XGK[j];
        let lo = f(center - x);
        let hi = f(center + x);
        for k in 0..N {
            let sum = lo[k] + hi[k];
            kronrod[k] += WGK[j] * sum;
            res_abs[k] += WGK[j] * (lo[k].abs() + hi[k].abs());
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * sum;
            }
        }
        fv1[j] = lo;
        fv2[j] = hi;
    }

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        let mean = 0.5 * kronrod[k];
        let mut res_asc = WGK[10] * (fc[k] - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((fv1[j][k] - mean).abs() + (fv2[j][k] - mean).abs());
        }
        let abs_half = half.abs();
        value[k] = kronrod[k] * half;
        error[k] = rescale_error(
            (kronrod[k] - gauss[k]) * half,
            res_abs[k] * abs_half,
            res_asc * abs_half,
        );
    }
    let key = error.iter().fold(0.0_f64, |m, e| m.max(*e));
    Panel { a, b, value, error, key }
}

/// Integrates `f` over the span of `breakpoints`, which must be sorted.
/// Each consecutive pair seeds one initial panel.
pub fn integrate<const N: usize, F>(
    f: F,
    breakpoints: &[f64],
    tol: Tolerance,
    limit: usize,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if breakpoints.len() < 2 {
        return Err(Error::Domain("at least two breakpoints are required".into()));
    }
    if breakpoints.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Domain("breakpoints must be sorted".into()));
    }

    let mut heap: BinaryHeap<Panel<N>> = BinaryHeap::with_capacity(breakpoints.len() * 2);
    let mut frozen: Vec<Panel<N>> = Vec::new();
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(gk21(&f, w[0], w[1]));
            evaluations += 21;
        }
    }

    let totals = |heap: &BinaryHeap<Panel<N>>, frozen: &[Panel<N>]| {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        for p in heap.iter().chain(frozen.iter()) {
            for k in 0..N {
                value[k] += p.value[k];
                error[k] += p.error[k];
            }
        }
        (value, error)
    };

    let (mut value, mut error) = totals(&heap, &frozen);
    let mut since_resum = 0;
    loop {
        if (0..N).all(|k| error[k] <= tol.bound(value[k])) {
            break;
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        let width = worst.b - worst.a;
        if width <= 1e3 * f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE)
            || mid <= worst.a
            || mid >= worst.b
        {
            frozen.push(worst);
            continue;
        }
        let left = gk21(&f, worst.a, mid);
        let right = gk21(&f, mid, worst.b);
        evaluations += 42;
        for k in 0..N {
            value[k] += left.value[k] + right.value[k] - worst.value[k];
            error[k] += left.error[k] + right.error[k] - worst.error[k];
        }
        heap.push(left);
        heap.push(right);
        since_resum += 1;
        if since_resum >= 64 {
            (value, error) = totals(&heap, &frozen);
            since_resum = 0;
        }
        if heap.len() + frozen.len() > limit {
            return Err(Error::Convergence(format!(
                "subinterval limit {limit} reached on [{}, {}] with error {error:?}",
                breakpoints[0],
                breakpoints[breakpoints.len() - 1]
            )));
        }
    }

    let (value, error) = totals(&heap, &frozen);
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::Convergence("integrand produced non-finite values".into()));
    }
    if (0..N).any(|k| error[k] > 10.0 * tol.bound(value[k])) {
        return Err(Error::Convergence(format!(
            "roundoff prevents reaching tolerance: error {error:?}, value {value:?}"
        )));
    }
    Ok(Estimate { value, error, evaluations })
}

/// Scalar convenience wrapper over `[a, b]`.
pub fn integrate_scalar<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<1>>
where
    F: Fn(f64) -> f64,
{
    integrate(|x| [f(x)], &[a, b], tol, DEFAULT_LIMIT)
}

/// Limit of a sequence by Wynn's epsilon algorithm, with an error estimate
/// taken from the two highest-order even-column entries.
pub fn wynn_epsilon(sequence: &[f64]) -> (f64, f64) {
    let n = sequence.len();
    if n < 3 {
        let last = *sequence.last().unwrap_or(&0.0);
        let err = if n == 2 { (sequence[1] - sequence[0]).abs() } else { f64::INFINITY };
        return (last, err);
    }
    // prev = column k-1, cur = column k; column 0 is the sequence itself.
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = sequence.to_vec();
    let mut estimates = vec![sequence[n - 1]];
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 || !diff.is_finite() {
                // converged to working precision; odd columns are auxiliary
                let value = if k % 2 == 0 { cur[i + 1] } else { estimates[estimates.len() - 1] };
                let err = if estimates.len() >= 2 {
                    (estimates[estimates.len() - 1] - estimates[estimates.len() - 2]).abs()
                } else {
                    0.0
                };
                return (value, err);
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        k += 1;
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            if let Some(last) = cur.last() {
                if last.is_finite() {
                    estimates.push(*last);
                }
            }
        }
    }
    let m = estimates.len();
    let value = estimates[m - 1];
    let err = if m >= 2 { (estimates[m - 1] - estimates[m - 2]).abs() } else { f64::INFINITY };
    (value, err)
}

/// Integrates an oscillatory integrand over `[start, ∞)` by summing integrals
/// over consecutive intervals of length `cycle` (normally half a period) and
/// extrapolating the partial sums with the epsilon algorithm.
pub fn integrate_oscillatory_tail<const N: usize, F>(
    f: F,
    start: f64,
    cycle: f64,
    tol: Tolerance,
    max_cycles: usize,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(cycle > 0.0) || !cycle.is_finite() {
        return Err(Error::Domain(format!("tail cycle length {cycle} must be positive")));
    }
    let inner = Tolerance::new(tol.abs * 0.1, tol.rel * 0.1);
    let mut partial: Vec<[f64; N]> = Vec::new();
    let mut running = [0.0; N];
    let mut evaluations = 0;
    let mut previous: Option<[f64; N]> = None;
    for j in 0..max_cycles {
        let a = start + j as f64 * cycle;
        let piece = integrate(&f, &[a, a + cycle], inner, DEFAULT_LIMIT)?;
        evaluations += piece.evaluations;
        for k in 0..N {
            running[k] += piece.value[k];
        }
        partial.push(running);

        let small_term = (0..N).all(|k| piece.value[k].abs() <= 0.01 * tol.abs);
        if small_term && j >= 2 {
            return Ok(Estimate { value: running, error: [tol.abs; N], evaluations });
        }
        if partial.len() >= 4 {
            let mut value = [0.0; N];
            let mut error = [0.0; N];
            for k in 0..N {
                let seq: Vec<f64> = partial.iter().map(|p| p[k]).collect();
                let (v, e) = wynn_epsilon(&seq);
                value[k] = v;
                error[k] = e;
            }
            if let Some(prev) = previous {
                let settled = (0..N).all(|k| {
                    let change = (value[k] - prev[k]).abs();
                    change.max(error[k]) <= tol.bound(value[k])
                });
                if settled {
                    return Ok(Estimate { value, error, evaluations });
                }
            }
            previous = Some(value);
        }
    }
    Err(Error::Convergence(format!(
        "oscillatory tail from {start} did not settle within {max_cycles} cycles"
    )))
}
