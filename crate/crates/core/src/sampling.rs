//! Counter-based random streams and inverse-CDF samplers.
//!
//! Every uniform is a pure function of `(seed, stream, counter)` computed with
//! the Philox4x32-10 keyed bijection, so any partition of the work across
//! threads reproduces the sequential draws exactly.

use crate::error::{GosaError, Result};
use crate::model::{MarginalSpec, ModelSpec};
use crate::scalar::Real;

/// Name of the generator, recorded with every result.
pub const GENERATOR: &str = "philox4x32-10";

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Philox4x32 with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let p0 = u64::from(PHILOX_M0) * u64::from(ctr[0]);
        let p1 = u64::from(PHILOX_M1) * u64::from(ctr[2]);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// Addresses one independent stream of uniforms.
///
/// Stream ids used by the estimator: `2b` outer sample and `2b + 1` inner
/// sample of replicate `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        StreamKey { seed, stream }
    }

    /// 64 raw bits at position `counter`.
    pub fn bits_at(&self, counter: u64) -> u64 {
        let out = philox4x32_10(
            [counter as u32, (counter >> 32) as u32, self.stream as u32, (self.stream >> 32) as u32],
            [self.seed as u32, (self.seed >> 32) as u32],
        );
        (u64::from(out[1]) << 32) | u64::from(out[0])
    }
}

/// Uniform in the open interval (0, 1).
///
/// The top 53 bits are centered on a 2^-53 lattice, then clamped below 1 for
/// narrower scalar types.
pub fn uniform_at<T: Real>(key: StreamKey, counter: u64) -> T {
    let k = key.bits_at(counter) >> 11;
    let u = (k as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    let top = T::one() - T::epsilon() * T::lit(0.5);
    T::lit(u).min(top)
}

/// Inverse CDF transform of a uniform `u` in (0, 1).
pub fn draw_marginal<T: Real>(spec: &MarginalSpec<T>, u: T) -> Result<T> {
    if !(u > T::zero() && u < T::one()) {
        return Err(GosaError::contract(format!("uniform {u} outside (0,1)")));
    }
    Ok(match *spec {
        MarginalSpec::Uniform { lo, hi } => lo + u * (hi - lo),
        MarginalSpec::Exponential { rate } => -(-u).ln_1p() / rate,
        MarginalSpec::NegatedExponential { rate } => (-u).ln_1p() / rate,
        MarginalSpec::Normal { mean, sd } => mean + sd * inverse_normal_cdf(u),
    })
}

/// Standard normal quantile, Wichura's AS 241 (PPND16).
///
/// Rational approximations on three regions with relative error about 1e-16
/// in double precision.
pub fn inverse_normal_cdf<T: Real>(p: T) -> T {
    let p = p.as_f64();
    let q = p - 0.5;
    let x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * poly(&A, r) / poly(&B, r)
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let r = (-tail.ln()).sqrt();
        let v = if r <= 5.0 {
            let r = r - 1.6;
            poly(&C, r) / poly(&D, r)
        } else {
            let r = r - 5.0;
            poly(&E, r) / poly(&F, r)
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };
    T::lit(x)
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_8e-15,
];

/// Row-major `n x d` matrix of model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T> SampleMatrix<T> {
    pub fn row(&self, j: usize) -> &[T] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }
}

/// Input matrix whose entry `(j, i)` is drawn from uniform counter `j * d + i`.
pub fn sample_matrix<T: Real>(model: &ModelSpec<T>, n: usize, key: StreamKey) -> Result<SampleMatrix<T>> {
    if n == 0 {
        return Err(GosaError::contract("sample size must be at least 1"));
    }
    sample_rows(model, key, 0, n)
}

/// Rows `first..first + n` of the stream's input matrix.
pub(crate) fn sample_rows<T: Real>(
    model: &ModelSpec<T>,
    key: StreamKey,
    first: usize,
    n: usize,
) -> Result<SampleMatrix<T>> {
    let d = model.dim();
    let mut data = Vec::with_capacity(n * d);
    for j in first..first + n {
        fill_row(model, key, j, &mut data)?;
    }
    Ok(SampleMatrix { rows: n, cols: d, data })
}

fn fill_row<T: Real>(model: &ModelSpec<T>, key: StreamKey, j: usize, out: &mut Vec<T>) -> Result<()> {
    let d = model.dim();
    for (i, m) in model.marginals().iter().enumerate() {
        let u = uniform_at::<T>(key, (j * d + i) as u64);
        out.push(draw_marginal(m, u)?);
    }
    Ok(())
}
