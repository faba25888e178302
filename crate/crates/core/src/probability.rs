//! Probability that a substituted leaf reproduces the same root along a fixed
//! path of `m` siblings with a `b`-bit random-oracle hash.
//!
//! The path collides iff the leaf hashes collide or, failing that, one of the
//! `m` parent hashes does. With `p = 2^-b` this gives
//!
//! ```text
//! P_exact(b, m)  = p + Σ_{k=1..m} (1 - p)^k · p  = 1 - (1 - p)^(m+1)
//! P_approx(b, m) = p + e^(-p) - e^(-(m+1)p)
//! ```
//!
//! Reals are binary floats at [`WORKING_PRECISION_BITS`] bits (about 96
//! decimal digits). The exact form is evaluated as `-expm1((m+1)·ln1p(-p))`,
//! which keeps full relative precision even when `p` is far below machine
//! epsilon. The approximation is reported raw: for small `b` and long paths it
//! exceeds 1.

use dashu_base::Abs;
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;

use crate::error::{Error, Result};

/// Binary arbitrary-precision float used for all reported probabilities.
pub type Real = FBig<HalfEven, 2>;

/// Binary digits carried through every real-valued evaluation.
pub const WORKING_PRECISION_BITS: usize = 320;

/// Largest `b·(m+1)` for which [`exact_falsification_prob`] also attaches the
/// exact rational.
pub const RATIONAL_BIT_BUDGET: u64 = 4096;

/// Scale guard for the literal term-by-term sum.
pub const TERMSUM_MAX_BITS: u32 = 16;
pub const TERMSUM_MAX_PATH_LEN: u64 = 4096;

/// Hash widths of the published difference table.
pub const DIFF_TABLE_BITS: [u32; 5] = [2, 4, 6, 8, 10];
/// Path lengths of the published difference table.
pub const DIFF_TABLE_PATH_LENS: [u64; 5] = [10, 50, 100, 500, 1000];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathParams {
    bits: u32,
    path_len: u64,
}

impl PathParams {
    pub fn new(bits: u32, path_len: u64) -> Result<Self> {
        if bits == 0 {
            return Err(Error::Config("hash width must be at least 1 bit".into()));
        }
        Ok(Self { bits, path_len })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn path_len(&self) -> u64 {
        self.path_len
    }
}

/// A probability at working precision.
///
/// `complement` is `1 - value` evaluated on its own, so it keeps full relative
/// precision when `value` rounds to 1 (e.g. `b = 1` with long paths). Ordering
/// goes through whichever of the two is below one half.
#[derive(Clone, Debug, PartialEq)]
pub struct Probability {
    pub value: Real,
    pub complement: Real,
    pub exact_rational: Option<RBig>,
}

impl Probability {
    fn from_rational(r: RBig) -> Self {
        Self {
            value: rational_to_real(&r),
            complement: rational_to_real(&(RBig::ONE - &r)),
            exact_rational: Some(r),
        }
    }

    fn from_value(value: Real) -> Self {
        Self {
            complement: real(1) - value.clone(),
            value,
            exact_rational: None,
        }
    }

    fn is_upper_half(&self) -> bool {
        self.complement < self.value
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().value()
    }
}

impl PartialOrd for Probability {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        if self.is_upper_half() && other.is_upper_half() {
            other.complement.partial_cmp(&self.complement)
        } else {
            self.value.partial_cmp(&other.value)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FalsificationEstimate {
    pub params: PathParams,
    pub exact: Probability,
    pub approx: Probability,
    pub abs_diff: Real,
}

fn real(x: u64) -> Real {
    Real::from(x).with_precision(WORKING_PRECISION_BITS).value()
}

fn rational_to_real(r: &RBig) -> Real {
    r.to_float(WORKING_PRECISION_BITS).value()
}

/// `2^-b` at working precision.
fn inv_pow2(bits: u32) -> Real {
    real(1) >> bits as isize
}

fn pow2(bits: u64) -> UBig {
    UBig::ONE << bits as usize
}

/// `2^-b`, the chance two distinct inputs share a `b`-bit random-oracle output.
pub fn single_collision_prob(bits: u32) -> Result<Probability> {
    PathParams::new(bits, 0)?;
    let r = RBig::from_parts(IBig::ONE, pow2(bits as u64));
    Ok(Probability {
        value: inv_pow2(bits),
        complement: real(1) - inv_pow2(bits),
        exact_rational: Some(r),
    })
}

/// Exact rational `1 - (1 - 2^-b)^(m+1)`, with no size limit.
///
/// Numerator and denominator both grow to `b·(m+1)` bits.
pub fn exact_falsification_rational(params: PathParams) -> RBig {
    let b = params.bits as u64;
    let n = params.path_len + 1;
    let denom = pow2(b * n);
    let survive = (pow2(b) - UBig::ONE).pow(n as usize);
    RBig::from_parts(IBig::from(&denom - survive), denom)
}

pub fn exact_falsification_prob(params: PathParams) -> Probability {
    let p = inv_pow2(params.bits);
    let budget = (params.bits as u64).saturating_mul(params.path_len.saturating_add(1));
    let exact_rational = (budget <= RATIONAL_BIT_BUDGET).then(|| exact_falsification_rational(params));
    if params.path_len == 0 {
        return Probability {
            complement: real(1) - p.clone(),
            value: p,
            exact_rational,
        };
    }
    // log of the chance that no level collides
    let log_survive = (-p).ln_1p() * real(params.path_len + 1);
    Probability {
        value: -log_survive.clone().exp_m1(),
        complement: log_survive.exp(),
        exact_rational,
    }
}

/// The un-simplified sum `p + Σ_{k=1..m} (1-p)^k p`, term by term in exact
/// rationals. Meant as a cross-check on small inputs only.
pub fn exact_falsification_prob_termsum(params: PathParams) -> Result<Probability> {
    if params.bits > TERMSUM_MAX_BITS || params.path_len > TERMSUM_MAX_PATH_LEN {
        return Err(Error::Usage(format!(
            "term sum limited to b <= {TERMSUM_MAX_BITS}, m <= {TERMSUM_MAX_PATH_LEN}; got b={}, m={}",
            params.bits, params.path_len
        )));
    }
    let p = RBig::from_parts(IBig::ONE, pow2(params.bits as u64));
    let miss = RBig::ONE - &p;
    let mut term = p.clone();
    let mut sum = p;
    for _ in 0..params.path_len {
        term = &term * &miss;
        sum = &sum + &term;
    }
    Ok(Probability::from_rational(sum))
}

/// First `m` terms of the geometric progression `g, g·z, g·z², …`.
pub fn geometric_sum(g: &RBig, z: &RBig, m: u32) -> Result<RBig> {
    if *z == RBig::ONE {
        return Err(Error::Usage("geometric ratio must differ from 1".into()));
    }
    if m == 0 {
        return Ok(RBig::ZERO);
    }
    let zm = z.pow(m as isize);
    Ok(g * (RBig::ONE - zm) / (RBig::ONE - z))
}

/// `2^-b + e^(-2^-b) - e^(-(m+1)·2^-b)`, unclamped.
pub fn approx_falsification_prob(params: PathParams) -> Probability {
    let p = inv_pow2(params.bits);
    // e^(-p) - e^(-(m+1)p) = e^(-p)·(1 - e^(-mp)); the expm1 form avoids
    // cancelling two nearly equal exponentials when p is tiny.
    let tail = (-(p.clone() * real(params.path_len))).exp_m1();
    Probability::from_value(p.clone() - (-p).exp() * tail)
}

pub fn approximation_error(params: PathParams) -> FalsificationEstimate {
    let exact = exact_falsification_prob(params);
    let approx = approx_falsification_prob(params);
    let abs_diff = (approx.value.clone() - exact.value.clone()).abs();
    FalsificationEstimate {
        params,
        exact,
        approx,
        abs_diff,
    }
}

/// Row-major grid of estimates over `bits_list × path_lens`.
pub fn diff_table(bits_list: &[u32], path_lens: &[u64]) -> Result<Vec<FalsificationEstimate>> {
    if bits_list.is_empty() || path_lens.is_empty() {
        return Err(Error::Usage("diff table needs at least one b and one m".into()));
    }
    bits_list
        .iter()
        .flat_map(|&b| path_lens.iter().map(move |&m| PathParams::new(b, m)))
        .map(|p| p.map(approximation_error))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pp(b: u32, m: u64) -> PathParams {
        PathParams::new(b, m).unwrap()
    }

    fn rat(n: u64, d: u64) -> RBig {
        RBig::from_parts(IBig::from(n), UBig::from(d))
    }

    fn rel_err(a: &Real, b: f64) -> f64 {
        (a.to_f64().value() - b).abs() / b.abs()
    }

    #[test]
    fn collision_prob() {
        assert_eq!(single_collision_prob(1).unwrap().exact_rational, Some(rat(1, 2)));
        assert_eq!(single_collision_prob(2).unwrap().to_f64(), 0.25);
        let p256 = single_collision_prob(256).unwrap();
        assert!(rel_err(&p256.value, 8.636168555094445e-78) < 1e-15);
        assert_eq!(
            p256.exact_rational.unwrap().denominator(),
            &(UBig::ONE << 256)
        );
        assert!(single_collision_prob(0).is_err());
    }

    #[test]
    fn exact_small_cases() {
        for b in [1, 3, 17, 300] {
            let e = exact_falsification_prob(pp(b, 0));
            assert_eq!(e.value, inv_pow2(b));
        }
        assert_eq!(exact_falsification_prob(pp(1, 1)).exact_rational, Some(rat(3, 4)));
        let e = exact_falsification_prob(pp(2, 10));
        assert_eq!(e.exact_rational, Some(rat(4_017_157, 4_194_304)));
        assert_eq!(e.to_f64(), 0.957_764_863_967_895_5);
        // 1 - (1023/1024)^11 at 60 digits.
        assert!(rel_err(&exact_falsification_prob(pp(10, 10)).value, 0.010_689_888_781_099_154) < 1e-15);
    }

    #[test]
    fn rational_only_within_budget() {
        assert!(exact_falsification_prob(pp(4, 1023)).exact_rational.is_some());
        assert!(exact_falsification_prob(pp(4, 1024)).exact_rational.is_none());
        assert!(exact_falsification_prob(pp(256, 1_000_000)).exact_rational.is_none());
    }

    #[test]
    fn real_agrees_with_rational() {
        for (b, m) in [(1, 0), (2, 10), (3, 100), (8, 300), (16, 200)] {
            let e = exact_falsification_prob(pp(b, m));
            let from_rat = rational_to_real(e.exact_rational.as_ref().unwrap());
            let diff = (e.value.clone() - from_rat).abs();
            assert!(diff < (real(1) >> 300), "b={b} m={m}");
        }
    }

    #[test]
    fn termsum_cases() {
        assert_eq!(
            exact_falsification_prob_termsum(pp(1, 1)).unwrap().exact_rational,
            Some(rat(3, 4))
        );
        assert_eq!(
            exact_falsification_prob_termsum(pp(2, 2)).unwrap().exact_rational,
            Some(rat(37, 64))
        );
        assert!(matches!(
            exact_falsification_prob_termsum(pp(17, 1)),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            exact_falsification_prob_termsum(pp(4, 4097)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn geometric_sum_cases() {
        assert_eq!(geometric_sum(&rat(1, 2), &rat(1, 2), 2).unwrap(), rat(3, 4));
        assert_eq!(geometric_sum(&rat(3, 4), &rat(3, 4), 1).unwrap(), rat(3, 4));
        assert_eq!(geometric_sum(&rat(3, 4), &rat(3, 4), 0).unwrap(), RBig::ZERO);
        assert!(matches!(
            geometric_sum(&rat(1, 2), &RBig::ONE, 3),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn geometric_sum_closed_form() {
        // G_m with g = z = 1 - 2^-b equals (2^b - 1)(1 - (1 - 2^-b)^m).
        for b in 1..=8u32 {
            let two_b = 1u64 << b;
            let z = rat(two_b - 1, two_b);
            for m in 0..=64u32 {
                let closed = RBig::from(UBig::from(two_b - 1)) * (RBig::ONE - z.pow(m as isize));
                assert_eq!(geometric_sum(&z, &z, m).unwrap(), closed, "b={b} m={m}");
            }
        }
    }

    #[test]
    fn approx_cases() {
        for b in [1, 2, 10, 64, 256] {
            assert_eq!(approx_falsification_prob(pp(b, 0)).value, inv_pow2(b));
        }
        // Frozen from a 60-digit evaluation of 0.25 + e^-0.25 - e^-2.75.
        assert!(rel_err(&approx_falsification_prob(pp(2, 10)).value, 0.964_872_921_864_697_3) < 1e-15);
        let a = approx_falsification_prob(pp(2, 1000));
        assert!(rel_err(&a.value, 1.028_800_783_071_404_8) < 1e-15);
        assert!(a.value > real(1));
    }

    #[test]
    fn estimate_and_table() {
        let est = approximation_error(pp(2, 10));
        assert!(rel_err(&est.abs_diff, 0.007_108_057_896_801_80) < 1e-10);
        let rows = diff_table(&DIFF_TABLE_BITS, &DIFF_TABLE_PATH_LENS).unwrap();
        assert_eq!(rows.len(), 25);
        assert_eq!(rows[0].params, pp(2, 10));
        assert_eq!(rows[1].params, pp(2, 50));
        assert_eq!(rows[24].params, pp(10, 1000));
        let zero = diff_table(&[4], &[0]).unwrap();
        assert_eq!(zero[0].exact.value, zero[0].approx.value);
        assert_eq!(zero[0].abs_diff, Real::ZERO);
        assert_eq!(zero[0].exact.to_f64(), 1.0 / 16.0);
        assert!(diff_table(&[], &[1]).is_err());
        assert!(diff_table(&[0], &[1]).is_err());
    }

    #[test]
    fn precision_stress() {
        let e = exact_falsification_prob(pp(256, 1_000_000));
        assert!(e.value > Real::ZERO);
        let first_order = inv_pow2(256) * real(1_000_001);
        let rel = ((e.value - first_order.clone()) / first_order).abs();
        assert!(rel.to_f64().value() < 1e-9);
    }

    #[test]
    fn monotone_in_m_and_b() {
        let ms = [0u64, 1, 2, 10, 1000, 65_535, 999_999, 1_000_000];
        let bs = [1u32, 2, 3, 8, 16, 31, 52, 53, 63, 64];
        for &b in &bs {
            for w in ms.windows(2) {
                assert!(
                    exact_falsification_prob(pp(b, w[1])) > exact_falsification_prob(pp(b, w[0])),
                    "b={b} m={}",
                    w[1]
                );
            }
            for &m in &ms {
                let here = exact_falsification_prob(pp(b, m));
                assert!(exact_falsification_prob(pp(b + 1, m)) < here);
                assert!(here.value > Real::ZERO && here.complement > Real::ZERO);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn termsum_identity(b in 1u32..=16, m in 0u64..=4096) {
            let sum = exact_falsification_prob_termsum(pp(b, m)).unwrap();
            prop_assert_eq!(sum.exact_rational.unwrap(), exact_falsification_rational(pp(b, m)));
        }

        #[test]
        fn monotone_adjacent(b in 1u32..=64, m in 0u64..=1_000_000) {
            let here = exact_falsification_prob(pp(b, m));
            prop_assert!(exact_falsification_prob(pp(b, m + 1)) > here);
            prop_assert!(exact_falsification_prob(pp(b + 1, m)) < here);
            prop_assert!(here.value > Real::ZERO && here.complement > Real::ZERO);
        }
    }
}
