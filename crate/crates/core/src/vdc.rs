//! The mod-`pq` decomposition of a box count, Weyl differencing and the
//! strata of difference vectors, run as an exact audit.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::str::FromStr;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{count_bounds_mod, count_box_mod, BoxZ, Bounds};
use crate::expsum::affine_points;
use crate::ff::{check_budget, is_prime, next_prime, prev_prime};
use crate::poly::{IntPoly, ModPoly};
use crate::util::round9;
use crate::variety::{self, DimensionOptions, Instance};
use crate::{Error, Result};

/// Serializes rationals as `"a/b"` strings (`"a"` when integral).
mod rational_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        BigRational::from_str(&s).map_err(serde::de::Error::custom)
    }
}

fn rat(n: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(n.into())
}

fn pow_big(b: u64, e: usize) -> BigInt {
    num_traits::pow(BigInt::from(b), e)
}

// ---------------------------------------------------------------------------
// Prime plans

fn plan_denominator(n: usize, r: usize) -> f64 {
    let (n, r) = (n as f64, r as f64);
    n * n + 4.0 * n * r - n - r * r - r
}

/// Exponents `(e_p, e_q)` with `p ≍ B^{e_p}`, `q ≍ B^{e_q}`.
pub fn plan_exponents(n: usize, r: usize) -> (f64, f64) {
    let den = plan_denominator(n, r);
    let (nf, rf) = (n as f64, r as f64);
    let e_p = 1.0 - (5.0 * nf * rf - rf * rf - 5.0 * rf) / den;
    let e_q = 2.0 - 2.0 * (4.0 * nf * rf - rf * rf) / den;
    (e_p, e_q)
}

/// Exponent of `B` in the uniform bound obtained from the optimal `p, q`.
pub fn thm1_exponent(n: usize, r: usize) -> f64 {
    let (nf, rf) = (n as f64, r as f64);
    nf - 3.0 * rf + rf * rf * (13.0 * nf - 5.0 - 3.0 * rf) / plan_denominator(n, r)
}

/// `n − 3 + 15/(n + 5)`, the hypersurface exponent this is compared with.
pub fn heath_brown_exponent(n: usize) -> f64 {
    n as f64 - 3.0 + 15.0 / (n as f64 + 5.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    /// Allow `n < 4r + 2` and clamp `p, q` into the admissible range.
    pub relaxed: bool,
    /// Move `B` so that `p | 2B + 1`.
    pub exact_identity: bool,
    /// How many candidate primes on each side of a target to test for goodness.
    pub search_width: usize,
    pub dimension: DimensionOptions,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            relaxed: false,
            exact_identity: false,
            search_width: 40,
            dimension: DimensionOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanChecks {
    /// `2p < 2B + 1`
    pub p_below_box: bool,
    /// `2B + 1 < q − p`
    pub box_below_q: bool,
    /// `p | 2B + 1`, checked only in exact-identity mode.
    pub p_divides_side: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimePlan {
    pub n: usize,
    pub r: usize,
    /// Requested box half-width.
    pub b: u64,
    /// Half-width actually used (differs from `b` in exact-identity mode).
    pub b_used: u64,
    pub e_p: f64,
    pub e_q: f64,
    pub p_target: f64,
    pub q_target: f64,
    pub p: u64,
    pub q: u64,
    pub relaxed: bool,
    pub exact_identity: bool,
    /// Whether `p, q` were tested against the leading forms.
    pub good_primes_checked: bool,
    pub checks: PlanChecks,
    /// Adjustments made to the targets, in order.
    pub notes: Vec<String>,
}

impl PrimePlan {
    pub fn constraints_hold(&self) -> bool {
        self.checks.p_below_box && self.checks.box_below_q && self.checks.p_divides_side != Some(false)
    }
}

/// Primes in `[lo, hi]` ordered by distance from `target`, smaller first on
/// ties; at most `width` on each side.
fn primes_near(target: f64, lo: u64, hi: u64, width: usize) -> Vec<u64> {
    let lo = lo.max(2);
    if lo > hi {
        return Vec::new();
    }
    let t = target.round().clamp(lo as f64, hi as f64) as u64;
    let mut below = Vec::new();
    let mut x = t;
    while below.len() < width {
        match prev_prime(x) {
            Some(pr) if pr >= lo => {
                below.push(pr);
                if pr == 2 {
                    break;
                }
                x = pr - 1;
            }
            _ => break,
        }
    }
    let mut above = Vec::new();
    let mut x = t + 1;
    while above.len() < width {
        let pr = next_prime(x);
        if pr > hi {
            break;
        }
        above.push(pr);
        x = pr + 1;
    }
    let mut all: Vec<u64> = below.into_iter().chain(above).collect();
    all.sort_by(|a, b| {
        let (da, db) = ((*a as f64 - target).abs(), (*b as f64 - target).abs());
        da.partial_cmp(&db).unwrap().then(a.cmp(b))
    });
    all.dedup();
    all
}

fn choose_prime(
    target: f64,
    lo: u64,
    hi: u64,
    forms: Option<(usize, &[IntPoly])>,
    opts: &PlanOptions,
) -> Result<Option<u64>> {
    for cand in primes_near(target, lo, hi, opts.search_width) {
        match forms {
            None => return Ok(Some(cand)),
            Some((n, f)) => {
                if variety::is_good_prime(n, f, cand, &opts.dimension)? {
                    return Ok(Some(cand));
                }
            }
        }
    }
    Ok(None)
}

/// Nearest half-width `B' ≥ 1` with `p | 2B' + 1` and `p < 2B' + 1`; ties go down.
fn adjust_for_divisibility(b: u64, p: u64) -> Option<u64> {
    if p % 2 == 0 {
        return None;
    }
    // 2B' + 1 = k·p with k odd and k ≥ 3
    let k0 = (2 * b + 1) / p;
    (k0.saturating_sub(1)..=k0 + 2)
        .filter(|k| *k >= 3 && k % 2 == 1)
        .map(|k| (k * p - 1) / 2)
        .min_by_key(|&bp| (bp.abs_diff(b), bp))
}

fn plan_once(
    n: usize,
    r: usize,
    b: u64,
    inst: Option<&Instance>,
    opts: &PlanOptions,
) -> Result<PrimePlan> {
    let (e_p, e_q) = plan_exponents(n, r);
    let bf = b as f64;
    let p_target = bf.powf(e_p);
    let q_target = bf.powf(e_q);
    let forms = inst.map(|i| (n, i.leading_forms()));
    let mut notes = Vec::new();

    // 2p < 2B + 1 ⇔ p ≤ B
    let p_hi = if opts.relaxed { b } else { u64::MAX / 4 };
    let p_lo = if opts.exact_identity { 3 } else { 2 };
    let mut p = choose_prime(p_target, p_lo, p_hi.max(p_lo), forms, opts)?
        .ok_or_else(|| Error::NotFound(format!("no good prime near {p_target:.3}")))?;
    if opts.exact_identity && p == 2 {
        p = choose_prime(p_target, 3, p_hi.max(3), forms, opts)?
            .ok_or_else(|| Error::NotFound("no odd good prime for p".into()))?;
    }
    if (p as f64 - p_target).abs() >= 1.0 {
        notes.push(format!("p moved from target {:.3} to {p}", p_target));
    }

    let mut b_used = b;
    if opts.exact_identity {
        match adjust_for_divisibility(b, p) {
            Some(bp) => {
                if bp != b {
                    notes.push(format!("B adjusted from {b} to {bp} so that {p} | 2B+1"));
                }
                b_used = bp;
            }
            None => {
                return Err(Error::Precondition(format!(
                    "no B' with {p} | 2B'+1 near B = {b}"
                )))
            }
        }
    }

    let side = 2 * b_used + 1;
    let q_lo = if opts.relaxed { side + p + 1 } else { 2 };
    let q = choose_prime(q_target.max(q_lo as f64), q_lo, u64::MAX / 4, forms, opts)?
        .ok_or_else(|| Error::NotFound(format!("no good prime near {q_target:.3}")))?;
    if (q as f64 - q_target).abs() >= 1.0 {
        notes.push(format!("q moved from target {:.3} to {q}", q_target));
    }

    let checks = PlanChecks {
        p_below_box: 2 * p < side,
        box_below_q: side + p < q,
        p_divides_side: opts.exact_identity.then(|| side % p == 0 && p < side && side < q),
    };
    Ok(PrimePlan {
        n,
        r,
        b,
        b_used,
        e_p,
        e_q,
        p_target,
        q_target,
        p,
        q,
        relaxed: opts.relaxed,
        exact_identity: opts.exact_identity,
        good_primes_checked: inst.is_some(),
        checks,
        notes,
    })
}

/// Primes `p ≍ B^{e_p}`, `q ≍ B^{e_q}` subject to `2p < 2B + 1 < q − p`.
///
/// With an instance, `p` and `q` are the nearest primes at which the leading
/// forms are nonsingular of codimension `r`.
pub fn select_primes(
    n: usize,
    r: usize,
    b: u64,
    inst: Option<&Instance>,
    opts: &PlanOptions,
) -> Result<PrimePlan> {
    if r == 0 || r >= n {
        return Err(Error::InvalidInput(format!("need 0 < r < n, got n = {n}, r = {r}")));
    }
    if b == 0 {
        return Err(Error::InvalidInput("B must be positive".into()));
    }
    if let Some(i) = inst {
        if (i.n(), i.r()) != (n, r) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: i.n(),
            });
        }
    }
    if !opts.relaxed && n < 4 * r + 2 {
        return Err(Error::Precondition(format!(
            "n = {n} < 4r + 2 = {}: outside the regime (set relaxed to run anyway)",
            4 * r + 2
        )));
    }
    let plan = plan_once(n, r, b, inst, opts)?;
    if plan.constraints_hold() {
        return Ok(plan);
    }
    // Suggest the least B at which the nearest primes fit, by pure arithmetic.
    let probe = PlanOptions {
        relaxed: false,
        ..opts.clone()
    };
    let hint = (b + 1..b.saturating_mul(64).max(b + 10_000))
        .find(|&bb| {
            plan_once(n, r, bb, None, &probe)
                .map(|pl| pl.constraints_hold())
                .unwrap_or(false)
        })
        .map(|bb| format!("; the smallest working B above {b} is {bb}"))
        .unwrap_or_default();
    Err(Error::Precondition(format!(
        "p = {}, q = {} violate 2p < 2B+1 < q−p at B = {}{hint}",
        plan.p, plan.q, plan.b_used
    )))
}

/// Half-widths `B₁ ≤ B ≤ B₂` with `p | 2B_i + 1` and `p < 2B_i + 1 < q`.
pub fn bracket(b: u64, p: u64, q: u64) -> Result<(u64, u64)> {
    if p % 2 == 0 {
        return Err(Error::Precondition("p must be odd for 2B+1 to be a multiple of p".into()));
    }
    let ok = |bb: u64| (2 * bb + 1) % p == 0 && p < 2 * bb + 1 && 2 * bb + 1 < q;
    let b1 = (0..=b).rev().find(|&bb| ok(bb));
    let b2 = (b..=(q / 2)).find(|&bb| ok(bb));
    match (b1, b2) {
        (Some(b1), Some(b2)) => Ok((b1, b2)),
        _ => Err(Error::Precondition(format!(
            "no bracketing half-widths for B = {b}, p = {p}, q = {q}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Error terms of the mod-pq bound

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTerms {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e5: f64,
    pub e6: f64,
    pub sum: f64,
}

impl ErrorTerms {
    pub fn as_array(&self) -> [f64; 6] {
        [self.e1, self.e2, self.e3, self.e4, self.e5, self.e6]
    }

    fn rounded(self) -> Self {
        ErrorTerms {
            e1: round9(self.e1),
            e2: round9(self.e2),
            e3: round9(self.e3),
            e4: round9(self.e4),
            e5: round9(self.e5),
            e6: round9(self.e6),
            sum: round9(self.sum),
        }
    }
}

/// The six O-terms bounding `N(X, B, pq) − (2B+1)^n/(pq)^r`, without constants.
pub fn thm2_error_terms(n: usize, r: usize, b: f64, p: u64, q: u64) -> ErrorTerms {
    let (nf, rf) = (n as f64, r as f64);
    let (pf, qf) = (p as f64, q as f64);
    let l = qf.ln().powf(nf / 2.0);
    let e1 = b.powf((nf + 1.0) / 2.0) * pf.powf(-rf / 2.0) * qf.powf((nf - rf - 1.0) / 4.0) * l;
    let e2 = b.powf((nf + 1.0) / 2.0) * pf.powf((nf - 2.0 * rf) / 2.0) * qf.powf(-0.25) * l;
    let e3 = b.powf(nf / 2.0) * pf.powf(-rf / 2.0) * qf.powf((nf - rf) / 4.0) * l;
    let e4 = b.powf(nf / 2.0) * pf.powf((nf - rf) / 2.0) * l;
    let e5 = b.powf(nf) * pf.powf(-(nf + rf - 1.0) / 2.0) * qf.powf(-rf);
    let e6 = b.powf(nf - 1.0) * pf.powf(-rf + 1.0) * qf.powf(-rf);
    ErrorTerms {
        e1,
        e2,
        e3,
        e4,
        e5,
        e6,
        sum: e1 + e2 + e3 + e4 + e5 + e6,
    }
}

// ---------------------------------------------------------------------------
// Differencing

fn check_primes(p: u64, q: u64) -> Result<()> {
    for m in [p, q] {
        if !is_prime(m) {
            return Err(Error::NotPrime(m));
        }
    }
    if p == q {
        return Err(Error::InvalidInput("p and q must differ".into()));
    }
    Ok(())
}

fn inv_mod(a: u64, q: u64) -> u64 {
    let mut r = 1u64;
    let (mut b, mut e) = (a % q, q - 2);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % q;
        }
        b = b * b % q;
        e >>= 1;
    }
    r
}

/// Leading form of `f mod q`, scaled so its first coefficient is 1.
fn monic_leading_mod(f: &IntPoly, q: u64) -> Option<IntPoly> {
    let g = f.reduce_coeffs(q);
    let lf = g.leading_form().ok()?;
    let (_, c) = lf.terms().next()?;
    let c = (c % BigInt::from(q)).to_u64().expect("reduced coefficient");
    Some(lf.scale(&BigInt::from(inv_mod(c, q))).reduce_coeffs(q))
}

/// For a form `F` of degree `d`, checks that the degree `d−1` part of
/// `F(x + p·y) − F(x)` is exactly `p·(y·∇F)`.
pub fn leading_form_law(f: &IntPoly, p: i64, y: &[i64]) -> Result<bool> {
    let d = f.degree().ok_or(Error::NoLeadingForm)?;
    if !f.is_homogeneous() || d == 0 {
        return Err(Error::InvalidInput(format!("{f} is not a form of positive degree")));
    }
    let lhs = f.difference(p, y)?.homogeneous_part(d - 1);
    let rhs = f.directional_derivative(y)?.scale(&BigInt::from(p));
    Ok(lhs == rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceSystem {
    pub y: Vec<i64>,
    /// `f_i(x + p·y) − f_i(x)` over ℤ.
    pub polys: Vec<IntPoly>,
    /// Leading forms mod `q`, normalized; vanishing equations are dropped.
    pub leading_forms: Vec<IntPoly>,
    /// `codim Z_y` capped at `r`.
    pub sigma: i32,
    /// `dim Sing Z_y` when `σ = r`.
    pub s: Option<i32>,
    /// `dim Z_y` in `ℙ^{n−1}`, −1 when empty.
    pub dim_z: i32,
}

/// Codimension and singular dimension of `V(forms)`; `forms` normalized mod `q`.
fn classify(n: usize, r: usize, forms: &[IntPoly], q: u64, opts: &DimensionOptions) -> Result<(i32, Option<i32>, i32)> {
    let r = r as i32;
    if forms.iter().any(|f| f.degree() == Some(0)) {
        return Ok((r, Some(-1), -1));
    }
    let dim_z = if forms.is_empty() {
        n as i32 - 1
    } else {
        variety::dimension(n, forms, q, opts)?.dim
    };
    let codim = n as i32 - 1 - dim_z;
    let sigma = codim.min(r);
    let s = if sigma == r {
        if dim_z < 0 {
            Some(-1)
        } else {
            Some(variety::singular_dimension(n, forms, q, opts)?.dim.min(dim_z))
        }
    } else {
        None
    };
    Ok((sigma, s, dim_z))
}

/// The differenced system at `y` and its classification over `F_q`.
pub fn difference_system(
    inst: &Instance,
    p: u64,
    y: &[i64],
    q: u64,
    opts: &DimensionOptions,
) -> Result<DifferenceSystem> {
    if y.len() != inst.n() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            got: y.len(),
        });
    }
    check_primes(p, q)?;
    let polys = inst
        .polys()
        .iter()
        .map(|f| f.difference(p as i64, y))
        .collect::<Result<Vec<_>>>()?;
    let leading_forms: Vec<IntPoly> = polys.iter().filter_map(|g| monic_leading_mod(g, q)).collect();
    let (sigma, s, dim_z) = classify(inst.n(), inst.r(), &leading_forms, q, opts)?;
    Ok(DifferenceSystem {
        y: y.to_vec(),
        polys,
        leading_forms,
        sigma,
        s,
        dim_z,
    })
}

/// `𝖡_y = 𝖡 ∩ (𝖡 − p·y)` for `𝖡 = [−B, B]^n`.
fn shifted_box(b: i64, p: i64, y: &[i64]) -> Bounds {
    let n = y.len();
    let base = Bounds {
        lo: vec![-b; n],
        hi: vec![b; n],
    };
    let shift: Vec<i64> = y.iter().map(|v| -p * v).collect();
    base.intersect(&base.shifted(&shift))
}

fn delta_with(polys: &[IntPoly], b: i64, p: u64, q: u64, r: usize, y: &[i64]) -> Result<BigRational> {
    let by = shifted_box(b, p as i64, y);
    let size = by.num_points();
    if size == 0 {
        return Ok(BigRational::zero());
    }
    let compiled = polys
        .iter()
        .map(|f| f.difference(p as i64, y).map(|g| g.reduce_mod(q)))
        .collect::<Result<Vec<ModPoly>>>()?;
    let hits = count_bounds_mod(&compiled, &by);
    Ok(rat(hits) - BigRational::new(BigInt::from(size), pow_big(q, r)))
}

/// `Δ(y) = #{x ∈ 𝖡_y : f_i^y(x) ≡ 0 (q)} − q^{−r} #𝖡_y`.
pub fn delta(inst: &Instance, b: u64, p: u64, q: u64, y: &[i64], budget: u64) -> Result<BigRational> {
    if y.len() != inst.n() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            got: y.len(),
        });
    }
    check_primes(p, q)?;
    check_budget((2 * b as u128 + 1).pow(inst.n() as u32), budget)?;
    delta_with(inst.polys(), b as i64, p, q, inst.r(), y)
}

/// All `y` with `|y|_∞ ≤ m`, lexicographic.
fn cube(n: usize, m: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    Bounds {
        lo: vec![-m; n],
        hi: vec![m; n],
    }
    .for_each(|y| out.push(y.to_vec()));
    out
}

// ---------------------------------------------------------------------------
// Strata census

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrataCensus {
    /// `#ℬ`
    pub total: u64,
    /// `σ ↦ #ℬ_σ`
    pub sigma_counts: BTreeMap<i32, u64>,
    /// `s ↦ #{y ∈ ℬ_r : s(y) = s}`
    pub s_counts: BTreeMap<i32, u64>,
    /// `#ℬ_σ / (B/p)^σ`
    pub sigma_ratios: BTreeMap<i32, f64>,
    /// `#{s(y) = s} / (B/p)^{n−s−1}`
    pub s_ratios: BTreeMap<i32, f64>,
    /// `y` whose dimension estimate was inconclusive.
    pub ambiguous: Vec<Vec<i64>>,
    /// `y` where the leading form of `f_i^y` is not `p·y·∇F_i` although
    /// the latter is nonzero mod `q`.
    pub law_violations: Vec<Vec<i64>>,
    /// Distinct leading-form systems classified.
    pub distinct_systems: u64,
}

type Class = std::result::Result<(i32, Option<i32>), ()>;

/// Classifies every `y ∈ ℬ = {|y|_∞ < (2B+1)/p}` into `ℬ_σ` and by `s(y)`.
pub fn strata_census(
    inst: &Instance,
    b: u64,
    p: u64,
    q: u64,
    opts: &DimensionOptions,
) -> Result<StrataCensus> {
    check_primes(p, q)?;
    let (n, r) = (inst.n(), inst.r());
    let m = radius(b, p);
    let ys = cube(n, m);
    let cache: Mutex<HashMap<Vec<String>, Class>> = Mutex::new(HashMap::new());
    let grads: Vec<Vec<IntPoly>> = inst.leading_forms().iter().map(IntPoly::gradient).collect();

    let rows: Vec<(Vec<i64>, Class, bool)> = ys
        .par_iter()
        .map(|y| -> Result<_> {
            let polys = inst
                .polys()
                .iter()
                .map(|f| f.difference(p as i64, y))
                .collect::<Result<Vec<_>>>()?;
            let forms: Vec<IntPoly> = polys.iter().filter_map(|g| monic_leading_mod(g, q)).collect();

            // leading-form law
            let mut violated = false;
            for (g, grad) in polys.iter().zip(&grads) {
                let mut dir = IntPoly::zero(n);
                for (gi, &yi) in grad.iter().zip(y.iter()) {
                    dir = &dir + &gi.scale(&BigInt::from(yi * p as i64));
                }
                let dir = dir.reduce_coeffs(q);
                if dir.is_zero() {
                    continue;
                }
                let top = g.reduce_coeffs(q).leading_form().ok();
                if top.as_ref() != Some(&dir) {
                    violated = true;
                }
            }

            let mut key: Vec<String> = forms.iter().map(|f| f.to_string()).collect();
            key.sort();
            if let Some(c) = cache.lock().unwrap().get(&key) {
                return Ok((y.clone(), c.clone(), violated));
            }
            let class = match classify(n, r, &forms, q, opts) {
                Ok((sigma, s, _)) => Ok((sigma, s)),
                Err(Error::DimensionAmbiguous { .. }) => Err(()),
                Err(e) => return Err(e),
            };
            cache.lock().unwrap().insert(key, class.clone());
            Ok((y.clone(), class, violated))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sigma_counts = BTreeMap::new();
    let mut s_counts = BTreeMap::new();
    let mut ambiguous = Vec::new();
    let mut law_violations = Vec::new();
    for (y, class, violated) in rows {
        if violated {
            law_violations.push(y.clone());
        }
        match class {
            Ok((sigma, s)) => {
                *sigma_counts.entry(sigma).or_insert(0u64) += 1;
                if let Some(s) = s {
                    *s_counts.entry(s).or_insert(0u64) += 1;
                }
            }
            Err(()) => ambiguous.push(y),
        }
    }
    let scale = b as f64 / p as f64;
    let sigma_ratios = sigma_counts
        .iter()
        .map(|(&s, &c)| (s, round9(c as f64 / scale.powi(s))))
        .collect();
    let s_ratios = s_counts
        .iter()
        .map(|(&s, &c)| (s, round9(c as f64 / scale.powi(n as i32 - s - 1))))
        .collect();
    let distinct_systems = cache.into_inner().unwrap().len() as u64;
    Ok(StrataCensus {
        total: ys.len() as u64,
        sigma_counts,
        s_counts,
        sigma_ratios,
        s_ratios,
        ambiguous,
        law_violations,
        distinct_systems,
    })
}

/// Largest `m` with `m < (2B+1)/p`.
fn radius(b: u64, p: u64) -> i64 {
    ((2 * b + 1).div_ceil(p) - 1) as i64
}

// ---------------------------------------------------------------------------
// Audit

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditInputs {
    pub instance_digest: String,
    pub n: usize,
    pub r: usize,
    pub b: u64,
    pub p: u64,
    pub q: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub y: Vec<i64>,
    #[serde(with = "rational_str")]
    pub delta: BigRational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityFlags {
    /// `N = S + K·#X(F_p)`
    pub decomposition: bool,
    /// `𝒵 = Σ_y Δ(y) + p^n q^r K²`
    pub zsum: bool,
    /// `Σ ≤ Σ_y Δ(y)`
    pub sigma_bound: bool,
    /// `S² ≤ #X(F_p)·Σ`
    pub cauchy: bool,
    /// `Δ(y) = 0` on `|y|_∞ = ⌈(2B+1)/p⌉`
    pub delta_support: bool,
}

impl IdentityFlags {
    pub fn all(&self) -> bool {
        self.decomposition && self.zsum && self.sigma_bound && self.cauchy && self.delta_support
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub inputs: AuditInputs,
    #[serde(with = "rational_str")]
    pub k: BigRational,
    /// `N(X, B, pq)`
    #[serde(rename = "N")]
    pub n_count: u64,
    pub count_x_fp: u64,
    #[serde(with = "rational_str")]
    pub s: BigRational,
    /// Sum over `w ∈ X(F_p)` of the squared deviations.
    #[serde(with = "rational_str")]
    pub sigma: BigRational,
    /// Same, over every `w ∈ F_p^n` and every value `a ∈ F_q^r`.
    #[serde(with = "rational_str")]
    pub sigma_enlarged: BigRational,
    #[serde(rename = "Zsum")]
    pub zsum: u64,
    #[serde(with = "rational_str")]
    pub delta_sum: BigRational,
    /// Number of `y` on the shell with `Δ(y) ≠ 0`.
    pub shell_nonzero: u64,
    pub delta_table: Vec<DeltaEntry>,
    pub strata: Option<StrataCensus>,
    pub identity_flags: IdentityFlags,
    pub error_terms: ErrorTerms,
    #[serde(with = "rational_str")]
    pub main_term: BigRational,
    /// `|N − (2B+1)^n/(pq)^r|`
    pub residual: f64,
    /// `residual / Σ E_i`
    pub residual_ratio: f64,
}

impl AuditReport {
    /// Recomputes the flags from the stored quantities.
    pub fn recheck(&self) -> IdentityFlags {
        let (n, r) = (self.inputs.n, self.inputs.r);
        let (p, q) = (self.inputs.p, self.inputs.q);
        let cells = rat(pow_big(p, n) * pow_big(q, r));
        let sum_table: BigRational = self.delta_table.iter().map(|e| e.delta.clone()).sum();
        IdentityFlags {
            decomposition: rat(self.n_count) == &self.s + &self.k * rat(self.count_x_fp),
            zsum: rat(self.zsum) == &self.delta_sum + cells * &self.k * &self.k && sum_table == self.delta_sum,
            sigma_bound: self.sigma <= self.delta_sum,
            cauchy: &self.s * &self.s <= rat(self.count_x_fp) * &self.sigma,
            delta_support: self.shell_nonzero == 0,
        }
    }

    /// Columns: `y1..yn`, `numerator`, `denominator`.
    pub fn write_delta_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.inputs.n).map(|i| format!("y{i}")).collect();
        header.push("numerator".into());
        header.push("denominator".into());
        w.write_record(&header)?;
        for e in &self.delta_table {
            let mut row: Vec<String> = e.y.iter().map(i64::to_string).collect();
            row.push(e.delta.numer().to_string());
            row.push(e.delta.denom().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub budget: u64,
    /// Also classify every `y ∈ ℬ` (needs dimension estimates).
    pub census: bool,
    pub dimension: DimensionOptions,
    /// Keep the per-`y` table in the report.
    pub keep_table: bool,
    pub seed: u64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            budget: crate::DEFAULT_BUDGET,
            census: false,
            dimension: DimensionOptions {
                max_k: 2,
                ..DimensionOptions::default()
            },
            keep_table: true,
            seed: 0,
        }
    }
}

fn residue_index(x: &[i64], p: u64) -> u64 {
    x.iter().fold(0u64, |acc, &v| acc * p + v.rem_euclid(p as i64) as u64)
}

/// Runs the decomposition in exact arithmetic. Needs `p < 2B+1 < q`,
/// `p | 2B+1` and `r ≥ 1`.
pub fn audit(inst: &Instance, b: u64, p: u64, q: u64, opts: &AuditOptions) -> Result<AuditReport> {
    check_primes(p, q)?;
    let (n, r) = (inst.n(), inst.r());
    if r == 0 {
        return Err(Error::Precondition("the audit needs at least one polynomial".into()));
    }
    let side = 2 * b + 1;
    if !(p < side && side < q) {
        return Err(Error::Precondition(format!("need p < 2B+1 < q, got p = {p}, 2B+1 = {side}, q = {q}")));
    }
    if side % p != 0 {
        return Err(Error::Precondition(format!(
            "2B+1 = {side} is not a multiple of p = {p}; bracket B first"
        )));
    }
    let box_pts = (side as u128).pow(n as u32);
    let m = radius(b, p);
    let shell_m = m + 1;
    let ys_total = (2 * shell_m as u128 + 1).pow(n as u32);
    check_budget(box_pts.saturating_mul(ys_total.max(1)), opts.budget)?;

    let bx = BoxZ::symmetric(n, b as i64)?;
    let bi = b as i64;

    // N at modulus pq
    let n_count = count_box_mod(inst, &bx, p * q, opts.budget)?;

    // X(F_p)
    let xs = affine_points(inst, p, opts.budget)?;
    let count_x_fp = xs.len() as u64;

    // cells (x mod p, f(x) mod q) in one pass over the box
    let modq: Vec<ModPoly> = inst.polys().iter().map(|f| f.reduce_mod(q)).collect();
    let parts = bx.bounds().par_map_slices(|s| {
        let mut cells: HashMap<(u64, Vec<u64>), u64> = HashMap::new();
        let mut scratch = Vec::new();
        s.for_each(|x| {
            let a: Vec<u64> = modq.iter().map(|f| f.eval_i64(x, &mut scratch)).collect();
            *cells.entry((residue_index(x, p), a)).or_insert(0) += 1;
        });
        cells
    });
    let mut cells: HashMap<(u64, Vec<u64>), u64> = HashMap::new();
    for part in parts {
        for (k, v) in part {
            *cells.entry(k).or_insert(0) += v;
        }
    }
    let zero_a = vec![0u64; r];

    let k = BigRational::new(pow_big(side, n), pow_big(p, n) * pow_big(q, r));
    let mut s = BigRational::zero();
    let mut sigma = BigRational::zero();
    for w in &xs {
        let wi: Vec<i64> = w.iter().map(|&v| v as i64).collect();
        let inner = cells.get(&(residue_index(&wi, p), zero_a.clone())).copied().unwrap_or(0);
        let dev = rat(inner) - &k;
        sigma += &dev * &dev;
        s += dev;
    }

    let total_cells = rat(pow_big(p, n) * pow_big(q, r));
    let zsum: u64 = cells.values().map(|&c| c * c).sum();
    let mut sigma_enlarged = (&total_cells - rat(cells.len() as u64)) * &k * &k;
    for &c in cells.values() {
        let d = rat(c) - &k;
        sigma_enlarged += &d * &d;
    }

    // Δ(y) over ℬ and on the shell just outside it
    let ys = cube(n, m);
    let deltas: Vec<BigRational> = ys
        .par_iter()
        .map(|y| delta_with(inst.polys(), bi, p, q, r, y))
        .collect::<Result<_>>()?;
    let delta_sum: BigRational = deltas.iter().cloned().sum();
    let shell: Vec<Vec<i64>> = cube(n, shell_m)
        .into_iter()
        .filter(|y| y.iter().map(|v| v.abs()).max() == Some(shell_m))
        .collect();
    let shell_nonzero = shell
        .par_iter()
        .map(|y| delta_with(inst.polys(), bi, p, q, r, y).map(|d| u64::from(!d.is_zero())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();

    let strata = if opts.census {
        Some(strata_census(inst, b, p, q, &opts.dimension)?)
    } else {
        None
    };

    let main_term = BigRational::new(pow_big(side, n), pow_big(p * q, r));
    let residual = (rat(n_count) - &main_term).abs().to_f64().unwrap_or(f64::NAN);
    let error_terms = thm2_error_terms(n, r, b as f64, p, q);
    let residual_ratio = round9(residual / error_terms.sum);

    let delta_table = if opts.keep_table {
        ys.into_iter()
            .zip(deltas)
            .map(|(y, delta)| DeltaEntry { y, delta })
            .collect()
    } else {
        Vec::new()
    };

    let mut report = AuditReport {
        inputs: AuditInputs {
            instance_digest: inst.digest(),
            n,
            r,
            b,
            p,
            q,
            seed: opts.seed,
        },
        k,
        n_count,
        count_x_fp,
        s,
        sigma,
        sigma_enlarged,
        zsum,
        delta_sum,
        shell_nonzero,
        delta_table,
        strata,
        identity_flags: IdentityFlags {
            decomposition: false,
            zsum: false,
            sigma_bound: false,
            cauchy: false,
            delta_support: false,
        },
        error_terms: error_terms.rounded(),
        main_term,
        residual: round9(residual),
        residual_ratio,
    };
    let mut flags = report.recheck();
    if !opts.keep_table {
        // recheck compares against the table sum, which is absent here
        flags.zsum = rat(report.zsum) == &report.delta_sum + total_cells * &report.k * &report.k;
    }
    report.identity_flags = flags;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketedAudit {
    pub b: u64,
    pub b1: u64,
    pub b2: u64,
    #[serde(rename = "N")]
    pub n_count: u64,
    #[serde(with = "rational_str")]
    pub main_term: BigRational,
    /// `N(B₁) − main(B)` and `N(B₂) − main(B)` bracket `N(B) − main(B)`.
    #[serde(with = "rational_str")]
    pub lower: BigRational,
    #[serde(with = "rational_str")]
    pub upper: BigRational,
    pub audit_b1: AuditReport,
    pub audit_b2: AuditReport,
}

/// For `2p < 2B+1 < q − p` without `p | 2B+1`: audits at `B₁ ≤ B ≤ B₂` and
/// checks that they bracket the count at `B`.
pub fn audit_bracketed(
    inst: &Instance,
    b: u64,
    p: u64,
    q: u64,
    opts: &AuditOptions,
) -> Result<BracketedAudit> {
    let (b1, b2) = bracket(b, p, q)?;
    let audit_b1 = audit(inst, b1, p, q, opts)?;
    let audit_b2 = audit(inst, b2, p, q, opts)?;
    let n = inst.n();
    let bx = BoxZ::symmetric(n, b as i64)?;
    let n_count = count_box_mod(inst, &bx, p * q, opts.budget)?;
    let main_term = BigRational::new(pow_big(2 * b + 1, n), pow_big(p * q, inst.r()));
    let lower = rat(audit_b1.n_count) - &main_term;
    let upper = rat(audit_b2.n_count) - &main_term;
    Ok(BracketedAudit {
        b,
        b1,
        b2,
        n_count,
        main_term,
        lower,
        upper,
        audit_b1,
        audit_b2,
    })
}

impl BracketedAudit {
    pub fn brackets(&self) -> bool {
        let mid = rat(self.n_count) - &self.main_term;
        self.lower <= mid && mid <= self.upper
    }
}

/// `|N(X, B, pq) − (2B+1)^n/(pq)^r|` with the error terms at this point.
pub fn thm2_residual(inst: &Instance, b: u64, p: u64, q: u64, budget: u64) -> Result<(u64, f64, ErrorTerms)> {
    check_primes(p, q)?;
    let n = inst.n();
    let bx = BoxZ::symmetric(n, b as i64)?;
    let count = count_box_mod(inst, &bx, p * q, budget)?;
    let main = BigRational::new(pow_big(2 * b + 1, n), pow_big(p * q, inst.r()));
    let residual = (rat(count) - main).abs().to_f64().unwrap_or(f64::NAN);
    Ok((count, residual, thm2_error_terms(n, inst.r(), b as f64, p, q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_exponents_closed_forms() {
        let (ep, eq) = plan_exponents(10, 1);
        assert!((ep - 0.65625).abs() < 1e-12);
        assert!((eq - 1.390625).abs() < 1e-12);
        assert!((thm1_exponent(10, 1) - 7.953125).abs() < 1e-12);
        assert_eq!(heath_brown_exponent(10), 8.0);
    }

    #[test]
    fn plan_regime() {
        let opts = PlanOptions::default();
        assert!(matches!(select_primes(5, 1, 100, None, &opts), Err(Error::Precondition(_))));
        let plan = select_primes(10, 1, 1000, None, &opts).unwrap();
        assert!(plan.constraints_hold(), "{plan:?}");
        assert!(is_prime(plan.p) && is_prime(plan.q));
        let relaxed = PlanOptions {
            relaxed: true,
            ..PlanOptions::default()
        };
        let plan = select_primes(5, 1, 50, None, &relaxed).unwrap();
        assert!(plan.constraints_hold(), "{plan:?}");
    }

    #[test]
    fn plan_exact_identity_moves_b() {
        let opts = PlanOptions {
            exact_identity: true,
            ..PlanOptions::default()
        };
        let plan = select_primes(10, 1, 1000, None, &opts).unwrap();
        assert_eq!((2 * plan.b_used + 1) % plan.p, 0);
        assert!(plan.constraints_hold(), "{plan:?}");
    }

    #[test]
    fn plan_small_b_suggests_minimum() {
        let err = select_primes(10, 1, 2, None, &PlanOptions::default()).unwrap_err();
        assert!(err.to_string().contains("smallest working B"), "{err}");
    }

    #[test]
    fn plan_with_instance_avoids_bad_primes() {
        let f = Instance::diagonal(&[1, 1, 1], 3).unwrap();
        let opts = PlanOptions {
            relaxed: true,
            ..PlanOptions::default()
        };
        let plan = select_primes(3, 1, 13, Some(&f), &opts).unwrap();
        assert_ne!(plan.p, 3);
        assert!(plan.good_primes_checked && plan.constraints_hold(), "{plan:?}");
    }

    #[test]
    fn brackets() {
        assert_eq!(bracket(5, 3, 29).unwrap(), (4, 7));
        assert_eq!(bracket(4, 3, 29).unwrap(), (4, 4));
        assert!(bracket(4, 2, 29).is_err());
    }

    #[test]
    fn difference_examples() {
        let f = Instance::diagonal(&[1, 1, 1, 1], 3).unwrap();
        let opts = DimensionOptions::default();
        let d0 = difference_system(&f, 2, &[0, 0, 0, 0], 7, &opts).unwrap();
        assert!(d0.polys.iter().all(IntPoly::is_zero));
        assert_eq!(d0.sigma, 0);
        let d1 = difference_system(&f, 2, &[1, 0, 0, 0], 7, &opts).unwrap();
        // 6x1² + 12x1 + 8, leading form 6x1² → x1² after normalizing
        assert_eq!(d1.polys[0].leading_form().unwrap().to_string(), "6*x1^2");
        assert_eq!(d1.leading_forms[0].to_string(), "x1^2");
        assert_eq!((d1.sigma, d1.s), (1, Some(2)));
    }

    #[test]
    fn delta_values() {
        let f = Instance::parse(2, &["x1^3 + x2^3"]).unwrap();
        let q = 11;
        let d = delta(&f, 4, 3, q, &[0, 0], u64::MAX).unwrap();
        assert_eq!(d, BigRational::new(BigInt::from(81 * 10), BigInt::from(11)));
        assert!(delta(&f, 4, 3, q, &[3, 0], u64::MAX).unwrap().is_zero());
        // brute force at y = (1, 0)
        let mut hits = 0i64;
        let mut size = 0i64;
        for x1 in -4i64..=4 {
            for x2 in -4i64..=4 {
                if (x1 + 3).abs() > 4 {
                    continue;
                }
                size += 1;
                let v = (x1 + 3).pow(3) + x2.pow(3) - x1.pow(3) - x2.pow(3);
                if v.rem_euclid(11) == 0 {
                    hits += 1;
                }
            }
        }
        let expect = rat(hits) - BigRational::new(BigInt::from(size), BigInt::from(11));
        assert_eq!(delta(&f, 4, 3, q, &[1, 0], u64::MAX).unwrap(), expect);
    }

    #[test]
    fn toy_audit() {
        let f = Instance::parse(2, &["x1^3 + x2^3"]).unwrap();
        let rep = audit(&f, 4, 3, 11, &AuditOptions::default()).unwrap();
        assert_eq!(rep.k, BigRational::new(BigInt::from(9), BigInt::from(11)));
        assert_eq!(rep.count_x_fp, 3);
        assert!(rep.identity_flags.all(), "{:?}", rep.identity_flags);
        assert_eq!(rep.recheck(), rep.identity_flags);
        assert!(rep.sigma <= rep.sigma_enlarged);
        let cells = rat(pow_big(3, 2) * pow_big(11, 1));
        assert_eq!(rep.sigma_enlarged, rat(rep.zsum) - cells * &rep.k * &rep.k);
        let json = serde_json::to_string(&rep).unwrap();
        let back: AuditReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        let mut buf = Vec::new();
        rep.write_delta_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("y1,y2,numerator,denominator\n-2,-2,"));
    }

    #[test]
    fn audit_refusals() {
        let f = Instance::parse(2, &["x1^3 + x2^3"]).unwrap();
        let opts = AuditOptions::default();
        assert!(matches!(audit(&f, 5, 3, 13, &opts), Err(Error::Precondition(_))));
        let empty = Instance::affine_space(2).unwrap();
        assert!(matches!(audit(&empty, 4, 3, 11, &opts), Err(Error::Precondition(_))));
        assert!(audit(&f, 4, 3, 7, &opts).is_err());
    }

    #[test]
    fn bracketed_audit() {
        let f = Instance::parse(2, &["x1^3 + x2^3 - x1"]).unwrap();
        let rep = audit_bracketed(&f, 5, 3, 17, &AuditOptions::default()).unwrap();
        assert_eq!((rep.b1, rep.b2), (4, 7));
        assert!(rep.audit_b1.identity_flags.all() && rep.audit_b2.identity_flags.all());
    }

    #[test]
    fn census_on_diagonal_cubic() {
        let f = Instance::diagonal(&[1, 1, 1, 1], 3).unwrap();
        let opts = DimensionOptions {
            max_k: 2,
            ..DimensionOptions::default()
        };
        let c = strata_census(&f, 4, 3, 7, &opts).unwrap();
        assert_eq!(c.total, 5u64.pow(4));
        assert!(c.law_violations.is_empty());
        // y = 0 is the only σ = 0 vector; coordinate directions give s = 2
        assert_eq!(c.sigma_counts.get(&0), Some(&1));
        assert_eq!(c.s_counts.get(&2), Some(&16));
        let d = difference_system(&f, 3, &[0, 2, 0, 0], 7, &opts).unwrap();
        assert_eq!(d.s, Some(2));
    }

    #[test]
    fn error_terms_positive() {
        let e = thm2_error_terms(3, 1, 4.0, 2, 13);
        assert!(e.as_array().iter().all(|v| *v > 0.0));
        assert!((e.sum - e.as_array().iter().sum::<f64>()).abs() < 1e-9);
    }
}
