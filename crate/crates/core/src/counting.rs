//! Lattice point counts in boxes: `N(X, 𝖡)`, `N(X, 𝖡, m)`, the
//! Hooley–Deligne residual over `F_q`, and smooth-weight counts `N_W`.

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ff::{is_prime, FieldCtx};
use crate::poly::{IntPoly, ModPoly};
use crate::util::CompensatedSum;
use crate::variety::{self, DimensionOptions, Instance, Mode};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Boxes

/// `[c_1 − b_1, c_1 + b_1] × … × [c_n − b_n, c_n + b_n]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxZ {
    center: Vec<i64>,
    half: Vec<i64>,
}

impl BoxZ {
    pub fn new(center: Vec<i64>, half: Vec<i64>) -> Result<Self> {
        if center.len() != half.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: half.len(),
            });
        }
        if center.is_empty() {
            return Err(Error::InvalidInput("a box needs at least one axis".into()));
        }
        if half.iter().any(|&b| b < 0) {
            return Err(Error::InvalidInput(format!("negative half-width in {half:?}")));
        }
        Ok(BoxZ { center, half })
    }

    /// `[−B, B]^n`.
    pub fn symmetric(n: usize, b: i64) -> Result<Self> {
        Self::new(vec![0; n], vec![b; n])
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[i64] {
        &self.center
    }

    pub fn half(&self) -> &[i64] {
        &self.half
    }

    /// Side length `2b_i + 1` (number of integers on the axis).
    pub fn side(&self, i: usize) -> u64 {
        (2 * self.half[i] + 1) as u64
    }

    pub fn max_side(&self) -> u64 {
        (0..self.dim()).map(|i| self.side(i)).max().unwrap_or(0)
    }

    pub fn num_points(&self) -> u128 {
        (0..self.dim()).map(|i| self.side(i) as u128).product()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter()
            .zip(self.center.iter().zip(&self.half))
            .all(|(&xi, (&c, &b))| (xi - c).abs() <= b)
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            lo: self.center.iter().zip(&self.half).map(|(c, b)| c - b).collect(),
            hi: self.center.iter().zip(&self.half).map(|(c, b)| c + b).collect(),
        }
    }

    /// Errors unless every side holds at most one representative per class
    /// modulo `m`.
    pub fn check_modulus(&self, m: u64) -> Result<()> {
        if self.max_side() > m {
            return Err(Error::Precondition(format!(
                "box side {} exceeds the modulus {m}",
                self.max_side()
            )));
        }
        Ok(())
    }
}

/// A product of integer intervals `[lo_i, hi_i]`, possibly empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl Bounds {
    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn num_points(&self) -> u128 {
        if self.is_empty() {
            return 0;
        }
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l + 1) as u128)
            .product()
    }

    pub fn intersect(&self, other: &Bounds) -> Bounds {
        Bounds {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| *a.max(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| *a.min(b)).collect(),
        }
    }

    pub fn shifted(&self, by: &[i64]) -> Bounds {
        Bounds {
            lo: self.lo.iter().zip(by).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(by).map(|(a, b)| a + b).collect(),
        }
    }

    /// Visits every point, last coordinate fastest.
    pub fn for_each<F: FnMut(&[i64])>(&self, mut f: F) {
        if self.is_empty() {
            return;
        }
        let n = self.lo.len();
        let mut x = self.lo.clone();
        loop {
            f(&x);
            let mut i = n;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if x[i] < self.hi[i] {
                    x[i] += 1;
                    break;
                }
                x[i] = self.lo[i];
            }
        }
    }

    /// Splits along the first axis and runs `work` on the slices in parallel;
    /// results come back in slice order.
    pub fn par_map_slices<T, W>(&self, work: W) -> Vec<T>
    where
        T: Send,
        W: Fn(&Bounds) -> T + Sync + Send,
    {
        if self.is_empty() {
            return Vec::new();
        }
        (self.lo[0]..=self.hi[0])
            .into_par_iter()
            .map(|v| {
                let mut s = self.clone();
                s.lo[0] = v;
                s.hi[0] = v;
                work(&s)
            })
            .collect()
    }
}

fn check_instance_box(inst: &Instance, bx: &BoxZ) -> Result<()> {
    if inst.n() != bx.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            got: bx.dim(),
        });
    }
    Ok(())
}

fn check_points(needed: u128, budget: u64) -> Result<()> {
    crate::ff::check_budget(needed, budget)
}

/// `N(X, 𝖡)`: integer points of the box on which every `f_i` vanishes.
pub fn count_box(inst: &Instance, bx: &BoxZ, budget: u64) -> Result<u64> {
    check_instance_box(inst, bx)?;
    check_points(bx.num_points(), budget)?;
    let fast: Vec<_> = inst.polys().iter().map(IntPoly::to_i128).collect();
    let parts = bx.bounds().par_map_slices(|s| {
        let mut k = 0u64;
        s.for_each(|x| {
            let ok = inst.polys().iter().zip(&fast).all(|(p, f)| {
                match f.as_ref().and_then(|f| f.eval(x)) {
                    Some(v) => v == 0,
                    None => p.eval_i64(x).expect("dimensions checked").is_zero(),
                }
            });
            if ok {
                k += 1;
            }
        });
        k
    });
    Ok(parts.into_iter().sum())
}

/// Counts points of `bounds` where every compiled polynomial vanishes.
pub fn count_bounds_mod(polys: &[ModPoly], bounds: &Bounds) -> u64 {
    let parts = bounds.par_map_slices(|s| {
        let mut scratch = Vec::new();
        let mut k = 0u64;
        s.for_each(|x| {
            if polys.iter().all(|p| p.eval_i64(x, &mut scratch) == 0) {
                k += 1;
            }
        });
        k
    });
    parts.into_iter().sum()
}

fn check_modulus_shape(m: u64) -> Result<()> {
    if is_prime(m) {
        return Ok(());
    }
    let p = (2..).take_while(|d| d * d <= m).find(|d| m % d == 0);
    match p {
        Some(p) if is_prime(p) && is_prime(m / p) && p != m / p => Ok(()),
        _ => Err(Error::Precondition(format!(
            "modulus {m} is neither a prime nor a product of two distinct primes"
        ))),
    }
}

/// `N(X, 𝖡, m)`: box points with every `f_i ≡ 0 (mod m)`.
pub fn count_box_mod(inst: &Instance, bx: &BoxZ, m: u64, budget: u64) -> Result<u64> {
    check_instance_box(inst, bx)?;
    check_modulus_shape(m)?;
    bx.check_modulus(m)?;
    check_points(bx.num_points(), budget)?;
    let polys: Vec<ModPoly> = inst.polys().iter().map(|p| p.reduce_mod(m)).collect();
    Ok(count_bounds_mod(&polys, &bx.bounds()))
}

// ---------------------------------------------------------------------------
// Hooley–Deligne

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HooleyResidual {
    pub q: u64,
    pub count: u64,
    pub main: u64,
    pub residual: i64,
    pub s: i32,
    /// `q^{(n−r+2+s)/2}`; absent in the zero-dimensional case.
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub dim_y: i32,
    pub dim_z: i32,
}

/// `#X(F_q) − q^{n−r}` together with the exponent `(n−r+2+s)/2`, after
/// checking that the projective closure `Y_q` has dimension `n − r` and its
/// hyperplane at infinity `Z_q` has dimension `n − r − 1`.
pub fn hooley_deligne_residual(
    inst: &Instance,
    q: u64,
    opts: &DimensionOptions,
    budget: u64,
) -> Result<HooleyResidual> {
    let (n, r) = (inst.n(), inst.r());
    if r > n {
        return Err(Error::Precondition(format!("r = {r} exceeds n = {n}")));
    }
    let ctx = FieldCtx::prime(q)?;
    let count = variety::count_points(n, inst.polys(), &ctx, Mode::Affine, budget)?;
    let main = q.pow((n - r) as u32);
    let residual = count as i64 - main as i64;
    if n == r {
        return Ok(HooleyResidual {
            q,
            count,
            main,
            residual,
            s: -1,
            bound: None,
            ratio: None,
            dim_y: 0,
            dim_z: -1,
        });
    }
    let y = inst.homogenized();
    let dim_y = variety::dimension(n + 1, &y, q, opts)?.dim;
    if dim_y != (n - r) as i32 {
        return Err(Error::Hypothesis(format!(
            "Y_{q} has dimension {dim_y}, not n − r = {}",
            n - r
        )));
    }
    let zf = inst.leading_forms();
    let dim_z = variety::dimension(n, zf, q, opts)?.dim;
    if dim_z != dim_y - 1 {
        return Err(Error::Hypothesis(format!(
            "dim Z_{q} = {dim_z} but dim Y_{q} − 1 = {}",
            dim_y - 1
        )));
    }
    let s = if dim_z < 0 {
        -1
    } else {
        variety::singular_dimension(n, zf, q, opts)?.dim.min(dim_z)
    };
    if dim_z >= 0 && s == dim_z {
        return Err(Error::Hypothesis(format!(
            "the Jacobian of Z_{q} is degenerate everywhere (dim Sing Z = dim Z = {s})"
        )));
    }
    let bound = (q as f64).powf((n as f64 - r as f64 + 2.0 + s as f64) / 2.0);
    Ok(HooleyResidual {
        q,
        count,
        main,
        residual,
        s,
        bound: Some(bound),
        ratio: Some(residual.unsigned_abs() as f64 / bound),
        dim_y,
        dim_z,
    })
}

// ---------------------------------------------------------------------------
// Smooth weights

/// `W(t) = ∏ φ_m(t_i / L)` with `φ_m(u) = exp(−1/(1 − u^{2m}))` on `|u| < 1`.
///
/// `m = 1` is the classical bump; larger `m` flattens the top towards
/// `e^{−1}` on `(−1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpWeight {
    pub half_width: f64,
    pub sharpness: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Weight {
    Bump(BumpWeight),
    /// `∏ [|t_i| ≤ h]`; not smooth, used to tie weighted sums to plain counts.
    Indicator { half_width: f64 },
}

impl BumpWeight {
    pub fn new(half_width: f64, sharpness: u32) -> Result<Self> {
        if !(half_width > 0.0) || sharpness == 0 {
            return Err(Error::InvalidInput(format!(
                "bump needs L > 0 and m ≥ 1, got L = {half_width}, m = {sharpness}"
            )));
        }
        Ok(BumpWeight {
            half_width,
            sharpness,
        })
    }

    pub fn standard() -> Self {
        BumpWeight {
            half_width: 1.0,
            sharpness: 1,
        }
    }

    /// `φ_m(u)`.
    pub fn profile(&self, u: f64) -> f64 {
        let v = u.abs().powi(2 * self.sharpness as i32);
        if v >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - v)).exp()
        }
    }

    /// Numerators `P_j` with `φ^{(j)} = P_j / (1 − v)^{2j} · φ`, `v = u^{2m}`,
    /// as coefficient vectors in `u`.
    pub fn derivative_numerators(&self, kmax: usize) -> Vec<Vec<f64>> {
        let m2 = 2 * self.sharpness as usize;
        let mut v = vec![0.0; m2 + 1];
        v[m2] = 1.0;
        let mut one_minus_v = vec![0.0; m2 + 1];
        one_minus_v[0] = 1.0;
        one_minus_v[m2] = -1.0;
        let dv = poly_deriv(&v);
        let omv2 = poly_mul(&one_minus_v, &one_minus_v);
        let mut out = vec![vec![1.0]];
        for j in 0..kmax {
            let pj = &out[j];
            let a = poly_mul(&poly_deriv(pj), &omv2);
            let b = poly_scale(&poly_mul(&poly_mul(&dv, pj), &one_minus_v), 2.0 * j as f64);
            let c = poly_mul(&dv, pj);
            out.push(poly_sub(&poly_add(&a, &b), &c));
        }
        out
    }

    /// `φ^{(j)}(u)` for `j = 0..=kmax`.
    pub fn profile_derivatives(&self, u: f64, kmax: usize) -> Vec<f64> {
        let nums = self.derivative_numerators(kmax);
        self.eval_derivatives(&nums, u)
    }

    fn eval_derivatives(&self, nums: &[Vec<f64>], u: f64) -> Vec<f64> {
        let v = u.abs().powi(2 * self.sharpness as i32);
        if v >= 1.0 {
            return vec![0.0; nums.len()];
        }
        let omv = 1.0 - v;
        nums.iter()
            .enumerate()
            .map(|(j, p)| {
                let pv = poly_eval(p, u);
                if pv == 0.0 {
                    return 0.0;
                }
                let log = pv.abs().ln() - 2.0 * j as f64 * omv.ln() - 1.0 / omv;
                pv.signum() * log.exp()
            })
            .collect()
    }

    /// `M_j = max |φ^{(j)}|` on a grid of 10⁴ points in `(−1, 1)`.
    pub fn derivative_maxima(&self, kmax: usize) -> Vec<f64> {
        const GRID: usize = 10_000;
        let nums = self.derivative_numerators(kmax);
        let mut best = vec![0.0f64; kmax + 1];
        for i in 1..GRID {
            let u = -1.0 + 2.0 * i as f64 / GRID as f64;
            for (b, d) in best.iter_mut().zip(self.eval_derivatives(&nums, u)) {
                *b = b.max(d.abs());
            }
        }
        best
    }

    /// `D_k`: the largest `k`-th order partial derivative of `W` on `ℝ^n`,
    /// for `k = 0..=kmax`.
    pub fn d_table(&self, n: usize, kmax: usize) -> Vec<f64> {
        let maxima = self.derivative_maxima(kmax);
        let l = self.half_width;
        (0..=kmax)
            .map(|k| {
                let mut best = 0.0f64;
                for_each_composition(k, n, &mut |alpha| {
                    let v: f64 = alpha
                        .iter()
                        .map(|&a| maxima[a] * l.powi(-(a as i32)))
                        .product();
                    best = best.max(v);
                });
                best
            })
            .collect()
    }
}

fn for_each_composition(k: usize, n: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(k: usize, n: usize, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if acc.len() + 1 == n {
            acc.push(k);
            f(acc);
            acc.pop();
            return;
        }
        for a in 0..=k {
            acc.push(a);
            rec(k - a, n, acc, f);
            acc.pop();
        }
    }
    if n == 0 {
        if k == 0 {
            f(&[]);
        }
        return;
    }
    rec(k, n, &mut Vec::with_capacity(n), f);
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len().max(b.len()))
        .map(|i| a.get(i).unwrap_or(&0.0) + b.get(i).unwrap_or(&0.0))
        .collect()
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    poly_add(a, &poly_scale(b, -1.0))
}

fn poly_scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

fn poly_deriv(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect()
}

fn poly_eval(a: &[f64], u: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

impl Weight {
    pub fn bump(half_width: f64, sharpness: u32) -> Result<Self> {
        Ok(Weight::Bump(BumpWeight::new(half_width, sharpness)?))
    }

    /// Support half-width in `t`-coordinates.
    pub fn support(&self) -> f64 {
        match self {
            Weight::Bump(b) => b.half_width,
            Weight::Indicator { half_width } => *half_width,
        }
    }

    /// The one-dimensional factor at `t`.
    pub fn factor(&self, t: f64) -> f64 {
        match self {
            Weight::Bump(b) => b.profile(t / b.half_width),
            Weight::Indicator { half_width } => {
                if t.abs() <= *half_width * (1.0 + 1e-12) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        t.iter().map(|&ti| self.factor(ti)).product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedOptions {
    pub budget: u64,
    /// Largest allowed `B / q`.
    pub max_b_over_q: f64,
    pub dimension: DimensionOptions,
}

impl Default for WeightedOptions {
    fn default() -> Self {
        WeightedOptions {
            budget: crate::DEFAULT_BUDGET,
            max_b_over_q: 1.0,
            dimension: DimensionOptions::default(),
        }
    }
}

fn check_scale(b: f64, q: u64, opts: &WeightedOptions) -> Result<()> {
    if !(b >= 1.0) {
        return Err(Error::Precondition(format!("B = {b} must be at least 1")));
    }
    if b > opts.max_b_over_q * q as f64 {
        return Err(Error::Precondition(format!(
            "B = {b} exceeds {} · q = {}",
            opts.max_b_over_q,
            opts.max_b_over_q * q as f64
        )));
    }
    Ok(())
}

/// Per-axis weight tables over `[−R, R]` plus the sums `(Σ_{f≡0} w, Σ w)`.
fn weighted_sums(polys: &[ModPoly], tables: &[Vec<f64>], radius: i64) -> (f64, f64) {
    let n = tables.len();
    let bounds = Bounds {
        lo: vec![-radius; n],
        hi: vec![radius; n],
    };
    let parts = bounds.par_map_slices(|s| {
        let mut on = CompensatedSum::new();
        let mut all = CompensatedSum::new();
        let mut scratch = Vec::new();
        s.for_each(|x| {
            let w: f64 = x
                .iter()
                .zip(tables)
                .map(|(&xi, t)| t[(xi + radius) as usize])
                .product();
            if w == 0.0 {
                return;
            }
            all.add(w);
            if polys.iter().all(|p| p.eval_i64(x, &mut scratch) == 0) {
                on.add(w);
            }
        });
        (on, all)
    });
    let mut on = CompensatedSum::new();
    let mut all = CompensatedSum::new();
    for (a, b) in parts {
        on = on.merge(a);
        all = all.merge(b);
    }
    (on.value(), all.value())
}

fn support_radius(weight: &Weight, scale: f64) -> i64 {
    (weight.support() * scale).floor() as i64 + 1
}

/// `N_W(X, B, q) = Σ_{x ∈ ℤ^n, x mod q ∈ X_q} W(x / B)`.
pub fn weighted_count(inst: &Instance, weight: &Weight, b: f64, q: u64, opts: &WeightedOptions) -> Result<f64> {
    check_scale(b, q, opts)?;
    Ok(weighted_both(inst, weight, b, q, opts)?.0)
}

fn weighted_both(inst: &Instance, weight: &Weight, b: f64, q: u64, opts: &WeightedOptions) -> Result<(f64, f64)> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    let n = inst.n();
    let radius = support_radius(weight, b);
    check_points((2 * radius as u128 + 1).pow(n as u32), opts.budget)?;
    let table: Vec<f64> = (-radius..=radius).map(|x| weight.factor(x as f64 / b)).collect();
    let tables = vec![table; n];
    let polys: Vec<ModPoly> = inst.polys().iter().map(|p| p.reduce_mod(q)).collect();
    Ok(weighted_sums(&polys, &tables, radius))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedResidual {
    pub lhs: f64,
    pub rhs_main: f64,
    pub residual: f64,
    pub s: i32,
    pub d_2n: Option<f64>,
    /// `D_{2n} B^{s+1} q^{(n−r−s−2)/2} (B + q^{1/2})`; only for bump weights
    /// with `n ≤ 4`.
    pub error_term: Option<f64>,
}

/// Both sides of the weighted formula `N_W(X,B,q) ≈ q^{−r} N_W(A^n,B,q)`
/// by direct summation, with the error term evaluated from the `D_k` table.
pub fn weighted_residual(
    inst: &Instance,
    weight: &Weight,
    b: f64,
    q: u64,
    opts: &WeightedOptions,
) -> Result<WeightedResidual> {
    check_scale(b, q, opts)?;
    let (n, r) = (inst.n(), inst.r());
    let rep = variety::analyze(n, inst.leading_forms(), q, &opts.dimension)?;
    if !rep.is_complete_intersection_codim {
        return Err(Error::Hypothesis(format!(
            "dim Z_{q} = {} ≠ n − 1 − r = {}",
            rep.dim_z,
            n as i32 - 1 - r as i32
        )));
    }
    let s = rep.dim_sing;
    let (lhs, all) = weighted_both(inst, weight, b, q, opts)?;
    let rhs_main = all / (q as f64).powi(r as i32);
    let d_2n = match weight {
        Weight::Bump(bw) if n <= 4 => Some(bw.d_table(n, 2 * n)[2 * n]),
        _ => None,
    };
    let error_term = d_2n.map(|d| {
        d * b.powi(s + 1)
            * (q as f64).powf((n as f64 - r as f64 - s as f64 - 2.0) / 2.0)
            * (b + (q as f64).sqrt())
    });
    Ok(WeightedResidual {
        lhs,
        rhs_main,
        residual: lhs - rhs_main,
        s,
        d_2n,
        error_term,
    })
}

/// `Δ_W(y) = Σ_{f^y ≡ 0 (q)} W_y(x) − q^{−r} Σ_x W_y(x)` with
/// `W_y(x) = W(x/2B) · W((x + p·y)/2B)`.
pub fn weighted_delta(
    inst: &Instance,
    weight: &Weight,
    b: f64,
    p: u64,
    q: u64,
    y: &[i64],
    opts: &WeightedOptions,
) -> Result<f64> {
    check_scale(b, q, opts)?;
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    let n = inst.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let scale = 2.0 * b;
    let radius = support_radius(weight, scale);
    check_points((2 * radius as u128 + 1).pow(n as u32), opts.budget)?;
    let tables: Vec<Vec<f64>> = y
        .iter()
        .map(|&yi| {
            let shift = p as i64 * yi;
            (-radius..=radius)
                .map(|x| weight.factor(x as f64 / scale) * weight.factor((x + shift) as f64 / scale))
                .collect()
        })
        .collect();
    let polys = inst
        .polys()
        .iter()
        .map(|f| Ok(f.difference(p as i64, y)?.reduce_mod(q)))
        .collect::<Result<Vec<_>>>()?;
    let (on, all) = weighted_sums(&polys, &tables, radius);
    Ok(on - all / (q as f64).powi(inst.r() as i32))
}

/// `N(X, 𝖡, q) / B^{dim X}` for the trivial-bound scaling check.
pub fn trivial_ratio(inst: &Instance, b: i64, q: u64, budget: u64) -> Result<f64> {
    let bx = BoxZ::symmetric(inst.n(), b)?;
    let count = count_box_mod(inst, &bx, q, budget)?;
    let dim = inst.n() as i32 - inst.r() as i32;
    Ok(count as f64 / (b as f64).powi(dim))
}
