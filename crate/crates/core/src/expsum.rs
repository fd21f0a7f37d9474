//! Exponential sums over boxes and over `X(F_q)`, and the exact identities
//! that connect them to box counts.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{count_box_mod, BoxZ};
use crate::ff::{check_budget, is_prime, CharTable, FieldCtx, FieldElem, ProjPoint};
use crate::poly::{IntPoly, ModPoly};
use crate::util::CompensatedSum;
use crate::variety::{self, linear_coeffs, DimensionOptions, Instance};
use crate::{Error, Result};

/// A character sum with the number of its terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharSum {
    pub re: f64,
    pub im: f64,
    pub terms: u64,
    pub q: u64,
}

impl CharSum {
    pub fn new(value: Complex64, terms: u64, q: u64) -> Self {
        CharSum {
            re: value.re,
            im: value.im,
            terms,
            q,
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn abs(&self) -> f64 {
        self.value().norm()
    }

    /// Triangle inequality, with room for rounding.
    pub fn is_bounded(&self) -> bool {
        self.abs() <= self.terms as f64 * (1.0 + 1e-9) + 1e-9
    }
}

fn require_prime(q: u64) -> Result<()> {
    if is_prime(q) {
        Ok(())
    } else {
        Err(Error::NotPrime(q))
    }
}

// ---------------------------------------------------------------------------
// S₁

/// Per-axis factors of `S₁(a) = ∏_i Σ_{b_i} e_q(−a_i b_i)` for every residue.
#[derive(Clone, Debug)]
pub struct S1Table {
    q: u64,
    factors: Vec<Vec<Complex64>>,
    points: u64,
}

impl S1Table {
    pub fn new(bx: &BoxZ, q: u64) -> Result<Self> {
        require_prime(q)?;
        bx.check_modulus(q)?;
        let chars = CharTable::new(q);
        let b = bx.bounds();
        let factors = (0..bx.dim())
            .map(|i| {
                let (lo, len) = (b.lo[i], bx.side(i) as i64);
                (0..q as i64)
                    .map(|a| {
                        if a == 0 {
                            return Complex64::new(len as f64, 0.0);
                        }
                        // e(−a·lo) · (1 − e(−a·len)) / (1 − e(−a))
                        chars.e_i64(-a * lo) * (Complex64::new(1.0, 0.0) - chars.e_i64(-a * len))
                            / (Complex64::new(1.0, 0.0) - chars.e_i64(-a))
                    })
                    .collect()
            })
            .collect();
        Ok(S1Table {
            q,
            factors,
            points: bx.num_points() as u64,
        })
    }

    pub fn get(&self, a: &[u64]) -> Complex64 {
        a.iter()
            .zip(&self.factors)
            .map(|(&ai, f)| f[(ai % self.q) as usize])
            .product()
    }
}

/// `S₁(a) = Σ_{b ∈ 𝖡 ∩ ℤ^n} e_q(−a·b)` via the geometric series on each axis.
pub fn s1(bx: &BoxZ, a: &[u64], q: u64) -> Result<CharSum> {
    if a.len() != bx.dim() {
        return Err(Error::DimensionMismatch {
            expected: bx.dim(),
            got: a.len(),
        });
    }
    let t = S1Table::new(bx, q)?;
    Ok(CharSum::new(t.get(a), t.points, q))
}

// ---------------------------------------------------------------------------
// S₂ and Σ_q

/// `X(F_q) ⊂ F_q^n` as residue vectors, in lexicographic order.
pub fn affine_points(inst: &Instance, q: u64, budget: u64) -> Result<Vec<Vec<u64>>> {
    require_prime(q)?;
    let n = inst.n();
    check_budget((q as u128).pow(n as u32), budget)?;
    let polys: Vec<ModPoly> = inst.polys().iter().map(|p| p.reduce_mod(q)).collect();
    let parts: Vec<Vec<Vec<u64>>> = (0..q)
        .into_par_iter()
        .map(|x0| {
            let mut out = Vec::new();
            let mut x = vec![0u64; n];
            x[0] = x0;
            loop {
                if polys.iter().all(|p| p.eval_u64(&x) == 0) {
                    out.push(x.clone());
                }
                let mut i = n;
                loop {
                    if i == 1 {
                        return out;
                    }
                    i -= 1;
                    if x[i] + 1 < q {
                        x[i] += 1;
                        break;
                    }
                    x[i] = 0;
                }
            }
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

fn dot_mod(a: &[u64], x: &[u64], q: u64) -> u64 {
    a.iter().zip(x).fold(0u64, |acc, (ai, xi)| (acc + ai * xi) % q)
}

fn sum_over_points(points: &[Vec<u64>], a: &[u64], chars: &CharTable) -> Complex64 {
    let q = chars.q();
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for x in points {
        let e = chars.e(dot_mod(a, x, q));
        re.add(e.re);
        im.add(e.im);
    }
    Complex64::new(re.value(), im.value())
}

/// `S₂(a) = Σ_{x ∈ X(F_q)} e_q(a·x)`.
pub fn s2(inst: &Instance, a: &[u64], q: u64, budget: u64) -> Result<CharSum> {
    if a.len() != inst.n() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            got: a.len(),
        });
    }
    let pts = affine_points(inst, q, budget)?;
    let v = sum_over_points(&pts, a, &CharTable::new(q));
    Ok(CharSum::new(v, pts.len() as u64, q))
}

/// `Σ_q(a)`; the same sum over `X_q`.
pub fn sigma_q(inst: &Instance, a: &[u64], q: u64, budget: u64) -> Result<CharSum> {
    s2(inst, a, q, budget)
}

/// `S₂(a)` for every `a ∈ F_q^n` by a separable DFT of the indicator of
/// `X(F_q)`. Index `a` as `Σ a_i q^{n−1−i}`.
pub fn s2_table(points: &[Vec<u64>], n: usize, q: u64) -> Vec<Complex64> {
    let chars = CharTable::new(q);
    let qs = q as usize;
    let size = qs.pow(n as u32);
    let mut data = vec![Complex64::new(0.0, 0.0); size];
    for x in points {
        let idx = x.iter().fold(0usize, |acc, &v| acc * qs + v as usize);
        data[idx] += Complex64::new(1.0, 0.0);
    }
    for axis in 0..n {
        let stride = qs.pow((n - 1 - axis) as u32);
        let block = stride * qs;
        data.par_chunks_mut(block).for_each(|chunk| {
            let mut line = vec![Complex64::new(0.0, 0.0); qs];
            for offset in 0..stride {
                for (a, slot) in line.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for x in 0..qs {
                        let v = chunk[offset + x * stride];
                        if v.re != 0.0 || v.im != 0.0 {
                            acc += v * chars.e((a * x) as u64);
                        }
                    }
                    *slot = acc;
                }
                for (a, v) in line.iter().enumerate() {
                    chunk[offset + a * stride] = *v;
                }
            }
        });
    }
    data
}

fn index_to_vec(mut idx: u64, n: usize, q: u64) -> Vec<u64> {
    let mut a = vec![0u64; n];
    for slot in a.iter_mut().rev() {
        *slot = idx % q;
        idx /= q;
    }
    a
}

// ---------------------------------------------------------------------------
// Fourier inversion

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierOptions {
    pub budget: u64,
    /// Largest `q^n` summed in full; beyond this `a` is sampled.
    pub full_cap: u64,
    pub samples: u64,
    pub seed: u64,
}

impl Default for FourierOptions {
    fn default() -> Self {
        FourierOptions {
            budget: crate::DEFAULT_BUDGET,
            full_cap: 10_000_000,
            samples: 4096,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierCheck {
    pub q: u64,
    pub lhs: u64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub abs_err: f64,
    /// Number of `a` summed.
    pub terms: u64,
    pub sampled: bool,
    /// Standard error of the sampled estimate.
    pub stderr: Option<f64>,
}

impl FourierCheck {
    /// Exact agreement within `tol` in full mode; within four standard
    /// errors plus `tol` in sampled mode.
    pub fn holds(&self, tol: f64) -> bool {
        match self.stderr {
            Some(se) => self.abs_err <= 4.0 * se + tol,
            None => self.abs_err < tol && self.rhs_im.abs() < tol,
        }
    }
}

/// `N(X, 𝖡, q)` against `q^{−n} Σ_{a ∈ F_q^n} S₁(a) S₂(a)`.
pub fn fourier_inversion_check(
    inst: &Instance,
    bx: &BoxZ,
    q: u64,
    opts: &FourierOptions,
) -> Result<FourierCheck> {
    let n = inst.n();
    let lhs = count_box_mod(inst, bx, q, opts.budget)?;
    let t1 = S1Table::new(bx, q)?;
    let pts = affine_points(inst, q, opts.budget)?;
    let total = (q as u128).pow(n as u32);
    let norm = (q as f64).powi(n as i32);
    if total <= opts.full_cap as u128 {
        let t2 = s2_table(&pts, n, q);
        let chunk = (q as usize).max(1);
        let parts: Vec<(CompensatedSum, CompensatedSum)> = t2
            .par_chunks(chunk)
            .enumerate()
            .map(|(ci, block)| {
                let mut re = CompensatedSum::new();
                let mut im = CompensatedSum::new();
                for (j, s2v) in block.iter().enumerate() {
                    let a = index_to_vec((ci * chunk + j) as u64, n, q);
                    let v = t1.get(&a) * s2v;
                    re.add(v.re);
                    im.add(v.im);
                }
                (re, im)
            })
            .collect();
        let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
        for (a, b) in parts {
            re = re.merge(a);
            im = im.merge(b);
        }
        let rhs_re = re.value() / norm;
        let rhs_im = im.value() / norm;
        return Ok(FourierCheck {
            q,
            lhs,
            rhs_re,
            rhs_im,
            abs_err: (lhs as f64 - rhs_re).abs(),
            terms: total as u64,
            sampled: false,
            stderr: None,
        });
    }
    // a = 0 exactly, the rest estimated from uniform samples of a ≠ 0.
    let chars = CharTable::new(q);
    let zero = vec![0u64; n];
    let head = t1.get(&zero) * Complex64::new(pts.len() as f64, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ q);
    let samples: Vec<Vec<u64>> = (0..opts.samples.max(2))
        .map(|_| loop {
            let a: Vec<u64> = (0..n).map(|_| rng.gen_range(0..q)).collect();
            if a.iter().any(|&v| v != 0) {
                break a;
            }
        })
        .collect();
    let vals: Vec<Complex64> = samples
        .par_iter()
        .map(|a| t1.get(a) * sum_over_points(&pts, a, &chars))
        .collect();
    let k = vals.len() as f64;
    let mean_re = vals.iter().map(|v| v.re).sum::<f64>() / k;
    let mean_im = vals.iter().map(|v| v.im).sum::<f64>() / k;
    let var_re = vals.iter().map(|v| (v.re - mean_re).powi(2)).sum::<f64>() / (k - 1.0);
    let rest = total as f64 - 1.0;
    let rhs_re = (head.re + rest * mean_re) / norm;
    let rhs_im = (head.im + rest * mean_im) / norm;
    let stderr = rest * (var_re / k).sqrt() / norm;
    Ok(FourierCheck {
        q,
        lhs,
        rhs_re,
        rhs_im,
        abs_err: (lhs as f64 - rhs_re).abs(),
        terms: vals.len() as u64 + 1,
        sampled: true,
        stderr: Some(stderr),
    })
}

// ---------------------------------------------------------------------------
// V-subspace identity

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VSubspaceCheck {
    pub q: u64,
    pub lhs: f64,
    pub lhs_im: f64,
    pub count_x: u64,
    pub n_lambda: u64,
    pub rhs: u64,
    pub abs_err: f64,
}

/// With `X` cut out by the `f_i` and the linear forms `L_1, …, L_{s+1}`, and
/// `V` the span of the `L_i` mod `q`:
/// `q^{−(s+1)} Σ_{a ∈ V} S₁(a) S₂(a) = #X(F_q) · N(Λ, 𝖡, q)`.
pub fn v_subspace_identity(
    inst: &Instance,
    linear: &[IntPoly],
    bx: &BoxZ,
    q: u64,
    budget: u64,
) -> Result<VSubspaceCheck> {
    require_prime(q)?;
    let n = inst.n();
    if linear.is_empty() {
        return Err(Error::InvalidInput("need at least one linear form".into()));
    }
    let coeffs = linear_coeffs(linear, q)?;
    let ctx = FieldCtx::prime(q)?;
    let mut rows: Vec<Vec<FieldElem>> = coeffs
        .iter()
        .map(|c| c.iter().map(|&v| ctx.from_u64(v)).collect())
        .collect();
    if ctx.rank(&mut rows) != linear.len() {
        return Err(Error::InvalidInput(format!(
            "the linear forms are dependent modulo {q}"
        )));
    }
    let x = inst.with_extra(linear)?;
    let pts = affine_points(&x, q, budget)?;
    let lambda = Instance::new(n, linear.to_vec())?;
    let n_lambda = count_box_mod(&lambda, bx, q, budget)?;
    let t1 = S1Table::new(bx, q)?;
    let chars = CharTable::new(q);
    let k = linear.len();
    check_budget((q as u128).pow(k as u32), budget)?;
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for idx in 0..q.pow(k as u32) {
        let c = index_to_vec(idx, k, q);
        let a: Vec<u64> = (0..n)
            .map(|j| c.iter().zip(&coeffs).fold(0u64, |acc, (ci, l)| (acc + ci * l[j]) % q))
            .collect();
        let v = t1.get(&a) * sum_over_points(&pts, &a, &chars);
        re.add(v.re);
        im.add(v.im);
    }
    let scale = (q as f64).powi(k as i32);
    let lhs = re.value() / scale;
    let rhs = pts.len() as u64 * n_lambda;
    Ok(VSubspaceCheck {
        q,
        lhs,
        lhs_im: im.value() / scale,
        count_x: pts.len() as u64,
        n_lambda,
        rhs,
        abs_err: (lhs - rhs as f64).abs(),
    })
}

// ---------------------------------------------------------------------------
// Katz bound

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatzRow {
    pub a: Vec<u64>,
    pub abs_sum: f64,
    pub delta: i32,
    pub ratio: f64,
    /// `δ(a) > 0`, outside what the nonsingular setting predicts.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KatzReport {
    pub q: u64,
    pub n: usize,
    pub r: usize,
    pub rows: Vec<KatzRow>,
    pub max_ratio: f64,
}

/// `count` distinct nonzero vectors of `F_q^n`, deterministic in `seed`.
pub fn sample_nonzero(n: usize, q: u64, count: usize, seed: u64) -> Vec<Vec<u64>> {
    let total = (q as u128).pow(n as u32) - 1;
    let count = (count as u128).min(total) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (q << 17) ^ n as u64);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a: Vec<u64> = (0..n).map(|_| rng.gen_range(0..q)).collect();
        if a.iter().all(|&v| v == 0) || !seen.insert(a.clone()) {
            continue;
        }
        out.push(a);
    }
    out
}

/// `|Σ_q(a)| / q^{(n−r+1+δ(a))/2}` with `δ(a) = dim Sing(Z_q ∩ H_a)`.
pub fn katz_bound_report(
    inst: &Instance,
    q: u64,
    a_sample: &[Vec<u64>],
    opts: &DimensionOptions,
    budget: u64,
) -> Result<KatzReport> {
    let (n, r) = (inst.n(), inst.r());
    if inst.leading_forms().iter().any(|f| f.degree().unwrap_or(0) < 2) {
        return Err(Error::Hypothesis("leading forms must have degree ≥ 2".into()));
    }
    let rep = variety::analyze(n, inst.leading_forms(), q, opts)?;
    if !rep.is_good() {
        return Err(Error::Hypothesis(format!(
            "Z_{q} is not a nonsingular complete intersection: {}",
            rep.defect().unwrap_or_default()
        )));
    }
    let ctx = FieldCtx::prime(q)?;
    let pts = affine_points(inst, q, budget)?;
    let chars = CharTable::new(q);
    let mut delta_cache: BTreeMap<Vec<u32>, i32> = BTreeMap::new();
    let mut rows = Vec::with_capacity(a_sample.len());
    for a in a_sample {
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.len(),
            });
        }
        let a: Vec<u64> = a.iter().map(|v| v % q).collect();
        if a.iter().all(|&v| v == 0) {
            return Err(Error::InvalidInput("a = 0 is the main term, not a Katz sum".into()));
        }
        let elems: Vec<FieldElem> = a.iter().map(|&v| ctx.from_u64(v)).collect();
        let key = ProjPoint::normalize(&ctx, &elems).expect("a ≠ 0").indices();
        let delta = match delta_cache.get(&key) {
            Some(&d) => d,
            None => {
                let coeffs: Vec<i64> = a.iter().map(|&v| v as i64).collect();
                let mut sec = inst.leading_forms().to_vec();
                sec.push(IntPoly::linear(&coeffs, 0));
                let z = variety::dimension(n, &sec, q, opts)?.dim;
                let d = if z < 0 {
                    -1
                } else {
                    variety::singular_dimension(n, &sec, q, opts)?.dim.min(z)
                };
                delta_cache.insert(key, d);
                d
            }
        };
        let v = sum_over_points(&pts, &a, &chars);
        let abs_sum = v.norm();
        let expo = (n as f64 - r as f64 + 1.0 + delta as f64) / 2.0;
        rows.push(KatzRow {
            a,
            abs_sum,
            delta,
            ratio: abs_sum / (q as f64).powf(expo),
            flagged: delta > 0,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(KatzReport {
        q,
        n,
        r,
        rows,
        max_ratio,
    })
}

/// Columns: `a` (semicolon-joined), `abs_sum`, `delta`, `ratio`.
pub fn write_katz_csv<W: Write>(report: &KatzReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "abs_sum", "delta", "ratio"])?;
    for row in &report.rows {
        let a: Vec<String> = row.a.iter().map(u64::to_string).collect();
        w.write_record([
            a.join(";"),
            format!("{}", crate::util::round9(row.abs_sum)),
            row.delta.to_string(),
            format!("{}", crate::util::round9(row.ratio)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn e(q: u64, a: i64) -> Complex64 {
        Complex64::from_polar(1.0, TAU * a.rem_euclid(q as i64) as f64 / q as f64)
    }

    fn brute_s1(bx: &BoxZ, a: &[u64], q: u64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        bx.bounds().for_each(|b| {
            let dot: i64 = a.iter().zip(b).map(|(&ai, &bi)| ai as i64 * bi).sum();
            acc += e(q, -dot);
        });
        acc
    }

    #[test]
    fn s1_closed_form() {
        let bx = BoxZ::new(vec![1], vec![1]).unwrap();
        let v = s1(&bx, &[1], 7).unwrap().value();
        let expect = Complex64::new(1.0, 0.0) + e(7, -1) + e(7, -2);
        assert!((v - expect).norm() < 1e-12);
        let bx3 = BoxZ::new(vec![1, -2, 0], vec![2, 1, 3]).unwrap();
        assert_eq!(s1(&bx3, &[0, 0, 0], 11).unwrap().re, 105.0);
        for a in [[1u64, 2, 3], [10, 0, 5], [4, 4, 4]] {
            let v = s1(&bx3, &a, 11).unwrap().value();
            assert!((v - brute_s1(&bx3, &a, 11)).norm() < 1e-9 * 105.0);
        }
    }

    #[test]
    fn parseval() {
        let bx = BoxZ::new(vec![0, 1], vec![2, 3]).unwrap();
        let q = 13;
        let t = S1Table::new(&bx, q).unwrap();
        let mut s = 0.0;
        for a in 0..q {
            for b in 0..q {
                s += t.get(&[a, b]).norm_sqr();
            }
        }
        let pts = bx.num_points() as f64;
        assert!((s / (q * q) as f64 - pts).abs() < 1e-6 * pts);
    }

    #[test]
    fn s2_values() {
        let f = Instance::parse(2, &["x1^3 + x2^3"]).unwrap();
        let zero = s2(&f, &[0, 0], 7, u64::MAX).unwrap();
        assert_eq!((zero.re, zero.terms), (19.0, 19));
        let pts = affine_points(&f, 7, u64::MAX).unwrap();
        assert_eq!(pts.len(), 19);
        let mut expect = Complex64::new(0.0, 0.0);
        for x in &pts {
            expect += e(7, (x[0] + x[1]) as i64);
        }
        let v = s2(&f, &[1, 1], 7, u64::MAX).unwrap();
        assert!((v.value() - expect).norm() < 1e-12);
        assert!(v.is_bounded());
        let empty = Instance::parse(1, &["x1", "x1 - 1"]).unwrap();
        assert_eq!(s2(&empty, &[3], 7, u64::MAX).unwrap().abs(), 0.0);
        // conjugate symmetry
        let w = s2(&f, &[6, 6], 7, u64::MAX).unwrap();
        assert!((w.value() - v.value().conj()).norm() < 1e-12);
    }

    #[test]
    fn dft_table_matches_direct_sums() {
        let f = Instance::parse(3, &["x1^2 + x2*x3 - 1"]).unwrap();
        let q = 5;
        let pts = affine_points(&f, q, u64::MAX).unwrap();
        let t = s2_table(&pts, 3, q);
        let chars = CharTable::new(q);
        for idx in [0u64, 1, 7, 31, 124] {
            let a = index_to_vec(idx, 3, q);
            let direct = sum_over_points(&pts, &a, &chars);
            assert!((t[idx as usize] - direct).norm() < 1e-9, "a = {a:?}");
        }
    }

    #[test]
    fn one_variable_points() {
        let f = Instance::parse(1, &["x1^2 - 1"]).unwrap();
        assert_eq!(affine_points(&f, 7, u64::MAX).unwrap(), vec![vec![1], vec![6]]);
    }

    #[test]
    fn fourier_examples() {
        let f = Instance::parse(2, &["x1^3 + x2^3"]).unwrap();
        let bx = BoxZ::symmetric(2, 1).unwrap();
        let c = fourier_inversion_check(&f, &bx, 7, &FourierOptions::default()).unwrap();
        assert_eq!(c.lhs, 3);
        assert!(c.holds(1e-6), "{c:?}");
        let a = Instance::affine_space(3).unwrap();
        let bx3 = BoxZ::symmetric(3, 2).unwrap();
        let c = fourier_inversion_check(&a, &bx3, 11, &FourierOptions::default()).unwrap();
        assert_eq!(c.lhs, 125);
        assert!(c.abs_err < 1e-9);
    }

    #[test]
    fn fourier_sampled_mode_is_flagged() {
        let f = Instance::parse(3, &["x1^2 + x2^2 - x3^2 - 2"]).unwrap();
        let bx = BoxZ::symmetric(3, 3).unwrap();
        let opts = FourierOptions {
            full_cap: 100,
            samples: 3000,
            ..FourierOptions::default()
        };
        let c = fourier_inversion_check(&f, &bx, 13, &opts).unwrap();
        assert!(c.sampled);
        assert!(c.holds(1e-6), "{c:?}");
    }

    #[test]
    fn v_subspace_example() {
        let f = Instance::parse(2, &["x1^3 - 1"]).unwrap();
        let l = vec![IntPoly::parse(2, "x2").unwrap()];
        let bx = BoxZ::new(vec![1, 1], vec![1, 1]).unwrap();
        let c = v_subspace_identity(&f, &l, &bx, 7, u64::MAX).unwrap();
        assert_eq!((c.count_x, c.n_lambda, c.rhs), (3, 3, 9));
        assert!((c.lhs - 9.0).abs() < 1e-9);
        let dep = vec![IntPoly::parse(2, "x2").unwrap(), IntPoly::parse(2, "8*x2").unwrap()];
        assert!(v_subspace_identity(&f, &dep, &bx, 7, u64::MAX).is_err());
        // s + 1 = n: X is finite and V is everything.
        let full = vec![IntPoly::parse(2, "x1 - x2").unwrap(), IntPoly::parse(2, "x2").unwrap()];
        let c = v_subspace_identity(&f, &full, &bx, 7, u64::MAX).unwrap();
        assert_eq!(c.count_x, 0);
        assert!(c.abs_err < 1e-9);
    }

    #[test]
    fn katz_table() {
        let f = Instance::diagonal(&[1, 1, 1, 1], 3).unwrap();
        let opts = DimensionOptions::default();
        let a = vec![vec![1, 0, 0, 0], vec![1, 2, 3, 4]];
        let rep = katz_bound_report(&f, 7, &a, &opts, u64::MAX).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for row in &rep.rows {
            assert!(row.delta <= 0 && row.ratio.is_finite());
        }
        assert!(katz_bound_report(&f, 7, &[vec![0, 0, 0, 0]], &opts, u64::MAX).is_err());
        let mut buf = Vec::new();
        write_katz_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("a,abs_sum,delta,ratio\n1;0;0;0,"));
    }

    #[test]
    fn samples_are_distinct_and_deterministic() {
        let a = sample_nonzero(3, 5, 50, 9);
        assert_eq!(a, sample_nonzero(3, 5, 50, 9));
        let set: std::collections::BTreeSet<_> = a.iter().collect();
        assert_eq!(set.len(), 50);
        assert_eq!(sample_nonzero(1, 3, 10, 0).len(), 2);
    }
}
