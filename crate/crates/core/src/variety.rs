//! Geometry over finite fields by exhaustive enumeration.
//!
//! Point counts, singular loci via the Jacobian rank test, dimension
//! estimates, the incidence strata `S`, `S_y`, `T_s` attached to a system of
//! forms, and the searches for good hyperplane sections and good primes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ff::{
    affine_chunks, affine_size, check_budget, is_prime, next_prime, par_map_chunks,
    projective_chunks, projective_size, FieldCtx, FieldElem, ProjPoint, MAX_EXTENSION_SIZE,
};
use crate::poly::{IntPoly, ModPoly};
use crate::util::sha256_hex;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Instances

/// A system `f_1, …, f_r ∈ ℤ[x_1, …, x_n]` together with its leading forms.
///
/// `r = 0` is allowed and describes the whole affine space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceJson", into = "InstanceJson")]
pub struct Instance {
    n: usize,
    polys: Vec<IntPoly>,
    leading_forms: Vec<IntPoly>,
}

pub type PolySystem = Instance;

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    r: usize,
    polys: Vec<IntPoly>,
}

impl TryFrom<InstanceJson> for Instance {
    type Error = Error;
    fn try_from(j: InstanceJson) -> Result<Self> {
        if j.r != j.polys.len() {
            return Err(Error::InvalidInput(format!(
                "instance declares r = {} but lists {} polynomials",
                j.r,
                j.polys.len()
            )));
        }
        Instance::new(j.n, j.polys)
    }
}

impl From<Instance> for InstanceJson {
    fn from(i: Instance) -> Self {
        InstanceJson {
            n: i.n,
            r: i.polys.len(),
            polys: i.polys,
        }
    }
}

impl Instance {
    pub fn new(n: usize, polys: Vec<IntPoly>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("an instance needs n ≥ 1 variables".into()));
        }
        for p in &polys {
            if p.n_vars() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.n_vars(),
                });
            }
        }
        let leading_forms = polys
            .iter()
            .map(IntPoly::leading_form)
            .collect::<Result<Vec<_>>>()?;
        Ok(Instance {
            n,
            polys,
            leading_forms,
        })
    }

    /// Parses each polynomial with [`IntPoly::parse`].
    pub fn parse(n: usize, polys: &[&str]) -> Result<Self> {
        let polys = polys
            .iter()
            .map(|s| IntPoly::parse(n, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, polys)
    }

    /// `Σ c_i x_i^d`.
    pub fn diagonal(coeffs: &[i64], d: u32) -> Result<Self> {
        let n = coeffs.len();
        let terms = coeffs.iter().enumerate().map(|(i, &c)| {
            let mut e = vec![0; n];
            e[i] = d;
            (e, c)
        });
        Self::new(n, vec![IntPoly::from_terms(n, terms)?])
    }

    /// The whole affine space `A^n` (no equations).
    pub fn affine_space(n: usize) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.polys.len()
    }

    pub fn polys(&self) -> &[IntPoly] {
        &self.polys
    }

    pub fn leading_forms(&self) -> &[IntPoly] {
        &self.leading_forms
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.polys.iter().map(|p| p.degree().unwrap_or(0)).collect()
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Homogenizations `X₀^{d_i} f_i(X/X₀)` in `n + 1` variables.
    pub fn homogenized(&self) -> Vec<IntPoly> {
        self.polys.iter().map(IntPoly::homogenize).collect()
    }

    /// Appends equations (e.g. linear forms) to the system.
    pub fn with_extra(&self, extra: &[IntPoly]) -> Result<Self> {
        let mut polys = self.polys.clone();
        polys.extend_from_slice(extra);
        Self::new(self.n, polys)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().expect("instances serialize").as_bytes())
    }
}

impl std::fmt::Display for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.polys.iter().map(|p| format!("{p} = 0")).collect();
        if parts.is_empty() {
            write!(f, "A^{}", self.n)
        } else {
            write!(f, "{}", parts.join(", "))
        }
    }
}

// ---------------------------------------------------------------------------
// Point sets

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Affine,
    Projective,
}

fn check_forms(n: usize, forms: &[IntPoly]) -> Result<()> {
    for f in forms {
        if f.n_vars() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.n_vars(),
            });
        }
    }
    Ok(())
}

fn check_homogeneous(forms: &[IntPoly]) -> Result<()> {
    if let Some(f) = forms.iter().find(|f| !f.is_homogeneous()) {
        return Err(Error::Precondition(format!(
            "projective sets need homogeneous forms, got {f}"
        )));
    }
    Ok(())
}

/// A Zariski-closed set of `ℙ^{n−1}` (or `A^n`) compiled modulo `q`: the
/// common zeros of `forms`, optionally restricted to the points where the
/// Jacobian of the forms has rank `< r`.
#[derive(Clone, Debug)]
struct ClosedSet {
    forms: Vec<ModPoly>,
    jacobian: Option<Vec<Vec<ModPoly>>>,
}

impl ClosedSet {
    fn zeros(forms: &[IntPoly], q: u64) -> Self {
        ClosedSet {
            forms: forms.iter().map(|f| f.reduce_mod(q)).collect(),
            jacobian: None,
        }
    }

    fn singular(forms: &[IntPoly], q: u64) -> Self {
        let jac = forms
            .iter()
            .map(|f| f.gradient().iter().map(|g| g.reduce_mod(q)).collect())
            .collect();
        ClosedSet {
            forms: forms.iter().map(|f| f.reduce_mod(q)).collect(),
            jacobian: Some(jac),
        }
    }

    #[inline]
    fn contains(&self, ctx: &FieldCtx, x: &[FieldElem], rows: &mut Vec<Vec<FieldElem>>) -> bool {
        if !self.forms.iter().all(|f| f.eval_field(ctx, x).is_zero()) {
            return false;
        }
        let Some(jac) = &self.jacobian else {
            return true;
        };
        let r = jac.len();
        if r == 0 {
            return false;
        }
        rows.clear();
        for row in jac {
            rows.push(row.iter().map(|g| g.eval_field(ctx, x)).collect());
        }
        ctx.rank(rows) < r
    }

    fn count_projective(&self, ctx: &FieldCtx, m: usize, budget: u64) -> Result<u64> {
        check_budget(projective_size(ctx, m), budget)?;
        let chunks = projective_chunks(ctx, m);
        let parts = par_map_chunks(&chunks, |c| {
            let mut rows = Vec::new();
            let mut n = 0u64;
            c.for_each(ctx, |x| {
                if self.contains(ctx, x, &mut rows) {
                    n += 1;
                }
            });
            n
        });
        Ok(parts.into_iter().sum())
    }

    fn collect_projective(&self, ctx: &FieldCtx, m: usize, budget: u64) -> Result<Vec<ProjPoint>> {
        check_budget(projective_size(ctx, m), budget)?;
        let chunks = projective_chunks(ctx, m);
        let parts = par_map_chunks(&chunks, |c| {
            let mut rows = Vec::new();
            let mut pts = Vec::new();
            c.for_each(ctx, |x| {
                if self.contains(ctx, x, &mut rows) {
                    pts.push(ProjPoint::normalize(ctx, x).expect("chunk points are nonzero"));
                }
            });
            pts
        });
        Ok(parts.into_iter().flatten().collect())
    }

    /// Whether the intersection with `d` random hyperplanes over `ctx` has a
    /// rational point. The linear section is parametrized by a kernel basis,
    /// so only `ℙ^{m−d−1}` is enumerated.
    fn slice_nonempty(&self, ctx: &FieldCtx, m: usize, d: usize, rng: &mut ChaCha8Rng) -> bool {
        if d >= m {
            return false;
        }
        let basis = loop {
            let rows: Vec<Vec<FieldElem>> = (0..d)
                .map(|_| {
                    (0..m)
                        .map(|_| FieldElem::from_index(rng.gen_range(0..ctx.size()) as u32))
                        .collect()
                })
                .collect();
            let ker = ctx.kernel(&rows, m);
            if ker.len() == m - d {
                break ker;
            }
        };
        let t = basis.len();
        let mut rows = Vec::new();
        let mut found = false;
        let mut x = vec![ctx.zero(); m];
        for chunk in projective_chunks(ctx, t) {
            chunk.for_each(ctx, |c| {
                if found {
                    return;
                }
                for v in x.iter_mut() {
                    *v = ctx.zero();
                }
                for (cj, bj) in c.iter().zip(&basis) {
                    if cj.is_zero() {
                        continue;
                    }
                    for (xi, bi) in x.iter_mut().zip(bj) {
                        *xi = ctx.add(*xi, ctx.mul(*cj, *bi));
                    }
                }
                if self.contains(ctx, &x, &mut rows) {
                    found = true;
                }
            });
            if found {
                break;
            }
        }
        found
    }
}

/// Number of common zeros of `forms` in `A^n(F_{q^k})` or `ℙ^{n−1}(F_{q^k})`.
pub fn count_points(
    n: usize,
    forms: &[IntPoly],
    ctx: &FieldCtx,
    mode: Mode,
    budget: u64,
) -> Result<u64> {
    check_forms(n, forms)?;
    let set = ClosedSet::zeros(forms, ctx.q());
    match mode {
        Mode::Projective => {
            check_homogeneous(forms)?;
            set.count_projective(ctx, n, budget)
        }
        Mode::Affine => {
            check_budget(affine_size(ctx, n), budget)?;
            let chunks = affine_chunks(ctx, n);
            let parts = par_map_chunks(&chunks, |c| {
                let mut rows = Vec::new();
                let mut k = 0u64;
                c.for_each(ctx, |x| {
                    if set.contains(ctx, x, &mut rows) {
                        k += 1;
                    }
                });
                k
            });
            Ok(parts.into_iter().sum())
        }
    }
}

/// Common zeros of homogeneous `forms` in `ℙ^{n−1}(F_{q^k})`.
pub fn projective_points(
    n: usize,
    forms: &[IntPoly],
    ctx: &FieldCtx,
    budget: u64,
) -> Result<Vec<ProjPoint>> {
    check_forms(n, forms)?;
    check_homogeneous(forms)?;
    ClosedSet::zeros(forms, ctx.q()).collect_projective(ctx, n, budget)
}

/// Points of `Z = V(forms) ⊂ ℙ^{n−1}(F_{q^k})` where the `r × n` Jacobian
/// has rank `< r`. This is `Sing Z` when `Z` is a complete intersection of
/// codimension `r`.
pub fn singular_locus(
    n: usize,
    forms: &[IntPoly],
    ctx: &FieldCtx,
    budget: u64,
) -> Result<Vec<ProjPoint>> {
    check_forms(n, forms)?;
    check_homogeneous(forms)?;
    ClosedSet::singular(forms, ctx.q()).collect_projective(ctx, n, budget)
}

// ---------------------------------------------------------------------------
// Dimension

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionOptions {
    /// Cap on projective points per count; decides the largest usable `k`.
    pub budget: u64,
    pub max_k: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for DimensionOptions {
    fn default() -> Self {
        DimensionOptions {
            budget: 2_000_000,
            max_k: 3,
            trials: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub dim: i32,
    /// Extension degree used for the growth estimate and slicing.
    pub k: usize,
    /// `#V(F_{q^k})` for every `k` tried.
    pub counts: BTreeMap<usize, u64>,
}

fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h = (h ^ p).wrapping_mul(0x1000_0000_01B3).rotate_left(29);
    }
    h
}

/// Extension degrees whose projective space fits the budget.
fn affordable_ks(q: u64, m: usize, opts: &DimensionOptions) -> Vec<usize> {
    (1..=opts.max_k.max(1))
        .filter(|&k| {
            let size = (q as u128).checked_pow(k as u32);
            match size {
                Some(s) if k == 1 || s <= MAX_EXTENSION_SIZE as u128 => {
                    let pts: u128 = (0..m as u32).map(|i| s.saturating_pow(i)).sum();
                    pts <= opts.budget as u128
                }
                _ => false,
            }
        })
        .collect()
}

fn estimate(set: &ClosedSet, m: usize, q: u64, opts: &DimensionOptions) -> Result<DimensionEstimate> {
    let ks = affordable_ks(q, m, opts);
    if ks.is_empty() {
        let ctx = FieldCtx::prime(q)?;
        return Err(Error::BudgetExceeded {
            needed: projective_size(&ctx, m),
            budget: opts.budget,
        });
    }
    let mut counts = BTreeMap::new();
    let mut ctxs = BTreeMap::new();
    for &k in &ks {
        let ctx = FieldCtx::new(q, k)?;
        counts.insert(k, set.count_projective(&ctx, m, opts.budget)?);
        ctxs.insert(k, ctx);
    }
    let Some((&k, &count)) = counts.iter().rev().find(|(_, &c)| c > 0) else {
        return Ok(DimensionEstimate {
            dim: -1,
            k: *ks.last().unwrap(),
            counts,
        });
    };
    let growth = ((count as f64).ln() / (k as f64 * (q as f64).ln())).round() as i32;
    let growth = growth.clamp(0, m as i32 - 1);

    let ctx = &ctxs[&k];
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, &[q, k as u64, m as u64]));
    let trials = opts.trials.max(1);
    let d = growth as usize;
    // with no hyperplanes the slice is the whole set, known nonempty
    let hit_d = d == 0 || (0..trials).any(|_| set.slice_nonempty(ctx, m, d, &mut rng));
    let hits_above = (0..trials)
        .filter(|_| set.slice_nonempty(ctx, m, d + 1, &mut rng))
        .count();
    if !hit_d || 2 * hits_above > trials {
        return Err(Error::DimensionAmbiguous { growth });
    }
    Ok(DimensionEstimate {
        dim: growth,
        k,
        counts,
    })
}

/// Dimension of `V(forms) ⊂ ℙ^{n−1}` over `F̄_q` (−1 when empty), from the
/// growth of `#V(F_{q^k})` cross-checked by random linear slicing.
pub fn dimension(
    n: usize,
    forms: &[IntPoly],
    q: u64,
    opts: &DimensionOptions,
) -> Result<DimensionEstimate> {
    check_forms(n, forms)?;
    check_homogeneous(forms)?;
    estimate(&ClosedSet::zeros(forms, q), n, q, opts)
}

/// Dimension of the Jacobian-degenerate locus of `V(forms)`.
pub fn singular_dimension(
    n: usize,
    forms: &[IntPoly],
    q: u64,
    opts: &DimensionOptions,
) -> Result<DimensionEstimate> {
    check_forms(n, forms)?;
    check_homogeneous(forms)?;
    estimate(&ClosedSet::singular(forms, q), n, q, opts)
}

/// Dimension data of `Z_q = V(forms) ⊂ ℙ^{n−1}_{F_q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingReport {
    pub q: u64,
    pub n: usize,
    pub r: usize,
    pub k_list: Vec<usize>,
    pub seed: u64,
    pub is_complete_intersection_codim: bool,
    pub dim_z: i32,
    pub dim_sing: i32,
    pub point_counts: BTreeMap<usize, u64>,
    pub sing_counts: BTreeMap<usize, u64>,
}

impl SingReport {
    /// Nonsingular of the expected dimension `n − 1 − r`.
    pub fn is_good(&self) -> bool {
        self.is_complete_intersection_codim && self.dim_sing == -1
    }

    /// Short description of what is wrong, for error messages.
    pub fn defect(&self) -> Option<String> {
        if !self.is_complete_intersection_codim {
            return Some(format!(
                "dim Z = {} ≠ {}",
                self.dim_z,
                self.n as i32 - 1 - self.r as i32
            ));
        }
        (self.dim_sing != -1).then(|| format!("dim Sing Z = {}", self.dim_sing))
    }
}

pub fn analyze(n: usize, forms: &[IntPoly], q: u64, opts: &DimensionOptions) -> Result<SingReport> {
    let z = dimension(n, forms, q, opts)?;
    let (dim_sing, sing_counts) = if z.dim < 0 {
        (-1, BTreeMap::new())
    } else {
        let s = singular_dimension(n, forms, q, opts)?;
        if s.dim > z.dim {
            log::warn!("singular locus estimate {} exceeds dim Z = {}", s.dim, z.dim);
        }
        (s.dim.min(z.dim), s.counts)
    };
    Ok(SingReport {
        q,
        n,
        r: forms.len(),
        k_list: z.counts.keys().copied().collect(),
        seed: opts.seed,
        is_complete_intersection_codim: z.dim == n as i32 - 1 - forms.len() as i32,
        dim_z: z.dim,
        dim_sing,
        point_counts: z.counts,
        sing_counts,
    })
}

// ---------------------------------------------------------------------------
// Strata S, S_y, T_s

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrataReport {
    pub q: u64,
    pub n: usize,
    pub r: usize,
    pub k_list: Vec<usize>,
    /// `#S(F_{q^k})` as pairs in `ℙ^{n−1} × ℙ^{n−1}`.
    pub s_counts: BTreeMap<usize, u64>,
    pub dim_s: i32,
    /// `T_s(F_q)` for `s ≥ 0`, as normalized coordinate residues.
    pub t_points: BTreeMap<i32, Vec<Vec<u32>>>,
    /// `#T_s(F_{q^k})` for `s = −1, …, n − 1`.
    pub t_counts: BTreeMap<i32, BTreeMap<usize, u64>>,
    pub t_dims: BTreeMap<i32, i32>,
}

impl StrataReport {
    pub fn fiber_threshold(q_k: u64, s: i32) -> f64 {
        if s < 0 {
            return 0.0;
        }
        let size: f64 = (0..=s).map(|i| (q_k as f64).powi(i)).sum();
        size / 2.0
    }
}

/// Dimension from counts over `F_q` and `F_{q²}`: the slope of the growth
/// when both are positive, the absolute estimate otherwise.
pub fn growth_dimension(counts: &BTreeMap<usize, u64>, q: u64) -> i32 {
    let lq = (q as f64).ln();
    let c1 = counts.get(&1).copied().unwrap_or(0);
    let c2 = counts.get(&2).copied();
    match (c1, c2) {
        (0, None) | (0, Some(0)) => -1,
        (0, Some(c2)) => ((c2 as f64).ln() / (2.0 * lq)).round() as i32,
        (c1, Some(c2)) if c2 > 0 => ((c2 as f64 / c1 as f64).ln() / lq).round().max(0.0) as i32,
        (c1, _) => ((c1 as f64).ln() / lq).round() as i32,
    }
}

/// The fiber `S_x = {y : y·∇G_i(x) = 0, rank(∇²G_i(x)·y)_i < r}` over one x,
/// pushed into `hist` keyed by normalized `y`.
struct StrataKernel {
    grads: Vec<Vec<ModPoly>>,
    hessians: Vec<Vec<Vec<ModPoly>>>,
}

impl StrataKernel {
    fn new(forms: &[IntPoly], q: u64) -> Self {
        StrataKernel {
            grads: forms
                .iter()
                .map(|f| f.gradient().iter().map(|g| g.reduce_mod(q)).collect())
                .collect(),
            hessians: forms
                .iter()
                .map(|f| {
                    f.hessian()
                        .iter()
                        .map(|row| row.iter().map(|h| h.reduce_mod(q)).collect())
                        .collect()
                })
                .collect(),
        }
    }

    fn fiber(&self, ctx: &FieldCtx, n: usize, x: &[FieldElem], out: &mut Vec<Vec<FieldElem>>) {
        out.clear();
        let r = self.grads.len();
        let grads: Vec<Vec<FieldElem>> = self
            .grads
            .iter()
            .map(|g| g.iter().map(|p| p.eval_field(ctx, x)).collect())
            .collect();
        let hess: Vec<Vec<Vec<FieldElem>>> = self
            .hessians
            .iter()
            .map(|h| {
                h.iter()
                    .map(|row| row.iter().map(|p| p.eval_field(ctx, x)).collect())
                    .collect()
            })
            .collect();
        let mut rows = grads.clone();
        if r == 1 {
            // rank < 1 means H(x)·y = 0: the fiber is a linear space.
            rows.extend(hess[0].iter().cloned());
        }
        let basis = ctx.kernel(&rows, n);
        if basis.is_empty() {
            return;
        }
        let mut m_rows: Vec<Vec<FieldElem>> = Vec::with_capacity(r);
        for chunk in projective_chunks(ctx, basis.len()) {
            chunk.for_each(ctx, |c| {
                let mut y = vec![ctx.zero(); n];
                for (cj, bj) in c.iter().zip(&basis) {
                    if cj.is_zero() {
                        continue;
                    }
                    for (yi, bi) in y.iter_mut().zip(bj) {
                        *yi = ctx.add(*yi, ctx.mul(*cj, *bi));
                    }
                }
                if r > 1 {
                    m_rows.clear();
                    for h in &hess {
                        m_rows.push(
                            h.iter()
                                .map(|row| {
                                    row.iter()
                                        .zip(&y)
                                        .fold(ctx.zero(), |a, (hij, yj)| ctx.add(a, ctx.mul(*hij, *yj)))
                                })
                                .collect(),
                        );
                    }
                    if ctx.rank(&mut m_rows) >= r {
                        return;
                    }
                }
                out.push(y);
            });
        }
    }
}

/// Enumerates `S ⊂ ℙ^{n−1} × ℙ^{n−1}` over `F_q` (and `F_{q²}` when the
/// budget allows) and assembles `T_s = {y : dim S_y ≥ s}`, declaring
/// `dim S_y ≥ s` when `#S_y ≥ #ℙ^s / 2`.
pub fn strata_sets(n: usize, forms: &[IntPoly], q: u64, opts: &DimensionOptions) -> Result<StrataReport> {
    check_forms(n, forms)?;
    check_homogeneous(forms)?;
    let r = forms.len();
    if r == 0 {
        return Err(Error::Precondition("strata need at least one form".into()));
    }
    for f in forms {
        let d = f.degree().unwrap_or(0) as u64;
        if d % q == 0 {
            return Err(Error::Hypothesis(format!("q = {q} divides the degree {d} of {f}")));
        }
    }
    let rep = analyze(n, forms, q, opts)?;
    if !rep.is_good() {
        return Err(Error::Hypothesis(format!(
            "Z_{q} is not a nonsingular complete intersection of codimension {r}: {}",
            rep.defect().unwrap_or_default()
        )));
    }
    let kernel = StrataKernel::new(forms, q);
    let ks: Vec<usize> = affordable_ks(q, n, opts).into_iter().filter(|&k| k <= 2).collect();
    let mut s_counts = BTreeMap::new();
    let mut t_counts: BTreeMap<i32, BTreeMap<usize, u64>> = BTreeMap::new();
    let mut t_points = BTreeMap::new();
    for &k in &ks {
        let ctx = FieldCtx::new(q, k)?;
        let chunks = projective_chunks(&ctx, n);
        let parts = par_map_chunks(&chunks, |c| {
            let mut hist: HashMap<Vec<u32>, u64> = HashMap::new();
            let mut fib = Vec::new();
            c.for_each(&ctx, |x| {
                kernel.fiber(&ctx, n, x, &mut fib);
                for y in &fib {
                    let key = ProjPoint::normalize(&ctx, y).expect("fiber points are nonzero").indices();
                    *hist.entry(key).or_insert(0) += 1;
                }
            });
            hist
        });
        let mut hist: HashMap<Vec<u32>, u64> = HashMap::new();
        for part in parts {
            for (y, c) in part {
                *hist.entry(y).or_insert(0) += c;
            }
        }
        s_counts.insert(k, hist.values().sum());
        let total = projective_size(&ctx, n) as u64;
        t_counts.entry(-1).or_default().insert(k, total);
        for s in 0..n as i32 {
            let thr = StrataReport::fiber_threshold(ctx.size(), s);
            let mut pts: Vec<Vec<u32>> = hist
                .iter()
                .filter(|(_, &c)| c as f64 >= thr)
                .map(|(y, _)| y.clone())
                .collect();
            t_counts.entry(s).or_default().insert(k, pts.len() as u64);
            if k == 1 {
                pts.sort();
                t_points.insert(s, pts);
            }
        }
    }
    let dim_s = growth_dimension(&s_counts, q);
    let t_dims = t_counts
        .iter()
        .map(|(&s, c)| (s, growth_dimension(c, q)))
        .collect();
    Ok(StrataReport {
        q,
        n,
        r,
        k_list: ks,
        s_counts,
        dim_s,
        t_points,
        t_counts,
        t_dims,
    })
}

// ---------------------------------------------------------------------------
// Searches

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodHyperplane {
    pub coeffs: Vec<i64>,
    pub dim_section: i32,
    pub sing_section: i32,
}

impl GoodHyperplane {
    pub fn form(&self) -> IntPoly {
        IntPoly::linear(&self.coeffs, 0)
    }
}

/// Integer vectors of sup-norm exactly `h`, first nonzero entry positive,
/// in lexicographic order.
pub fn vectors_of_height(n: usize, h: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut v = vec![-h; n];
    loop {
        let first = v.iter().find(|&&c| c != 0).copied();
        if v.iter().any(|c| c.abs() == h) && first.is_some_and(|c| c > 0) {
            out.push(v.clone());
        }
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if v[i] < h {
                v[i] += 1;
                break;
            }
            v[i] = -h;
        }
    }
}

/// Searches integer linear forms `L` by height, then lexicographically, for
/// one whose section `Z ∩ {L = 0}` has dimension `dim Z − 1` and singular
/// dimension `s − 1`.
pub fn find_good_hyperplane(
    n: usize,
    forms: &[IntPoly],
    q: u64,
    height_bound: i64,
    opts: &DimensionOptions,
) -> Result<GoodHyperplane> {
    let base = analyze(n, forms, q, opts)?;
    if base.dim_sing < 0 {
        return Err(Error::Precondition(
            "Z_q is nonsingular; there is nothing to improve".into(),
        ));
    }
    if !base.is_complete_intersection_codim {
        return Err(Error::Hypothesis(format!(
            "Z_q is not of codimension {}: {}",
            forms.len(),
            base.defect().unwrap_or_default()
        )));
    }
    for h in 1..=height_bound {
        for a in vectors_of_height(n, h) {
            if a.iter().all(|&c| c.rem_euclid(q as i64) == 0) {
                continue;
            }
            let mut sec = forms.to_vec();
            sec.push(IntPoly::linear(&a, 0));
            let z = match dimension(n, &sec, q, opts) {
                Ok(z) => z.dim,
                Err(Error::DimensionAmbiguous { .. }) => continue,
                Err(e) => return Err(e),
            };
            if z != base.dim_z - 1 {
                continue;
            }
            let s = if z < 0 {
                -1
            } else {
                match singular_dimension(n, &sec, q, opts) {
                    Ok(s) => s.dim.min(z),
                    Err(Error::DimensionAmbiguous { .. }) => continue,
                    Err(e) => return Err(e),
                }
            };
            if s == base.dim_sing - 1 {
                return Ok(GoodHyperplane {
                    coeffs: a,
                    dim_section: z,
                    sing_section: s,
                });
            }
        }
    }
    Err(Error::NotFound(format!(
        "no linear form of height ≤ {height_bound} cuts the singular locus down (raise the height bound)"
    )))
}

/// Smallest prime `p ∈ [target, window_factor·target]` at which
/// `V(forms)` is nonsingular of dimension `n − 1 − r`.
pub fn find_good_prime(
    n: usize,
    forms: &[IntPoly],
    target: u64,
    window_factor: f64,
    opts: &DimensionOptions,
) -> Result<u64> {
    let hi = ((target as f64) * window_factor.max(1.0)).floor() as u64;
    let mut failures = Vec::new();
    let mut p = next_prime(target);
    while p <= hi.max(target) {
        match analyze(n, forms, p, opts) {
            Ok(rep) => match rep.defect() {
                None => return Ok(p),
                Some(d) => failures.push(format!("{p}: {d}")),
            },
            Err(e @ (Error::DimensionAmbiguous { .. } | Error::BudgetExceeded { .. })) => {
                failures.push(format!("{p}: {e}"))
            }
            Err(e) => return Err(e),
        }
        p = next_prime(p + 1);
    }
    Err(Error::NotFound(format!(
        "no good prime in [{target}, {hi}]; rejected: {}",
        if failures.is_empty() {
            "none tried".to_string()
        } else {
            failures.join("; ")
        }
    )))
}

/// Whether `forms` are nonsingular of the expected dimension at `q`.
pub fn is_good_prime(n: usize, forms: &[IntPoly], q: u64, opts: &DimensionOptions) -> Result<bool> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    match analyze(n, forms, q, opts) {
        Ok(rep) => Ok(rep.is_good()),
        Err(Error::DimensionAmbiguous { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Linear forms `L_i` as coefficient vectors reduced mod `q`; errors unless
/// each is homogeneous of degree 1.
pub fn linear_coeffs(forms: &[IntPoly], q: u64) -> Result<Vec<Vec<u64>>> {
    forms
        .iter()
        .map(|l| {
            if l.degree() != Some(1) || !l.is_homogeneous() {
                return Err(Error::InvalidInput(format!("{l} is not a linear form")));
            }
            let n = l.n_vars();
            let qb = BigInt::from(q);
            Ok((0..n)
                .map(|i| {
                    let mut e = vec![0; n];
                    e[i] = 1;
                    let c = l.coeff(&e);
                    let r: BigInt = ((c % &qb) + &qb) % &qb;
                    u64::try_from(r).expect("residue fits")
                })
                .collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, s: &str) -> IntPoly {
        IntPoly::parse(n, s).unwrap()
    }

    fn fermat(n: usize) -> Vec<IntPoly> {
        Instance::diagonal(&vec![1; n], 3).unwrap().polys().to_vec()
    }

    /// Direct scan: evaluate with exact integers on residue representatives.
    fn brute_projective(n: usize, forms: &[IntPoly], q: u64) -> u64 {
        let ctx = FieldCtx::prime(q).unwrap();
        crate::ff::enumerate_projective(&ctx, n, u64::MAX)
            .unwrap()
            .into_iter()
            .filter(|pt| {
                let x: Vec<i64> = pt.indices().iter().map(|&v| v as i64).collect();
                forms.iter().all(|f| {
                    let v = f.eval_i64(&x).unwrap();
                    (v % BigInt::from(q)) == BigInt::from(0)
                })
            })
            .count() as u64
    }

    #[test]
    fn quadric_point_count() {
        let f = p(4, "x1*x2 - x3*x4");
        let ctx = FieldCtx::prime(3).unwrap();
        assert_eq!(count_points(4, &[f.clone()], &ctx, Mode::Projective, u64::MAX).unwrap(), 16);
        assert_eq!(brute_projective(4, &[f], 3), 16);
    }

    #[test]
    fn affine_cubic_count_and_empty_system() {
        let ctx = FieldCtx::prime(7).unwrap();
        let f = p(2, "x1^3 + x2^3");
        assert_eq!(count_points(2, &[f], &ctx, Mode::Affine, u64::MAX).unwrap(), 19);
        assert_eq!(count_points(3, &[], &ctx, Mode::Affine, u64::MAX).unwrap(), 343);
        assert_eq!(count_points(3, &[], &ctx, Mode::Projective, u64::MAX).unwrap(), 57);
    }

    #[test]
    fn singular_loci() {
        let f7 = FieldCtx::prime(7).unwrap();
        assert!(singular_locus(4, &fermat(4), &f7, u64::MAX).unwrap().is_empty());
        let f3 = FieldCtx::prime(3).unwrap();
        let z = projective_points(4, &fermat(4), &f3, u64::MAX).unwrap();
        let sing = singular_locus(4, &fermat(4), &f3, u64::MAX).unwrap();
        assert_eq!(z, sing);
        assert!(!z.is_empty());
        let nodal = p(3, "x2^3 - x1*x3^2");
        let f5 = FieldCtx::prime(5).unwrap();
        let sing = singular_locus(3, &[nodal], &f5, u64::MAX).unwrap();
        assert_eq!(sing.len(), 1);
        assert_eq!(sing[0].indices(), vec![1, 0, 0]);
    }

    #[test]
    fn dimensions() {
        let opts = DimensionOptions::default();
        let quadric = p(4, "x1*x2 - x3*x4");
        assert_eq!(dimension(4, &[quadric], 5, &opts).unwrap().dim, 2);
        assert_eq!(dimension(3, &[p(3, "x1"), p(3, "x2"), p(3, "x3")], 5, &opts).unwrap().dim, -1);
        let cubic = p(5, "x1^3 + 2*x2^3 - x3*x4*x5 + x5^3");
        assert_eq!(dimension(5, &[cubic], 7, &opts).unwrap().dim, 3);
        // A point: the line x1 = x2 = 0 in ℙ², dimension 0.
        assert_eq!(dimension(3, &[p(3, "x1"), p(3, "x2")], 7, &opts).unwrap().dim, 0);
        // A conic with no F_q-points over F_3 still has points over F_9.
        let conic = p(3, "x1^2 + x2^2 + x3^2");
        assert_eq!(dimension(3, &[conic], 3, &opts).unwrap().dim, 1);
    }

    #[test]
    fn sing_report_of_fermat() {
        let opts = DimensionOptions::default();
        let good = analyze(4, &fermat(4), 7, &opts).unwrap();
        assert!(good.is_good());
        assert_eq!(good.dim_z, 2);
        let bad = analyze(4, &fermat(4), 3, &opts).unwrap();
        assert_eq!(bad.dim_sing, 2);
        assert!(!bad.is_good());
        let json = serde_json::to_string(&good).unwrap();
        assert!(json.contains("\"dim_sing\":-1"));
    }

    #[test]
    fn diagonal_cubic_strata() {
        let opts = DimensionOptions::default();
        let rep = strata_sets(4, &fermat(4), 7, &opts).unwrap();
        let coord: Vec<Vec<u32>> = (0..4)
            .map(|i| (0..4).map(|j| u32::from(i == j)).collect())
            .collect();
        let mut expect = coord.clone();
        expect.sort();
        assert_eq!(rep.t_points[&2], expect);
        assert!(rep.t_points[&3].is_empty());
        // y = (1:1:1:1) has empty fiber.
        assert!(!rep.t_points[&0].contains(&vec![1, 1, 1, 1]));
        assert!(rep.t_points[&0].contains(&vec![0, 1, 1, 1]));
        assert_eq!(rep.s_counts[&1], 660);
        assert_eq!(rep.dim_s, 2);
        for (&s, &d) in &rep.t_dims {
            assert!(d <= 4 - s - 2, "dim T_{s} = {d}");
        }
    }

    #[test]
    fn strata_hypotheses() {
        let opts = DimensionOptions::default();
        assert!(matches!(strata_sets(4, &fermat(4), 3, &opts), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn heights_enumerate_canonical_vectors() {
        let v = vectors_of_height(2, 1);
        assert_eq!(v, vec![vec![0, 1], vec![1, -1], vec![1, 0], vec![1, 1]]);
        assert_eq!(vectors_of_height(3, 2).len(), (125 - 27) / 2);
    }

    #[test]
    fn good_hyperplane_preconditions_and_cone() {
        let opts = DimensionOptions::default();
        assert!(matches!(
            find_good_hyperplane(4, &fermat(4), 7, 2, &opts),
            Err(Error::Precondition(_))
        ));
        // Cone over a smooth plane cubic: singular only at the vertex.
        let cone = vec![p(4, "x1^3 + x2^3 + x3^3")];
        let rep = analyze(4, &cone, 7, &opts).unwrap();
        assert_eq!((rep.dim_z, rep.dim_sing), (2, 0));
        let h = find_good_hyperplane(4, &cone, 7, 2, &opts).unwrap();
        assert_eq!((h.dim_section, h.sing_section), (1, -1));
        assert_ne!(h.coeffs[3], 0);
    }

    #[test]
    fn good_prime_search() {
        let opts = DimensionOptions::default();
        assert_eq!(find_good_prime(4, &fermat(4), 5, 2.0, &opts).unwrap(), 5);
        assert_eq!(find_good_prime(4, &fermat(4), 3, 2.0, &opts).unwrap(), 5);
        let err = find_good_prime(4, &fermat(4), 3, 1.0, &opts).unwrap_err();
        assert!(err.to_string().contains("3: dim Sing Z = 2"), "{err}");
    }

    #[test]
    fn duplicated_forms_are_jacobian_degenerate() {
        // G1 = G2: codim 1 < r = 2, so the rank-deficient set is all of V.
        let g = p(3, "x1^2 + x2^2 - x3^2");
        let forms = vec![g.clone(), g];
        let ctx = FieldCtx::prime(11).unwrap();
        let v = projective_points(3, &forms, &ctx, u64::MAX).unwrap();
        let w = singular_locus(3, &forms, &ctx, u64::MAX).unwrap();
        assert_eq!(v, w);
        assert_eq!(v.len(), 12);
    }

    #[test]
    fn instance_json_roundtrip() {
        let inst = Instance::parse(3, &["x1^3 + x2^3 + x3^3 - 2*x1", "x1 - x2"]).unwrap();
        let s = inst.to_json().unwrap();
        assert!(s.starts_with("{\"n\":3,\"r\":2,\"polys\":["));
        let back = Instance::from_json(&s).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.digest(), inst.digest());
        assert!(Instance::from_json(r#"{"n":2,"r":2,"polys":[{"n":2,"terms":[[[1,0],"1"]]}]}"#).is_err());
        assert_eq!(inst.leading_forms()[0].to_string(), "x1^3 + x2^3 + x3^3");
    }
}
