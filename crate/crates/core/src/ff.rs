//! Finite fields `F_{q^k}` for small `k`, additive characters and point
//! enumeration.
//!
//! Elements are packed into a `u32` index `Σ c_j q^j` of their coordinates
//! in the power basis of `F_q[t]/(m(t))`. For `k = 1` the index is the
//! residue itself and arithmetic is plain modular arithmetic; for `k > 1`
//! multiplication goes through discrete-log tables built once per context.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Primes

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `≥ n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// Largest prime `≤ n`, if any.
pub fn prev_prime(n: u64) -> Option<u64> {
    let mut c = n;
    while c >= 2 {
        if is_prime(c) {
            return Some(c);
        }
        c -= 1;
    }
    None
}

/// The prime closest to `x`; ties go to the smaller prime.
pub fn nearest_prime(x: f64) -> u64 {
    if x <= 2.0 {
        return 2;
    }
    let above = next_prime(x.ceil() as u64);
    match prev_prime(x.floor() as u64) {
        Some(below) if (x - below as f64) <= (above as f64 - x) => below,
        _ => above,
    }
}

/// Distinct prime factors by trial division.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// ---------------------------------------------------------------------------
// Polynomials over F_q as coefficient vectors, lowest degree first.

fn trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn poly_sub(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + q - y) % q
        })
        .collect();
    trim(out)
}

fn poly_mul(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mul_mod(x, y, q)) % q;
        }
    }
    trim(out)
}

/// Remainder of `a` modulo `m` (any nonzero `m`).
fn poly_rem(a: &[u64], m: &[u64], q: u64) -> Vec<u64> {
    let mut r = trim(a.to_vec());
    let m = trim(m.to_vec());
    let dm = m.len() - 1;
    let inv_lead = pow_mod(m[dm], q - 2, q);
    while r.len() > dm && !r.is_empty() {
        let shift = r.len() - 1 - dm;
        let c = mul_mod(*r.last().unwrap(), inv_lead, q);
        for (i, &mi) in m.iter().enumerate() {
            let idx = shift + i;
            r[idx] = (r[idx] + q - mul_mod(c, mi, q)) % q;
        }
        r = trim(r);
    }
    r
}

fn poly_gcd(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let mut x = trim(a.to_vec());
    let mut y = trim(b.to_vec());
    while !y.is_empty() {
        let r = poly_rem(&x, &y, q);
        x = y;
        y = r;
    }
    x
}

fn poly_powmod(base: &[u64], mut e: u64, m: &[u64], q: u64) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut b = poly_rem(base, m, q);
    while e > 0 {
        if e & 1 == 1 {
            acc = poly_rem(&poly_mul(&acc, &b, q), m, q);
        }
        b = poly_rem(&poly_mul(&b, &b, q), m, q);
        e >>= 1;
    }
    acc
}

/// Rabin's test: `f` of degree `k` is irreducible iff `t^{q^k} ≡ t` and
/// `gcd(t^{q^{k/ℓ}} − t, f) = 1` for every prime `ℓ | k`.
fn is_irreducible(f: &[u64], q: u64) -> bool {
    let k = f.len() - 1;
    if k == 0 {
        return false;
    }
    if k == 1 {
        return true;
    }
    let t = vec![0u64, 1];
    let frob_iter = |times: usize| -> Vec<u64> {
        let mut x = t.clone();
        for _ in 0..times {
            x = poly_powmod(&x, q, f, q);
        }
        x
    };
    if poly_sub(&frob_iter(k), &t, q) != Vec::<u64>::new() {
        return false;
    }
    for l in prime_factors(k as u64) {
        let h = poly_sub(&frob_iter(k / l as usize), &t, q);
        if poly_gcd(&h, f, q).len() != 1 {
            return false;
        }
    }
    true
}

/// The canonical monic irreducible polynomial of degree `k` over `F_q`,
/// coefficients lowest degree first.
///
/// Candidates `t^k + c_{k−1}t^{k−1} + … + c_0` are scanned in
/// lexicographic order of `(c_{k−1}, …, c_0)`; the first irreducible one is
/// returned. For `k = 1` the placeholder `t` is returned.
pub fn find_irreducible(q: u64, k: usize) -> Result<Vec<u64>> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    if !(1..=4).contains(&k) {
        return Err(Error::Unsupported(format!("extension degree {k} (supported: 1..=4)")));
    }
    if k == 1 {
        return Ok(vec![0, 1]);
    }
    let total = (q as u128).pow(k as u32);
    for idx in 0..total {
        // idx enumerates (c_{k-1}, ..., c_0) in lex order: c_0 varies fastest.
        let mut f = vec![0u64; k + 1];
        f[k] = 1;
        let mut rest = idx;
        for c in f.iter_mut().take(k) {
            *c = (rest % q as u128) as u64;
            rest /= q as u128;
        }
        if f[0] == 0 {
            continue;
        }
        if is_irreducible(&f, q) {
            return Ok(f);
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

// ---------------------------------------------------------------------------
// Field context

/// Maximum field size for `k > 1` (log tables are `O(q^k)`).
pub const MAX_EXTENSION_SIZE: u64 = 1 << 22;

/// An element of `F_{q^k}`, packed as the base-`q` index of its coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct FieldElem(u32);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);

    pub fn from_index(i: u32) -> Self {
        FieldElem(i)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// `F_{q^k} = F_q[t]/(modulus)`.
#[derive(Clone, Debug)]
pub struct FieldCtx {
    q: u64,
    k: usize,
    modulus: Vec<u64>,
    size: u64,
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl FieldCtx {
    pub fn new(q: u64, k: usize) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        if q >= 1 << 31 {
            return Err(Error::Unsupported(format!("characteristic {q} ≥ 2^31")));
        }
        let modulus = find_irreducible(q, k)?;
        let size = q.checked_pow(k as u32).unwrap_or(u64::MAX);
        if k == 1 {
            return Ok(FieldCtx {
                q,
                k,
                modulus,
                size,
                exp: Vec::new(),
                log: Vec::new(),
            });
        }
        if size > MAX_EXTENSION_SIZE {
            return Err(Error::Unsupported(format!(
                "F_{{{q}^{k}}} has {size} elements, above the table limit {MAX_EXTENSION_SIZE}"
            )));
        }
        let mut ctx = FieldCtx {
            q,
            k,
            modulus,
            size,
            exp: Vec::new(),
            log: Vec::new(),
        };
        ctx.build_tables();
        Ok(ctx)
    }

    pub fn prime(q: u64) -> Result<Self> {
        Self::new(q, 1)
    }

    fn build_tables(&mut self) {
        let order = self.size - 1;
        let factors = prime_factors(order);
        let generator = (1..self.size)
            .map(|i| self.coeffs(FieldElem(i as u32)))
            .find(|g| {
                factors
                    .iter()
                    .all(|&l| poly_powmod(g, order / l, &self.modulus, self.q) != vec![1])
            })
            .expect("multiplicative group is cyclic");
        let mut exp = Vec::with_capacity(order as usize);
        let mut log = vec![0u32; self.size as usize];
        let mut cur = vec![1u64];
        for i in 0..order {
            let e = self.pack(&cur);
            exp.push(e.0);
            log[e.0 as usize] = i as u32;
            cur = poly_rem(&poly_mul(&cur, &generator, self.q), &self.modulus, self.q);
        }
        self.exp = exp;
        self.log = log;
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of elements `q^k`.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// The defining polynomial, lowest degree first.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn zero(&self) -> FieldElem {
        FieldElem(0)
    }

    pub fn one(&self) -> FieldElem {
        FieldElem(1)
    }

    /// Embeds an integer via the prime subfield.
    pub fn from_i64(&self, v: i64) -> FieldElem {
        FieldElem(v.rem_euclid(self.q as i64) as u32)
    }

    pub fn from_u64(&self, v: u64) -> FieldElem {
        FieldElem((v % self.q) as u32)
    }

    /// Coordinates in the power basis, length `k`.
    pub fn coeffs(&self, a: FieldElem) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.k);
        let mut x = a.0 as u64;
        for _ in 0..self.k {
            out.push(x % self.q);
            x /= self.q;
        }
        out
    }

    pub fn from_coeffs(&self, c: &[u64]) -> Result<FieldElem> {
        if c.len() > self.k || c.iter().any(|&v| v >= self.q) {
            return Err(Error::InvalidInput(format!(
                "coordinates {c:?} do not describe an element of F_{}^{}",
                self.q, self.k
            )));
        }
        Ok(self.pack(c))
    }

    fn pack(&self, c: &[u64]) -> FieldElem {
        let mut idx = 0u64;
        for &v in c.iter().rev() {
            idx = idx * self.q + v;
        }
        FieldElem(idx as u32)
    }

    /// Whether `a` lies in the prime subfield `F_q`.
    pub fn is_prime_subfield(&self, a: FieldElem) -> bool {
        (a.0 as u64) < self.q
    }

    #[inline]
    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        let q = self.q;
        if self.k == 1 {
            let s = a.0 as u64 + b.0 as u64;
            return FieldElem(if s >= q { s - q } else { s } as u32);
        }
        let (mut x, mut y) = (a.0 as u64, b.0 as u64);
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.k {
            let d = (x % q + y % q) % q;
            out += d * place;
            place *= q;
            x /= q;
            y /= q;
        }
        FieldElem(out as u32)
    }

    #[inline]
    pub fn neg(&self, a: FieldElem) -> FieldElem {
        let q = self.q;
        if self.k == 1 {
            return FieldElem(if a.0 == 0 { 0 } else { (q - a.0 as u64) as u32 });
        }
        let mut x = a.0 as u64;
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.k {
            let d = (q - x % q) % q;
            out += d * place;
            place *= q;
            x /= q;
        }
        FieldElem(out as u32)
    }

    #[inline]
    pub fn sub(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        if self.k == 1 {
            return FieldElem((a.0 as u64 * b.0 as u64 % self.q) as u32);
        }
        if a.0 == 0 || b.0 == 0 {
            return FieldElem(0);
        }
        let order = self.size - 1;
        let l = (self.log[a.0 as usize] as u64 + self.log[b.0 as usize] as u64) % order;
        FieldElem(self.exp[l as usize])
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: FieldElem) -> Option<FieldElem> {
        if a.0 == 0 {
            return None;
        }
        if self.k == 1 {
            return Some(FieldElem(pow_mod(a.0 as u64, self.q - 2, self.q) as u32));
        }
        let order = self.size - 1;
        let l = self.log[a.0 as usize] as u64;
        Some(FieldElem(self.exp[((order - l) % order) as usize]))
    }

    pub fn pow(&self, a: FieldElem, e: u64) -> FieldElem {
        let mut acc = self.one();
        let mut b = a;
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    /// `x ↦ x^q`.
    pub fn frobenius(&self, a: FieldElem) -> FieldElem {
        self.pow(a, self.q)
    }

    /// All elements in index order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElem> + '_ {
        (0..self.size as u32).map(FieldElem)
    }

    /// Rank of a matrix over the field (rows are consumed).
    pub fn rank(&self, rows: &mut [Vec<FieldElem>]) -> usize {
        let n_rows = rows.len();
        if n_rows == 0 {
            return 0;
        }
        let n_cols = rows[0].len();
        let mut rank = 0;
        for col in 0..n_cols {
            let Some(piv) = (rank..n_rows).find(|&r| !rows[r][col].is_zero()) else {
                continue;
            };
            rows.swap(rank, piv);
            let inv = self.inv(rows[rank][col]).expect("pivot is nonzero");
            for r in 0..n_rows {
                if r != rank && !rows[r][col].is_zero() {
                    let factor = self.mul(rows[r][col], inv);
                    for c in col..n_cols {
                        let t = self.mul(factor, rows[rank][c]);
                        rows[r][c] = self.sub(rows[r][c], t);
                    }
                }
            }
            rank += 1;
            if rank == n_rows {
                break;
            }
        }
        rank
    }

    /// A basis of the right kernel `{y : M y = 0}` of an `r × n` matrix.
    pub fn kernel(&self, rows: &[Vec<FieldElem>], n: usize) -> Vec<Vec<FieldElem>> {
        let mut m: Vec<Vec<FieldElem>> = rows.to_vec();
        let n_rows = m.len();
        let mut pivot_cols = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let Some(piv) = (rank..n_rows).find(|&r| !m[r][col].is_zero()) else {
                continue;
            };
            m.swap(rank, piv);
            let inv = self.inv(m[rank][col]).expect("pivot is nonzero");
            for c in col..n {
                m[rank][c] = self.mul(m[rank][c], inv);
            }
            for r in 0..n_rows {
                if r != rank && !m[r][col].is_zero() {
                    let factor = m[r][col];
                    for c in col..n {
                        let t = self.mul(factor, m[rank][c]);
                        m[r][c] = self.sub(m[r][c], t);
                    }
                }
            }
            pivot_cols.push(col);
            rank += 1;
            if rank == n_rows {
                break;
            }
        }
        let free: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
        free.iter()
            .map(|&fc| {
                let mut v = vec![self.zero(); n];
                v[fc] = self.one();
                for (r, &pc) in pivot_cols.iter().enumerate() {
                    v[pc] = self.neg(m[r][fc]);
                }
                v
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Additive characters

/// Precomputed `e_q(a) = exp(2πi a / q)` for `a ∈ [0, q)`.
#[derive(Clone, Debug)]
pub struct CharTable {
    q: u64,
    table: Vec<Complex64>,
}

impl CharTable {
    pub fn new(q: u64) -> Self {
        let table = (0..q)
            .map(|a| Complex64::from_polar(1.0, TAU * a as f64 / q as f64))
            .collect();
        CharTable { q, table }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn e(&self, a: u64) -> Complex64 {
        self.table[(a % self.q) as usize]
    }

    #[inline]
    pub fn e_i64(&self, a: i64) -> Complex64 {
        self.table[a.rem_euclid(self.q as i64) as usize]
    }
}

/// `e_q(a)`; trace characters of proper extensions are not provided.
pub fn additive_character(ctx: &FieldCtx, a: i64) -> Result<Complex64> {
    if ctx.k() != 1 {
        return Err(Error::Unsupported(
            "additive characters of F_{q^k} with k > 1".into(),
        ));
    }
    let q = ctx.q() as i64;
    Ok(Complex64::from_polar(1.0, TAU * a.rem_euclid(q) as f64 / q as f64))
}

// ---------------------------------------------------------------------------
// Points

/// A point of `ℙ^{m−1}(F_{q^k})` whose first nonzero coordinate is 1.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProjPoint {
    coords: Vec<FieldElem>,
}

impl ProjPoint {
    pub fn new(ctx: &FieldCtx, coords: &[FieldElem]) -> Result<Self> {
        Self::normalize(ctx, coords)
            .ok_or_else(|| Error::InvalidInput("the zero vector is not a projective point".into()))
    }

    /// Scales so the first nonzero coordinate is 1; `None` for the zero vector.
    pub fn normalize(ctx: &FieldCtx, coords: &[FieldElem]) -> Option<Self> {
        let lead = coords.iter().find(|c| !c.is_zero())?;
        let inv = ctx.inv(*lead)?;
        Some(ProjPoint {
            coords: coords.iter().map(|&c| ctx.mul(c, inv)).collect(),
        })
    }

    pub fn coords(&self) -> &[FieldElem] {
        &self.coords
    }

    /// Coordinates as field indices (residues when `k = 1`).
    pub fn indices(&self) -> Vec<u32> {
        self.coords.iter().map(|c| c.index()).collect()
    }
}

/// `q^{k·m}`.
pub fn affine_size(ctx: &FieldCtx, m: usize) -> u128 {
    (ctx.size() as u128).saturating_pow(m as u32)
}

/// `(q^{k·m} − 1)/(q^k − 1)`.
pub fn projective_size(ctx: &FieldCtx, m: usize) -> u128 {
    if m == 0 {
        return 0;
    }
    let s = ctx.size() as u128;
    (0..m as u32).map(|i| s.saturating_pow(i)).fold(0u128, |a, b| a.saturating_add(b))
}

pub fn check_budget(needed: u128, budget: u64) -> Result<()> {
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// A block of points: a fixed coordinate prefix followed by `free`
/// coordinates ranging over the whole field. Enumeration is split into such
/// blocks for parallel work.
#[derive(Clone, Debug)]
pub struct PointChunk {
    prefix: Vec<FieldElem>,
    free: usize,
}

impl PointChunk {
    pub fn len(&self, ctx: &FieldCtx) -> u128 {
        (ctx.size() as u128).saturating_pow(self.free as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Visits the points of the chunk in lexicographic order (last
    /// coordinate fastest).
    pub fn for_each<F: FnMut(&[FieldElem])>(&self, ctx: &FieldCtx, mut f: F) {
        let mut pt = self.prefix.clone();
        let start = pt.len();
        pt.extend(std::iter::repeat_n(FieldElem::ZERO, self.free));
        let size = ctx.size() as u32;
        loop {
            f(&pt);
            let mut i = pt.len();
            loop {
                if i == start {
                    return;
                }
                i -= 1;
                let next = pt[i].0 + 1;
                if next < size {
                    pt[i] = FieldElem(next);
                    break;
                }
                pt[i] = FieldElem::ZERO;
            }
        }
    }
}

/// Chunks covering `A^m(F_{q^k})`, split on the first coordinate.
pub fn affine_chunks(ctx: &FieldCtx, m: usize) -> Vec<PointChunk> {
    if m == 0 {
        return vec![PointChunk {
            prefix: Vec::new(),
            free: 0,
        }];
    }
    ctx.elements()
        .map(|v| PointChunk {
            prefix: vec![v],
            free: m - 1,
        })
        .collect()
}

/// Chunks covering `ℙ^{m−1}(F_{q^k})` in normalized form: the leading 1 sits
/// at position `i`, preceded by zeros; the coordinate after it is split on.
pub fn projective_chunks(ctx: &FieldCtx, m: usize) -> Vec<PointChunk> {
    let mut out = Vec::new();
    for lead in 0..m {
        let mut prefix = vec![FieldElem::ZERO; lead];
        prefix.push(ctx.one());
        if lead + 1 < m {
            for v in ctx.elements() {
                let mut p = prefix.clone();
                p.push(v);
                out.push(PointChunk {
                    prefix: p,
                    free: m - lead - 2,
                });
            }
        } else {
            out.push(PointChunk { prefix, free: 0 });
        }
    }
    out
}

/// Runs `work` on every chunk in parallel and returns the results in chunk
/// order, so that any subsequent reduction is deterministic.
pub fn par_map_chunks<T, W>(chunks: &[PointChunk], work: W) -> Vec<T>
where
    T: Send,
    W: Fn(&PointChunk) -> T + Sync + Send,
{
    chunks.par_iter().map(work).collect()
}

/// All points of `A^m(F_{q^k})`, lexicographically.
pub fn enumerate_affine(ctx: &FieldCtx, m: usize, budget: u64) -> Result<Vec<Vec<FieldElem>>> {
    check_budget(affine_size(ctx, m), budget)?;
    let mut out = Vec::new();
    for c in affine_chunks(ctx, m) {
        c.for_each(ctx, |p| out.push(p.to_vec()));
    }
    Ok(out)
}

/// All points of `ℙ^{m−1}(F_{q^k})`, normalized, in enumeration order.
pub fn enumerate_projective(ctx: &FieldCtx, m: usize, budget: u64) -> Result<Vec<ProjPoint>> {
    check_budget(projective_size(ctx, m), budget)?;
    let mut out = Vec::new();
    for c in projective_chunks(ctx, m) {
        c.for_each(ctx, |p| {
            out.push(ProjPoint {
                coords: p.to_vec(),
            })
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn primality_agrees_with_sieve() {
        let limit = 5000usize;
        let mut sieve = vec![true; limit];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..limit {
            if sieve[i] {
                for j in (i * i..limit).step_by(i) {
                    sieve[j] = false;
                }
            }
        }
        for (n, &p) in sieve.iter().enumerate() {
            assert_eq!(is_prime(n as u64), p, "n = {n}");
        }
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to 2, 3, 5, 7
    }

    #[test]
    fn prime_search_helpers() {
        assert_eq!(next_prime(14), 17);
        assert_eq!(next_prime(17), 17);
        assert_eq!(prev_prime(1), None);
        assert_eq!(prev_prime(16), Some(13));
        assert_eq!(nearest_prime(2.38), 2);
        assert_eq!(nearest_prime(12.0), 11);
        assert_eq!(nearest_prime(15.1), 17);
    }

    #[test]
    fn canonical_irreducibles() {
        assert_eq!(find_irreducible(2, 2).unwrap(), vec![1, 1, 1]);
        assert_eq!(find_irreducible(3, 1).unwrap(), vec![0, 1]);
        assert_eq!(find_irreducible(5, 2).unwrap(), vec![2, 0, 1]);
        assert!(find_irreducible(4, 2).is_err());
    }

    /// Oracle for the quadratic case: a monic quadratic is irreducible iff
    /// it has no root in F_q.
    #[test]
    fn quadratic_irreducibility_matches_root_scan() {
        for q in [2u64, 3, 5, 7, 11] {
            for c1 in 0..q {
                for c0 in 0..q {
                    let f = vec![c0, c1, 1];
                    let has_root = (0..q).any(|x| (x * x + c1 * x + c0) % q == 0);
                    assert_eq!(is_irreducible(&f, q), !has_root, "q={q} f={f:?}");
                }
            }
        }
    }

    #[test]
    fn quartic_irreducibility_rejects_product_of_quadratics() {
        // (t^2 + t + 1)^2 = t^4 + 2t^3 + 3t^2 + 2t + 1 has no roots over F_2
        // but is reducible.
        assert!(!is_irreducible(&[1, 0, 1, 0, 1], 2));
        assert!(is_irreducible(&[1, 1, 0, 0, 1], 2));
    }

    #[test]
    fn field_axioms_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (q, k) in [(2u64, 3usize), (3, 2), (5, 2), (7, 3), (13, 1), (3, 4)] {
            let ctx = FieldCtx::new(q, k).unwrap();
            let rand_elem = |rng: &mut ChaCha8Rng| FieldElem(rng.gen_range(0..ctx.size()) as u32);
            for _ in 0..300 {
                let (a, b, c) = (rand_elem(&mut rng), rand_elem(&mut rng), rand_elem(&mut rng));
                assert_eq!(ctx.add(ctx.add(a, b), c), ctx.add(a, ctx.add(b, c)));
                assert_eq!(ctx.mul(ctx.mul(a, b), c), ctx.mul(a, ctx.mul(b, c)));
                assert_eq!(
                    ctx.mul(a, ctx.add(b, c)),
                    ctx.add(ctx.mul(a, b), ctx.mul(a, c))
                );
                if !a.is_zero() {
                    assert_eq!(ctx.mul(a, ctx.inv(a).unwrap()), ctx.one());
                }
                assert_eq!(
                    ctx.frobenius(ctx.add(a, b)),
                    ctx.add(ctx.frobenius(a), ctx.frobenius(b))
                );
                assert_eq!(ctx.add(a, ctx.neg(a)), ctx.zero());
            }
        }
    }

    #[test]
    fn extension_mul_matches_polynomial_arithmetic() {
        let ctx = FieldCtx::new(5, 2).unwrap();
        for a in ctx.elements() {
            for b in ctx.elements().step_by(3) {
                let expect = poly_rem(
                    &poly_mul(&trim(ctx.coeffs(a)), &trim(ctx.coeffs(b)), 5),
                    ctx.modulus(),
                    5,
                );
                let mut got = trim(ctx.coeffs(ctx.mul(a, b)));
                got.truncate(expect.len().max(got.len()));
                assert_eq!(got, expect);
            }
        }
    }

    #[test]
    fn enumeration_sizes() {
        let f5 = FieldCtx::prime(5).unwrap();
        assert_eq!(enumerate_projective(&f5, 3, u64::MAX).unwrap().len(), 31);
        let f3 = FieldCtx::prime(3).unwrap();
        assert_eq!(enumerate_affine(&f3, 2, u64::MAX).unwrap().len(), 9);
        let f7 = FieldCtx::prime(7).unwrap();
        assert_eq!(enumerate_projective(&f7, 1, u64::MAX).unwrap().len(), 1);
        let f4 = FieldCtx::new(2, 2).unwrap();
        assert_eq!(enumerate_projective(&f4, 3, u64::MAX).unwrap().len(), 21);
    }

    #[test]
    fn budget_is_enforced() {
        let f5 = FieldCtx::prime(5).unwrap();
        let err = enumerate_affine(&f5, 4, 100).unwrap_err();
        assert!(err.to_string().contains("--budget"), "{err}");
    }

    #[test]
    fn projective_points_are_distinct_and_normalized() {
        let ctx = FieldCtx::new(3, 2).unwrap();
        let pts = enumerate_projective(&ctx, 3, u64::MAX).unwrap();
        let set: HashSet<_> = pts.iter().cloned().collect();
        assert_eq!(set.len(), pts.len());
        for p in &pts {
            assert_eq!(&ProjPoint::normalize(&ctx, p.coords()).unwrap(), p);
            // any nonzero multiple normalizes back
            let scaled: Vec<_> = p.coords().iter().map(|&c| ctx.mul(c, FieldElem(5))).collect();
            assert_eq!(&ProjPoint::normalize(&ctx, &scaled).unwrap(), p);
        }
    }

    #[test]
    fn parallel_chunks_cover_same_points() {
        let ctx = FieldCtx::prime(5).unwrap();
        let chunks = projective_chunks(&ctx, 4);
        let per_chunk = par_map_chunks(&chunks, |c| {
            let mut v = Vec::new();
            c.for_each(&ctx, |p| v.push(p.to_vec()));
            v
        });
        let par: Vec<_> = per_chunk.into_iter().flatten().collect();
        let seq: Vec<_> = enumerate_projective(&ctx, 4, u64::MAX)
            .unwrap()
            .into_iter()
            .map(|p| p.coords().to_vec())
            .collect();
        assert_eq!(par, seq);
    }

    #[test]
    fn characters() {
        let ctx = FieldCtx::prime(7).unwrap();
        let e0 = additive_character(&ctx, 0).unwrap();
        assert!((e0 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let e1 = additive_character(&ctx, 1).unwrap();
        let expect = Complex64::new((TAU / 7.0).cos(), (TAU / 7.0).sin());
        assert!((e1 - expect).norm() < 1e-15);
        for q in [7u64, 11, 31] {
            let t = CharTable::new(q);
            for c in 0..q {
                let s: Complex64 = (0..q).map(|a| t.e(a * c)).sum();
                let expect = if c == 0 { q as f64 } else { 0.0 };
                assert!((s - Complex64::new(expect, 0.0)).norm() < 1e-9 * q as f64);
            }
            for a in 0..q {
                for b in 0..q {
                    assert!((t.e(a + b) - t.e(a) * t.e(b)).norm() < 1e-12);
                }
            }
        }
        let ext = FieldCtx::new(3, 2).unwrap();
        assert!(additive_character(&ext, 1).is_err());
    }

    #[test]
    fn kernel_and_rank() {
        let ctx = FieldCtx::prime(7).unwrap();
        let e = |v: u32| FieldElem(v);
        let rows = vec![vec![e(1), e(2), e(3)], vec![e(2), e(4), e(6)]];
        assert_eq!(ctx.rank(&mut rows.clone()), 1);
        let ker = ctx.kernel(&rows, 3);
        assert_eq!(ker.len(), 2);
        for v in &ker {
            let dot = (0..3).fold(ctx.zero(), |acc, i| ctx.add(acc, ctx.mul(rows[0][i], v[i])));
            assert!(dot.is_zero());
        }
    }
}
