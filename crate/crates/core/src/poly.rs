//! Exact sparse multivariate polynomials over ℤ.
//!
//! [`IntPoly`] stores a map from dense exponent vectors to nonzero
//! arbitrary-precision coefficients. Every symbolic step of the counting
//! argument (leading forms, shifts `f(x + p·y)`, differencing, gradients,
//! Jacobian minors) happens here exactly; reductions modulo an integer are
//! compiled into [`ModPoly`] for the enumeration kernels.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::ff::{FieldCtx, FieldElem};
use crate::{Error, Result};

pub type Exponents = Vec<u32>;

/// A polynomial in `n_vars` variables with integer coefficients.
///
/// No stored coefficient is zero, so the zero polynomial has no terms.
/// [`IntPoly::degree`] returns `None` for the zero polynomial, standing in
/// for a degree of −∞.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PolyJson", into = "PolyJson")]
pub struct IntPoly {
    n_vars: usize,
    terms: BTreeMap<Exponents, BigInt>,
}

impl IntPoly {
    pub fn zero(n_vars: usize) -> Self {
        IntPoly {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: impl Into<BigInt>) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(vec![0; n_vars], c.into());
        p
    }

    /// The coordinate function `x_i` (0-based index).
    pub fn var(n_vars: usize, i: usize) -> Self {
        assert!(i < n_vars, "variable index {i} out of range for {n_vars} variables");
        let mut e = vec![0; n_vars];
        e[i] = 1;
        let mut p = Self::zero(n_vars);
        p.add_term(e, BigInt::one());
        p
    }

    pub fn monomial(exps: Exponents, c: impl Into<BigInt>) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps, c.into());
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, combining
    /// repeated monomials.
    pub fn from_terms<I, C>(n_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponents, C)>,
        C: Into<BigInt>,
    {
        let mut p = Self::zero(n_vars);
        for (e, c) in terms {
            if e.len() != n_vars {
                return Err(Error::DimensionMismatch {
                    expected: n_vars,
                    got: e.len(),
                });
            }
            p.add_term(e, c.into());
        }
        Ok(p)
    }

    /// `Σ c_i x_i + c₀`.
    pub fn linear(coeffs: &[i64], constant: i64) -> Self {
        let n = coeffs.len();
        let mut p = Self::constant(n, constant);
        for (i, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(e, BigInt::from(c));
        }
        p
    }

    /// Parses expressions such as `3*x1^2*x2 - x3 + 7` over the variables
    /// `x1..x{n_vars}`.
    pub fn parse(n_vars: usize, src: &str) -> Result<Self> {
        parse_poly(n_vars, src)
    }

    fn add_term(&mut self, e: Exponents, c: BigInt) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigInt)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[u32]) -> BigInt {
        self.terms.get(e).cloned().unwrap_or_else(BigInt::zero)
    }

    /// Total degree; `None` encodes the −∞ degree of the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|e| e.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|x| x == d),
        }
    }

    /// The sum of the terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> IntPoly {
        IntPoly {
            n_vars: self.n_vars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() == d)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// The top-degree homogeneous part.
    pub fn leading_form(&self) -> Result<IntPoly> {
        let d = self.degree().ok_or(Error::NoLeadingForm)?;
        Ok(self.homogeneous_part(d))
    }

    pub fn max_abs_coeff(&self) -> BigInt {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }

    pub fn scale(&self, c: &BigInt) -> IntPoly {
        if c.is_zero() {
            return IntPoly::zero(self.n_vars);
        }
        IntPoly {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> IntPoly {
        let mut acc = IntPoly::constant(self.n_vars, 1);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Formal partial derivative with respect to `x_i`.
    pub fn partial(&self, i: usize) -> IntPoly {
        let mut out = IntPoly::zero(self.n_vars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.add_term(e2, c * BigInt::from(e[i]));
        }
        out
    }

    pub fn gradient(&self) -> Vec<IntPoly> {
        (0..self.n_vars).map(|i| self.partial(i)).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<IntPoly>> {
        let grad = self.gradient();
        grad.iter()
            .map(|g| (0..self.n_vars).map(|j| g.partial(j)).collect())
            .collect()
    }

    /// `y · ∇p`.
    pub fn directional_derivative(&self, y: &[i64]) -> Result<IntPoly> {
        self.check_len(y.len())?;
        let mut out = IntPoly::zero(self.n_vars);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0 {
                out = &out + &self.partial(i).scale(&BigInt::from(yi));
            }
        }
        Ok(out)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars,
                got: len,
            });
        }
        Ok(())
    }

    /// Returns `q(x) = p(x + scale·shift)`, expanded exactly.
    pub fn translate_scale(&self, shift: &[i64], scale: i64) -> Result<IntPoly> {
        self.check_len(shift.len())?;
        let offsets: Vec<BigInt> = shift
            .iter()
            .map(|&s| BigInt::from(s) * BigInt::from(scale))
            .collect();
        self.translate(&offsets)
    }

    /// Returns `p(x + c)` for an arbitrary integer offset vector.
    pub fn translate(&self, offsets: &[BigInt]) -> Result<IntPoly> {
        self.check_len(offsets.len())?;
        if offsets.iter().all(Zero::is_zero) {
            return Ok(self.clone());
        }
        // (x_i + c_i)^e expanded once per (variable, exponent) pair.
        let mut cache: BTreeMap<(usize, u32), Vec<BigInt>> = BTreeMap::new();
        let mut out = IntPoly::zero(self.n_vars);
        for (e, c) in &self.terms {
            let mut partial: Vec<(Exponents, BigInt)> = vec![(vec![0; self.n_vars], c.clone())];
            for (i, &ei) in e.iter().enumerate() {
                if ei == 0 {
                    continue;
                }
                let coeffs = cache
                    .entry((i, ei))
                    .or_insert_with(|| binomial_expansion(&offsets[i], ei));
                let mut next = Vec::with_capacity(partial.len() * coeffs.len());
                for (pe, pc) in &partial {
                    for (j, bc) in coeffs.iter().enumerate() {
                        if bc.is_zero() {
                            continue;
                        }
                        let mut ne = pe.clone();
                        ne[i] += j as u32;
                        next.push((ne, pc * bc));
                    }
                }
                partial = next;
            }
            for (pe, pc) in partial {
                out.add_term(pe, pc);
            }
        }
        Ok(out)
    }

    /// The differenced polynomial `f(x + p·y) − f(x)`.
    pub fn difference(&self, p: i64, y: &[i64]) -> Result<IntPoly> {
        Ok(&self.translate_scale(y, p)? - self)
    }

    /// `X₀^d · p(X₁/X₀, …)` in `n_vars + 1` variables, `X₀` first.
    pub fn homogenize(&self) -> IntPoly {
        let n = self.n_vars + 1;
        let Some(d) = self.degree() else {
            return IntPoly::zero(n);
        };
        let mut out = IntPoly::zero(n);
        for (e, c) in &self.terms {
            let mut ne = Vec::with_capacity(n);
            ne.push(d - e.iter().sum::<u32>());
            ne.extend_from_slice(e);
            out.add_term(ne, c.clone());
        }
        out
    }

    /// Coefficients reduced into `[0, m)`, dropping those divisible by `m`.
    pub fn reduce_coeffs(&self, m: u64) -> IntPoly {
        let mb = BigInt::from(m);
        let mut out = IntPoly::zero(self.n_vars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.mod_floor(&mb));
        }
        out
    }

    pub fn eval(&self, x: &[BigInt]) -> Result<BigInt> {
        self.check_len(x.len())?;
        let mut acc = BigInt::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &ei) in x.iter().zip(e) {
                if ei > 0 {
                    t *= num_traits::pow(xi.clone(), ei as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_i64(&self, x: &[i64]) -> Result<BigInt> {
        let xb: Vec<BigInt> = x.iter().map(|&v| BigInt::from(v)).collect();
        self.eval(&xb)
    }

    /// Compiles the coefficientwise reduction modulo `m` (`1 ≤ m < 2³²`).
    pub fn reduce_mod(&self, m: u64) -> ModPoly {
        ModPoly::new(self, m)
    }

    /// Evaluates at a point of `F_{q^k}^n` after reducing coefficients mod q.
    pub fn eval_in(&self, ctx: &FieldCtx, x: &[FieldElem]) -> Result<FieldElem> {
        self.check_len(x.len())?;
        Ok(self.reduce_mod(ctx.q()).eval_field(ctx, x))
    }

    /// Compiles to a checked `i128` evaluator when every coefficient fits.
    pub fn to_i128(&self) -> Option<I128Poly> {
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| {
                c.to_i128().map(|c| I128Term {
                    coeff: c,
                    factors: sparse_factors(e),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(I128Poly {
            n_vars: self.n_vars,
            terms,
        })
    }
}

fn sparse_factors(e: &[u32]) -> Vec<(usize, u32)> {
    e.iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| (i, k))
        .collect()
}

/// Coefficients of `(x + c)^e` in increasing powers of `x`.
fn binomial_expansion(c: &BigInt, e: u32) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(e as usize + 1);
    let mut binom = BigInt::one();
    for j in 0..=e {
        // C(e, j) · c^(e − j) · x^j
        out.push(&binom * num_traits::pow(c.clone(), (e - j) as usize));
        binom = binom * BigInt::from(e - j) / BigInt::from(j + 1);
    }
    out
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        // Highest degree first, then reverse-lex, to read like a textbook.
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        for (idx, (e, c)) in terms.into_iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let is_const = e.iter().all(|&k| k == 0);
            let mut first = true;
            if !abs.is_one() || is_const {
                write!(f, "{abs}")?;
                first = false;
            }
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "x{}", i + 1)?;
                if k > 1 {
                    write!(f, "^{k}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntPoly[{}]({})", self.n_vars, self)
    }
}

impl Add for &IntPoly {
    type Output = IntPoly;
    fn add(self, rhs: &IntPoly) -> IntPoly {
        assert_eq!(self.n_vars, rhs.n_vars, "adding polynomials in different rings");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &IntPoly {
    type Output = IntPoly;
    fn sub(self, rhs: &IntPoly) -> IntPoly {
        assert_eq!(self.n_vars, rhs.n_vars, "subtracting polynomials in different rings");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c);
        }
        out
    }
}

impl Neg for &IntPoly {
    type Output = IntPoly;
    fn neg(self) -> IntPoly {
        IntPoly {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

impl Mul for &IntPoly {
    type Output = IntPoly;
    fn mul(self, rhs: &IntPoly) -> IntPoly {
        assert_eq!(self.n_vars, rhs.n_vars, "multiplying polynomials in different rings");
        let mut out = IntPoly::zero(self.n_vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// Determinant of a small square matrix of polynomials (Laplace expansion).
pub fn determinant(m: &[Vec<IntPoly>]) -> IntPoly {
    let r = m.len();
    assert!(r > 0 && m.iter().all(|row| row.len() == r), "determinant of a non-square matrix");
    if r == 1 {
        return m[0][0].clone();
    }
    let n_vars = m[0][0].n_vars();
    let mut acc = IntPoly::zero(n_vars);
    for j in 0..r {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<IntPoly>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, p)| p.clone())
                    .collect()
            })
            .collect();
        let term = &m[0][j] * &determinant(&minor);
        acc = if j % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    acc
}

/// All `r × r` minors of an `r × n` matrix (`r ≤ n`), columns in lex order.
pub fn maximal_minors(rows: &[Vec<IntPoly>]) -> Vec<IntPoly> {
    let r = rows.len();
    if r == 0 {
        return Vec::new();
    }
    let n = rows[0].len();
    let mut out = Vec::new();
    let mut cols: Vec<usize> = (0..r).collect();
    if r > n {
        return out;
    }
    loop {
        let sub: Vec<Vec<IntPoly>> = rows
            .iter()
            .map(|row| cols.iter().map(|&c| row[c].clone()).collect())
            .collect();
        out.push(determinant(&sub));
        // next combination
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cols[i] < n - r + i {
                cols[i] += 1;
                for j in i + 1..r {
                    cols[j] = cols[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// The `r × n` Jacobian matrix of a list of polynomials.
pub fn jacobian(polys: &[IntPoly]) -> Vec<Vec<IntPoly>> {
    polys.iter().map(IntPoly::gradient).collect()
}

// ---------------------------------------------------------------------------
// JSON form: {"n": int, "terms": [[[e1,...,en], "coeff"], ...]}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    n: usize,
    terms: Vec<(Vec<u32>, CoeffRepr)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoeffRepr {
    Str(String),
    Int(i64),
}

impl TryFrom<PolyJson> for IntPoly {
    type Error = Error;
    fn try_from(j: PolyJson) -> Result<Self> {
        let terms = j
            .terms
            .into_iter()
            .map(|(e, c)| {
                let c = match c {
                    CoeffRepr::Int(v) => BigInt::from(v),
                    CoeffRepr::Str(s) => s
                        .trim()
                        .parse::<BigInt>()
                        .map_err(|_| Error::InvalidInput(format!("bad coefficient {s:?}")))?,
                };
                Ok((e, c))
            })
            .collect::<Result<Vec<_>>>()?;
        IntPoly::from_terms(j.n, terms)
    }
}

impl From<IntPoly> for PolyJson {
    fn from(p: IntPoly) -> Self {
        PolyJson {
            n: p.n_vars,
            terms: p
                .terms
                .into_iter()
                .map(|(e, c)| (e, CoeffRepr::Str(c.to_string())))
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Text parser

fn parse_poly(n_vars: usize, src: &str) -> Result<IntPoly> {
    let bad = |msg: &str| Error::InvalidInput(format!("cannot parse polynomial {src:?}: {msg}"));
    let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(bad("empty"));
    }
    let bytes = s.as_bytes();
    let mut out = IntPoly::zero(n_vars);
    let mut pos = 0;
    while pos < bytes.len() {
        let mut sign = BigInt::one();
        while pos < bytes.len() && (bytes[pos] == b'+' || bytes[pos] == b'-') {
            if bytes[pos] == b'-' {
                sign = -sign;
            }
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos] != b'+' && bytes[pos] != b'-' {
            pos += 1;
        }
        let term = &s[start..pos];
        if term.is_empty() {
            return Err(bad("dangling sign"));
        }
        let mut coeff = sign;
        let mut e = vec![0u32; n_vars];
        for factor in term.split('*') {
            if factor.is_empty() {
                return Err(bad("empty factor"));
            }
            if let Some(rest) = factor.strip_prefix('x') {
                let (idx, exp) = match rest.split_once('^') {
                    Some((i, k)) => (i, k.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                    None => (rest, 1),
                };
                let idx: usize = idx.parse().map_err(|_| bad("bad variable index"))?;
                if idx == 0 || idx > n_vars {
                    return Err(bad("variable index out of range (variables are x1..xn)"));
                }
                e[idx - 1] += exp;
            } else {
                let (base, exp) = match factor.split_once('^') {
                    Some((b, k)) => (b, k.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                    None => (factor, 1),
                };
                let c: BigInt = base.parse().map_err(|_| bad("bad coefficient"))?;
                coeff *= num_traits::pow(c, exp as usize);
            }
        }
        out.add_term(e, coeff);
    }
    Ok(out)
}

impl std::str::FromStr for IntPoly {
    type Err = Error;
    /// Parses with the number of variables inferred from the largest index.
    fn from_str(s: &str) -> Result<Self> {
        let mut max_idx = 0usize;
        let b = s.as_bytes();
        for (i, &c) in b.iter().enumerate() {
            if c == b'x' {
                let digits: String = s[i + 1..].chars().take_while(char::is_ascii_digit).collect();
                if let Ok(v) = digits.parse::<usize>() {
                    max_idx = max_idx.max(v);
                }
            }
        }
        parse_poly(max_idx.max(1), s)
    }
}

// ---------------------------------------------------------------------------
// Compiled evaluators

#[derive(Clone, Debug)]
struct ModTerm {
    coeff: u64,
    factors: Vec<(usize, u32)>,
}

/// A polynomial with coefficients reduced modulo `m`, compiled for fast
/// evaluation on residues or on elements of `F_{q^k}` (when `m = q`).
#[derive(Clone, Debug)]
pub struct ModPoly {
    modulus: u64,
    n_vars: usize,
    terms: Vec<ModTerm>,
}

impl ModPoly {
    pub fn new(p: &IntPoly, m: u64) -> Self {
        assert!(m >= 1 && m < (1u64 << 32), "modulus {m} out of range");
        let mb = BigInt::from(m);
        let terms = p
            .terms
            .iter()
            .filter_map(|(e, c)| {
                let r = c.mod_floor(&mb).to_u64().expect("residue fits in u64");
                (r != 0).then(|| ModTerm {
                    coeff: r,
                    factors: sparse_factors(e),
                })
            })
            .collect();
        ModPoly {
            modulus: m,
            n_vars: p.n_vars,
            terms,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates at residues `x_i ∈ [0, m)`.
    #[inline]
    pub fn eval_u64(&self, x: &[u64]) -> u64 {
        let m = self.modulus;
        let mut acc = 0u64;
        for t in &self.terms {
            let mut v = t.coeff;
            for &(i, k) in &t.factors {
                let xi = x[i];
                for _ in 0..k {
                    v = v * xi % m;
                }
            }
            acc += v;
            if acc >= m {
                acc -= m;
            }
        }
        acc
    }

    /// Evaluates at arbitrary integers (reduced first).
    #[inline]
    pub fn eval_i64(&self, x: &[i64], scratch: &mut Vec<u64>) -> u64 {
        let m = self.modulus as i64;
        scratch.clear();
        scratch.extend(x.iter().map(|&v| v.rem_euclid(m) as u64));
        self.eval_u64(scratch)
    }

    /// Evaluates at a point of `F_{q^k}^n`; requires `m = q`.
    pub fn eval_field(&self, ctx: &FieldCtx, x: &[FieldElem]) -> FieldElem {
        debug_assert_eq!(self.modulus, ctx.q());
        if ctx.k() == 1 {
            let m = self.modulus;
            let mut acc = 0u64;
            for t in &self.terms {
                let mut v = t.coeff;
                for &(i, k) in &t.factors {
                    let xi = x[i].index() as u64;
                    for _ in 0..k {
                        v = v * xi % m;
                    }
                }
                acc = (acc + v) % m;
            }
            return FieldElem::from_index(acc as u32);
        }
        let mut acc = ctx.zero();
        for t in &self.terms {
            let mut v = ctx.from_u64(t.coeff);
            for &(i, k) in &t.factors {
                for _ in 0..k {
                    v = ctx.mul(v, x[i]);
                }
            }
            acc = ctx.add(acc, v);
        }
        acc
    }
}

#[derive(Clone, Debug)]
struct I128Term {
    coeff: i128,
    factors: Vec<(usize, u32)>,
}

/// Exact evaluation over ℤ with overflow detection.
#[derive(Clone, Debug)]
pub struct I128Poly {
    n_vars: usize,
    terms: Vec<I128Term>,
}

impl I128Poly {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// `None` on overflow; callers fall back to [`IntPoly::eval`].
    #[inline]
    pub fn eval(&self, x: &[i64]) -> Option<i128> {
        let mut acc: i128 = 0;
        for t in &self.terms {
            let mut v = t.coeff;
            for &(i, k) in &t.factors {
                let xi = x[i] as i128;
                for _ in 0..k {
                    v = v.checked_mul(xi)?;
                }
            }
            acc = acc.checked_add(v)?;
        }
        Some(acc)
    }
}
