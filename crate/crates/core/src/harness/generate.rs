use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ff::next_prime;
use crate::poly::IntPoly;
use crate::variety::{self, DimensionOptions, Instance};
use crate::{Error, Result};

const MAX_REJECTIONS: usize = 100;
const TEST_PRIMES: usize = 3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub n: usize,
    pub r: usize,
    /// One degree per polynomial, or a single degree for all.
    pub degrees: Vec<u32>,
    /// Coefficients are drawn from `[−H, H]`.
    pub height: i64,
    pub seed: Option<u64>,
    /// `Σ c_j x_j^d` with nonzero `c_j`.
    pub diagonal: bool,
    /// Fixed leading forms; only lower-degree terms are drawn.
    pub leading: Vec<String>,
    /// Add random terms of degree below `d` to diagonal or fixed forms.
    pub lower_terms: bool,
}

/// Exponent vectors of total degree `d` in `n` variables, lexicographic.
pub fn monomials_of_degree(n: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == n {
            prefix.push(d);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=d).rev() {
            prefix.push(e);
            rec(n, d - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, d, &mut Vec::new(), &mut out);
    }
    out
}

fn random_coeff<R: Rng>(rng: &mut R, h: i64, nonzero: bool) -> i64 {
    loop {
        let c = rng.gen_range(-h..=h);
        if c != 0 || !nonzero {
            return c;
        }
    }
}

fn random_terms<R: Rng>(rng: &mut R, n: usize, degrees: std::ops::RangeInclusive<u32>, h: i64) -> IntPoly {
    let mut terms = Vec::new();
    for d in degrees {
        for e in monomials_of_degree(n, d) {
            let c = random_coeff(rng, h, false);
            if c != 0 {
                terms.push((e, c));
            }
        }
    }
    IntPoly::from_terms(n, terms).expect("exponent lengths match")
}

/// A random polynomial of degree exactly `d` (unchecked).
pub fn random_poly<R: Rng>(rng: &mut R, n: usize, d: u32, h: i64) -> IntPoly {
    loop {
        let f = random_terms(rng, n, 0..=d, h);
        if f.degree() == Some(d) {
            return f;
        }
    }
}

fn test_primes(max_degree: u32) -> Vec<u64> {
    let mut out = Vec::with_capacity(TEST_PRIMES);
    let mut p = next_prime(max_degree as u64 + 1);
    while out.len() < TEST_PRIMES {
        out.push(p);
        p = next_prime(p + 1);
    }
    out
}

/// Random `f_1, …, f_r` whose leading forms are nonsingular of codimension
/// `r` modulo the three smallest primes above the largest degree.
pub fn generate_instance(params: &GeneratorParams, opts: &DimensionOptions) -> Result<Instance> {
    let (n, r) = (params.n, params.r);
    if r == 0 || r >= n {
        return Err(Error::InvalidInput(format!("need 0 < r < n, got n = {n}, r = {r}")));
    }
    let seed = params
        .seed
        .ok_or_else(|| Error::InvalidInput("generator needs a seed".into()))?;
    let fixed: Vec<IntPoly> = params
        .leading
        .iter()
        .map(|s| IntPoly::parse(n, s))
        .collect::<Result<_>>()?;
    if !fixed.is_empty() && fixed.len() != r {
        return Err(Error::InvalidInput(format!("{} leading forms given for r = {r}", fixed.len())));
    }
    if fixed.iter().any(|f| !f.is_homogeneous() || f.is_zero()) {
        return Err(Error::InvalidInput("fixed leading forms must be nonzero forms".into()));
    }
    let degrees: Vec<u32> = if !fixed.is_empty() {
        fixed.iter().map(|f| f.degree().unwrap_or(0)).collect()
    } else {
        match params.degrees.len() {
            1 => vec![params.degrees[0]; r],
            l if l == r => params.degrees.clone(),
            l => return Err(Error::InvalidInput(format!("{l} degrees given for r = {r}"))),
        }
    };
    if degrees.iter().any(|&d| d < 2) {
        return Err(Error::InvalidInput("degrees must be at least 2".into()));
    }
    let h = params.height.max(1);
    let primes = test_primes(*degrees.iter().max().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let polys: Vec<IntPoly> = (0..r)
            .map(|i| {
                let d = degrees[i];
                let top = if let Some(f) = fixed.get(i) {
                    f.clone()
                } else if params.diagonal {
                    let terms = (0..n).map(|j| {
                        let mut e = vec![0u32; n];
                        e[j] = d;
                        (e, random_coeff(&mut rng, h, true))
                    });
                    IntPoly::from_terms(n, terms.collect::<Vec<_>>()).expect("lengths match")
                } else {
                    return random_poly(&mut rng, n, d, h);
                };
                if params.lower_terms {
                    &top + &random_terms(&mut rng, n, 0..=d - 1, h)
                } else {
                    top
                }
            })
            .collect();
        let inst = Instance::new(n, polys)?;
        let mut good = true;
        for &p in &primes {
            if !variety::is_good_prime(n, inst.leading_forms(), p, opts)? {
                good = false;
                break;
            }
        }
        if good {
            return Ok(inst);
        }
        log::debug!("rejected {inst}");
    }
    Err(Error::NotFound(format!(
        "{MAX_REJECTIONS} consecutive instances were singular at one of {primes:?} (raise the height or change the degrees)"
    )))
}
