use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{fit_exponent, random_poly, Clock, ExperimentConfig, ModeOutput, RunMode, Table};
use crate::counting::{self, BoxZ, WeightedOptions};
use crate::expsum::{self, FourierOptions};
use crate::ff::{is_prime, FieldCtx};
use crate::poly::IntPoly;
use crate::util::round9;
use crate::variety::{self, Instance, Mode};
use crate::vdc::{self, AuditOptions, PlanOptions};
use crate::{Error, Result};

const SUITE_PRIMES: [u64; 8] = [7, 11, 13, 17, 19, 23, 29, 31];

pub(crate) fn dispatch(
    mode: RunMode,
    cfg: &ExperimentConfig,
    inst: Option<&Instance>,
    clock: &mut Clock,
) -> Result<ModeOutput> {
    let need = || inst.ok_or_else(|| Error::InvalidInput(format!("mode {mode} needs an instance")));
    match mode {
        RunMode::Count => count(cfg, need()?, clock),
        RunMode::FfPoints => ffpoints(cfg, need()?, clock),
        RunMode::SingDim => singdim(cfg, need()?, clock),
        RunMode::ExpSum => expsum_mode(cfg, inst, clock),
        RunMode::Audit => audit_mode(cfg, inst, clock),
        RunMode::SelectPrimes => select_primes_mode(cfg, inst, clock),
        RunMode::HooleySweep => hooley(cfg, need()?, clock),
        RunMode::KatzSweep => katz(cfg, need()?, clock),
        RunMode::Thm2Sweep => thm2(cfg, need()?, clock),
        RunMode::Weighted => weighted(cfg, need()?, clock),
    }
}

fn table(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(Table {
        name: name.to_string(),
        csv: String::from_utf8(bytes).expect("csv is utf-8"),
    })
}

fn f(x: f64) -> String {
    round9(x).to_string()
}

fn opt_f(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

fn trial_seed(seed: u64, t: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (t + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Runs `work` on every sweep point in parallel; results keep the input order.
fn sweep<K, T, W>(keys: &[K], label: &str, work: W) -> Result<Vec<T>>
where
    K: Copy + Sync + std::fmt::Display,
    T: Send,
    W: Fn(K) -> Result<T> + Sync + Send,
{
    keys.par_iter()
        .map(|&k| work(k).map_err(|e| e.context(format!("{label} = {k}"))))
        .collect()
}

fn sorted(v: &[u64]) -> Vec<u64> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

// ---------------------------------------------------------------------------

fn count(cfg: &ExperimentConfig, inst: &Instance, clock: &mut Clock) -> Result<ModeOutput> {
    let (n, r) = (inst.n(), inst.r());
    let dim = n as i32 - r as i32;
    let budget = cfg.budget();
    let bs = sorted(&cfg.b_list);
    let qs: Vec<Option<u64>> = if cfg.q_list.is_empty() {
        vec![None]
    } else {
        sorted(&cfg.q_list).into_iter().map(Some).collect()
    };
    let mut rows = Vec::new();
    for q in &qs {
        for &b in &bs {
            let bx = BoxZ::symmetric(n, b as i64)?;
            let c = match q {
                None => counting::count_box(inst, &bx, budget),
                Some(q) => counting::count_box_mod(inst, &bx, *q, budget),
            }
            .map_err(|e| e.context(format!("b = {b}")))?;
            let ratio = c as f64 / (b as f64).powi(dim);
            rows.push((b, *q, c, ratio));
        }
    }
    clock.lap("counts");
    let max_ratio = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let mut fits = BTreeMap::new();
    for q in &qs {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.1 == *q).map(|r| (r.0 as f64, r.3)).collect();
        if pts.len() >= 3 {
            if let Ok(fit) = fit_exponent(&pts) {
                fits.insert(q.map(|q| q.to_string()).unwrap_or_else(|| "Z".into()), fit);
            }
        }
    }
    let mut checks = BTreeMap::new();
    checks.insert("ratios_finite".into(), rows.iter().all(|r| r.3.is_finite()));
    let summary = format!("{} counts, max N/B^{dim} = {:.6}\n", rows.len(), max_ratio);
    let csv = table(
        "counts.csv",
        &["b", "q", "count", "ratio"],
        rows.iter()
            .map(|r| vec![r.0.to_string(), r.1.map(|q| q.to_string()).unwrap_or_default(), r.2.to_string(), f(r.3)])
            .collect(),
    )?;
    Ok(ModeOutput {
        result: json!({
            "dim_x": dim,
            "rows": rows.iter().map(|r| json!({"b": r.0, "q": r.1, "count": r.2, "ratio": r.3})).collect::<Vec<_>>(),
            "max_ratio": max_ratio,
            "ratio_fits": to_value(&fits),
        }),
        checks,
        tables: vec![csv],
        summary,
    })
}

fn ffpoints(cfg: &ExperimentConfig, inst: &Instance, clock: &mut Clock) -> Result<ModeOutput> {
    let n = inst.n();
    let budget = cfg.budget();
    let rows = sweep(&sorted(&cfg.q_list), "q", |q| {
        let ctx = FieldCtx::prime(q)?;
        let affine = variety::count_points(n, inst.polys(), &ctx, Mode::Affine, budget)?;
        let proj = variety::count_points(n, inst.leading_forms(), &ctx, Mode::Projective, budget)?;
        Ok((q, affine, proj))
    })?;
    clock.lap("point counts");
    let csv = table(
        "ffpoints.csv",
        &["q", "affine", "projective_z"],
        rows.iter().map(|r| vec![r.0.to_string(), r.1.to_string(), r.2.to_string()]).collect(),
    )?;
    Ok(ModeOutput {
        result: json!({"rows": rows.iter().map(|r| json!({"q": r.0, "affine": r.1, "projective_z": r.2})).collect::<Vec<_>>()}),
        checks: BTreeMap::new(),
        summary: format!("{} primes\n", rows.len()),
        tables: vec![csv],
    })
}

fn singdim(cfg: &ExperimentConfig, inst: &Instance, clock: &mut Clock) -> Result<ModeOutput> {
    let n = inst.n();
    let opts = cfg.dimension_options();
    let rows = sweep(&sorted(&cfg.q_list), "q", |q| {
        let rep = variety::analyze(n, inst.leading_forms(), q, &opts)?;
        let strata = if cfg.strata {
            Some(variety::strata_sets(n, inst.leading_forms(), q, &opts)?)
        } else {
            None
        };
        Ok((rep, strata))
    })?;
    clock.lap("dimensions");
    let mut checks = BTreeMap::new();
    checks.insert("nonsingular_at_every_q".into(), rows.iter().all(|r| r.0.is_good()));
    let csv = table(
        "singdim.csv",
        &["q", "dim_z", "dim_sing", "good"],
        rows.iter()
            .map(|(r, _)| vec![r.q.to_string(), r.dim_z.to_string(), r.dim_sing.to_string(), r.is_good().to_string()])
            .collect(),
    )?;
    let summary = rows
        .iter()
        .map(|(r, _)| format!("q = {}: dim Z = {}, dim Sing = {}\n", r.q, r.dim_z, r.dim_sing))
        .collect();
    Ok(ModeOutput {
        result: json!({"rows": rows.iter().map(|(r, s)| json!({"sing": to_value(r), "strata": to_value(s)})).collect::<Vec<_>>()}),
        checks,
        tables: vec![csv],
        summary,
    })
}

// ---------------------------------------------------------------------------

fn random_box<R: Rng>(rng: &mut R, n: usize, radius: i64) -> Result<BoxZ> {
    let mut center = Vec::with_capacity(n);
    let mut half = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.gen_range(-radius..=radius);
        center.push(c);
        half.push(rng.gen_range(0..=radius - c.abs()));
    }
    BoxZ::new(center, half)
}

fn random_system<R: Rng>(rng: &mut R, n: usize, r: usize, degrees: std::ops::RangeInclusive<u32>, h: i64) -> Result<Instance> {
    let polys = (0..r)
        .map(|_| {
            let d = rng.gen_range(degrees.clone());
            random_poly(rng, n, d, h)
        })
        .collect();
    Instance::new(n, polys)
}

fn fourier_opts(cfg: &ExperimentConfig, seed: u64) -> FourierOptions {
    FourierOptions {
        budget: cfg.budget(),
        samples: cfg.samples.unwrap_or(4096),
        seed,
        ..FourierOptions::default()
    }
}

fn independent_linear_forms<R: Rng>(rng: &mut R, n: usize, k: usize, q: u64) -> Vec<IntPoly> {
    loop {
        let forms: Vec<IntPoly> = (0..k)
            .map(|_| {
                let c: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
                IntPoly::linear(&c, 0)
            })
            .collect();
        if forms.iter().any(IntPoly::is_zero) {
            continue;
        }
        let Ok(coeffs) = variety::linear_coeffs(&forms, q) else { continue };
        let ctx = FieldCtx::prime(q).expect("suite primes are prime");
        let mut rows: Vec<_> = coeffs.iter().map(|c| c.iter().map(|&v| ctx.from_u64(v)).collect()).collect();
        if ctx.rank(&mut rows) == k {
            return forms;
        }
    }
}

fn expsum_mode(cfg: &ExperimentConfig, inst: Option<&Instance>, clock: &mut Clock) -> Result<ModeOutput> {
    let seed = cfg.seed();
    let budget = cfg.budget();
    let mut fourier_rows = Vec::new();
    let mut v_rows = Vec::new();

    if let Some(trials) = cfg.trials {
        let ts: Vec<u64> = (0..trials).collect();
        let rows = sweep(&ts, "trial", |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, t));
            let n = rng.gen_range(1..=3usize);
            let r = rng.gen_range(1..=n.min(2));
            let x = random_system(&mut rng, n, r, 1..=3, 5)?;
            let q = *SUITE_PRIMES.choose(&mut rng).unwrap();
            let bx = random_box(&mut rng, n, 3)?;
            let c = expsum::fourier_inversion_check(&x, &bx, q, &fourier_opts(cfg, trial_seed(seed, t)))?;
            Ok((t, n, r, c))
        })?;
        fourier_rows.extend(rows.into_iter().map(|(t, n, r, c)| (Some(t), n, r, c)));
        clock.lap("fourier suite");
    }
    if let Some(trials) = cfg.v_trials {
        let ts: Vec<u64> = (0..trials).collect();
        let rows = sweep(&ts, "v-trial", |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed ^ 0x5eed, t));
            let n = rng.gen_range(2..=3usize);
            let k = rng.gen_range(1..=2usize);
            let x = random_system(&mut rng, n, 1, 1..=3, 5)?;
            let q = *SUITE_PRIMES.choose(&mut rng).unwrap();
            let forms = independent_linear_forms(&mut rng, n, k, q);
            let bx = random_box(&mut rng, n, 3)?;
            let c = expsum::v_subspace_identity(&x, &forms, &bx, q, budget)?;
            Ok((Some(t), k, c))
        })?;
        v_rows.extend(rows);
        clock.lap("v-subspace suite");
    }
    if let (Some(x), Some(spec)) = (inst, &cfg.box_spec) {
        let bx = spec.to_box()?;
        let qs = sorted(&cfg.q_list);
        let rows = sweep(&qs, "q", |q| expsum::fourier_inversion_check(x, &bx, q, &fourier_opts(cfg, seed)))?;
        fourier_rows.extend(rows.into_iter().map(|c| (None, x.n(), x.r(), c)));
        if !cfg.linear_forms.is_empty() {
            let forms = cfg
                .linear_forms
                .iter()
                .map(|s| IntPoly::parse(x.n(), s))
                .collect::<Result<Vec<_>>>()?;
            let rows = sweep(&qs, "q", |q| expsum::v_subspace_identity(x, &forms, &bx, q, budget))?;
            v_rows.extend(rows.into_iter().map(|c| (None, forms.len(), c)));
        }
        clock.lap("instance checks");
    }

    let mut checks = BTreeMap::new();
    if !fourier_rows.is_empty() {
        let max_err = fourier_rows.iter().map(|r| r.3.abs_err).fold(0.0, f64::max);
        let max_im = fourier_rows.iter().map(|r| r.3.rhs_im.abs()).fold(0.0, f64::max);
        checks.insert("fourier_abs_err_below_1e-6".into(), fourier_rows.iter().all(|r| r.3.holds(1e-6)));
        checks.insert(
            "fourier_imaginary_below_1e-6".into(),
            fourier_rows.iter().all(|r| r.3.sampled || r.3.rhs_im.abs() < 1e-6),
        );
        log::info!("fourier: max abs err {max_err:e}, max |im| {max_im:e}");
    }
    if !v_rows.is_empty() {
        checks.insert("v_subspace_below_1e-6".into(), v_rows.iter().all(|r| r.2.abs_err < 1e-6 && r.2.lhs_im.abs() < 1e-6));
    }
    let summary = format!(
        "{} Fourier checks ({} sampled), {} V-subspace checks\n",
        fourier_rows.len(),
        fourier_rows.iter().filter(|r| r.3.sampled).count(),
        v_rows.len()
    );
    let mut tables = vec![table(
        "fourier.csv",
        &["trial", "n", "r", "q", "lhs", "rhs_re", "rhs_im", "abs_err", "sampled"],
        fourier_rows
            .iter()
            .map(|(t, n, r, c)| {
                vec![
                    t.map(|t| t.to_string()).unwrap_or_default(),
                    n.to_string(),
                    r.to_string(),
                    c.q.to_string(),
                    c.lhs.to_string(),
                    f(c.rhs_re),
                    f(c.rhs_im),
                    f(c.abs_err),
                    c.sampled.to_string(),
                ]
            })
            .collect(),
    )?];
    if !v_rows.is_empty() {
        tables.push(table(
            "vsubspace.csv",
            &["trial", "q", "k", "lhs", "rhs", "abs_err"],
            v_rows
                .iter()
                .map(|(t, k, c)| {
                    vec![
                        t.map(|t| t.to_string()).unwrap_or_default(),
                        c.q.to_string(),
                        k.to_string(),
                        f(c.lhs),
                        c.rhs.to_string(),
                        f(c.abs_err),
                    ]
                })
                .collect(),
        )?);
    }
    Ok(ModeOutput {
        result: json!({
            "fourier": fourier_rows.iter().map(|(t, n, r, c)| json!({"trial": t, "n": n, "r": r, "check": to_value(c)})).collect::<Vec<_>>(),
            "v_subspace": v_rows.iter().map(|(t, k, c)| json!({"trial": t, "k": k, "check": to_value(c)})).collect::<Vec<_>>(),
        }),
        checks,
        tables,
        summary,
    })
}

// ---------------------------------------------------------------------------

fn audit_options(cfg: &ExperimentConfig, keep_table: bool) -> AuditOptions {
    let mut dimension = cfg.dimension_options();
    if cfg.dimension.is_none() {
        dimension.max_k = 2;
    }
    AuditOptions {
        budget: cfg.budget(),
        census: cfg.census,
        dimension,
        keep_table,
        seed: cfg.seed(),
    }
}

fn audit_mode(cfg: &ExperimentConfig, inst: Option<&Instance>, clock: &mut Clock) -> Result<ModeOutput> {
    let seed = cfg.seed();
    let mut checks = BTreeMap::new();
    let mut tables = Vec::new();
    let mut result = serde_json::Map::new();
    let mut summary = String::new();

    if let Some(trials) = cfg.trials {
        let opts = audit_options(cfg, false);
        let ts: Vec<u64> = (0..trials).collect();
        let rows = sweep(&ts, "trial", |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, t));
            let (p, q, b) = loop {
                let p = *[3u64, 5].choose(&mut rng).unwrap();
                let q = *[11u64, 13, 17].choose(&mut rng).unwrap();
                let bs: Vec<u64> = (1..=10).filter(|b| (2 * b + 1) % p == 0 && p < 2 * b + 1 && 2 * b + 1 < q).collect();
                if let Some(&b) = bs.choose(&mut rng) {
                    break (p, q, b);
                }
            };
            let n = rng.gen_range(2..=3usize);
            let r = rng.gen_range(1..=n - 1);
            let x = random_system(&mut rng, n, r, 2..=3, 5)?;
            let rep = vdc::audit(&x, b, p, q, &opts)?;
            Ok((t, x.digest(), rep))
        })?;
        clock.lap("audit suite");
        let exact = rows.iter().all(|(_, _, r)| {
            let fl = &r.identity_flags;
            fl.decomposition && fl.zsum && fl.delta_support
        });
        let ineq = rows.iter().all(|(_, _, r)| r.identity_flags.sigma_bound && r.identity_flags.cauchy);
        checks.insert("identities_exact".into(), exact);
        checks.insert("inequalities_hold".into(), ineq);
        summary.push_str(&format!("{} random audits\n", rows.len()));
        tables.push(table(
            "audits.csv",
            &["trial", "n", "r", "b", "p", "q", "N", "count_x_fp", "all_identities"],
            rows.iter()
                .map(|(t, _, r)| {
                    let i = &r.inputs;
                    vec![
                        t.to_string(),
                        i.n.to_string(),
                        i.r.to_string(),
                        i.b.to_string(),
                        i.p.to_string(),
                        i.q.to_string(),
                        r.n_count.to_string(),
                        r.count_x_fp.to_string(),
                        r.identity_flags.all().to_string(),
                    ]
                })
                .collect(),
        )?);
        result.insert(
            "suite".into(),
            Value::Array(rows.iter().map(|(t, d, r)| json!({"trial": t, "instance": d, "audit": to_value(r)})).collect()),
        );
    }

    if let Some(trials) = cfg.law_trials {
        let ts: Vec<u64> = (0..trials).collect();
        let rows = sweep(&ts, "law-trial", |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed ^ 0x1a3, t));
            let n = rng.gen_range(1..=4usize);
            let d = rng.gen_range(3..=4u32);
            let form = random_poly(&mut rng, n, d, 9).homogeneous_part(d);
            let p = *[2i64, 3, 5, 7, 11, 13].choose(&mut rng).unwrap();
            let y: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
            let ok = vdc::leading_form_law(&form, p, &y)?;
            Ok((t, form, p, y, ok))
        })?;
        clock.lap("leading-form law");
        checks.insert("leading_form_law".into(), rows.iter().all(|r| r.4));
        summary.push_str(&format!(
            "leading-form law: {}/{} triples\n",
            rows.iter().filter(|r| r.4).count(),
            rows.len()
        ));
        result.insert(
            "leading_form_law".into(),
            Value::Array(
                rows.iter()
                    .map(|(t, f, p, y, ok)| json!({"trial": t, "form": f.to_string(), "p": p, "y": y, "holds": ok}))
                    .collect(),
            ),
        );
    }

    if let (Some(x), Some(b), Some(p), Some(q)) = (inst, cfg.b, cfg.p, cfg.q) {
        let opts = audit_options(cfg, true);
        if (2 * b + 1) % p == 0 {
            let rep = vdc::audit(x, b, p, q, &opts)?;
            clock.lap("audit");
            let fl = &rep.identity_flags;
            checks.insert("decomposition".into(), fl.decomposition);
            checks.insert("zsum".into(), fl.zsum);
            checks.insert("sigma_bound".into(), fl.sigma_bound);
            checks.insert("cauchy".into(), fl.cauchy);
            checks.insert("delta_support".into(), fl.delta_support);
            let mut buf = Vec::new();
            rep.write_delta_csv(&mut buf)?;
            tables.push(Table {
                name: "delta_table.csv".into(),
                csv: String::from_utf8(buf).expect("utf-8"),
            });
            summary.push_str(&format!(
                "N = {}, K = {}, #X(F_p) = {}, S = {}, Sigma = {}, Zsum = {}, sum Delta = {}\n",
                rep.n_count, rep.k, rep.count_x_fp, rep.s, rep.sigma, rep.zsum, rep.delta_sum
            ));
            result.insert("audit".into(), to_value(&rep));
        } else {
            let rep = vdc::audit_bracketed(x, b, p, q, &opts)?;
            clock.lap("bracketed audit");
            checks.insert("brackets".into(), rep.brackets());
            checks.insert(
                "identities_at_b1_b2".into(),
                rep.audit_b1.identity_flags.all() && rep.audit_b2.identity_flags.all(),
            );
            summary.push_str(&format!("bracketed B = {} by B1 = {}, B2 = {}\n", rep.b, rep.b1, rep.b2));
            result.insert("bracketed".into(), to_value(&rep));
        }
    }
    Ok(ModeOutput {
        result: Value::Object(result),
        checks,
        tables,
        summary,
    })
}

fn select_primes_mode(cfg: &ExperimentConfig, inst: Option<&Instance>, clock: &mut Clock) -> Result<ModeOutput> {
    let opts = PlanOptions {
        relaxed: cfg.relaxed,
        exact_identity: cfg.exact_identity,
        dimension: cfg.dimension_options(),
        ..PlanOptions::default()
    };
    let mut bs: Vec<u64> = sorted(&cfg.b_list);
    if let Some(b) = cfg.b {
        bs.push(b);
        bs = sorted(&bs);
    }
    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    let mut all_hold = true;
    for &(n, r) in &cfg.pairs {
        let (e_p, e_q) = vdc::plan_exponents(n, r);
        let thm1 = vdc::thm1_exponent(n, r);
        let hb = vdc::heath_brown_exponent(n);
        let mut plans = Vec::new();
        for &b in &bs {
            let x = inst.filter(|i| i.n() == n && i.r() == r);
            match vdc::select_primes(n, r, b, x, &opts) {
                Ok(plan) => {
                    all_hold &= plan.constraints_hold();
                    csv_rows.push(vec![
                        n.to_string(),
                        r.to_string(),
                        plan.b_used.to_string(),
                        f(e_p),
                        f(e_q),
                        f(thm1),
                        f(hb),
                        plan.p.to_string(),
                        plan.q.to_string(),
                    ]);
                    plans.push(json!({"b": b, "plan": to_value(&plan)}));
                }
                Err(e @ (Error::Precondition(_) | Error::NotFound(_))) => {
                    plans.push(json!({"b": b, "error": e.to_string()}));
                }
                Err(e) => return Err(e.context(format!("(n, r, B) = ({n}, {r}, {b})"))),
            }
        }
        if bs.is_empty() {
            csv_rows.push(vec![n.to_string(), r.to_string(), String::new(), f(e_p), f(e_q), f(thm1), f(hb), String::new(), String::new()]);
        }
        rows.push(json!({
            "n": n, "r": r, "e_p": e_p, "e_q": e_q,
            "thm1_exponent": thm1, "heath_brown_exponent": hb,
            "plans": plans,
        }));
    }
    clock.lap("plans");
    let mut checks = BTreeMap::new();
    checks.insert("plan_constraints_hold".into(), all_hold);
    Ok(ModeOutput {
        result: json!({"pairs": rows}),
        checks,
        tables: vec![table("plans.csv", &["n", "r", "b", "e_p", "e_q", "thm1", "heath_brown", "p", "q"], csv_rows)?],
        summary: format!("{} (n, r) pairs\n", cfg.pairs.len()),
    })
}

// ---------------------------------------------------------------------------

fn hooley(cfg: &ExperimentConfig, inst: &Instance, clock: &mut Clock) -> Result<ModeOutput> {
    let opts = cfg.dimension_options();
    let budget = cfg.budget();
    let qs = sorted(&cfg.q_list);
    let rows = sweep(&qs, "q", |q| counting::hooley_deligne_residual(inst, q, &opts, budget))?;
    clock.lap("residuals");
    let pts: Vec<(f64, f64)> = rows.iter().map(|h| (h.q as f64, h.residual.unsigned_abs() as f64)).collect();
    let fit = if pts.len() >= 3 { fit_exponent(&pts).ok() } else { None };
    let csv = table(
        "hooley.csv",
        &["q", "count", "main", "residual", "bound", "ratio"],
        rows.iter()
            .map(|h| vec![h.q.to_string(), h.count.to_string(), h.main.to_string(), h.residual.to_string(), opt_f(h.bound), opt_f(h.ratio)])
            .collect(),
    )?;
    let summary = match &fit {
        Some(fit) => format!("residual exponent {:.4} (r² {:.4}) over {} primes\n", fit.slope, fit.r2, fit.points_used),
        None => format!("{} primes, no fit\n", rows.len()),
    };
    let mut checks = BTreeMap::new();
    checks.insert("residual_within_bound_exponent".into(), rows.iter().all(|h| h.ratio.map_or(true, f64::is_finite)));
    Ok(ModeOutput {
        result: json!({"rows": to_value(&rows), "fit": to_value(&fit)}),
        checks,
        tables: vec![csv],
        summary,
    })
}

fn katz(cfg: &ExperimentConfig, inst: &Instance, clock: &mut Clock) -> Result<ModeOutput> {
    let opts = cfg.dimension_options();
    let budget = cfg.budget();
    let samples = cfg.samples.unwrap_or(50) as usize;
    let seed = cfg.seed();
    let qs = sorted(&cfg.q_list);
    let reports = sweep(&qs, "q", |q| {
        let a = expsum::sample_nonzero(inst.n(), q, samples, seed);
        expsum::katz_bound_report(inst, q, &a, &opts, budget)
    })?;
    clock.lap("katz sums");
    let mut tables = Vec::new();
    for rep in &reports {
        let mut buf = Vec::new();
        expsum::write_katz_csv(rep, &mut buf)?;
        tables.push(Table {
            name: format!("katz_q{}.csv", rep.q),
            csv: String::from_utf8(buf).expect("utf-8"),
        });
    }
    let pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.q as f64, r.max_ratio)).collect();
    let fit = if pts.len() >= 3 { fit_exponent(&pts).ok() } else { None };
    let flagged: usize = reports.iter().map(|r| r.rows.iter().filter(|x| x.flagged).count()).sum();
    let mut checks = BTreeMap::new();
    checks.insert("max_ratio_finite".into(), reports.iter().all(|r| r.max_ratio.is_finite()));
    let summary = format!(
        "max ratios {:?}; slope {}; {flagged} sums with δ(a) > 0\n",
        reports.iter().map(|r| round9(r.max_ratio)).collect::<Vec<_>>(),
        fit.as_ref().map(|f| format!("{:.4}", f.slope)).unwrap_or_else(|| "n/a".into())
    );
    Ok(ModeOutput {
        result: json!({
            "per_q": reports.iter().map(|r| json!({
                "q": r.q,
                "max_ratio": r.max_ratio,
                "flagged": r.rows.iter().filter(|x| x.flagged).count(),
                "rows": to_value(&r.rows),
            })).collect::<Vec<_>>(),
            "fit": to_value(&fit),
        }),
        checks,
        tables,
        summary,
    })
}

fn thm2(cfg: &ExperimentConfig, inst: &Instance, clock: &mut Clock) -> Result<ModeOutput> {
    let opts = PlanOptions {
        relaxed: cfg.relaxed,
        exact_identity: cfg.exact_identity,
        dimension: cfg.dimension_options(),
        ..PlanOptions::default()
    };
    let budget = cfg.budget();
    let bs = sorted(&cfg.b_list);
    let rows = sweep(&bs, "b", |b| {
        let plan = vdc::select_primes(inst.n(), inst.r(), b, Some(inst), &opts)?;
        let (count, residual, terms) = vdc::thm2_residual(inst, plan.b_used, plan.p, plan.q, budget)?;
        Ok((plan, count, residual, terms))
    })?;
    clock.lap("sweep");
    let cs: Vec<f64> = rows.iter().map(|r| r.2 / r.3.sum).collect();
    let c_max = cs.iter().copied().fold(0.0, f64::max);
    let mut checks = BTreeMap::new();
    checks.insert("c_finite".into(), cs.iter().all(|c| c.is_finite()));
    checks.insert("c_non_increasing".into(), cs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let csv = table(
        "thm2.csv",
        &["b", "p", "q", "count", "main", "residual", "error_sum", "c"],
        rows.iter()
            .zip(&cs)
            .map(|((plan, count, residual, terms), c)| {
                let n = inst.n() as i32;
                let main = (2.0 * plan.b_used as f64 + 1.0).powi(n) / ((plan.p * plan.q) as f64).powi(inst.r() as i32);
                vec![
                    plan.b_used.to_string(),
                    plan.p.to_string(),
                    plan.q.to_string(),
                    count.to_string(),
                    f(main),
                    f(*residual),
                    f(terms.sum),
                    f(*c),
                ]
            })
            .collect(),
    )?;
    Ok(ModeOutput {
        result: json!({
            "rows": rows.iter().zip(&cs).map(|((plan, count, residual, terms), c)| json!({
                "plan": to_value(plan), "count": count, "residual": residual,
                "error_terms": to_value(terms), "c": c,
            })).collect::<Vec<_>>(),
            "c": c_max,
        }),
        checks,
        tables: vec![csv],
        summary: format!("C = {c_max:.6} over B = {bs:?}; per-B ratios {:?}\n", cs.iter().map(|c| round9(*c)).collect::<Vec<_>>()),
    })
}

fn weighted(cfg: &ExperimentConfig, inst: &Instance, clock: &mut Clock) -> Result<ModeOutput> {
    let weight = cfg.weight.clone().expect("validated");
    let q = cfg.q.expect("validated");
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    let opts = WeightedOptions {
        budget: cfg.budget(),
        dimension: cfg.dimension_options(),
        ..WeightedOptions::default()
    };
    let bs = sorted(&cfg.b_list);
    let rows = sweep(&bs, "b", |b| counting::weighted_residual(inst, &weight, b as f64, q, &opts))?;
    clock.lap("weighted sums");
    let csv = table(
        "weighted.csv",
        &["b", "q", "lhs", "rhs_main", "residual", "error_term"],
        bs.iter()
            .zip(&rows)
            .map(|(b, w)| vec![b.to_string(), q.to_string(), f(w.lhs), f(w.rhs_main), f(w.residual), opt_f(w.error_term)])
            .collect(),
    )?;
    let mut checks = BTreeMap::new();
    checks.insert(
        "residual_within_error_term".into(),
        rows.iter().all(|w| w.error_term.map_or(true, |e| w.residual.abs() <= e)),
    );
    Ok(ModeOutput {
        result: json!({
            "q": q,
            "weight": to_value(&weight),
            "rows": bs.iter().zip(&rows).map(|(b, w)| json!({"b": b, "residual": to_value(w)})).collect::<Vec<_>>(),
        }),
        checks,
        tables: vec![csv],
        summary: format!("{} scales at q = {q}\n", rows.len()),
    })
}
