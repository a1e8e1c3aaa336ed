use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use vertex_sew::completion::{g_k_eval_functional, FunctionalG};
use vertex_sew::correlator::{reconstruct_rational, series_correlator, RationalCorrelator};
use vertex_sew::seminorm::seminorm_sweep;
use vertex_sew::sewing::{diamond, sewing_identity_check, Disk};
use vertex_sew::vertex::{verify_axioms, Algebra};
use vertex_sew::{DualVector, GradedVector, Partition, Sector, TruncationPolicy, C64};

use crate::config::{scale_factor, vector_c, vector_q, ConfigError, RunConfig};

pub enum Outcome {
    /// A check ran and failed, or the run could not produce results.
    Failed(String),
    Usage(String),
}

impl From<ConfigError> for Outcome {
    fn from(e: ConfigError) -> Self {
        Outcome::Usage(e.0)
    }
}

impl From<vertex_sew::Error> for Outcome {
    fn from(e: vertex_sew::Error) -> Self {
        Outcome::Failed(e.to_string())
    }
}

type Run = Result<(), Outcome>;

/// Full precision: 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

pub fn emit(out: Option<&Path>, text: &str) -> Run {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Outcome::Usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn algebra(cfg: &RunConfig) -> Result<Algebra, Outcome> {
    Ok(Algebra::new(cfg.algebra.clone())?)
}

pub fn axioms(cfg: &RunConfig, out: Option<&Path>) -> Run {
    let max_weight = cfg.axioms.max_weight.unwrap_or(6);
    let report = verify_axioms(&cfg.algebra, max_weight)?;
    let passed = report.passed();
    let mut value = serde_json::to_value(&report).expect("serializable");
    value["passed"] = json!(passed);
    emit(out, &(serde_json::to_string_pretty(&value).expect("serializable") + "\n"))?;
    if passed {
        Ok(())
    } else {
        let names: Vec<String> = report.failures().map(|c| format!("{} at weight {}", c.axiom, c.weight)).collect();
        Err(Outcome::Failed(format!("axiom checks failed: {}", names.join(", "))))
    }
}

pub fn correlator(cfg: &RunConfig, out: Option<&Path>) -> Run {
    let alg = algebra(cfg)?;
    let c = &cfg.correlator;
    let sector = cfg.sector();
    let us = c
        .insertions
        .iter()
        .map(|u| vector_q(u, Sector::Vacuum))
        .collect::<Result<Vec<_>, _>>()?;
    let vp = DualVector::from_vector(vector_q(&c.dual, sector)?);
    let v = vector_q(&c.vector, sector)?;
    let r = reconstruct_rational(&alg, &vp, &us, &v)?;
    emit(out, &(r.to_json_string() + "\n"))?;
    if let Some(path) = &c.series_out {
        let s = series_correlator(&alg, &vp, &us, &v, c.series_cap)?;
        let terms: Vec<_> = s
            .terms
            .iter()
            .map(|(e, q)| json!([e, q.numer().to_string(), q.denom().to_string()]))
            .collect();
        let dump = json!({ "cap": s.cap, "terms": terms });
        emit(Some(path), &(serde_json::to_string_pretty(&dump).expect("serializable") + "\n"))?;
    }
    Ok(())
}

/// `k` points inside the unit disk, pairwise apart, from the seed.
fn sample_points(rng: &mut ChaCha8Rng, k: usize) -> Vec<C64> {
    let mut pts: Vec<C64> = Vec::new();
    while pts.len() < k {
        let z = C64::from_polar(rng.gen_range(0.1..0.8), rng.gen_range(0.0..std::f64::consts::TAU));
        if pts.iter().all(|w| (w - z).norm() > 0.1) {
            pts.push(z);
        }
    }
    pts
}

fn points(given: &Option<Vec<[f64; 2]>>, rng: &mut ChaCha8Rng, k: usize, what: &str) -> Result<Vec<C64>, Outcome> {
    match given {
        Some(p) if p.len() == k => Ok(p.iter().map(|x| C64::new(x[0], x[1])).collect()),
        Some(p) => Err(Outcome::Usage(format!("{what} has {} points, arity is {k}", p.len()))),
        None => Ok(sample_points(rng, k)),
    }
}

struct Row {
    disk: Disk,
    valid: bool,
    values: Vec<f64>,
    accepted: bool,
}

fn grid_rows<F>(disks: &[(C64, f64, f64)], include_invalid: bool, eval: F) -> Result<Vec<Row>, Outcome>
where
    F: Fn(&Disk) -> vertex_sew::Result<(Vec<f64>, bool)> + Sync,
{
    let candidates: Vec<(Disk, bool)> = disks
        .iter()
        .map(|&(z, r1, r2)| {
            let d = Disk::new(z, r1, r2);
            let ok = d.validate().is_ok();
            (d, ok)
        })
        .filter(|(_, ok)| *ok || include_invalid)
        .collect();
    if !candidates.iter().any(|(_, ok)| *ok) {
        return Err(Outcome::Failed("no valid disk in the grid".into()));
    }
    let rows: Vec<vertex_sew::Result<Row>> = candidates
        .par_iter()
        .map(|(d, ok)| {
            if !*ok {
                return Ok(Row {
                    disk: *d,
                    valid: false,
                    values: Vec::new(),
                    accepted: false,
                });
            }
            let (values, accepted) = eval(d)?;
            Ok(Row {
                disk: *d,
                valid: true,
                values,
                accepted,
            })
        })
        .collect();
    Ok(rows.into_iter().collect::<vertex_sew::Result<Vec<_>>>()?)
}

fn disk_fields(d: &Disk) -> String {
    format!("{},{},{},{}", num(d.z.re), num(d.z.im), num(d.r1), num(d.r2))
}

pub fn sew_check(cfg: &RunConfig, out: Option<&Path>, include_invalid: bool) -> Run {
    let alg = algebra(cfg)?;
    let sc = &cfg.sew_check;
    let sector = cfg.sector();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let zeta = points(&sc.zeta, &mut rng, sc.k, "zeta")?;
    let eta = points(&sc.eta, &mut rng, sc.l, "eta")?;
    let a = GradedVector::<C64>::modes(&[1]);
    let v = GradedVector::<C64>::basis(Partition::new(vec![1]).expect("positive"), sector);
    let dual = match &sc.dual {
        Some(d) => cfg.dual_c(d)?,
        None => DualVector::basis(Partition::empty(), sector),
    };
    let lambda = FunctionalG::new(dual, scale_factor(&sc.s)?)?;
    let us = vec![a.clone(); sc.k];
    let vs = vec![a.clone(); sc.l];
    let policy = &cfg.policy;
    let rows = grid_rows(&sc.grid.disks()?, include_invalid, |d| {
        let r = sewing_identity_check(&alg, &lambda, &us, &a, &vs, &v, d, &zeta, &eta, policy)?;
        Ok((vec![r.relative_error, r.tail.fitted_ratio], r.tail.accepted))
    })?;
    let mut csv = String::from("z_re,z_im,r1,r2,valid,rel_error,ratio,accepted\n");
    for row in &rows {
        let vals: Vec<String> = (0..2).map(|i| num(row.values.get(i).copied().unwrap_or(f64::NAN))).collect();
        writeln!(csv, "{},{},{},{}", disk_fields(&row.disk), row.valid, vals.join(","), row.accepted).expect("string");
    }
    emit(out, &csv)
}

pub fn converge_scan(cfg: &RunConfig, out: Option<&Path>, include_invalid: bool) -> Run {
    let alg = algebra(cfg)?;
    let cs = &cfg.converge_scan;
    let sector = cfg.sector();
    let u = vector_c(&cs.u, Sector::Vacuum)?;
    let us = cs
        .insertions
        .iter()
        .map(|x| vector_c(x, Sector::Vacuum))
        .collect::<Result<Vec<_>, _>>()?;
    let v = vector_c(&cs.vector, sector)?;
    let point: Vec<C64> = cs.point.iter().map(|x| C64::new(x[0], x[1])).collect();
    if point.len() != us.len() {
        return Err(Outcome::Usage(format!("point has {} coordinates for {} insertions", point.len(), us.len())));
    }
    let lambda = FunctionalG::new(cfg.dual_c(&cs.dual)?, scale_factor(&cs.s)?)?;
    let policy = &cfg.policy;
    let rows = grid_rows(&cs.grid.disks()?, include_invalid, |d| {
        let dia = diamond(&u, &lambda, d, policy)?;
        let r = g_k_eval_functional(&alg, &dia, &us, &v, &point, policy)?;
        Ok((vec![r.fitted_ratio], r.accepted))
    })?;
    let mut csv = String::from("z_re,z_im,r1,r2,ratio,accepted\n");
    for row in &rows {
        let ratio = num(row.values.first().copied().unwrap_or(f64::NAN));
        writeln!(csv, "{},{},{}", disk_fields(&row.disk), ratio, row.accepted).expect("string");
    }
    emit(out, &csv)
}

pub fn seminorm(cfg: &RunConfig, out: Option<&Path>) -> Run {
    let s = &cfg.seminorm;
    let path = s
        .correlator
        .as_ref()
        .ok_or_else(|| Outcome::Usage("seminorm needs a correlator file".into()))?;
    if s.n_min == 0 || s.n_max < s.n_min {
        return Err(Outcome::Usage(format!("empty index range {}..={}", s.n_min, s.n_max)));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Outcome::Usage(format!("{}: {e}", path.display())))?;
    let f = RationalCorrelator::from_json_str(&text).map_err(|e| Outcome::Usage(format!("{}: {e}", path.display())))?;
    let mut csv = String::from("n,seminorm,points\n");
    for e in seminorm_sweep(&f, s.n_max, s.region).into_iter().filter(|e| e.n >= s.n_min) {
        writeln!(csv, "{},{},{}", e.n, num(e.value), e.points).expect("string");
    }
    emit(out, &csv)
}

/// Applies flag overrides.
pub fn apply_flags(cfg: &mut RunConfig, seed: Option<u64>, max_weight: Option<u32>, tol: Option<f64>) {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(w) = max_weight {
        cfg.policy = TruncationPolicy { max_weight: w, ..cfg.policy.clone() };
        cfg.axioms.max_weight = Some(w);
    }
    if let Some(t) = tol {
        cfg.policy.tolerance = t;
    }
}
