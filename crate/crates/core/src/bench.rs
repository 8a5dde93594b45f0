//! Seeded Monte-Carlo comparison of the closed-form, gradient-descent and
//! fine-tuned estimators on noisy synthetic pairs.
//!
//! Every trial owns a ChaCha stream keyed by `(seed, d, N, trial)`, so the
//! records do not depend on scheduling or thread count.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt17, sig17};
use crate::isometry::{apply, random_hunitary, translation_matrix, HUnitary, TranslationParam};
use crate::lorentz::{lift, PointSet};
use crate::procrustes::{align, discrepancy_after, Weights};
use crate::refine::{gd_align, refine, GdConfig};

fn default_outlier_k() -> f64 {
    5.0
}

/// Monte-Carlo experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub noise_sigma: f64,
    #[serde(default = "default_outlier_k")]
    pub outlier_k: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gd: GdConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 4],
            sizes: (5..=10).collect(),
            trials: 1000,
            noise_sigma: 1e-2,
            outlier_k: default_outlier_k(),
            seed: 0,
            gd: GdConfig::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dims.is_empty() || self.dims.iter().any(|&d| d == 0 || d > u16::MAX as usize) {
            return bad(format!(
                "dims must be nonempty and within 1..=65535, got {:?}",
                self.dims
            ));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n == 0 || n > u16::MAX as usize) {
            return bad(format!(
                "sizes must be nonempty and within 1..=65535, got {:?}",
                self.sizes
            ));
        }
        if self.trials == 0 || self.trials > u32::MAX as usize {
            return bad(format!(
                "trials must be within 1..=2^32-1, got {}",
                self.trials
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise_sigma must be nonnegative, got {}",
                self.noise_sigma
            ));
        }
        if !(self.outlier_k.is_finite() && self.outlier_k > 0.0) {
            return bad(format!(
                "outlier_k must be positive, got {}",
                self.outlier_k
            ));
        }
        self.gd.validate()
    }
}

/// Estimators compared by the benchmark. `Baseline` is the ground truth
/// isometry applied to the noisy data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Baseline,
    P,
    Gd,
    GdP,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Baseline, Method::P, Method::Gd, Method::GdP];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::P => "P",
            Method::Gd => "GD",
            Method::GdP => "GD+P",
        }
    }
}

/// Outcome of one synthetic trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub e_baseline: f64,
    pub e_p: f64,
    pub e_gd: f64,
    pub e_gdp: f64,
    pub gd_iterations: usize,
    pub gd_converged: bool,
}

impl TrialRecord {
    pub fn value(&self, method: Method) -> f64 {
        match method {
            Method::Baseline => self.e_baseline,
            Method::P => self.e_p,
            Method::Gd => self.e_gd,
            Method::GdP => self.e_gdp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    #[serde(serialize_with = "sig17")]
    pub q1: f64,
    #[serde(serialize_with = "sig17")]
    pub q2: f64,
    #[serde(serialize_with = "sig17")]
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodStats {
    pub method: &'static str,
    #[serde(flatten)]
    pub quartiles: Quartiles,
    pub outlier_count: usize,
    #[serde(serialize_with = "sig17")]
    pub outlier_prob: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub d: usize,
    pub n: usize,
    pub methods: Vec<MethodStats>,
}

impl CellSummary {
    pub fn get(&self, method: Method) -> &MethodStats {
        self.methods
            .iter()
            .find(|m| m.method == method.name())
            .expect("every method is summarized")
    }
}

/// Per-cell statistics plus a per-method pool over all cells.
///
/// Outliers are judged within each cell against that cell's quartiles; the
/// pooled count is the sum over cells. Pooled quartiles are taken over all
/// values of the method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    #[serde(serialize_with = "sig17")]
    pub outlier_k: f64,
    /// GD runs that hit `max_iters` before the stopping rule fired.
    pub gd_nonconverged: usize,
    pub cells: Vec<CellSummary>,
    pub pooled: Vec<MethodStats>,
}

impl BenchmarkSummary {
    pub fn pooled(&self, method: Method) -> &MethodStats {
        self.pooled
            .iter()
            .find(|m| m.method == method.name())
            .expect("every method is summarized")
    }
}

/// Median-exclusive quartiles: `Q2` is the median, `Q1`/`Q3` the medians of
/// the values strictly below/above the middle position.
pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    if values.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 1 {
        let v = sorted[0];
        return Ok(Quartiles {
            q1: v,
            q2: v,
            q3: v,
        });
    }
    let half = n / 2;
    Ok(Quartiles {
        q1: median_sorted(&sorted[..half]),
        q2: median_sorted(&sorted),
        q3: median_sorted(&sorted[n - half..]),
    })
}

fn median_sorted(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Number of values with `|v - Q2| > k * |Q3 - Q1| / 2`. Non-finite values
/// (failed runs) always count.
pub fn count_outliers(values: &[f64], k: f64) -> Result<usize> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "outlier k must be positive, got {k}"
        )));
    }
    let q = quartiles(values)?;
    let threshold = k * 0.5 * (q.q3 - q.q1).abs();
    Ok(values
        .iter()
        .filter(|v| !v.is_finite() || (*v - q.q2).abs() > threshold)
        .count())
}

fn method_stats(method: Method, values: &[f64], outlier_count: usize) -> Result<MethodStats> {
    Ok(MethodStats {
        method: method.name(),
        quartiles: quartiles(values)?,
        outlier_count,
        outlier_prob: outlier_count as f64 / values.len() as f64,
        trials: values.len(),
    })
}

/// A synthetic noisy pair and the isometry that generated it.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub target: PointSet,
    pub source: PointSet,
    pub truth: HUnitary,
}

/// Draws `R*`, then for each point `z_n ~ N(0, I)` and `eps_n ~ sigma N(0, I)`,
/// and sets `source_n = Q(z_n)`, `target_n = R* R_{eps_n} source_n`.
pub fn synth_pair<G: Rng + ?Sized>(
    n: usize,
    d: usize,
    sigma: f64,
    rng: &mut G,
) -> Result<SyntheticPair> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig(format!(
            "need n, d >= 1, got n={n}, d={d}"
        )));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    let truth = random_hunitary(d, rng);
    let mut source = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for _ in 0..n {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eps = DVector::from_fn(d, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
        let x = lift(&z)?;
        let noisy = apply(&translation_matrix(&TranslationParam::new(eps)?), &x)?;
        target.push(apply(&truth, &noisy)?);
        source.push(x);
    }
    Ok(SyntheticPair {
        target: PointSet::new(target)?,
        source: PointSet::new(source)?,
        truth,
    })
}

/// Independent stream for one trial.
pub fn trial_rng(seed: u64, d: usize, n: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((d as u64) << 48) | ((n as u64) << 32) | trial as u64);
    rng
}

/// Runs all estimators on one synthetic pair. Gradient-descent failures are
/// recorded as an infinite discrepancy.
pub fn run_trial(cfg: &BenchmarkConfig, d: usize, n: usize, trial: usize) -> Result<TrialRecord> {
    let mut rng = trial_rng(cfg.seed, d, n, trial);
    let pair = synth_pair(n, d, cfg.noise_sigma, &mut rng)?;
    let e_baseline = discrepancy_after(&pair.target, &pair.source, &pair.truth)?;
    let closed = align(&pair.target, &pair.source, &Weights::uniform(n))?;

    let (e_gd, gd_iterations, gd_converged) = match gd_align(&pair.target, &pair.source, &cfg.gd) {
        Ok(run) => (run.alignment.residual, run.iterations, run.converged),
        Err(_) => (f64::INFINITY, 0, false),
    };
    let e_gdp = refine(&pair.target, &pair.source, &closed.isometry, &cfg.gd)
        .map(|run| run.alignment.residual)
        .unwrap_or(f64::INFINITY);

    Ok(TrialRecord {
        d,
        n,
        trial,
        e_baseline,
        e_p: closed.residual,
        e_gd,
        e_gdp,
        gd_iterations,
        gd_converged,
    })
}

/// Output of [`run_benchmark`]; records are sorted by `(d, N, trial)`.
#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub records: Vec<TrialRecord>,
    pub summary: BenchmarkSummary,
}

/// Runs every `(d, N, trial)` on the current rayon pool and aggregates.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let mut dims = cfg.dims.clone();
    dims.sort_unstable();
    dims.dedup();
    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();

    let jobs: Vec<(usize, usize, usize)> = dims
        .iter()
        .flat_map(|&d| {
            sizes
                .iter()
                .flat_map(move |&n| (0..cfg.trials).map(move |t| (d, n, t)))
        })
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(d, n, t)| run_trial(cfg, d, n, t))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&records, cfg.outlier_k)?;
    Ok(BenchmarkOutput { records, summary })
}

/// Aggregates records (in `(d, N, trial)` order) into per-cell and pooled statistics.
pub fn summarize(records: &[TrialRecord], outlier_k: f64) -> Result<BenchmarkSummary> {
    if records.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut cells = Vec::new();
    let mut pooled_counts = [0usize; 4];
    for chunk in records.chunk_by(|a, b| (a.d, a.n) == (b.d, b.n)) {
        let mut methods = Vec::with_capacity(4);
        for (slot, method) in Method::ALL.into_iter().enumerate() {
            let values: Vec<f64> = chunk.iter().map(|r| r.value(method)).collect();
            let count = count_outliers(&values, outlier_k)?;
            pooled_counts[slot] += count;
            methods.push(method_stats(method, &values, count)?);
        }
        cells.push(CellSummary {
            d: chunk[0].d,
            n: chunk[0].n,
            methods,
        });
    }
    let pooled = Method::ALL
        .into_iter()
        .zip(pooled_counts)
        .map(|(method, count)| {
            let values: Vec<f64> = records.iter().map(|r| r.value(method)).collect();
            method_stats(method, &values, count)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkSummary {
        outlier_k,
        gd_nonconverged: records.iter().filter(|r| !r.gd_converged).count(),
        cells,
        pooled,
    })
}

pub const TRIALS_HEADER: [&str; 9] = [
    "d",
    "N",
    "trial",
    "e_baseline",
    "e_P",
    "e_GD",
    "e_GDP",
    "gd_iterations",
    "gd_converged",
];

/// One CSV row per record, floats at 17 significant digits.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for r in records {
        w.write_record([
            r.d.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            fmt17(r.e_baseline),
            fmt17(r.e_p),
            fmt17(r.e_gd),
            fmt17(r.e_gdp),
            r.gd_iterations.to_string(),
            r.gd_converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(summary: &BenchmarkSummary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}
