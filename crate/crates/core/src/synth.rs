//! Synthetic episodes and the argmax-versus-refinement benchmark.
//!
//! An episode samples a sentence from a grammar, expands each token into a
//! run of frames with geometric durations and corrupts every frame into a
//! probability row `(1 - epsilon) * onehot + epsilon * d`, where `d` is a
//! symmetric Dirichlet draw.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{Decoder, GepConfig, ProbMatrix};
use crate::grammar::{sample_with, NodeKind, Pcfg, Sym};
use crate::metrics::{confusion, evaluate};
use crate::{Error, Result, Sentence, SIL};

/// Frame shares in percent of the six primary-intention classes `PI0..PI5`.
pub const CLASS_FRAME_SHARES: [f64; 6] = [30.25, 2.07, 41.21, 12.05, 11.44, 2.98];

/// Derivation depth limit used when sampling episode sentences.
pub const SAMPLE_DEPTH: usize = 256;

/// A small Calot-triangle workflow over `SIL` and `PI0..PI5`:
///
/// ```text
/// S -> SIL PI5 X PI4 Y SIL
/// X -> PI0 : 0.6 | PI3 : 0.4
/// Y -> PI2 : 0.7 | PI1 : 0.3
/// ```
///
/// Terminal ids are `SIL = 0` and `PI<k> = k + 1`.
pub fn reference_grammar() -> Pcfg {
    let mut g = Pcfg::new("calot");
    let sil = g.add_terminal(SIL);
    let pi: Vec<usize> = (0..6).map(|k| g.add_terminal(format!("PI{k}"))).collect();
    let s = g.add_nonterminal("S", NodeKind::And);
    let x = g.add_nonterminal("X", NodeKind::Or);
    let y = g.add_nonterminal("Y", NodeKind::Or);
    g.set_start(s);
    g.add_rule(
        s,
        vec![
            Sym::T(sil),
            Sym::T(pi[5]),
            Sym::N(x),
            Sym::T(pi[4]),
            Sym::N(y),
            Sym::T(sil),
        ],
        1.0,
    );
    g.add_rule(x, vec![Sym::T(pi[0])], 0.6);
    g.add_rule(x, vec![Sym::T(pi[3])], 0.4);
    g.add_rule(y, vec![Sym::T(pi[2])], 0.7);
    g.add_rule(y, vec![Sym::T(pi[1])], 0.3);
    g
}

/// Per-class geometric segment durations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    /// Mean frames per segment, indexed by class; each at least 1.
    pub mean_frames: Vec<f64>,
}

impl DurationModel {
    pub fn new(mean_frames: Vec<f64>) -> Result<Self> {
        if let Some(m) = mean_frames.iter().find(|m| !(**m >= 1.0 && m.is_finite())) {
            return Err(Error::InvalidParam(format!(
                "mean duration {m} must be >= 1"
            )));
        }
        Ok(DurationModel { mean_frames })
    }

    /// Means proportional to [`CLASS_FRAME_SHARES`], with the largest class at
    /// `max_mean` frames.
    pub fn from_shares(max_mean: f64) -> Result<Self> {
        let top = CLASS_FRAME_SHARES.iter().copied().fold(0.0, f64::max);
        Self::new(
            CLASS_FRAME_SHARES
                .iter()
                .map(|s| (s / top * max_mean).max(1.0))
                .collect(),
        )
    }

    /// Draws a duration of at least one frame with mean `mean_frames[class]`.
    pub fn sample<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> usize {
        let p = 1.0 / self.mean_frames[class];
        if p >= 1.0 {
            return 1;
        }
        let extra = Geometric::new(p).expect("p in (0, 1)").sample(rng);
        1 + extra as usize
    }
}

/// Frame-independent corruption of one-hot rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Mass moved from the true class to a random simplex draw.
    pub epsilon: f64,
    /// Dirichlet concentration of the draw; large values approach uniform.
    pub concentration: f64,
    /// Base seed; benchmark episode `i` uses seed `seed + i`.
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParam(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if self.concentration.is_nan() || self.concentration <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "concentration {} must be > 0",
                self.concentration
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    /// Sampled sentence in grammar terminal ids, `SIL` included.
    pub source_sentence: Sentence,
    /// The same sentence in matrix class ids, `SIL` removed.
    pub sentence: Sentence,
    pub gt_frames: Vec<usize>,
    pub matrix: ProbMatrix,
}

/// Matrix classes of a grammar: its terminals without `SIL`, in order.
pub fn class_names(g: &Pcfg) -> Vec<String> {
    g.terminals()
        .iter()
        .filter(|t| *t != SIL)
        .cloned()
        .collect()
}

/// Generates one episode. The sentence and durations come from stream 0 of
/// a ChaCha8 generator seeded with `seed`, the noise from stream 1.
pub fn make_episode(
    g: &Pcfg,
    dur: &DurationModel,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Episode> {
    noise.validate()?;
    let names = class_names(g);
    let k = names.len();
    if k < 2 {
        return Err(Error::InvalidParam(
            "grammar needs at least two non-SIL terminals".into(),
        ));
    }
    if dur.mean_frames.len() != k {
        return Err(Error::InvalidParam(format!(
            "{} duration means for {k} classes",
            dur.mean_frames.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = sample_with(g, &mut rng, SAMPLE_DEPTH)?;
    let class_of = |t: usize| names.iter().position(|n| *n == g.terminals()[t]);
    let sentence: Sentence = source.iter().filter_map(|&t| class_of(t)).collect();
    if sentence.is_empty() {
        return Err(Error::InvalidSentence(
            "sampled sentence has no non-SIL tokens".into(),
        ));
    }
    if sentence.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSentence(
            "sampled sentence repeats a token back to back".into(),
        ));
    }
    let mut gt_frames = Vec::new();
    for &c in sentence.iter() {
        let d = dur.sample(c, &mut rng);
        gt_frames.extend(std::iter::repeat_n(c, d));
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let gamma = Gamma::new(noise.concentration, 1.0)
        .map_err(|e| Error::InvalidParam(format!("concentration: {e}")))?;
    let mut data = Vec::with_capacity(gt_frames.len() * k);
    let mut draw = vec![0.0; k];
    for &c in &gt_frames {
        for d in draw.iter_mut() {
            *d = gamma.sample(&mut noise_rng);
        }
        let sum: f64 = draw.iter().sum();
        for (j, d) in draw.iter().enumerate() {
            let spread = if sum > 0.0 { d / sum } else { 1.0 / k as f64 };
            let hot = if j == c { 1.0 - noise.epsilon } else { 0.0 };
            data.push(hot + noise.epsilon * spread);
        }
    }
    let matrix = ProbMatrix::with_names(gt_frames.len(), k, data, names)?;
    Ok(Episode {
        source_sentence: source,
        sentence,
        gt_frames,
        matrix,
    })
}

fn micro(pred: &[usize], gt: &[usize], k: usize) -> Result<f64> {
    Ok(evaluate(&confusion(pred, gt, k)?)?.micro_pr)
}

/// One noise level of a benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub noise: f64,
    pub n: usize,
    pub baseline_micro: f64,
    pub refined_micro: f64,
    pub delta: f64,
    /// Bootstrap 95% percentile interval of the mean per-episode delta.
    pub ci95: [f64; 2],
    pub mean_parse_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>8} {:>6} {:>10} {:>10} {:>9} {:>20} {:>10}\n",
            "noise", "n", "baseline", "refined", "delta", "ci95", "parse_ms"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>8.4} {:>6} {:>10.4} {:>10.4} {:>+9.4} {:>20} {:>10.3}\n",
                r.noise,
                r.n,
                r.baseline_micro,
                r.refined_micro,
                r.delta,
                format!("[{:+.4}, {:+.4}]", r.ci95[0], r.ci95[1]),
                r.mean_parse_ms
            ));
        }
        out
    }
}

/// Number of bootstrap resamples behind [`BenchRow::ci95`].
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

fn bootstrap_ci(values: &[f64], seed: u64) -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let n = values.len();
    let mut means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * (BOOTSTRAP_RESAMPLES - 1) as f64).round()) as usize];
    [at(0.025), at(0.975)]
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))
}

/// Mean argmax micro accuracy over episodes `noise.seed .. noise.seed + n`.
pub fn baseline_accuracy(
    g: &Pcfg,
    n: usize,
    dur: &DurationModel,
    noise: &NoiseModel,
    jobs: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParam("need at least one episode".into()));
    }
    let k = class_names(g).len();
    let accs = pool(jobs)?.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let ep = make_episode(g, dur, noise, noise.seed.wrapping_add(i as u64))?;
                micro(&ep.matrix.argmax_labels(), &ep.gt_frames, k)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(accs.iter().sum::<f64>() / n as f64)
}

/// Finds the `epsilon` whose mean baseline accuracy is closest to `target`
/// by bisection. With the seeds fixed, accuracy is non-increasing in
/// `epsilon`, since every frame sees the same simplex draw at every level.
pub fn calibrate_epsilon(
    g: &Pcfg,
    n: usize,
    dur: &DurationModel,
    noise: &NoiseModel,
    target: f64,
    jobs: usize,
) -> Result<f64> {
    let at = |eps: f64| {
        let nm = NoiseModel {
            epsilon: eps,
            ..noise.clone()
        };
        baseline_accuracy(g, n, dur, &nm, jobs)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if at(hi)? >= target {
        return Ok(hi);
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a_lo, a_hi) = (at(lo)?, at(hi)?);
    Ok(if (a_lo - target).abs() <= (a_hi - target).abs() {
        lo
    } else {
        hi
    })
}

/// Compares argmax labels with grammar-refined labels over `n` episodes per
/// noise level. Episodes are generated and parsed on `jobs` threads; every
/// field but `mean_parse_ms` is deterministic.
pub fn run_benchmark(
    g: &Pcfg,
    n: usize,
    dur: &DurationModel,
    noise_grid: &[NoiseModel],
    cfg: &GepConfig,
    jobs: usize,
) -> Result<BenchReport> {
    if n == 0 {
        return Err(Error::InvalidParam("need at least one episode".into()));
    }
    cfg.validate()?;
    let decoder = Decoder::new(g)?;
    let k = class_names(g).len();
    let workers = pool(jobs)?;
    let mut rows = Vec::with_capacity(noise_grid.len());
    for noise in noise_grid {
        noise.validate()?;
        let per_episode = workers.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let ep = make_episode(g, dur, noise, noise.seed.wrapping_add(i as u64))?;
                    let m = &ep.matrix;
                    let base = micro(&m.argmax_labels(), &ep.gt_frames, k)?;
                    let start = Instant::now();
                    let parsed = decoder.parse(m, cfg)?;
                    let ms = start.elapsed().as_secs_f64() * 1e3;
                    let refined = micro(&parsed.frame_labels, &ep.gt_frames, k)?;
                    Ok((base, refined, ms))
                })
                .collect::<Result<Vec<(f64, f64, f64)>>>()
        })?;
        let mean =
            |f: fn(&(f64, f64, f64)) -> f64| per_episode.iter().map(f).sum::<f64>() / n as f64;
        let deltas: Vec<f64> = per_episode.iter().map(|(b, r, _)| r - b).collect();
        let baseline_micro = mean(|e| e.0);
        let refined_micro = mean(|e| e.1);
        rows.push(BenchRow {
            noise: noise.epsilon,
            n,
            baseline_micro,
            refined_micro,
            delta: refined_micro - baseline_micro,
            ci95: bootstrap_ci(&deltas, noise.seed),
            mean_parse_ms: mean(|e| e.2),
        });
    }
    Ok(BenchReport { rows })
}
