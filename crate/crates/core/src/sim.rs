//! Monte Carlo study of the joint selection procedure: data from a known
//! joint model on a simplex-centroid x {-1, 1} design, selection, and
//! classification of the selected models against the truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::selection::{
    select_joint, CriterionSpec, DispCriterion, InitialTest, MeanCriterion, SelectionConfig,
};
use crate::terms::{cross, noise_monomials, scheffe_terms, simplex_centroid, DesignTable, MixtureOrder, NoiseOrder, Term, TermSet};

/// True mean and log-dispersion models with their coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub mean: Vec<(Term, f64)>,
    pub disp: Vec<(Term, f64)>,
}

impl TruthSpec {
    /// Mean b1 x1 + b2 x2 + b3 x3 + b13 x1 x3 + g3z x3 z and log dispersion
    /// g1 x1 + g2 x2 + g3 x3 + g13 x1 x3, from (b1, b2, b3, b13, g3z, g1, g2, g3, g13).
    pub fn from_parameters(p: [f64; 9]) -> Self {
        let x = Term::x;
        TruthSpec {
            mean: vec![
                (x(0), p[0]),
                (x(1), p[1]),
                (x(2), p[2]),
                (x(0).times_x(2), p[3]),
                (x(2).times_z(0), p[4]),
            ],
            disp: vec![(x(0), p[5]), (x(1), p[6]), (x(2), p[7]), (x(0).times_x(2), p[8])],
        }
    }

    pub fn mean_terms(&self) -> TermSet {
        self.mean.iter().map(|(t, _)| t.clone()).collect()
    }

    pub fn disp_terms(&self) -> TermSet {
        self.disp.iter().map(|(t, _)| t.clone()).collect()
    }

    fn eval(model: &[(Term, f64)], x: &[f64], z: &[f64]) -> Result<f64> {
        model.iter().try_fold(0.0, |acc, (t, c)| Ok(acc + c * t.eval(x, z)?))
    }

    pub fn mean_at(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        Self::eval(&self.mean, x, z)
    }

    pub fn dispersion_at(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        Ok(Self::eval(&self.disp, x, z)?.exp())
    }
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec::from_parameters([15.0, 15.0, 10.0, 35.0, 25.0, 0.4, 0.5, 0.5, 3.5])
    }
}

/// Simplex-centroid points in three components crossed with z in {-1, 1},
/// repeated `replicates` times.
pub fn study_design(replicates: usize) -> Result<DesignTable> {
    if replicates == 0 {
        return Err(Error::Argument("replicates must be at least 1".into()));
    }
    let base = simplex_centroid(3)?;
    let mut mixture = Vec::new();
    let mut process = Vec::new();
    for _ in 0..replicates {
        for z in [-1.0, 1.0] {
            for row in &base.mixture {
                mixture.push(row.clone());
                process.push(vec![z]);
            }
        }
    }
    Ok(DesignTable { mixture, process, replicates })
}

/// Draws Y_i ~ N(mu_i, phi_i) independently on [`study_design`].
pub fn generate_dataset<R: Rng + ?Sized>(truth: &TruthSpec, replicates: usize, rng: &mut R) -> Result<Dataset> {
    let design = study_design(replicates)?;
    let mut y = Vec::with_capacity(design.len());
    for (x, z) in design.mixture.iter().zip(&design.process) {
        let mu = truth.mean_at(x, z)?;
        let sd = truth.dispersion_at(x, z)?.sqrt();
        let e: f64 = StandardNormal.sample(rng);
        y.push(mu + sd * e);
    }
    Dataset::from_design(&design, y)
}

/// Seed of one replication: the first eight bytes of
/// SHA-256(master seed, scenario id, replication index).
pub fn replication_seed(master_seed: u64, scenario: &str, replication: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((scenario.len() as u64).to_le_bytes());
    h.update(scenario.as_bytes());
    h.update(replication.to_le_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

pub fn replication_rng(master_seed: u64, scenario: &str, replication: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replication_seed(master_seed, scenario, replication))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Correct,
    /// Every true term plus extra terms.
    Type1,
    /// At least one true term missing.
    Type2,
}

pub fn classify_component(selected: &TermSet, truth: &TermSet) -> Outcome {
    if !truth.is_subset(selected) {
        Outcome::Type2
    } else if selected.len() == truth.len() {
        Outcome::Correct
    } else {
        Outcome::Type1
    }
}

/// Joint outcome: Type 2 if either component misses a true term, Correct if
/// both match exactly, Type 1 otherwise.
pub fn classify(selected_mean: &TermSet, selected_disp: &TermSet, truth: &TruthSpec) -> Outcome {
    let m = classify_component(selected_mean, &truth.mean_terms());
    let d = classify_component(selected_disp, &truth.disp_terms());
    match (m, d) {
        (Outcome::Type2, _) | (_, Outcome::Type2) => Outcome::Type2,
        (Outcome::Correct, Outcome::Correct) => Outcome::Correct,
        _ => Outcome::Type1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub mean: MeanCriterion,
    pub disp: DispCriterion,
    pub replicates: usize,
}

impl Scenario {
    pub fn id(&self) -> String {
        format!("{}/{}/r{}", self.mean.label(), self.disp.label(), self.replicates)
    }

    pub fn n(&self) -> usize {
        14 * self.replicates
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub truth: TruthSpec,
    pub criterion_pairs: Vec<CriterionSpec>,
    pub replicate_counts: Vec<usize>,
    pub n_mc: usize,
    pub master_seed: u64,
    pub alpha: f64,
    pub mixture_order: MixtureOrder,
    pub noise_order: NoiseOrder,
    pub initial_test: InitialTest,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            truth: TruthSpec::default(),
            criterion_pairs: vec![CriterionSpec::default()],
            replicate_counts: vec![2, 4, 7, 11],
            n_mc: 1000,
            master_seed: 20_240_917,
            alpha: 0.10,
            mixture_order: MixtureOrder::SpecialCubic,
            noise_order: NoiseOrder::Linear,
            initial_test: InitialTest::Standard,
        }
    }
}

impl StudyConfig {
    /// All sixteen criterion pairs.
    pub fn all_criterion_pairs() -> Vec<CriterionSpec> {
        MeanCriterion::all()
            .into_iter()
            .flat_map(|m| DispCriterion::all().into_iter().map(move |d| CriterionSpec { mean: m, disp: d }))
            .collect()
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for c in &self.criterion_pairs {
            for r in &self.replicate_counts {
                out.push(Scenario { mean: c.mean, disp: c.disp, replicates: *r });
            }
        }
        out
    }

    fn selection_config(&self, scenario: &Scenario) -> Result<SelectionConfig> {
        let mix = scheffe_terms(3, self.mixture_order)?;
        // z is two-level, so z^2 would duplicate the constant
        let order = if self.noise_order == NoiseOrder::Quadratic { NoiseOrder::Interaction } else { self.noise_order };
        let mean_pool = cross(&mix, &noise_monomials(1, order))?;
        let mut cfg = SelectionConfig::new(mean_pool, mix);
        cfg.criteria = CriterionSpec { mean: scenario.mean, disp: scenario.disp };
        cfg.alpha = self.alpha;
        cfg.initial_test = self.initial_test;
        Ok(cfg)
    }
}

/// Proportions of each outcome among successful replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Proportions {
    pub correct: f64,
    pub type1: f64,
    pub type2: f64,
    /// Correct + Type 1.
    pub acceptable: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Counts {
    pub correct: usize,
    pub type1: usize,
    pub type2: usize,
}

impl Counts {
    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Correct => self.correct += 1,
            Outcome::Type1 => self.type1 += 1,
            Outcome::Type2 => self.type2 += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.correct + self.type1 + self.type2
    }

    pub fn proportions(&self) -> Proportions {
        let t = self.total();
        if t == 0 {
            return Proportions::default();
        }
        let t = t as f64;
        let correct = self.correct as f64 / t;
        let type1 = self.type1 as f64 / t;
        // the complement keeps the three proportions summing to one exactly
        let type2 = 1.0 - correct - type1;
        Proportions { correct, type1, type2, acceptable: correct + type1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    pub scenario: String,
    pub mean_criterion: String,
    pub disp_criterion: String,
    pub replicates: usize,
    pub n: usize,
    pub n_mc: usize,
    pub failures: usize,
    /// More than 1% of replications failed.
    pub flagged: bool,
    pub joint: Counts,
    pub mean_only: Counts,
    pub disp_only: Counts,
    pub proportions: Proportions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub master_seed: u64,
    pub n_mc: usize,
    pub cells: Vec<McCell>,
}

#[derive(Debug, Clone, Copy)]
struct RepResult {
    joint: Outcome,
    mean: Outcome,
    disp: Outcome,
}

fn run_replication(cfg: &StudyConfig, scenario: &Scenario, sel: &SelectionConfig, rep: u64) -> Option<RepResult> {
    let mut rng = replication_rng(cfg.master_seed, &scenario.id(), rep);
    let data = generate_dataset(&cfg.truth, scenario.replicates, &mut rng).ok()?;
    let out = select_joint(&data, sel).ok()?;
    Some(RepResult {
        joint: classify(out.mean_terms(), out.disp_terms(), &cfg.truth),
        mean: classify_component(out.mean_terms(), &cfg.truth.mean_terms()),
        disp: classify_component(out.disp_terms(), &cfg.truth.disp_terms()),
    })
}

/// Runs every scenario `n_mc` times on `jobs` worker threads. Each
/// replication draws from its own seeded stream, so the report does not
/// depend on `jobs` or on scheduling.
pub fn run_study(cfg: &StudyConfig, jobs: usize) -> Result<McReport> {
    if cfg.n_mc == 0 {
        return Err(Error::Argument("n_mc must be at least 1".into()));
    }
    let scenarios = cfg.scenarios();
    let sels = scenarios.iter().map(|s| cfg.selection_config(s)).collect::<Result<Vec<_>>>()?;
    let work: Vec<(usize, u64)> = (0..scenarios.len())
        .flat_map(|s| (0..cfg.n_mc as u64).map(move |r| (s, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Option<RepResult>> = pool.install(|| {
        work.par_iter()
            .map(|(s, r)| run_replication(cfg, &scenarios[*s], &sels[*s], *r))
            .collect()
    });

    let mut cells = Vec::new();
    for (si, sc) in scenarios.iter().enumerate() {
        let mut joint = Counts::default();
        let mut mean = Counts::default();
        let mut disp = Counts::default();
        let mut failures = 0;
        for (k, (s, _)) in work.iter().enumerate() {
            if *s != si {
                continue;
            }
            match results[k] {
                Some(r) => {
                    joint.add(r.joint);
                    mean.add(r.mean);
                    disp.add(r.disp);
                }
                None => failures += 1,
            }
        }
        cells.push(McCell {
            scenario: sc.id(),
            mean_criterion: sc.mean.label(),
            disp_criterion: sc.disp.label(),
            replicates: sc.replicates,
            n: sc.n(),
            n_mc: cfg.n_mc,
            failures,
            flagged: failures * 100 > cfg.n_mc,
            proportions: joint.proportions(),
            joint,
            mean_only: mean,
            disp_only: disp,
        });
    }
    Ok(McReport { master_seed: cfg.master_seed, n_mc: cfg.n_mc, cells })
}

impl McReport {
    /// One row per scenario with joint and per-component proportions.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "mean_criterion,disp_criterion,n,n_mc,failures,type1,type2,correct,acceptable,\
             mean_type1,mean_type2,mean_correct,disp_type1,disp_type2,disp_correct\n",
        );
        for c in &self.cells {
            let p = c.proportions;
            let m = c.mean_only.proportions();
            let d = c.disp_only.proportions();
            out.push_str(&format!(
                "{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
                c.mean_criterion,
                c.disp_criterion,
                c.n,
                c.n_mc,
                c.failures,
                p.type1,
                p.type2,
                p.correct,
                p.acceptable,
                m.type1,
                m.type2,
                m.correct,
                d.type1,
                d.type2,
                d.correct
            ));
        }
        out
    }

    pub fn cell(&self, mean: MeanCriterion, disp: DispCriterion, n: usize) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.mean_criterion == mean.label() && c.disp_criterion == disp.label() && c.n == n)
    }
}
