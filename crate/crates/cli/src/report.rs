use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use jmmd::data::Dataset;
use jmmd::glm::{wald_table, Family, Link, WaldRow, WaldScale};
use jmmd::joint::{aicc_dispersion, eaic, r2_tilde_disp, r2_tilde_mean, DispersionMetric, JointFit, JointOptions, Penalty};
use jmmd::moments::{MomentModel, NoiseDistribution};
use jmmd::selection::{CriterionSpec, InitialTest, SelectionConfig, SelectionTrace};
use jmmd::sim::{McReport, StudyConfig, TruthSpec};
use jmmd::terms::{MixtureOrder, NoiseOrder, Term, TermSet};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Criteria {
    pub eaic: f64,
    pub aicc: f64,
    pub r2_mean_one: f64,
    pub r2_mean_sqrt_n: f64,
    pub r2_mean_log_n: f64,
    pub r2_disp_one: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    pub y: f64,
    pub mu: f64,
    pub phi: f64,
    pub deviance: f64,
    pub d_star: f64,
    pub leverage: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub kind: String,
    pub family: Family,
    pub link: Link,
    pub options: JointOptions,
    pub mean_terms: TermSet,
    pub disp_terms: TermSet,
    pub n: usize,
    pub mean_table: Vec<WaldRow>,
    pub dispersion_table: Vec<WaldRow>,
    pub q_plus: f64,
    pub q_history: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Absent when a criterion is undefined for this fit.
    pub criteria: Option<Criteria>,
    pub observations: Vec<Observation>,
    pub joint: JointFit,
}

impl FitReport {
    pub fn new(data: &Dataset, family: Family, link: Link, options: JointOptions, joint: JointFit) -> CliResult<Self> {
        let mean_table = wald_table(&joint.mean, &joint.mean_terms.names(), WaldScale::Pearson);
        let dispersion_table = wald_table(&joint.dispersion, &joint.disp_terms.names(), WaldScale::Pearson);
        let criteria = criteria(&joint).ok();
        let observations = (0..joint.n())
            .map(|i| Observation {
                id: data.ids[i].clone(),
                y: joint.mean.y[i],
                mu: joint.mean.mu[i],
                phi: joint.phi[i],
                deviance: joint.mean.dev_components[i],
                d_star: joint.d_star[i],
                leverage: joint.mean.hat[i],
            })
            .collect();
        Ok(FitReport {
            schema_version: SCHEMA_VERSION,
            kind: "fit".into(),
            family,
            link,
            options,
            mean_terms: joint.mean_terms.clone(),
            disp_terms: joint.disp_terms.clone(),
            n: joint.n(),
            mean_table,
            dispersion_table,
            q_plus: joint.q_plus,
            q_history: joint.q_history.clone(),
            outer_iterations: joint.outer_iterations,
            converged: joint.converged,
            criteria,
            observations,
            joint,
        })
    }

    pub fn mean_coefficients(&self) -> CliResult<Vec<(Term, f64)>> {
        paired(&self.joint.mean_terms, &self.joint.mean.coefficients)
    }

    pub fn disp_coefficients(&self) -> CliResult<Vec<(Term, f64)>> {
        paired(&self.joint.disp_terms, &self.joint.dispersion.coefficients)
    }
}

fn paired(terms: &TermSet, coefs: &[f64]) -> CliResult<Vec<(Term, f64)>> {
    if terms.len() != coefs.len() {
        return Err(CliError::Data(format!("{} terms but {} coefficients", terms.len(), coefs.len())));
    }
    Ok(terms.iter().cloned().zip(coefs.iter().copied()).collect())
}

fn criteria(joint: &JointFit) -> jmmd::Result<Criteria> {
    let mean = joint.mean_component();
    let disp = joint.dispersion_component();
    Ok(Criteria {
        eaic: eaic(joint)?,
        aicc: aicc_dispersion(&joint.dispersion)?,
        r2_mean_one: r2_tilde_mean(&mean, Penalty::One.value(joint.n()))?,
        r2_mean_sqrt_n: r2_tilde_mean(&mean, Penalty::SqrtN.value(joint.n()))?,
        r2_mean_log_n: r2_tilde_mean(&mean, Penalty::LogN.value(joint.n()))?,
        r2_disp_one: r2_tilde_disp(&disp, Penalty::One.value(joint.n()), DispersionMetric::Squared)?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectReport {
    pub schema_version: u32,
    pub kind: String,
    pub iterations: usize,
    pub constant_dispersion: bool,
    pub notes: Vec<String>,
    pub config: SelectionConfig,
    pub trace: SelectionTrace,
    pub fit: FitReport,
}

/// Reads the output of `fit` or `select`.
pub fn load_fit(path: &Path) -> CliResult<FitReport> {
    let text = std::fs::read_to_string(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(inner) = value.get_mut("fit") {
        value = inner.take();
    }
    Ok(serde_json::from_value(value)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct PointMoments {
    pub x: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentsReport {
    pub schema_version: u32,
    pub kind: String,
    pub model: MomentModel,
    pub noise: NoiseDistribution,
    pub points: Vec<PointMoments>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub kind: String,
    #[serde(flatten)]
    pub report: McReport,
}

impl StudyReport {
    pub fn new(report: McReport) -> Self {
        StudyReport { schema_version: SCHEMA_VERSION, kind: "simulate".into(), report }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionPair {
    pub mean: String,
    pub disp: String,
}

/// Simulation configuration file (TOML or JSON). Missing keys take defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyFile {
    pub n_mc: usize,
    pub seed: u64,
    pub replicates: Vec<usize>,
    /// Run all sixteen criterion pairs; overrides `criteria`.
    pub all_criteria: bool,
    pub criteria: Vec<CriterionPair>,
    pub alpha: f64,
    /// Nine values: five mean coefficients, then four dispersion coefficients.
    pub truth: Option<Vec<f64>>,
    pub mixture_order: String,
    pub noise_order: String,
    pub skip_initial_test: bool,
}

impl Default for StudyFile {
    fn default() -> Self {
        let d = StudyConfig::default();
        StudyFile {
            n_mc: d.n_mc,
            seed: d.master_seed,
            replicates: d.replicate_counts,
            all_criteria: false,
            criteria: vec![CriterionPair { mean: "r2m:sqrtn".into(), disp: "r2d:1".into() }],
            alpha: d.alpha,
            truth: None,
            mixture_order: "special-cubic".into(),
            noise_order: "linear".into(),
            skip_initial_test: false,
        }
    }
}

impl StudyFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| CliError::Data(format!("invalid TOML: {e}")))
        }
    }

    pub fn to_config(&self) -> CliResult<StudyConfig> {
        let truth = match &self.truth {
            None => TruthSpec::default(),
            Some(v) => {
                let p: [f64; 9] = v
                    .as_slice()
                    .try_into()
                    .map_err(|_| CliError::Usage(format!("truth needs 9 values, got {}", v.len())))?;
                TruthSpec::from_parameters(p)
            }
        };
        let criterion_pairs = if self.all_criteria {
            StudyConfig::all_criterion_pairs()
        } else {
            self.criteria
                .iter()
                .map(|c| Ok(CriterionSpec { mean: c.mean.parse()?, disp: c.disp.parse()? }))
                .collect::<jmmd::Result<Vec<_>>>()?
        };
        if criterion_pairs.is_empty() || self.replicates.is_empty() {
            return Err(CliError::Usage("the study has no scenarios".into()));
        }
        let mixture_order: MixtureOrder = self.mixture_order.parse()?;
        let noise_order: NoiseOrder = self.noise_order.parse()?;
        Ok(StudyConfig {
            truth,
            criterion_pairs,
            replicate_counts: self.replicates.clone(),
            n_mc: self.n_mc,
            master_seed: self.seed,
            alpha: self.alpha,
            mixture_order,
            noise_order,
            initial_test: if self.skip_initial_test { InitialTest::Skip } else { InitialTest::Standard },
        })
    }
}
