//! Forward selection of mean and dispersion terms and the alternating joint
//! selection loop, with an audit trace of every step.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{Family, Link};
use crate::joint::{
    aicc_dispersion, chisq_test, eaic_value, f_test, fit_dispersion, fit_mean, floor_response, q_plus,
    r2_tilde_disp, r2_tilde_mean, ComponentFit, DispersionMetric, DispersionWeights, JointFit, Penalty,
    TestResult,
};
use crate::terms::{cross, noise_monomials, scheffe_terms, MixtureOrder, NoiseOrder, Term, TermSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeanCriterion {
    Eaic,
    R2(Penalty),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DispCriterion {
    Aicc,
    R2(Penalty),
}

impl MeanCriterion {
    pub fn label(self) -> String {
        match self {
            MeanCriterion::Eaic => "EAIC".into(),
            MeanCriterion::R2(p) => format!("R2m({})", p.label()),
        }
    }

    /// Every mean criterion: EAIC and R~2_m with the three penalties.
    pub fn all() -> [MeanCriterion; 4] {
        [
            MeanCriterion::Eaic,
            MeanCriterion::R2(Penalty::One),
            MeanCriterion::R2(Penalty::SqrtN),
            MeanCriterion::R2(Penalty::LogN),
        ]
    }
}

impl DispCriterion {
    pub fn label(self) -> String {
        match self {
            DispCriterion::Aicc => "AICc".into(),
            DispCriterion::R2(p) => format!("R2d({})", p.label()),
        }
    }

    pub fn all() -> [DispCriterion; 4] {
        [
            DispCriterion::Aicc,
            DispCriterion::R2(Penalty::One),
            DispCriterion::R2(Penalty::SqrtN),
            DispCriterion::R2(Penalty::LogN),
        ]
    }
}

impl std::str::FromStr for MeanCriterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let l = s.to_ascii_lowercase();
        if l == "eaic" {
            return Ok(MeanCriterion::Eaic);
        }
        parse_r2(&l, "r2m").map(MeanCriterion::R2)
    }
}

impl std::str::FromStr for DispCriterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let l = s.to_ascii_lowercase();
        if l == "aicc" {
            return Ok(DispCriterion::Aicc);
        }
        parse_r2(&l, "r2d").map(DispCriterion::R2)
    }
}

// accepts r2m(sqrt(n)), r2m:sqrtn, r2m-1 and similar spellings
fn parse_r2(s: &str, prefix: &str) -> Result<Penalty> {
    let rest = s
        .strip_prefix(prefix)
        .ok_or_else(|| Error::Argument(format!("unknown criterion `{s}`")))?;
    let rest = rest.trim_start_matches([':', '-', '_']);
    let rest = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(rest);
    rest.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub mean: MeanCriterion,
    pub disp: DispCriterion,
}

impl Default for CriterionSpec {
    fn default() -> Self {
        CriterionSpec { mean: MeanCriterion::R2(Penalty::SqrtN), disp: DispCriterion::R2(Penalty::One) }
    }
}

/// Whether Algorithm 3 starts with the constant-term test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InitialTest {
    #[default]
    Standard,
    /// Always start from the main effects.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub criteria: CriterionSpec,
    pub alpha: f64,
    pub mean_pool: TermSet,
    pub disp_pool: TermSet,
    pub max_terms: Option<usize>,
    pub family: Family,
    pub link: Link,
    pub disp_weights: DispersionWeights,
    pub disp_metric: DispersionMetric,
    pub initial_test: InitialTest,
    /// Cap on Algorithm-2 iterations after the first mean selection.
    pub max_iterations: usize,
}

impl SelectionConfig {
    pub fn new(mean_pool: TermSet, disp_pool: TermSet) -> Self {
        SelectionConfig {
            criteria: CriterionSpec::default(),
            alpha: 0.10,
            mean_pool,
            disp_pool,
            max_terms: None,
            family: Family::Normal,
            link: Link::Identity,
            disp_weights: DispersionWeights::Unit,
            disp_metric: DispersionMetric::Squared,
            initial_test: InitialTest::Standard,
            max_iterations: 20,
        }
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if data.components() < 2 {
            return Err(Error::Argument("selection needs at least two mixture components".into()));
        }
        Ok(())
    }
}

/// Candidate pools built from a mixture polynomial and noise monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePools {
    pub mean: TermSet,
    /// Mixture-only part of the mean pool.
    pub disp: TermSet,
    pub notes: Vec<String>,
}

/// Mixture terms crossed with noise monomials. Squares of process variables
/// observed at two levels are aliased with the constant and are dropped with a note.
pub fn candidate_pools(data: &Dataset, mixture: MixtureOrder, noise: NoiseOrder) -> Result<CandidatePools> {
    let mix = scheffe_terms(data.components(), mixture)?;
    let mut monos = noise_monomials(data.process_count(), noise);
    let mut notes = Vec::new();
    for j in 0..data.process_count() {
        if data.process_levels(j) <= 2 {
            let sq = Term::z(j).times_z(j);
            if monos.contains(&sq) {
                monos.retain(|t| *t != sq);
                notes.push(format!("dropped {sq}: z{} takes two levels, so its square is aliased with 1", j + 1));
            }
        }
    }
    Ok(CandidatePools { mean: cross(&mix, &monos)?, disp: mix, notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Mean,
    Dispersion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialTestRecord {
    pub test: TestResult,
    pub use_constant: bool,
}

/// Criterion values and fit statistics of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub terms: Vec<String>,
    pub criterion: f64,
    pub r2_mean_sqrt_n: Option<f64>,
    pub r2_mean_one: Option<f64>,
    pub dstar: Option<f64>,
    pub deviance: Option<f64>,
    pub r2_disp_one: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub term: String,
    pub criterion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    /// Criterion improved and the test was significant.
    Accepted,
    /// Criterion did not improve but the test was significant; selection stops.
    AcceptedLookahead,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub term: String,
    pub criterion: f64,
    pub improved: bool,
    pub test: TestResult,
    pub decision: Decision,
    pub snapshot: Snapshot,
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRun {
    pub component: Component,
    pub criterion: String,
    pub higher_is_better: bool,
    pub initial_test: Option<InitialTestRecord>,
    pub start: Snapshot,
    pub steps: Vec<StepRecord>,
    pub final_terms: Vec<String>,
    pub final_criterion: f64,
    /// Candidates skipped because their fit failed (usually rank deficiency).
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    /// `None` in the first iteration, where dispersion is assumed constant.
    pub dispersion: Option<ComponentRun>,
    pub mean: ComponentRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// The mean criterion did not improve on the previous iteration.
    NoImprovement,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub iterations: Vec<Iteration>,
    /// 1-based index of the iteration whose models are returned.
    pub selected_iteration: usize,
    pub stop_reason: StopReason,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Fits of the selected iteration (single pass, not a converged joint refit).
    pub joint: JointFit,
    pub trace: SelectionTrace,
    /// True when the returned dispersion model is the constant.
    pub constant_dispersion: bool,
}

impl SelectionOutcome {
    pub fn mean_terms(&self) -> &TermSet {
        &self.joint.mean_terms
    }

    pub fn disp_terms(&self) -> &TermSet {
        &self.joint.disp_terms
    }

    /// Number of Algorithm-2 iterations performed.
    pub fn iterations(&self) -> usize {
        self.trace.iterations.len()
    }
}

/// What the component under selection conditions on.
#[derive(Debug, Clone)]
pub enum SelectionContext<'a> {
    /// Mean selection under dispersion `phi`, with `disp_terms` dispersion parameters.
    Mean { phi: &'a [f64], disp_terms: usize },
    /// Dispersion selection on `response` with the given prior weights.
    Dispersion { response: &'a [f64], prior: &'a [f64] },
}

struct Selector<'a> {
    data: &'a Dataset,
    cfg: &'a SelectionConfig,
    ctx: SelectionContext<'a>,
}

impl Selector<'_> {
    fn component(&self) -> Component {
        match self.ctx {
            SelectionContext::Mean { .. } => Component::Mean,
            SelectionContext::Dispersion { .. } => Component::Dispersion,
        }
    }

    fn fit(&self, terms: &TermSet) -> Result<ComponentFit> {
        match &self.ctx {
            SelectionContext::Mean { phi, .. } => fit_mean(terms, self.data, self.cfg.family, self.cfg.link, phi),
            SelectionContext::Dispersion { response, prior } => fit_dispersion(terms, self.data, response, prior),
        }
    }

    fn higher_is_better(&self) -> bool {
        match self.ctx {
            SelectionContext::Mean { .. } => !matches!(self.cfg.criteria.mean, MeanCriterion::Eaic),
            SelectionContext::Dispersion { .. } => !matches!(self.cfg.criteria.disp, DispCriterion::Aicc),
        }
    }

    fn criterion_label(&self) -> String {
        match self.ctx {
            SelectionContext::Mean { .. } => self.cfg.criteria.mean.label(),
            SelectionContext::Dispersion { .. } => self.cfg.criteria.disp.label(),
        }
    }

    fn criterion(&self, f: &ComponentFit) -> Result<f64> {
        let n = f.n();
        match (&self.ctx, self.cfg.criteria) {
            (SelectionContext::Mean { disp_terms, .. }, CriterionSpec { mean: MeanCriterion::Eaic, .. }) => {
                let vy: Vec<f64> = f.glm.y.iter().map(|y| f.glm.family.variance(*y)).collect();
                let q = q_plus(&f.standardized_deviance(), &f.glm.phi, &vy)?;
                eaic_value(q, f.k() + disp_terms, n)
            }
            (SelectionContext::Mean { .. }, CriterionSpec { mean: MeanCriterion::R2(p), .. }) => {
                r2_tilde_mean(f, p.value(n))
            }
            (SelectionContext::Dispersion { .. }, CriterionSpec { disp: DispCriterion::Aicc, .. }) => {
                aicc_dispersion(&f.glm)
            }
            (SelectionContext::Dispersion { .. }, CriterionSpec { disp: DispCriterion::R2(p), .. }) => {
                r2_tilde_disp(f, p.value(n), self.cfg.disp_metric)
            }
        }
    }

    /// Larger score is better regardless of the criterion's direction.
    fn score(&self, criterion: f64) -> f64 {
        if self.higher_is_better() {
            criterion
        } else {
            -criterion
        }
    }

    fn test(&self, restricted: &ComponentFit, full: &ComponentFit) -> Result<TestResult> {
        match self.ctx {
            SelectionContext::Mean { .. } => f_test(restricted, full),
            SelectionContext::Dispersion { .. } => chisq_test(restricted, full),
        }
    }

    fn snapshot(&self, f: &ComponentFit, criterion: f64) -> Snapshot {
        let n = f.n();
        match self.ctx {
            SelectionContext::Mean { .. } => Snapshot {
                terms: f.terms.names(),
                criterion,
                r2_mean_sqrt_n: r2_tilde_mean(f, Penalty::SqrtN.value(n)).ok(),
                r2_mean_one: r2_tilde_mean(f, 1.0).ok(),
                dstar: Some(f.dstar_total()),
                deviance: Some(f.glm.deviance),
                r2_disp_one: None,
            },
            SelectionContext::Dispersion { .. } => Snapshot {
                terms: f.terms.names(),
                criterion,
                r2_mean_sqrt_n: None,
                r2_mean_one: None,
                dstar: None,
                deviance: Some(f.glm.deviance),
                r2_disp_one: r2_tilde_disp(f, 1.0, self.cfg.disp_metric).ok(),
            },
        }
    }

    fn pool(&self) -> &TermSet {
        match self.ctx {
            SelectionContext::Mean { .. } => &self.cfg.mean_pool,
            SelectionContext::Dispersion { .. } => &self.cfg.disp_pool,
        }
    }

    fn run(&self) -> Result<(ComponentFit, ComponentRun)> {
        let a = self.data.components();
        let mains: TermSet = (0..a).map(Term::x).collect();

        let initial_test = match self.cfg.initial_test {
            InitialTest::Skip => None,
            InitialTest::Standard => {
                let slack: TermSet = std::iter::once(Term::constant()).chain((0..a - 1).map(Term::x)).collect();
                let f0 = self.fit(&TermSet::constant())?;
                let f1 = self.fit(&slack)?;
                let test = self.test(&f0, &f1)?;
                Some(InitialTestRecord { test, use_constant: test.p_value > self.cfg.alpha })
            }
        };
        let use_constant = initial_test.as_ref().is_some_and(|t| t.use_constant);
        let mut current = if use_constant { TermSet::constant() } else { mains.clone() };
        let mut remaining = self
            .pool()
            .filtered(|t| !t.is_constant() && !current.contains(t) && !(use_constant && mains.contains(t)));

        let mut fit = self.fit(&current)?;
        let mut crit = self.criterion(&fit)?;
        let start = self.snapshot(&fit, crit);
        let mut steps = Vec::new();
        let mut skipped = Vec::new();

        while !remaining.is_empty() && self.cfg.max_terms.is_none_or(|m| current.len() < m) {
            let mut best: Option<(f64, f64, Term, ComponentFit)> = None;
            let mut candidates = Vec::new();
            for v in &remaining {
                let trial = match self.fit(&current.with(v)) {
                    Ok(f) => f,
                    Err(e) if e.is_numerical() => {
                        if !skipped.contains(&v.to_string()) {
                            skipped.push(v.to_string());
                        }
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let c = match self.criterion(&trial) {
                    Ok(c) => c,
                    Err(e) if e.is_numerical() => continue,
                    Err(e) => return Err(e),
                };
                let s = self.score(c);
                candidates.push(CandidateScore { term: v.to_string(), criterion: c });
                // ties go to the earlier candidate
                if best.as_ref().is_none_or(|(bs, ..)| s > bs + 1e-12) {
                    best = Some((s, c, v.clone(), trial));
                }
            }
            let Some((s, c, term, trial)) = best else { break };
            let test = self.test(&fit, &trial)?;
            let improved = s > self.score(crit);
            let significant = test.p_value < self.cfg.alpha;
            let decision = match (improved, significant) {
                (true, true) => Decision::Accepted,
                (false, true) => Decision::AcceptedLookahead,
                _ => Decision::Rejected,
            };
            steps.push(StepRecord {
                term: term.to_string(),
                criterion: c,
                improved,
                test,
                decision,
                snapshot: self.snapshot(&trial, c),
                candidates,
            });
            if significant {
                current.push(term.clone());
                remaining.retain(|t| *t != term);
                fit = trial;
                crit = c;
            }
            if decision != Decision::Accepted {
                break;
            }
        }

        let run = ComponentRun {
            component: self.component(),
            criterion: self.criterion_label(),
            higher_is_better: self.higher_is_better(),
            initial_test,
            start,
            steps,
            final_terms: current.names(),
            final_criterion: crit,
            skipped,
        };
        Ok((fit, run))
    }
}

/// Algorithm 3 for one component: constant-term test, then forward
/// selection filtered by the criterion and the nested test at level alpha.
pub fn select_component_terms(
    data: &Dataset,
    ctx: SelectionContext<'_>,
    config: &SelectionConfig,
) -> Result<(ComponentFit, ComponentRun)> {
    config.validate(data)?;
    Selector { data, cfg: config, ctx }.run()
}

/// Dispersion response for the next iteration: d*_i / phi_i of a mean fit.
fn dispersion_response(mean: &ComponentFit) -> Vec<f64> {
    let r: Vec<f64> = mean
        .standardized_deviance()
        .iter()
        .zip(&mean.glm.phi)
        .map(|(d, p)| d / p)
        .collect();
    floor_response(&r)
}

/// Algorithm 2: mean selection under phi = 1, then alternate dispersion and
/// mean selection until the mean criterion stops improving. The models of
/// the last improving iteration are returned.
pub fn select_joint(data: &Dataset, config: &SelectionConfig) -> Result<SelectionOutcome> {
    config.validate(data)?;
    let n = data.len();
    let ones = vec![1.0; n];
    let mut notes = Vec::new();

    let (mut mean_fit, run) =
        select_component_terms(data, SelectionContext::Mean { phi: &ones, disp_terms: 1 }, config)?;
    let sel = Selector { data, cfg: config, ctx: SelectionContext::Mean { phi: &ones, disp_terms: 1 } };
    let mut best_score = sel.score(run.final_criterion);
    let mut iterations = vec![Iteration { index: 1, dispersion: None, mean: run }];
    let mut disp_fit: Option<ComponentFit> = None;
    let mut selected = 1;
    let mut stop_reason = StopReason::MaxIterations;

    for _ in 0..config.max_iterations {
        let response = dispersion_response(&mean_fit);
        let prior = config.disp_weights.weights(&mean_fit.glm.hat);
        let (d_fit, d_run) = select_component_terms(
            data,
            SelectionContext::Dispersion { response: &response, prior: &prior },
            config,
        )?;
        let phi = d_fit.glm.mu.clone();
        let ctx = SelectionContext::Mean { phi: &phi, disp_terms: d_fit.k() };
        let (m_fit, m_run) = select_component_terms(data, ctx.clone(), config)?;
        let score = Selector { data, cfg: config, ctx }.score(m_run.final_criterion);
        iterations.push(Iteration { index: iterations.len() + 1, dispersion: Some(d_run), mean: m_run });
        if score <= best_score {
            stop_reason = StopReason::NoImprovement;
            break;
        }
        best_score = score;
        mean_fit = m_fit;
        disp_fit = Some(d_fit);
        selected = iterations.len();
    }

    let (disp, constant_dispersion) = match disp_fit {
        Some(d) => {
            let constant = d.terms.len() == 1 && d.terms.has_constant();
            (d, constant)
        }
        None => {
            notes.push("dispersion assumed constant: no iteration improved on the first mean selection".into());
            let response = dispersion_response(&mean_fit);
            let prior = config.disp_weights.weights(&mean_fit.glm.hat);
            (fit_dispersion(&TermSet::constant(), data, &response, &prior)?, true)
        }
    };
    let joint = JointFit::assemble(mean_fit, disp, Vec::new(), false)?;
    Ok(SelectionOutcome {
        joint,
        trace: SelectionTrace { iterations, selected_iteration: selected, stop_reason, notes },
        constant_dispersion,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

fn fmt_p(p: f64) -> String {
    format!("{p:.4}")
}

/// Plain-text rendering with one block per iteration and one row per model.
pub fn render_trace(trace: &SelectionTrace) -> String {
    let mut out = String::new();
    for it in &trace.iterations {
        let _ = writeln!(out, "Iteration {}", it.index);
        match &it.dispersion {
            None => {
                let _ = writeln!(out, "  dispersion: constant (assumed)");
            }
            Some(run) => {
                let _ = writeln!(out, "  dispersion ({})", run.criterion);
                render_run(&mut out, run);
            }
        }
        let _ = writeln!(out, "  mean ({})", it.mean.criterion);
        render_run(&mut out, &it.mean);
    }
    let _ = writeln!(
        out,
        "Selected iteration {} ({})",
        trace.selected_iteration,
        match trace.stop_reason {
            StopReason::NoImprovement => "criterion stopped improving",
            StopReason::MaxIterations => "iteration limit",
        }
    );
    out
}

fn render_run(out: &mut String, run: &ComponentRun) {
    let mean = run.component == Component::Mean;
    if let Some(t) = &run.initial_test {
        let _ = writeln!(
            out,
            "    initial test: statistic {:.4}, p {} -> {}",
            t.test.statistic,
            fmt_p(t.test.p_value),
            if t.use_constant { "constant" } else { "no constant" }
        );
    }
    let mark = |d: Decision| match d {
        Decision::Accepted => "",
        Decision::AcceptedLookahead => " (lookahead)",
        Decision::Rejected => " (rejected)",
    };
    let w = run
        .steps
        .iter()
        .map(|st| st.snapshot.terms.join(" + ").len() + mark(st.decision).len())
        .chain(std::iter::once(run.start.terms.join(" + ").len()))
        .max()
        .unwrap_or(0)
        .max(44);
    let header = if mean {
        format!("    {:<w$} {:>10} {:>10} {:>14} {:>10} {:>8}", "model", "R2m(sqrtn)", "R2m(1)", "D*", "F", "p")
    } else {
        format!("    {:<w$} {:>10} {:>14} {:>10} {:>8}", "model", "R2d(1)", "D", "chi2", "p")
    };
    let _ = writeln!(out, "{header}");
    let mut row = |s: &Snapshot, stat: Option<&TestResult>, mark: &str| {
        let model = format!("{}{}", s.terms.join(" + "), mark);
        let (st, p) = stat.map(|t| (format!("{:.2}", t.statistic), fmt_p(t.p_value))).unwrap_or(("-".into(), "-".into()));
        let line = if mean {
            format!(
                "    {:<w$} {:>10} {:>10} {:>14} {:>10} {:>8}",
                model,
                fmt_opt(s.r2_mean_sqrt_n, 4),
                fmt_opt(s.r2_mean_one, 4),
                fmt_opt(s.dstar, 2),
                st,
                p
            )
        } else {
            format!(
                "    {:<w$} {:>10} {:>14} {:>10} {:>8}",
                model,
                fmt_opt(s.r2_disp_one, 4),
                fmt_opt(s.deviance, 2),
                st,
                p
            )
        };
        let _ = writeln!(out, "{line}");
    };
    row(&run.start, None, "");
    for step in &run.steps {
        row(&step.snapshot, Some(&step.test), mark(step.decision));
    }
}
