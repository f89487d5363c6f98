//! Monomials in mixture (`x1..xa`) and process (`z1..zr`) variables, the
//! standard mixture polynomial families, and simplex designs.
//!
//! Terms parse from and print to a small grammar: `1`, `x1`, `x1*x3`,
//! `x1*x3*z1`, `x1^2`, `x1*x2*(x1-x2)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Monomial with an optional Scheffé cubic difference factor (x_i - x_j).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Term {
    mixture: BTreeMap<usize, u32>,
    process: BTreeMap<usize, u32>,
    difference: Option<(usize, usize)>,
}

impl Term {
    pub fn constant() -> Self {
        Term::default()
    }

    /// x_{i+1} (zero-based index).
    pub fn x(i: usize) -> Self {
        Term::default().times_x(i)
    }

    /// z_{j+1} (zero-based index).
    pub fn z(j: usize) -> Self {
        Term::default().times_z(j)
    }

    pub fn times_x(mut self, i: usize) -> Self {
        *self.mixture.entry(i).or_insert(0) += 1;
        self
    }

    pub fn times_z(mut self, j: usize) -> Self {
        *self.process.entry(j).or_insert(0) += 1;
        self
    }

    pub fn product(&self, other: &Term) -> Result<Term> {
        if self.difference.is_some() && other.difference.is_some() {
            return Err(Error::Argument(format!("cannot multiply two difference terms {self} and {other}")));
        }
        let mut out = self.clone();
        for (k, e) in &other.mixture {
            *out.mixture.entry(*k).or_insert(0) += e;
        }
        for (k, e) in &other.process {
            *out.process.entry(*k).or_insert(0) += e;
        }
        out.difference = self.difference.or(other.difference);
        Ok(out)
    }

    pub fn is_constant(&self) -> bool {
        self.mixture.is_empty() && self.process.is_empty() && self.difference.is_none()
    }

    pub fn mixture_exponents(&self) -> &BTreeMap<usize, u32> {
        &self.mixture
    }

    pub fn process_exponents(&self) -> &BTreeMap<usize, u32> {
        &self.process
    }

    pub fn difference(&self) -> Option<(usize, usize)> {
        self.difference
    }

    pub fn has_process(&self) -> bool {
        !self.process.is_empty()
    }

    pub fn has_mixture(&self) -> bool {
        !self.mixture.is_empty()
    }

    /// Total degree in the process variables.
    pub fn process_degree(&self) -> u32 {
        self.process.values().sum()
    }

    /// The term with its process factors removed.
    pub fn mixture_part(&self) -> Term {
        Term { mixture: self.mixture.clone(), process: BTreeMap::new(), difference: self.difference }
    }

    /// The term with its mixture factors removed.
    pub fn process_part(&self) -> Term {
        Term { mixture: BTreeMap::new(), process: self.process.clone(), difference: None }
    }

    /// Evaluate at one mixture row and one process row.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let mut v = 1.0;
        for (i, e) in &self.mixture {
            let xi = x.get(*i).ok_or_else(|| unbound(self, 'x', *i))?;
            v *= xi.powi(*e as i32);
        }
        for (j, e) in &self.process {
            let zj = z.get(*j).ok_or_else(|| unbound(self, 'z', *j))?;
            v *= zj.powi(*e as i32);
        }
        if let Some((i, j)) = self.difference {
            let xi = x.get(i).ok_or_else(|| unbound(self, 'x', i))?;
            let xj = x.get(j).ok_or_else(|| unbound(self, 'x', j))?;
            v *= xi - xj;
        }
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        if let Some((i, j)) = self.difference {
            let ok = i < j
                && self.mixture.get(&i) == Some(&1)
                && self.mixture.get(&j) == Some(&1)
                && self.mixture.len() == 2;
            if !ok {
                return Err(Error::Argument(format!(
                    "difference factor (x{}-x{}) needs exactly the product x{}*x{}",
                    i + 1,
                    j + 1,
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(())
    }

    /// Expand into plain monomials (without the difference marker).
    fn expand(&self) -> Vec<(Term, f64)> {
        match self.difference {
            None => vec![(self.clone(), 1.0)],
            Some((i, j)) => {
                let base = Term { difference: None, ..self.clone() };
                vec![(base.clone().times_x(i), 1.0), (base.times_x(j), -1.0)]
            }
        }
    }
}

fn unbound(t: &Term, kind: char, idx: usize) -> Error {
    Error::Argument(format!("term {t} uses {kind}{} which the design does not provide", idx + 1))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut parts = Vec::new();
        for (i, e) in &self.mixture {
            parts.push(power('x', *i, *e));
        }
        if let Some((i, j)) = self.difference {
            parts.push(format!("(x{}-x{})", i + 1, j + 1));
        }
        for (j, e) in &self.process {
            parts.push(power('z', *j, *e));
        }
        write!(f, "{}", parts.join("*"))
    }
}

fn power(kind: char, idx: usize, e: u32) -> String {
    if e == 1 {
        format!("{kind}{}", idx + 1)
    } else {
        format!("{kind}{}^{e}", idx + 1)
    }
}

fn parse_var(s: &str) -> Result<(char, usize, u32)> {
    let (base, exp) = match s.split_once('^') {
        Some((b, e)) => {
            let e: u32 = e.trim().parse().map_err(|_| Error::Argument(format!("bad exponent in `{s}`")))?;
            (b.trim(), e)
        }
        None => (s, 1),
    };
    let mut chars = base.chars();
    let kind = chars.next().ok_or_else(|| Error::Argument("empty factor".into()))?;
    if kind != 'x' && kind != 'z' {
        return Err(Error::Argument(format!("unknown variable `{base}`; expected x<k> or z<k>")));
    }
    let idx: usize = chars
        .as_str()
        .parse()
        .map_err(|_| Error::Argument(format!("bad variable index in `{base}`")))?;
    if idx == 0 {
        return Err(Error::Argument(format!("variable indices start at 1 (`{base}`)")));
    }
    Ok((kind, idx - 1, exp))
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Term::constant());
        }
        if s.is_empty() {
            return Err(Error::Argument("empty term".into()));
        }
        let mut t = Term::default();
        for factor in s.split('*') {
            let factor = factor.trim();
            if let Some(inner) = factor.strip_prefix('(').and_then(|f| f.strip_suffix(')')) {
                let (a, b) = inner
                    .split_once('-')
                    .ok_or_else(|| Error::Argument(format!("bad difference factor `{factor}`")))?;
                let (ka, i, ea) = parse_var(a.trim())?;
                let (kb, j, eb) = parse_var(b.trim())?;
                if ka != 'x' || kb != 'x' || ea != 1 || eb != 1 || i == j || t.difference.is_some() {
                    return Err(Error::Argument(format!("bad difference factor `{factor}`")));
                }
                if i > j {
                    return Err(Error::Argument(format!("write difference factors as (xi-xj) with i < j: `{factor}`")));
                }
                t.difference = Some((i, j));
            } else if factor == "1" {
                continue;
            } else {
                let (kind, idx, e) = parse_var(factor)?;
                if e == 0 {
                    continue;
                }
                let map = if kind == 'x' { &mut t.mixture } else { &mut t.process };
                *map.entry(idx).or_insert(0) += e;
            }
        }
        t.validate()?;
        Ok(t)
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered list of distinct terms; the order is the tie-breaking order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermSet {
    terms: Vec<Term>,
}

impl TermSet {
    pub fn new() -> Self {
        TermSet::default()
    }

    pub fn constant() -> Self {
        TermSet { terms: vec![Term::constant()] }
    }

    /// Adds `t` unless already present; returns whether it was added.
    pub fn push(&mut self, t: Term) -> bool {
        if self.terms.contains(&t) {
            false
        } else {
            self.terms.push(t);
            true
        }
    }

    pub fn with(&self, t: &Term) -> TermSet {
        let mut out = self.clone();
        out.push(t.clone());
        out
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.terms.contains(t)
    }

    pub fn has_constant(&self) -> bool {
        self.terms.iter().any(Term::is_constant)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Term> {
        self.terms.iter()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(Term::to_string).collect()
    }

    /// `self` is a subset of `other`, ignoring order.
    pub fn is_subset(&self, other: &TermSet) -> bool {
        self.terms.iter().all(|t| other.contains(t))
    }

    /// Equal as sets, ignoring order.
    pub fn same_terms(&self, other: &TermSet) -> bool {
        self.len() == other.len() && self.is_subset(other)
    }

    pub fn retain(&mut self, f: impl FnMut(&Term) -> bool) {
        self.terms.retain(f);
    }

    pub fn filtered(&self, f: impl FnMut(&&Term) -> bool) -> TermSet {
        self.terms.iter().filter(f).cloned().collect()
    }

    /// Largest mixture and process index used, as counts.
    pub fn variable_counts(&self) -> (usize, usize) {
        let mut a = 0;
        let mut r = 0;
        for t in &self.terms {
            if let Some(i) = t.mixture.keys().next_back() {
                a = a.max(i + 1);
            }
            if let Some((_, j)) = t.difference {
                a = a.max(j + 1);
            }
            if let Some(j) = t.process.keys().next_back() {
                r = r.max(j + 1);
            }
        }
        (a, r)
    }
}

impl FromIterator<Term> for TermSet {
    fn from_iter<I: IntoIterator<Item = Term>>(iter: I) -> Self {
        let mut s = TermSet::new();
        for t in iter {
            s.push(t);
        }
        s
    }
}

impl<'a> IntoIterator for &'a TermSet {
    type Item = &'a Term;
    type IntoIter = std::slice::Iter<'a, Term>;
    fn into_iter(self) -> Self::IntoIter {
        self.terms.iter()
    }
}

impl fmt::Display for TermSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.names().join(" + "))
    }
}

impl FromStr for TermSet {
    type Err = Error;

    /// Comma-separated terms. Commas inside parentheses are not allowed, so a
    /// plain split is enough.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = TermSet::new();
        if s.trim().is_empty() {
            return Ok(out);
        }
        for part in s.split(',') {
            let t: Term = part.parse()?;
            if !out.push(t.clone()) {
                return Err(Error::Argument(format!("duplicate term {t}")));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixtureOrder {
    Linear,
    Quadratic,
    SpecialCubic,
    FullCubic,
}

impl FromStr for MixtureOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "linear" => Ok(MixtureOrder::Linear),
            "quadratic" => Ok(MixtureOrder::Quadratic),
            "specialcubic" => Ok(MixtureOrder::SpecialCubic),
            "cubic" | "fullcubic" => Ok(MixtureOrder::FullCubic),
            _ => Err(Error::Argument(format!("unknown mixture order `{s}`"))),
        }
    }
}

/// Scheffé canonical polynomial terms for `a` components (no constant term).
///
/// Order: main effects, two-way products, difference terms, three-way products.
pub fn scheffe_terms(a: usize, order: MixtureOrder) -> Result<TermSet> {
    if a < 2 {
        return Err(Error::Argument(format!("a mixture needs at least 2 components, got {a}")));
    }
    let mut out: TermSet = (0..a).map(Term::x).collect();
    if order == MixtureOrder::Linear {
        return Ok(out);
    }
    for i in 0..a {
        for j in i + 1..a {
            out.push(Term::x(i).times_x(j));
        }
    }
    if order == MixtureOrder::FullCubic {
        for i in 0..a {
            for j in i + 1..a {
                out.push(Term { difference: Some((i, j)), ..Term::x(i).times_x(j) });
            }
        }
    }
    if matches!(order, MixtureOrder::SpecialCubic | MixtureOrder::FullCubic) {
        for i in 0..a {
            for j in i + 1..a {
                for k in j + 1..a {
                    out.push(Term::x(i).times_x(j).times_x(k));
                }
            }
        }
    }
    Ok(out)
}

/// Expand the polynomial sum_k coef_k * term_k after substituting
/// x_slack = 1 - sum of the other components. Returns monomials and
/// coefficients in slack-model order, dropping exact zeros.
pub fn slack_expand(terms: &TermSet, coefficients: &[f64], slack: usize) -> Result<Vec<(Term, f64)>> {
    if coefficients.len() != terms.len() {
        return Err(Error::Dimension(format!("{} terms but {} coefficients", terms.len(), coefficients.len())));
    }
    let (a, _) = terms.variable_counts();
    if !terms.iter().any(|t| t.mixture.contains_key(&slack)) {
        return Err(Error::Argument(format!("slack variable x{} does not appear in the terms", slack + 1)));
    }
    let others: Vec<usize> = (0..a).filter(|i| *i != slack).collect();
    let mut acc: BTreeMap<Term, f64> = BTreeMap::new();
    let mut order: Vec<Term> = Vec::new();
    for (t, c) in terms.iter().zip(coefficients) {
        for (mono, sign) in t.expand() {
            let e = mono.mixture.get(&slack).copied().unwrap_or(0);
            let mut rest = mono.clone();
            rest.mixture.remove(&slack);
            // (1 - sum others)^e expanded as a polynomial
            let mut poly: Vec<(Term, f64)> = vec![(rest, sign * c)];
            for _ in 0..e {
                let mut next = Vec::new();
                for (m, v) in &poly {
                    next.push((m.clone(), *v));
                    for o in &others {
                        next.push((m.clone().times_x(*o), -v));
                    }
                }
                poly = next;
            }
            for (m, v) in poly {
                if !acc.contains_key(&m) {
                    order.push(m.clone());
                }
                *acc.entry(m).or_insert(0.0) += v;
            }
        }
    }
    let mut out: Vec<(Term, f64)> = order
        .into_iter()
        .map(|m| {
            let v = acc[&m];
            (m, v)
        })
        .filter(|(_, v)| *v != 0.0)
        .collect();
    out.sort_by(|(a, _), (b, _)| slack_key(a).cmp(&slack_key(b)));
    Ok(out)
}

// process block, then degree, squares before products, then lower indices first
fn slack_key(t: &Term) -> (Vec<(usize, u32)>, u32, std::cmp::Reverse<u32>, Vec<std::cmp::Reverse<u32>>) {
    let deg: u32 = t.mixture.values().sum();
    let maxe = t.mixture.values().copied().max().unwrap_or(0);
    let a = t.mixture.keys().next_back().map(|k| k + 1).unwrap_or(0);
    let exps = (0..a).map(|i| std::cmp::Reverse(t.mixture.get(&i).copied().unwrap_or(0))).collect();
    (t.process.iter().map(|(k, v)| (*k, *v)).collect(), deg, std::cmp::Reverse(maxe), exps)
}

/// Slack-variable reparametrization: substitute x_slack = 1 - sum(others).
pub fn slack_model(terms: &TermSet, slack: usize) -> Result<TermSet> {
    if !terms.iter().any(|t| t.mixture.contains_key(&slack)) {
        return Err(Error::Argument(format!("slack variable x{} does not appear in the terms", slack + 1)));
    }
    // term by term, so that unit coefficients cannot cancel monomials
    let mut support: Vec<Term> = Vec::new();
    for t in terms {
        let single: TermSet = std::iter::once(t.clone()).collect();
        let expanded = if t.mixture.contains_key(&slack) {
            slack_expand(&single, &[1.0], slack)?
        } else {
            t.expand()
        };
        for (m, v) in expanded {
            if v != 0.0 && !support.contains(&m) {
                support.push(m);
            }
        }
    }
    support.sort_by_key(slack_key);
    Ok(support.into_iter().collect())
}

/// All products mixture_term * process_monomial, one mixture block per
/// process monomial in the order given.
pub fn cross(mixture: &TermSet, process: &TermSet) -> Result<TermSet> {
    if let Some(t) = mixture.iter().find(|t| t.has_process()) {
        return Err(Error::Argument(format!("mixture set contains process term {t}")));
    }
    if let Some(t) = process.iter().find(|t| t.has_mixture() || t.difference.is_some()) {
        return Err(Error::Argument(format!("process set contains mixture term {t}")));
    }
    let mut out = TermSet::new();
    for p in process {
        for m in mixture {
            out.push(m.product(p)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseOrder {
    /// {1}
    Constant,
    /// {1, z_j}
    Linear,
    /// {1, z_j, z_j z_k}
    Interaction,
    /// {1, z_j, z_j z_k, z_j^2}
    Quadratic,
}

impl FromStr for NoiseOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" | "none" => Ok(NoiseOrder::Constant),
            "linear" => Ok(NoiseOrder::Linear),
            "interaction" => Ok(NoiseOrder::Interaction),
            "quadratic" => Ok(NoiseOrder::Quadratic),
            _ => Err(Error::Argument(format!("unknown noise order `{s}`"))),
        }
    }
}

/// Monomials in `r` process variables up to the given order.
pub fn noise_monomials(r: usize, order: NoiseOrder) -> TermSet {
    let mut out = TermSet::constant();
    if order == NoiseOrder::Constant {
        return out;
    }
    for j in 0..r {
        out.push(Term::z(j));
    }
    if matches!(order, NoiseOrder::Interaction | NoiseOrder::Quadratic) {
        for j in 0..r {
            for k in j + 1..r {
                out.push(Term::z(j).times_z(k));
            }
        }
    }
    if order == NoiseOrder::Quadratic {
        for j in 0..r {
            out.push(Term::z(j).times_z(j));
        }
    }
    out
}

/// Model matrix with one column per term.
pub fn model_matrix(terms: &TermSet, data: &Dataset) -> Result<DMatrix<f64>> {
    let n = data.len();
    let mut m = DMatrix::zeros(n, terms.len());
    for (j, t) in terms.iter().enumerate() {
        for i in 0..n {
            m[(i, j)] = t.eval(&data.x[i], &data.z[i])?;
        }
    }
    Ok(m)
}

/// Mixture points (and optional process settings) of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTable {
    pub mixture: Vec<Vec<f64>>,
    pub process: Vec<Vec<f64>>,
    pub replicates: usize,
}

impl DesignTable {
    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    fn from_mixture(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        DesignTable { mixture: rows, process: vec![Vec::new(); n], replicates: 1 }
    }
}

/// {a, m} simplex-lattice: every composition of m into a parts, divided by m.
pub fn simplex_lattice(a: usize, m: usize) -> Result<DesignTable> {
    if a < 2 || m < 1 {
        return Err(Error::Argument(format!("simplex lattice needs a >= 2 and m >= 1 (got {a}, {m})")));
    }
    let mut rows = Vec::new();
    let mut current = vec![0usize; a];
    compositions(m, 0, &mut current, &mut rows);
    let rows = rows
        .into_iter()
        .map(|c| c.iter().map(|k| *k as f64 / m as f64).collect())
        .collect();
    Ok(DesignTable::from_mixture(rows))
}

// lexicographically decreasing in the first component, so vertices come first
fn compositions(left: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let a = current.len();
    if pos == a - 1 {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    for k in (0..=left).rev() {
        current[pos] = k;
        compositions(left - k, pos + 1, current, out);
    }
}

/// Simplex-centroid design: the centroid of every nonempty subset of
/// components, ordered by subset size and then lexicographically.
pub fn simplex_centroid(a: usize) -> Result<DesignTable> {
    if a < 2 {
        return Err(Error::Argument(format!("simplex centroid needs a >= 2, got {a}")));
    }
    let mut rows = Vec::new();
    for size in 1..=a {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let mut row = vec![0.0; a];
            for i in &subset {
                row[*i] = 1.0 / size as f64;
            }
            rows.push(row);
            // next combination
            let mut k = size;
            while k > 0 && subset[k - 1] == a - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            subset[k - 1] += 1;
            for l in k..size {
                subset[l] = subset[l - 1] + 1;
            }
        }
    }
    Ok(DesignTable::from_mixture(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        for s in ["1", "x1", "x1*x3", "x1*x3*z1", "x1*x2*(x1-x2)", "z1^2", "x2*z1*z2"] {
            let t: Term = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
    }

    #[test]
    fn difference_factor_needs_matching_pair() {
        assert!("x1*x3*(x1-x2)".parse::<Term>().is_err());
        assert!("(x1-x2)".parse::<Term>().is_err());
    }

    #[test]
    fn centroid_order() {
        let d = simplex_centroid(3).unwrap();
        assert_eq!(d.mixture[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(d.mixture[3], vec![0.5, 0.5, 0.0]);
        assert_eq!(d.mixture[6], vec![1.0 / 3.0; 3]);
    }
}
