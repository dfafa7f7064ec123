//! Sectioned problem-file parser.
//!
//! A problem file is a sequence of sections
//!
//! ```text
//! [chart P]
//! coords = x, u, p
//! [map pi : P -> X]
//! x = x
//! [distribution C on P]
//! forms = du - p*dx
//! [fibration F]
//! total = P; base = X; projection = pi; distribution = C
//! [point pt0 on P]
//! x = 0; u = 0; p = 0
//! [diffeo phi on P]
//! x = x; u = u + x; p = p + 1
//! inverse = x; u - x; p - 1
//! ```
//!
//! plus `[jet J of q]`, `[pde E in J]`, `[jet-element j on P]` and
//! `[action A]` sections. Comments start with `#`. Names live in one
//! namespace, must be unique, and forward references are rejected.

use std::collections::BTreeMap;

use num_rational::BigRational;

use pfaffian_core::exterior::{Distribution, KForm, SmoothMap, VectorField};
use pfaffian_core::fibration::PfaffianFibration;
use pfaffian_core::jets::{build_first_jet, restrict_to_pde, JetFibration, ParametrizedPde};
use pfaffian_core::linalg::{Matrix, SamplingPolicy};
use pfaffian_core::symmetry::{ActionSpec, JetElement, LocalDiffeo};
use pfaffian_core::{Chart, ChartRef, Error as CoreError, Expr, Point};

#[derive(Debug)]
pub enum ProblemError {
    Syntax { line: usize, msg: String },
    UnresolvedReference { line: usize, name: String },
    DuplicateName { line: usize, name: String },
    Core { line: usize, error: CoreError },
}

impl std::fmt::Display for ProblemError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProblemError::Syntax { line, msg } => write!(f, "line {line}: {msg}"),
            ProblemError::UnresolvedReference { line, name } => {
                write!(f, "line {line}: unresolved reference `{name}`")
            }
            ProblemError::DuplicateName { line, name } => {
                write!(f, "line {line}: duplicate name `{name}`")
            }
            ProblemError::Core { line, error } => write!(f, "line {line}: {error}"),
        }
    }
}

impl std::error::Error for ProblemError {}

type PResult<T> = Result<T, ProblemError>;

/// Resolved object graph of a problem file. Fibration validation outcomes
/// are stored so the `validate` command can report failures as verdicts.
#[derive(Debug, Default)]
pub struct ProblemFile {
    pub charts: BTreeMap<String, ChartRef>,
    pub maps: BTreeMap<String, SmoothMap>,
    pub distributions: BTreeMap<String, Distribution>,
    pub fibrations: BTreeMap<String, Result<PfaffianFibration, CoreError>>,
    pub jets: BTreeMap<String, JetFibration>,
    pub points: BTreeMap<String, Point>,
    pub diffeos: BTreeMap<String, LocalDiffeo>,
    pub jet_elements: BTreeMap<String, JetElement>,
    pub actions: BTreeMap<String, ActionSpec>,
    /// Section names in file order (kind, name).
    pub order: Vec<(String, String)>,
}

impl ProblemFile {
    fn check_fresh(&mut self, line: usize, kind: &str, name: &str) -> PResult<()> {
        if self.order.iter().any(|(_, n)| n == name) {
            return Err(ProblemError::DuplicateName {
                line,
                name: name.to_string(),
            });
        }
        self.order.push((kind.to_string(), name.to_string()));
        Ok(())
    }

    pub fn chart(&self, line: usize, name: &str) -> PResult<ChartRef> {
        self.charts
            .get(name)
            .cloned()
            .ok_or_else(|| ProblemError::UnresolvedReference {
                line,
                name: name.to_string(),
            })
    }

    pub fn map(&self, line: usize, name: &str) -> PResult<SmoothMap> {
        self.maps
            .get(name)
            .cloned()
            .ok_or_else(|| ProblemError::UnresolvedReference {
                line,
                name: name.to_string(),
            })
    }

    pub fn distribution(&self, line: usize, name: &str) -> PResult<Distribution> {
        self.distributions
            .get(name)
            .cloned()
            .ok_or_else(|| ProblemError::UnresolvedReference {
                line,
                name: name.to_string(),
            })
    }

    /// Fibration names in file order.
    pub fn fibration_names(&self) -> Vec<String> {
        self.order
            .iter()
            .filter(|(k, _)| k == "fibration" || k == "jet" || k == "pde")
            .map(|(_, n)| n.clone())
            .collect()
    }
}

struct Section {
    line: usize,
    header: String,
    entries: Vec<(usize, String, Vec<String>)>, // line, key, value fragments
}

fn split_sections(text: &str) -> PResult<Vec<Section>> {
    let mut sections = Vec::new();
    let mut current: Option<Section> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(h) = rest.strip_suffix(']') else {
                return Err(ProblemError::Syntax {
                    line: line_no,
                    msg: "unterminated section header".into(),
                });
            };
            if let Some(s) = current.take() {
                sections.push(s);
            }
            current = Some(Section {
                line: line_no,
                header: h.trim().to_string(),
                entries: Vec::new(),
            });
            continue;
        }
        let Some(section) = current.as_mut() else {
            return Err(ProblemError::Syntax {
                line: line_no,
                msg: "content before the first section header".into(),
            });
        };
        // fragments split by ';': fragments with '=' start a new pair,
        // fragments without extend the previous value list
        for fragment in line.split(';') {
            let fragment = fragment.trim();
            if fragment.is_empty() {
                continue;
            }
            if let Some(eq) = fragment.find('=') {
                let key = fragment[..eq].trim().to_string();
                let value = fragment[eq + 1..].trim().to_string();
                if key.is_empty() {
                    return Err(ProblemError::Syntax {
                        line: line_no,
                        msg: "empty key".into(),
                    });
                }
                section.entries.push((line_no, key, vec![value]));
            } else {
                match section.entries.last_mut() {
                    Some((_, _, vals)) => vals.push(fragment.to_string()),
                    None => {
                        return Err(ProblemError::Syntax {
                            line: line_no,
                            msg: "value fragment without a key".into(),
                        })
                    }
                }
            }
        }
    }
    if let Some(s) = current.take() {
        sections.push(s);
    }
    Ok(sections)
}

fn single_value<'a>(sec: &'a Section, key: &str) -> Option<(usize, &'a str)> {
    sec.entries
        .iter()
        .find(|(_, k, _)| k == key)
        .map(|(l, _, v)| (*l, v[0].as_str()))
}

fn value_list<'a>(sec: &'a Section, key: &str) -> Option<(usize, &'a [String])> {
    sec.entries
        .iter()
        .find(|(_, k, _)| k == key)
        .map(|(l, _, v)| (*l, v.as_slice()))
}

fn parse_expr_at(line: usize, text: &str, chart: &ChartRef) -> PResult<Expr> {
    pfaffian_core::expr::parse::parse_expr(text, chart)
        .map_err(|error| ProblemError::Core { line, error })
}

fn parse_rational(line: usize, text: &str, chart: &ChartRef) -> PResult<BigRational> {
    let e = parse_expr_at(line, text, chart)?;
    e.as_constant().ok_or_else(|| ProblemError::Syntax {
        line,
        msg: format!("expected a rational constant, got `{text}`"),
    })
}

// ---------------------------------------------------------------------------
// d-notation parser for forms (atoms `dx`) and fields (atoms `d/dx`)

#[derive(Debug, Clone, PartialEq)]
enum FTok {
    Ident(String),
    Atom(usize), // coordinate index of the d-atom
    Int(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn lex_dnotation(line: usize, text: &str, chart: &ChartRef, fields: bool) -> PResult<Vec<FTok>> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        match c {
            b' ' | b'\t' => i += 1,
            b'+' => {
                out.push(FTok::Plus);
                i += 1;
            }
            b'-' => {
                out.push(FTok::Minus);
                i += 1;
            }
            b'*' => {
                out.push(FTok::Star);
                i += 1;
            }
            b'/' => {
                out.push(FTok::Slash);
                i += 1;
            }
            b'^' => {
                out.push(FTok::Caret);
                i += 1;
            }
            b'(' => {
                out.push(FTok::LParen);
                i += 1;
            }
            b')' => {
                out.push(FTok::RParen);
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                out.push(FTok::Int(text[start..i].to_string()));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                // field atom: `d/d<coord>` lexes as d, /, d<coord>; catch it here
                if fields && word == "d" && i + 1 < b.len() && b[i] == b'/' {
                    let mut j = i + 1;
                    if b[j] == b'd' {
                        j += 1;
                        let cstart = j;
                        while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
                            j += 1;
                        }
                        let cname = &text[cstart..j];
                        if let Some(idx) = chart.coord_index(cname) {
                            out.push(FTok::Atom(idx));
                            i = j;
                            continue;
                        }
                    }
                    return Err(ProblemError::Syntax {
                        line,
                        msg: "malformed field atom; expected d/d<coord>".into(),
                    });
                }
                if !fields {
                    // form atom: d<coord>, unless the whole word is a coordinate
                    if chart.coord_index(word).is_none() && word.len() > 1 && word.starts_with('d')
                    {
                        if let Some(idx) = chart.coord_index(&word[1..]) {
                            out.push(FTok::Atom(idx));
                            continue;
                        }
                    }
                }
                out.push(FTok::Ident(word.to_string()));
            }
            _ => {
                return Err(ProblemError::Syntax {
                    line,
                    msg: format!("unexpected character `{}`", c as char),
                })
            }
        }
    }
    out.push(FTok::End);
    Ok(out)
}

/// Degree-at-most-one value: a scalar or a covector coefficient list.
#[derive(Debug, Clone)]
enum DVal {
    Scalar(Expr),
    Linear(Vec<Expr>),
}

struct DParser<'a> {
    line: usize,
    chart: &'a ChartRef,
    toks: Vec<FTok>,
    pos: usize,
}

impl<'a> DParser<'a> {
    fn peek(&self) -> &FTok {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> FTok {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: &str) -> PResult<T> {
        Err(ProblemError::Syntax {
            line: self.line,
            msg: msg.to_string(),
        })
    }

    fn add(&self, a: DVal, b: DVal) -> PResult<DVal> {
        match (a, b) {
            (DVal::Scalar(x), DVal::Scalar(y)) => Ok(DVal::Scalar(x.add(&y))),
            (DVal::Linear(x), DVal::Linear(y)) => Ok(DVal::Linear(
                x.iter().zip(&y).map(|(p, q)| p.add(q)).collect(),
            )),
            (DVal::Scalar(x), DVal::Linear(y)) | (DVal::Linear(y), DVal::Scalar(x)) => {
                if x.is_zero() {
                    Ok(DVal::Linear(y))
                } else {
                    self.err("cannot add a scalar to a degree-1 term")
                }
            }
        }
    }

    fn neg(&self, a: DVal) -> DVal {
        match a {
            DVal::Scalar(x) => DVal::Scalar(x.neg()),
            DVal::Linear(x) => DVal::Linear(x.iter().map(Expr::neg).collect()),
        }
    }

    fn mul(&self, a: DVal, b: DVal) -> PResult<DVal> {
        match (a, b) {
            (DVal::Scalar(x), DVal::Scalar(y)) => Ok(DVal::Scalar(x.mul(&y))),
            (DVal::Scalar(x), DVal::Linear(y)) | (DVal::Linear(y), DVal::Scalar(x)) => {
                Ok(DVal::Linear(y.iter().map(|c| c.mul(&x)).collect()))
            }
            _ => self.err("degree-2 products are not allowed here"),
        }
    }

    fn div(&self, a: DVal, b: DVal) -> PResult<DVal> {
        match (a, b) {
            (DVal::Scalar(x), DVal::Scalar(y)) => x
                .div(&y)
                .map(DVal::Scalar)
                .map_err(|error| ProblemError::Core {
                    line: self.line,
                    error,
                }),
            (DVal::Linear(x), DVal::Scalar(y)) => {
                let coeffs = x
                    .iter()
                    .map(|c| c.div(&y))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|error| ProblemError::Core {
                        line: self.line,
                        error,
                    })?;
                Ok(DVal::Linear(coeffs))
            }
            _ => self.err("cannot divide by a degree-1 term"),
        }
    }

    fn expr(&mut self) -> PResult<DVal> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                FTok::Plus => {
                    self.next();
                    let t = self.term()?;
                    acc = self.add(acc, t)?;
                }
                FTok::Minus => {
                    self.next();
                    let t = self.term()?;
                    let nt = self.neg(t);
                    acc = self.add(acc, nt)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> PResult<DVal> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                FTok::Star => {
                    self.next();
                    let t = self.factor()?;
                    acc = self.mul(acc, t)?;
                }
                FTok::Slash => {
                    self.next();
                    let t = self.factor()?;
                    acc = self.div(acc, t)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> PResult<DVal> {
        let base = self.base()?;
        if self.peek() == &FTok::Caret {
            self.next();
            match self.next() {
                FTok::Int(n) => {
                    let e: i64 = n.parse().map_err(|_| ProblemError::Syntax {
                        line: self.line,
                        msg: "bad exponent".into(),
                    })?;
                    match base {
                        DVal::Scalar(x) => {
                            let p = x.pow(e).map_err(|error| ProblemError::Core {
                                line: self.line,
                                error,
                            })?;
                            return Ok(DVal::Scalar(p));
                        }
                        DVal::Linear(_) => return self.err("cannot exponentiate a d-atom"),
                    }
                }
                _ => return self.err("expected an integer exponent"),
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> PResult<DVal> {
        match self.next() {
            FTok::Ident(name) => Expr::coord_named(self.chart, &name)
                .map(DVal::Scalar)
                .map_err(|error| ProblemError::Core {
                    line: self.line,
                    error,
                }),
            FTok::Int(n) => {
                let e = parse_expr_at(self.line, &n, self.chart)?;
                Ok(DVal::Scalar(e))
            }
            FTok::Atom(idx) => {
                let mut coeffs = vec![Expr::zero(self.chart); self.chart.dim()];
                coeffs[idx] = Expr::one(self.chart);
                Ok(DVal::Linear(coeffs))
            }
            FTok::Minus => {
                let b = self.base()?;
                Ok(self.neg(b))
            }
            FTok::LParen => {
                let inner = self.expr()?;
                if self.next() != FTok::RParen {
                    return self.err("expected `)`");
                }
                Ok(inner)
            }
            _ => self.err("expected identifier, number, atom, `(` or `-`"),
        }
    }
}

fn parse_linear(
    line: usize,
    text: &str,
    chart: &ChartRef,
    fields: bool,
) -> PResult<Vec<Expr>> {
    let toks = lex_dnotation(line, text, chart, fields)?;
    let mut p = DParser {
        line,
        chart,
        toks,
        pos: 0,
    };
    let v = p.expr()?;
    if p.peek() != &FTok::End {
        return p.err("trailing input");
    }
    match v {
        DVal::Linear(coeffs) => Ok(coeffs),
        DVal::Scalar(s) if s.is_zero() => Ok(vec![Expr::zero(chart); chart.dim()]),
        DVal::Scalar(_) => Err(ProblemError::Syntax {
            line,
            msg: "expected a degree-1 expression".into(),
        }),
    }
}

pub fn parse_one_form(line: usize, text: &str, chart: &ChartRef) -> PResult<KForm> {
    Ok(KForm::one_form(
        chart,
        parse_linear(line, text, chart, false)?,
    ))
}

pub fn parse_vector_field(line: usize, text: &str, chart: &ChartRef) -> PResult<VectorField> {
    Ok(VectorField::new(
        chart.clone(),
        parse_linear(line, text, chart, true)?,
    ))
}

// ---------------------------------------------------------------------------

fn components_by_coordinate(
    sec: &Section,
    source: &ChartRef,
    target: &ChartRef,
    skip: &[&str],
) -> PResult<Vec<Expr>> {
    let mut comps = Vec::with_capacity(target.dim());
    for coord in target.coords() {
        let Some((line, v)) = single_value(sec, coord.name()) else {
            return Err(ProblemError::Syntax {
                line: sec.line,
                msg: format!("missing component for coordinate `{}`", coord.name()),
            });
        };
        comps.push(parse_expr_at(line, v, source)?);
    }
    for (line, key, _) in &sec.entries {
        if target.coord_index(key).is_none() && !skip.contains(&key.as_str()) {
            return Err(ProblemError::Syntax {
                line: *line,
                msg: format!("unknown key `{key}`"),
            });
        }
    }
    Ok(comps)
}

/// Parse a problem file, validating fibrations with the given policy.
pub fn parse_problem(text: &str, policy: &SamplingPolicy) -> PResult<ProblemFile> {
    let sections = split_sections(text)?;
    let mut pf = ProblemFile::default();
    for sec in &sections {
        let words: Vec<&str> = sec.header.split_whitespace().collect();
        match words.as_slice() {
            ["chart", name] => {
                pf.check_fresh(sec.line, "chart", name)?;
                let Some((line, coords)) = single_value(sec, "coords") else {
                    return Err(ProblemError::Syntax {
                        line: sec.line,
                        msg: "chart needs `coords`".into(),
                    });
                };
                let names: Vec<&str> = coords
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .collect();
                let chart = Chart::new(*name, &names)
                    .map_err(|error| ProblemError::Core { line, error })?;
                pf.charts.insert(name.to_string(), chart);
            }
            ["map", name, ":", src, "->", dst] => {
                pf.check_fresh(sec.line, "map", name)?;
                let source = pf.chart(sec.line, src)?;
                let target = pf.chart(sec.line, dst)?;
                let comps = components_by_coordinate(sec, &source, &target, &["inverse"])?;
                let mut map = SmoothMap::new(source.clone(), target, comps)
                    .map_err(|error| ProblemError::Core { line: sec.line, error })?;
                if let Some((line, inv)) = value_list(sec, "inverse") {
                    let inv_comps = inv
                        .iter()
                        .map(|t| parse_expr_at(line, t, map.target()))
                        .collect::<PResult<Vec<_>>>()?;
                    map = map
                        .with_inverse(inv_comps)
                        .map_err(|error| ProblemError::Core { line, error })?;
                }
                pf.maps.insert(name.to_string(), map);
            }
            ["distribution", name, "on", chart_name] => {
                pf.check_fresh(sec.line, "distribution", name)?;
                let chart = pf.chart(sec.line, chart_name)?;
                let dist = if let Some((line, forms)) = single_value(sec, "forms") {
                    let parsed = forms
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|t| parse_one_form(line, t, &chart))
                        .collect::<PResult<Vec<_>>>()?;
                    Distribution::from_annihilators(chart, parsed)
                        .map_err(|error| ProblemError::Core { line, error })?
                } else if let Some((line, fields)) = single_value(sec, "fields") {
                    let parsed = fields
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|t| parse_vector_field(line, t, &chart))
                        .collect::<PResult<Vec<_>>>()?;
                    Distribution::from_generators(chart, parsed)
                        .map_err(|error| ProblemError::Core { line, error })?
                } else {
                    return Err(ProblemError::Syntax {
                        line: sec.line,
                        msg: "distribution needs `forms` or `fields`".into(),
                    });
                };
                pf.distributions.insert(name.to_string(), dist);
            }
            ["fibration", name] => {
                pf.check_fresh(sec.line, "fibration", name)?;
                let proj_name = single_value(sec, "projection").ok_or(ProblemError::Syntax {
                    line: sec.line,
                    msg: "fibration needs `projection`".into(),
                })?;
                let dist_name = single_value(sec, "distribution").ok_or(ProblemError::Syntax {
                    line: sec.line,
                    msg: "fibration needs `distribution`".into(),
                })?;
                let projection = pf.map(proj_name.0, proj_name.1)?;
                let dist = pf.distribution(dist_name.0, dist_name.1)?;
                if let Some((line, total)) = single_value(sec, "total") {
                    let t = pf.chart(line, total)?;
                    if projection.source() != &t {
                        return Err(ProblemError::Syntax {
                            line,
                            msg: "projection source differs from `total`".into(),
                        });
                    }
                }
                if let Some((line, base)) = single_value(sec, "base") {
                    let b = pf.chart(line, base)?;
                    if projection.target() != &b {
                        return Err(ProblemError::Syntax {
                            line,
                            msg: "projection target differs from `base`".into(),
                        });
                    }
                }
                let result = PfaffianFibration::validate(projection, dist, policy);
                pf.fibrations.insert(name.to_string(), result);
            }
            ["jet", name, "of", map_name] => {
                pf.check_fresh(sec.line, "jet", name)?;
                let q = pf.map(sec.line, map_name)?;
                let jet = build_first_jet(&q, policy)
                    .map_err(|error| ProblemError::Core { line: sec.line, error })?;
                pf.fibrations
                    .insert(name.to_string(), Ok(jet.fibration().clone()));
                pf.jets.insert(name.to_string(), jet);
            }
            ["pde", name, "in", jet_name] => {
                pf.check_fresh(sec.line, "pde", name)?;
                let jet = pf
                    .jets
                    .get(*jet_name)
                    .cloned()
                    .ok_or_else(|| ProblemError::UnresolvedReference {
                        line: sec.line,
                        name: jet_name.to_string(),
                    })?;
                let chart_name = single_value(sec, "chart").ok_or(ProblemError::Syntax {
                    line: sec.line,
                    msg: "pde needs `chart`".into(),
                })?;
                let chart = pf.chart(chart_name.0, chart_name.1)?;
                let comps = components_by_coordinate(sec, &chart, jet.total(), &["chart", "equations"])?;
                let embedding = SmoothMap::new(chart.clone(), jet.total().clone(), comps)
                    .map_err(|error| ProblemError::Core { line: sec.line, error })?;
                let equations = match single_value(sec, "equations") {
                    Some((line, eqs)) => eqs
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|t| parse_expr_at(line, t, jet.total()))
                        .collect::<PResult<Vec<_>>>()?,
                    None => Vec::new(),
                };
                let pde = ParametrizedPde::new(embedding, equations);
                let result = restrict_to_pde(&jet, &pde, policy);
                pf.fibrations.insert(name.to_string(), result);
            }
            ["point", name, "on", chart_name] => {
                pf.check_fresh(sec.line, "point", name)?;
                let chart = pf.chart(sec.line, chart_name)?;
                let mut values = Vec::with_capacity(chart.dim());
                for coord in chart.coords() {
                    let Some((line, v)) = single_value(sec, coord.name()) else {
                        return Err(ProblemError::Syntax {
                            line: sec.line,
                            msg: format!("missing value for `{}`", coord.name()),
                        });
                    };
                    values.push(parse_rational(line, v, &chart)?);
                }
                let point = Point::new(chart, values)
                    .map_err(|error| ProblemError::Core { line: sec.line, error })?;
                pf.points.insert(name.to_string(), point);
            }
            ["diffeo", name, "on", chart_name] => {
                pf.check_fresh(sec.line, "diffeo", name)?;
                let chart = pf.chart(sec.line, chart_name)?;
                let comps = components_by_coordinate(sec, &chart, &chart, &["inverse", "domain"])?;
                let Some((line, inv)) = value_list(sec, "inverse") else {
                    return Err(ProblemError::Syntax {
                        line: sec.line,
                        msg: "diffeo needs `inverse`".into(),
                    });
                };
                let inv_comps = inv
                    .iter()
                    .map(|t| parse_expr_at(line, t, &chart))
                    .collect::<PResult<Vec<_>>>()?;
                let map = SmoothMap::new(chart.clone(), chart.clone(), comps)
                    .and_then(|m| m.with_inverse(inv_comps))
                    .map_err(|error| ProblemError::Core { line: sec.line, error })?;
                let domain = match single_value(sec, "domain") {
                    Some((dline, d)) => d
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|t| parse_expr_at(dline, t, &chart))
                        .collect::<PResult<Vec<_>>>()?,
                    None => Vec::new(),
                };
                let diffeo = LocalDiffeo::new(map, domain)
                    .map_err(|error| ProblemError::Core { line: sec.line, error })?;
                pf.diffeos.insert(name.to_string(), diffeo);
            }
            ["jet-element", name, "on", chart_name] => {
                pf.check_fresh(sec.line, "jet-element", name)?;
                let chart = pf.chart(sec.line, chart_name)?;
                let n = chart.dim();
                let parse_point = |key: &str| -> PResult<Point> {
                    let Some((line, v)) = single_value(sec, key) else {
                        return Err(ProblemError::Syntax {
                            line: sec.line,
                            msg: format!("jet-element needs `{key}`"),
                        });
                    };
                    let vals = v
                        .split(',')
                        .map(str::trim)
                        .map(|t| parse_rational(line, t, &chart))
                        .collect::<PResult<Vec<_>>>()?;
                    Point::new(chart.clone(), vals)
                        .map_err(|error| ProblemError::Core { line, error })
                };
                let source = parse_point("source")?;
                let target = parse_point("target")?;
                let parse_matrix = |key: &str| -> PResult<Option<Matrix<BigRational>>> {
                    let Some((line, rows)) = value_list(sec, key) else {
                        return Ok(None);
                    };
                    let mut out = Vec::new();
                    for row in rows {
                        let vals = row
                            .split(',')
                            .map(str::trim)
                            .map(|t| parse_rational(line, t, &chart))
                            .collect::<PResult<Vec<_>>>()?;
                        out.push(vals);
                    }
                    Ok(Some(Matrix::from_rows(pfaffian_core::linalg::q0(), out)))
                };
                let Some(matrix) = parse_matrix("matrix")? else {
                    return Err(ProblemError::Syntax {
                        line: sec.line,
                        msg: "jet-element needs `matrix`".into(),
                    });
                };
                let mut hessian = Vec::new();
                let mut has_hessian = false;
                for coord in chart.coords() {
                    match parse_matrix(&format!("d2_{}", coord.name()))? {
                        Some(m) => {
                            has_hessian = true;
                            hessian.push(m);
                        }
                        None => hessian.push(Matrix::zeros(pfaffian_core::linalg::q0(), n, n)),
                    }
                }
                let jet = JetElement::new(
                    source,
                    target,
                    matrix,
                    if has_hessian { Some(hessian) } else { None },
                )
                .map_err(|error| ProblemError::Core { line: sec.line, error })?;
                pf.jet_elements.insert(name.to_string(), jet);
            }
            ["action", name] => {
                pf.check_fresh(sec.line, "action", name)?;
                let get = |key: &str| -> PResult<(usize, &str)> {
                    single_value(sec, key).ok_or_else(|| ProblemError::Syntax {
                        line: sec.line,
                        msg: format!("action needs `{key}`"),
                    })
                };
                let (l1, g) = get("groupoid")?;
                let (l2, m) = get("base")?;
                let (l3, s) = get("source")?;
                let (l4, t) = get("target")?;
                let (l5, u) = get("unit")?;
                let (l6, mu) = get("moment")?;
                let (l7, gp) = get("product")?;
                let (l8, act) = get("act")?;
                let (l9, h) = get("h")?;
                let spec = ActionSpec {
                    groupoid_chart: pf.chart(l1, g)?,
                    base_chart: pf.chart(l2, m)?,
                    source: pf.map(l3, s)?,
                    target: pf.map(l4, t)?,
                    unit: pf.map(l5, u)?,
                    moment: pf.map(l6, mu)?,
                    product_chart: pf.chart(l7, gp)?,
                    action: pf.map(l8, act)?,
                    distribution: pf.distribution(l9, h)?,
                };
                pf.actions.insert(name.to_string(), spec);
            }
            _ => {
                return Err(ProblemError::Syntax {
                    line: sec.line,
                    msg: format!("unrecognized section header `{}`", sec.header),
                })
            }
        }
    }
    Ok(pf)
}
