//! Exterior calculus on a single chart: differential forms, vector fields,
//! exterior derivative, Lie bracket, pullback, and the Frobenius test.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_rational::BigRational;

use crate::error::Error;
use crate::expr::{ChartRef, Expr, Point};
use crate::linalg::{constant_rank_on_samples, kernel_basis, Matrix, SamplingPolicy};
use crate::Result;

/// Vector field: one component per chart coordinate (coefficients of d/dx_i).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    chart: ChartRef,
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: ChartRef, components: Vec<Expr>) -> Self {
        assert_eq!(components.len(), chart.dim(), "component count mismatch");
        VectorField { chart, components }
    }

    pub fn zero(chart: &ChartRef) -> Self {
        VectorField::new(chart.clone(), vec![Expr::zero(chart); chart.dim()])
    }

    /// The coordinate field d/dx_idx.
    pub fn coordinate(chart: &ChartRef, idx: usize) -> Self {
        let mut comps = vec![Expr::zero(chart); chart.dim()];
        comps[idx] = Expr::one(chart);
        VectorField::new(chart.clone(), comps)
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField::new(
            self.chart.clone(),
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        )
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.add(&other.scale(&Expr::int(&self.chart, -1)))
    }

    pub fn scale(&self, f: &Expr) -> VectorField {
        VectorField::new(
            self.chart.clone(),
            self.components.iter().map(|c| c.mul(f)).collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    /// Directional derivative of a scalar.
    pub fn apply(&self, f: &Expr) -> Expr {
        let mut acc = Expr::zero(&self.chart);
        for (i, c) in self.components.iter().enumerate() {
            acc = acc.add(&c.mul(&f.differentiate(i)));
        }
        acc
    }

    pub fn evaluate(&self, p: &Point) -> Result<Vec<BigRational>> {
        self.components.iter().map(|c| c.evaluate(p)).collect()
    }
}

/// Lie bracket of vector fields; components `X(Y_i) - Y(X_i)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    assert_eq!(x.chart, y.chart, "bracket across charts");
    let comps = (0..x.chart.dim())
        .map(|i| x.apply(&y.components[i]).sub(&y.apply(&x.components[i])))
        .collect();
    VectorField::new(x.chart.clone(), comps)
}

fn sort_indices(mut idx: Vec<usize>) -> Option<(Vec<usize>, bool)> {
    // insertion sort counting transpositions; None on a repeated index
    let mut swaps = 0usize;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            swaps += 1;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((idx, swaps % 2 == 1))
}

/// Differential k-form with exact coefficients, stored on strictly increasing
/// index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct KForm {
    chart: ChartRef,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expr>,
}

impl KForm {
    pub fn zero(chart: &ChartRef, degree: usize) -> Self {
        KForm {
            chart: chart.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn function(f: Expr) -> Self {
        let chart = f.chart().clone();
        let mut form = KForm::zero(&chart, 0);
        form.add_term(vec![], f);
        form
    }

    /// 1-form from a coefficient vector: sum of c_i dx_i.
    pub fn one_form(chart: &ChartRef, coeffs: Vec<Expr>) -> Self {
        assert_eq!(coeffs.len(), chart.dim());
        let mut form = KForm::zero(chart, 1);
        for (i, c) in coeffs.into_iter().enumerate() {
            form.add_term(vec![i], c);
        }
        form
    }

    /// dx_idx as a 1-form.
    pub fn coordinate_differential(chart: &ChartRef, idx: usize) -> Self {
        let mut form = KForm::zero(chart, 1);
        form.add_term(vec![idx], Expr::one(chart));
        form
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient on a (not necessarily sorted) index tuple.
    pub fn coeff(&self, idx: &[usize]) -> Expr {
        match sort_indices(idx.to_vec()) {
            None => Expr::zero(&self.chart),
            Some((sorted, odd)) => {
                let c = self
                    .terms
                    .get(&sorted)
                    .cloned()
                    .unwrap_or_else(|| Expr::zero(&self.chart));
                if odd {
                    c.neg()
                } else {
                    c
                }
            }
        }
    }

    /// Coefficient vector of a 1-form.
    pub fn coeff_vector(&self) -> Vec<Expr> {
        assert_eq!(self.degree, 1);
        (0..self.chart.dim()).map(|i| self.coeff(&[i])).collect()
    }

    pub fn add_term(&mut self, idx: Vec<usize>, c: Expr) {
        assert_eq!(idx.len(), self.degree, "tuple arity mismatch");
        if c.is_zero() {
            return;
        }
        let Some((sorted, odd)) = sort_indices(idx) else {
            return;
        };
        let c = if odd { c.neg() } else { c };
        match self.terms.entry(sorted) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().add(&c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &KForm) -> KForm {
        assert_eq!(self.degree, other.degree, "degree mismatch");
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> KForm {
        KForm {
            chart: self.chart.clone(),
            degree: self.degree,
            terms: self
                .terms
                .iter()
                .map(|(i, c)| (i.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &KForm) -> KForm {
        self.add(&other.neg())
    }

    pub fn scale(&self, f: &Expr) -> KForm {
        let mut out = KForm::zero(&self.chart, self.degree);
        for (idx, c) in &self.terms {
            out.add_term(idx.clone(), c.mul(f));
        }
        out
    }

    pub fn wedge(&self, other: &KForm) -> KForm {
        let mut out = KForm::zero(&self.chart, self.degree + other.degree);
        for (i1, c1) in &self.terms {
            for (i2, c2) in &other.terms {
                let mut idx = i1.clone();
                idx.extend(i2.iter().copied());
                out.add_term(idx, c1.mul(c2));
            }
        }
        out
    }

    /// Value on k vector fields (alternating multilinear extension).
    pub fn apply(&self, fields: &[&VectorField]) -> Expr {
        assert_eq!(fields.len(), self.degree, "arity mismatch");
        let mut acc = Expr::zero(&self.chart);
        for (idx, c) in &self.terms {
            let det = alternating_det(&self.chart, idx, fields);
            acc = acc.add(&c.mul(&det));
        }
        acc
    }

    pub fn evaluate(&self, p: &Point) -> Result<FormValue> {
        let mut terms = BTreeMap::new();
        for (idx, c) in &self.terms {
            let v = c.evaluate(p)?;
            if !num_traits::Zero::is_zero(&v) {
                terms.insert(idx.clone(), v);
            }
        }
        Ok(FormValue {
            dim: self.chart.dim(),
            degree: self.degree,
            terms,
        })
    }
}

fn alternating_det(chart: &ChartRef, idx: &[usize], fields: &[&VectorField]) -> Expr {
    // Laplace expansion along the first row; arity stays small in practice.
    if idx.is_empty() {
        return Expr::one(chart);
    }
    if idx.len() == 1 {
        return fields[0].components[idx[0]].clone();
    }
    let mut acc = Expr::zero(chart);
    for (j, field) in fields.iter().enumerate() {
        let entry = &field.components[idx[0]];
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<&VectorField> = fields
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, f)| *f)
            .collect();
        let minor = alternating_det(chart, &idx[1..], &rest);
        let term = entry.mul(&minor);
        acc = if j % 2 == 0 {
            acc.add(&term)
        } else {
            acc.sub(&term)
        };
    }
    acc
}

/// Exact alternating tensor at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FormValue {
    pub dim: usize,
    pub degree: usize,
    pub terms: BTreeMap<Vec<usize>, BigRational>,
}

impl FormValue {
    pub fn apply(&self, vectors: &[Vec<BigRational>]) -> BigRational {
        use crate::linalg::q0;
        assert_eq!(vectors.len(), self.degree);
        let mut acc = q0();
        for (idx, c) in &self.terms {
            acc += c * det_rational(idx, vectors);
        }
        acc
    }
}

fn det_rational(idx: &[usize], vectors: &[Vec<BigRational>]) -> BigRational {
    use crate::linalg::{q0, q1};
    if idx.is_empty() {
        return q1();
    }
    if idx.len() == 1 {
        return vectors[0][idx[0]].clone();
    }
    let mut acc = q0();
    for (j, v) in vectors.iter().enumerate() {
        let rest: Vec<Vec<BigRational>> = vectors
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, v)| v.clone())
            .collect();
        let term = &v[idx[0]] * det_rational(&idx[1..], &rest);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Exterior derivative; degree k+1, and d(d(w)) = 0.
pub fn exterior_derivative(w: &KForm) -> KForm {
    let chart = w.chart().clone();
    let mut out = KForm::zero(&chart, w.degree() + 1);
    for (idx, c) in w.terms() {
        for coord in 0..chart.dim() {
            let dc = c.differentiate(coord);
            if dc.is_zero() {
                continue;
            }
            let mut tuple = vec![coord];
            tuple.extend(idx.iter().copied());
            out.add_term(tuple, dc);
        }
    }
    out
}

/// Smooth map between charts in coordinates, with optional symbolic inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothMap {
    source: ChartRef,
    target: ChartRef,
    components: Vec<Expr>,
    inverse: Option<Vec<Expr>>,
}

impl SmoothMap {
    pub fn new(source: ChartRef, target: ChartRef, components: Vec<Expr>) -> Result<Self> {
        if components.len() != target.dim() {
            return Err(Error::DimensionMismatch(format!(
                "map into `{}` needs {} components, got {}",
                target.name(),
                target.dim(),
                components.len()
            )));
        }
        for c in &components {
            if c.chart() != &source {
                return Err(Error::ChartMismatch(
                    "component not on the source chart".into(),
                ));
            }
        }
        Ok(SmoothMap {
            source,
            target,
            components,
            inverse: None,
        })
    }

    /// Attach an inverse; both compositions are checked to be the identity.
    pub fn with_inverse(mut self, inverse: Vec<Expr>) -> Result<Self> {
        if inverse.len() != self.source.dim() {
            return Err(Error::DimensionMismatch(
                "inverse component count mismatch".into(),
            ));
        }
        let inv = SmoothMap::new(self.target.clone(), self.source.clone(), inverse.clone())?;
        let fwd_then_inv = inv.compose(&self)?;
        let inv_then_fwd = self.compose(&inv)?;
        if !fwd_then_inv.is_identity() || !inv_then_fwd.is_identity() {
            return Err(Error::SpecInvalid(
                "supplied inverse does not invert the map".into(),
            ));
        }
        self.inverse = Some(inverse);
        Ok(self)
    }

    pub fn identity(chart: &ChartRef) -> Self {
        let comps: Vec<Expr> = (0..chart.dim()).map(|i| Expr::coord(chart, i)).collect();
        SmoothMap {
            source: chart.clone(),
            target: chart.clone(),
            components: comps.clone(),
            inverse: Some(comps),
        }
    }

    pub fn source(&self) -> &ChartRef {
        &self.source
    }

    pub fn target(&self) -> &ChartRef {
        &self.target
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn inverse_components(&self) -> Option<&[Expr]> {
        self.inverse.as_deref()
    }

    pub fn inverse_map(&self) -> Option<SmoothMap> {
        self.inverse.as_ref().map(|inv| SmoothMap {
            source: self.target.clone(),
            target: self.source.clone(),
            components: inv.clone(),
            inverse: Some(self.components.clone()),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
            && self
                .components
                .iter()
                .enumerate()
                .all(|(i, c)| c == &Expr::coord(&self.source, i))
    }

    /// self after other: `self(other(x))`; other's target must be self's source.
    pub fn compose(&self, other: &SmoothMap) -> Result<SmoothMap> {
        if other.target != self.source {
            return Err(Error::ChartMismatch(format!(
                "cannot compose: `{}` -> `{}` with `{}` -> `{}`",
                other.source.name(),
                other.target.name(),
                self.source.name(),
                self.target.name()
            )));
        }
        let comps = self
            .components
            .iter()
            .map(|c| {
                if self.source.dim() == 0 {
                    Ok(Expr::constant(
                        &other.source,
                        c.as_constant().expect("scalar on 0-dim chart"),
                    ))
                } else {
                    c.substitute(other.components())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        SmoothMap::new(other.source.clone(), self.target.clone(), comps)
    }

    /// Jacobian: rows ranged over target coordinates, columns over source.
    pub fn jacobian(&self) -> Matrix<Expr> {
        Matrix::from_fn(
            Expr::zero(&self.source),
            self.target.dim(),
            self.source.dim(),
            |i, j| self.components[i].differentiate(j),
        )
    }

    pub fn apply_point(&self, p: &Point) -> Result<Point> {
        let values = self
            .components
            .iter()
            .map(|c| c.evaluate(p))
            .collect::<Result<Vec<_>>>()?;
        Point::new(self.target.clone(), values)
    }

    /// Substitute the map into a scalar on the target chart.
    pub fn pull_scalar(&self, f: &Expr) -> Result<Expr> {
        assert!(f.chart() == &self.target, "scalar not on target chart");
        if self.target.dim() == 0 {
            return Ok(Expr::constant(
                &self.source,
                f.as_constant().expect("scalar on 0-dim chart is constant"),
            ));
        }
        f.substitute(self.components())
    }
}

/// Pullback of a form along a map: coefficients are composed and coordinate
/// differentials become differentials of the components.
pub fn pullback_form(f: &SmoothMap, w: &KForm) -> Result<KForm> {
    assert!(w.chart() == f.target(), "form not on the map's target chart");
    let src = f.source().clone();
    let dcomp: Vec<KForm> = (0..f.target().dim())
        .map(|j| {
            KForm::one_form(
                &src,
                (0..src.dim())
                    .map(|c| f.components()[j].differentiate(c))
                    .collect(),
            )
        })
        .collect();
    let mut out = KForm::zero(&src, w.degree());
    for (idx, c) in w.terms() {
        let pulled_coeff = f.pull_scalar(c)?;
        let mut wedge = KForm::function(pulled_coeff);
        for &j in idx {
            wedge = wedge.wedge(&dcomp[j]);
        }
        out = out.add(&wedge);
    }
    Ok(out)
}

/// Presentation of a distribution, as supplied.
#[derive(Debug, Clone, PartialEq)]
enum Presentation {
    Generators(Vec<VectorField>),
    Annihilators(Vec<KForm>),
}

/// Constant-rank subbundle of the tangent bundle, presented by spanning
/// fields or annihilating 1-forms. The other presentation is derived lazily;
/// derived data is valid away from the recorded singular locus.
#[derive(Debug)]
pub struct Distribution {
    chart: ChartRef,
    supplied: Presentation,
    generators: OnceLock<(Vec<VectorField>, Vec<Expr>)>,
    annihilators: OnceLock<(Vec<KForm>, Vec<Expr>)>,
    rank: OnceLock<usize>,
}

impl Clone for Distribution {
    fn clone(&self) -> Self {
        Distribution {
            chart: self.chart.clone(),
            supplied: self.supplied.clone(),
            generators: self.generators.clone(),
            annihilators: self.annihilators.clone(),
            rank: self.rank.clone(),
        }
    }
}

impl Distribution {
    pub fn from_generators(chart: ChartRef, fields: Vec<VectorField>) -> Result<Self> {
        for f in &fields {
            if f.chart() != &chart {
                return Err(Error::ChartMismatch(
                    "generator on a different chart".into(),
                ));
            }
        }
        Ok(Distribution {
            chart,
            supplied: Presentation::Generators(fields),
            generators: OnceLock::new(),
            annihilators: OnceLock::new(),
            rank: OnceLock::new(),
        })
    }

    pub fn from_annihilators(chart: ChartRef, forms: Vec<KForm>) -> Result<Self> {
        for w in &forms {
            if w.chart() != &chart {
                return Err(Error::ChartMismatch("form on a different chart".into()));
            }
            if w.degree() != 1 {
                return Err(Error::DimensionMismatch(
                    "annihilators must be 1-forms".into(),
                ));
            }
        }
        Ok(Distribution {
            chart,
            supplied: Presentation::Annihilators(forms),
            generators: OnceLock::new(),
            annihilators: OnceLock::new(),
            rank: OnceLock::new(),
        })
    }

    /// Full tangent bundle.
    pub fn full(chart: &ChartRef) -> Self {
        let gens = (0..chart.dim())
            .map(|i| VectorField::coordinate(chart, i))
            .collect();
        Distribution::from_generators(chart.clone(), gens).expect("coordinate fields")
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    /// Generic rank (over the rational-function field).
    pub fn rank(&self) -> usize {
        *self.rank.get_or_init(|| match &self.supplied {
            Presentation::Generators(g) => {
                if g.is_empty() {
                    0
                } else {
                    self.generator_matrix_of(g).rank()
                }
            }
            Presentation::Annihilators(a) => {
                if a.is_empty() {
                    self.chart.dim()
                } else {
                    self.chart.dim() - self.annihilator_matrix_of(a).rank()
                }
            }
        })
    }

    fn generator_matrix_of(&self, g: &[VectorField]) -> Matrix<Expr> {
        if g.is_empty() {
            return Matrix::zeros(Expr::zero(&self.chart), self.chart.dim(), 0);
        }
        Matrix::from_cols(
            Expr::zero(&self.chart),
            g.iter().map(|f| f.components().to_vec()).collect(),
        )
    }

    fn annihilator_matrix_of(&self, a: &[KForm]) -> Matrix<Expr> {
        if a.is_empty() {
            return Matrix::zeros(Expr::zero(&self.chart), 0, self.chart.dim());
        }
        Matrix::from_rows(
            Expr::zero(&self.chart),
            a.iter().map(|w| w.coeff_vector()).collect(),
        )
    }

    /// Columns span the distribution (deriving the presentation if needed).
    pub fn generator_matrix(&self) -> Matrix<Expr> {
        self.generator_matrix_of(self.generators())
    }

    pub fn annihilator_matrix(&self) -> Matrix<Expr> {
        self.annihilator_matrix_of(self.annihilators())
    }

    pub fn generators(&self) -> &[VectorField] {
        &self
            .generators
            .get_or_init(|| match &self.supplied {
                Presentation::Generators(g) => (g.clone(), Vec::new()),
                Presentation::Annihilators(a) => {
                    if a.is_empty() {
                        let gens = (0..self.chart.dim())
                            .map(|i| VectorField::coordinate(&self.chart, i))
                            .collect();
                        return (gens, Vec::new());
                    }
                    let m = self.annihilator_matrix_of(a);
                    let ker = kernel_basis(&m);
                    let locus = conversion_locus(&m);
                    let fields = ker
                        .basis()
                        .iter()
                        .map(|v| {
                            VectorField::new(self.chart.clone(), primitive_vector(&self.chart, v))
                        })
                        .collect();
                    (fields, locus)
                }
            })
            .0
    }

    pub fn annihilators(&self) -> &[KForm] {
        &self
            .annihilators
            .get_or_init(|| match &self.supplied {
                Presentation::Annihilators(a) => (a.clone(), Vec::new()),
                Presentation::Generators(g) => {
                    if g.is_empty() {
                        let forms = (0..self.chart.dim())
                            .map(|i| KForm::coordinate_differential(&self.chart, i))
                            .collect();
                        return (forms, Vec::new());
                    }
                    let m = self.generator_matrix_of(g).transpose();
                    let ker = kernel_basis(&m);
                    let locus = conversion_locus(&m);
                    let forms = ker
                        .basis()
                        .iter()
                        .map(|v| KForm::one_form(&self.chart, primitive_vector(&self.chart, v)))
                        .collect();
                    (forms, locus)
                }
            })
            .0
    }

    /// Distribution with the derived presentation as the supplied one.
    pub fn convert_presentation(&self) -> Result<Distribution> {
        match &self.supplied {
            Presentation::Generators(_) => {
                Distribution::from_annihilators(self.chart.clone(), self.annihilators().to_vec())
            }
            Presentation::Annihilators(_) => {
                Distribution::from_generators(self.chart.clone(), self.generators().to_vec())
            }
        }
    }

    /// Denominators and pivot minors recorded while deriving presentations.
    /// Sampled points avoid this locus; user-specified points are checked
    /// numerically instead.
    pub fn singular_locus(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        match &self.supplied {
            Presentation::Generators(g) => out.extend(self.generator_matrix_of(g).denominators()),
            Presentation::Annihilators(a) => {
                out.extend(self.annihilator_matrix_of(a).denominators())
            }
        }
        if let Some((_, locus)) = self.generators.get() {
            out.extend(locus.clone());
        }
        if let Some((_, locus)) = self.annihilators.get() {
            out.extend(locus.clone());
        }
        out
    }

    /// Generic membership of a field in the span.
    pub fn contains_field(&self, v: &VectorField) -> bool {
        let g = self.generator_matrix();
        let stacked = g.hstack(&Matrix::from_cols(
            Expr::zero(&self.chart),
            vec![v.components().to_vec()],
        ));
        stacked.rank() == self.rank()
    }

    /// Frobenius test: all pairwise brackets of generators stay in the span
    /// generically. The constant-rank protocol runs first.
    pub fn is_involutive(&self, policy: &SamplingPolicy) -> Result<bool> {
        let g = self.generator_matrix();
        if g.cols() > 0 && self.chart.dim() > 0 {
            constant_rank_on_samples(&g, &self.singular_locus(), policy, 8)?;
        }
        let gens = self.generators().to_vec();
        for i in 0..gens.len() {
            for j in i + 1..gens.len() {
                let br = lie_bracket(&gens[i], &gens[j]);
                if !self.contains_field(&br) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Pointwise fiber at a rational point, as a subspace of the tangent space.
    pub fn fiber_at(&self, p: &Point) -> Result<crate::linalg::Subspace<BigRational>> {
        let g = self.generator_matrix().evaluate(p)?;
        let cols = (0..g.cols()).map(|j| g.col(j)).collect();
        Ok(crate::linalg::Subspace::from_vectors(
            crate::linalg::q0(),
            self.chart.dim(),
            cols,
        ))
    }
}

fn conversion_locus(m: &Matrix<Expr>) -> Vec<Expr> {
    let mut locus: Vec<Expr> = m.denominators();
    let rr = m.rref();
    for w in rr.witnesses {
        if !w.numerator().is_constant() {
            locus.push(w.numerator_expr());
        }
    }
    locus
}

fn primitive_vector(chart: &ChartRef, v: &[Expr]) -> Vec<Expr> {
    use crate::expr::poly::{primitive_scale, Poly};
    // common denominator, then joint primitive rescale of the numerators
    let mut den = Poly::one(chart.dim());
    for e in v {
        den = den.mul(e.denominator());
    }
    let polys: Vec<Poly> = v
        .iter()
        .map(|e| {
            e.numerator()
                .mul(&den.div_exact(e.denominator()).expect("factor divides"))
        })
        .collect();
    let scaled = primitive_scale(&polys);
    scaled
        .into_iter()
        .map(|p| {
            Expr::from_parts(chart.clone(), p, Poly::one(chart.dim()))
                .expect("polynomial vector entry")
        })
        .collect()
}
