//! First-jet Pfaffian fibrations of coordinate projections, restriction to
//! parametrized PDEs, holonomic-section checking and jet lifts.
//!
//! For a projection `q: Q -> X` in adapted coordinates (the base coordinates
//! are a subset of Q's), the first jet chart carries coordinates
//! `(x^i, u^a, u^a_i)` where the jet coordinate for dependent `u` and base
//! `x` is named `u_x` (suffixing underscores on collision). The Cartan forms
//! are `theta^a = du^a - u^a_i dx^i`.

use crate::error::Error;
use crate::expr::{Chart, ChartRef, Expr, Point};
use crate::exterior::{pullback_form, Distribution, KForm, SmoothMap};
use crate::fibration::PfaffianFibration;
use crate::linalg::SamplingPolicy;
use crate::Result;

/// A first-jet fibration with its coordinate bookkeeping.
#[derive(Debug, Clone)]
pub struct JetFibration {
    fibration: PfaffianFibration,
    source_chart: ChartRef,
    /// Indices (in the source chart Q) of the base coordinates, in base order.
    base_in_source: Vec<usize>,
    /// Indices (in Q) of the dependent coordinates, in chart order.
    dep_in_source: Vec<usize>,
    /// Jet coordinate index in the total chart: `jet[a][i]` for dependent a,
    /// base direction i.
    jet_index: Vec<Vec<usize>>,
    cartan_forms: Vec<KForm>,
}

impl JetFibration {
    pub fn fibration(&self) -> &PfaffianFibration {
        &self.fibration
    }

    pub fn total(&self) -> &ChartRef {
        self.fibration.total()
    }

    pub fn base(&self) -> &ChartRef {
        self.fibration.base()
    }

    pub fn source_chart(&self) -> &ChartRef {
        &self.source_chart
    }

    pub fn cartan_forms(&self) -> &[KForm] {
        &self.cartan_forms
    }

    pub fn num_dependents(&self) -> usize {
        self.dep_in_source.len()
    }

    pub fn jet_coordinate(&self, dep: usize, dir: usize) -> usize {
        self.jet_index[dep][dir]
    }

    /// Projection `J^1 q -> Q` forgetting the jet coordinates.
    pub fn p1(&self) -> SmoothMap {
        let total = self.total();
        let comps = (0..self.source_chart.dim())
            .map(|i| Expr::coord(total, i))
            .collect();
        SmoothMap::new(total.clone(), self.source_chart.clone(), comps)
            .expect("projection components")
    }
}

/// Checks that `q` is a coordinate projection: every component is a distinct
/// coordinate of the source chart. Returns the indices of those coordinates.
fn projection_indices(q: &SmoothMap) -> Result<Vec<usize>> {
    let source = q.source();
    let mut idxs = Vec::with_capacity(q.components().len());
    for (k, comp) in q.components().iter().enumerate() {
        let found = (0..source.dim()).find(|&i| comp == &Expr::coord(source, i));
        match found {
            Some(i) if !idxs.contains(&i) => idxs.push(i),
            Some(i) => {
                return Err(Error::NotAProjection(format!(
                    "component {k} repeats coordinate `{}`",
                    source.coords()[i].name()
                )))
            }
            None => {
                return Err(Error::NotAProjection(format!(
                    "component {k} is not a bare source coordinate"
                )))
            }
        }
    }
    Ok(idxs)
}

/// Build the first-jet Pfaffian fibration of a coordinate projection
/// `q: Q -> X`.
pub fn build_first_jet(q: &SmoothMap, policy: &SamplingPolicy) -> Result<JetFibration> {
    let source = q.source().clone();
    let base = q.target().clone();
    let base_in_source = projection_indices(q)?;
    if base.dim() == 0 || base.dim() >= source.dim() {
        return Err(Error::NotAProjection(
            "projection must drop at least one coordinate".into(),
        ));
    }
    let dep_in_source: Vec<usize> = (0..source.dim())
        .filter(|i| !base_in_source.contains(i))
        .collect();

    // total chart: source coordinates then jet coordinates u_x
    let mut names: Vec<String> = source
        .coords()
        .iter()
        .map(|c| c.name().to_string())
        .collect();
    let n = base.dim();
    let m = dep_in_source.len();
    let mut jet_index = vec![vec![0usize; n]; m];
    for (a, &di) in dep_in_source.iter().enumerate() {
        for (i, &bi) in base_in_source.iter().enumerate() {
            let mut cand = format!(
                "{}_{}",
                source.coords()[di].name(),
                source.coords()[bi].name()
            );
            while names.contains(&cand) {
                cand.push('_');
            }
            jet_index[a][i] = names.len();
            names.push(cand);
        }
    }
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let total = Chart::new(format!("J1{}", source.name()), &name_refs)?;

    // Cartan forms theta^a = du^a - sum_i u^a_i dx^i
    let mut cartan_forms = Vec::with_capacity(m);
    for (a, &di) in dep_in_source.iter().enumerate() {
        let mut coeffs = vec![Expr::zero(&total); total.dim()];
        coeffs[di] = Expr::one(&total);
        for (i, &bi) in base_in_source.iter().enumerate() {
            coeffs[bi] = Expr::coord(&total, jet_index[a][i]).neg();
        }
        cartan_forms.push(KForm::one_form(&total, coeffs));
    }

    let projection = SmoothMap::new(
        total.clone(),
        base.clone(),
        base_in_source
            .iter()
            .map(|&bi| Expr::coord(&total, bi))
            .collect(),
    )?;
    let dist = Distribution::from_annihilators(total.clone(), cartan_forms.clone())?;
    let fibration = PfaffianFibration::validate(projection, dist, policy)?;
    Ok(JetFibration {
        fibration,
        source_chart: source,
        base_in_source,
        dep_in_source,
        jet_index,
        cartan_forms,
    })
}

/// A PDE presented by a rational parametrization of a subbundle of J^1 q.
#[derive(Debug, Clone)]
pub struct ParametrizedPde {
    /// Parameter chart E.
    pub chart: ChartRef,
    /// Embedding E -> J^1 q (components per total-chart coordinate).
    pub embedding: SmoothMap,
    /// Optional defining equations; must vanish after substitution.
    pub equations: Vec<Expr>,
}

impl ParametrizedPde {
    pub fn new(embedding: SmoothMap, equations: Vec<Expr>) -> Self {
        ParametrizedPde {
            chart: embedding.source().clone(),
            embedding,
            equations,
        }
    }
}

/// Restrict the Cartan distribution of a jet fibration to a parametrized PDE.
pub fn restrict_to_pde(
    jet: &JetFibration,
    pde: &ParametrizedPde,
    policy: &SamplingPolicy,
) -> Result<PfaffianFibration> {
    if pde.embedding.target() != jet.total() {
        return Err(Error::ChartMismatch(
            "embedding does not target the jet chart".into(),
        ));
    }
    if pde.embedding.jacobian().rank() != pde.chart.dim() {
        return Err(Error::EmbeddingRankDrop);
    }
    for f in &pde.equations {
        if !pde.embedding.pull_scalar(f).map(|e| e.is_zero()).unwrap_or(false) {
            return Err(Error::SpecInvalid(
                "defining equation does not vanish on the parametrization".into(),
            ));
        }
    }
    let mut pulled = Vec::new();
    for theta in jet.cartan_forms() {
        let w = pullback_form(&pde.embedding, theta)?;
        if !w.is_zero() {
            pulled.push(w);
        }
    }
    let dist = Distribution::from_annihilators(pde.chart.clone(), pulled)?;
    let projection = jet
        .fibration()
        .projection()
        .compose(&pde.embedding)?;
    PfaffianFibration::validate(projection, dist, policy)
}

/// Jet lift of a section given by dependent components `s^a(x)`: fills the
/// jet slots with exact partials, so the result is holonomic by construction.
pub fn prolong_section(jet: &JetFibration, dep_components: &[Expr]) -> Result<SmoothMap> {
    let base = jet.base().clone();
    if dep_components.len() != jet.num_dependents() {
        return Err(Error::DimensionMismatch(format!(
            "need {} dependent components",
            jet.num_dependents()
        )));
    }
    for c in dep_components {
        if c.chart() != &base {
            return Err(Error::ChartMismatch(
                "section component not on the base chart".into(),
            ));
        }
    }
    let total = jet.total().clone();
    let mut comps = vec![Expr::zero(&base); total.dim()];
    for (i, &bi) in jet.base_in_source.iter().enumerate() {
        comps[bi] = Expr::coord(&base, i);
    }
    for (a, &di) in jet.dep_in_source.iter().enumerate() {
        comps[di] = dep_components[a].clone();
        for i in 0..base.dim() {
            comps[jet.jet_index[a][i]] = dep_components[a].differentiate(i);
        }
    }
    SmoothMap::new(base, total, comps)
}

/// Exact holonomicity of a section of any Pfaffian fibration.
pub fn holonomic_check(f: &PfaffianFibration, sigma: &SmoothMap) -> Result<bool> {
    f.holonomic_check(sigma)
}

/// Point of the jet chart from source values and jet values.
pub fn jet_point(
    jet: &JetFibration,
    source_point: &Point,
    jet_values: &[num_rational::BigRational],
) -> Result<Point> {
    let total = jet.total().clone();
    let n = jet.base().dim();
    let m = jet.num_dependents();
    if jet_values.len() != n * m {
        return Err(Error::DimensionMismatch("jet value count".into()));
    }
    let mut values = vec![crate::linalg::q0(); total.dim()];
    for (i, v) in source_point.values().iter().enumerate() {
        values[i] = v.clone();
    }
    for a in 0..m {
        for i in 0..n {
            values[jet.jet_index[a][i]] = jet_values[a * n + i].clone();
        }
    }
    Point::new(total, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_expr;
    use crate::fibration::FiberVariant;
    use crate::linalg::qi;
    use crate::tableau;

    fn proj(names_q: &[&str], names_x: &[&str]) -> SmoothMap {
        let q = Chart::new("Q", names_q).unwrap();
        let x = Chart::new("X", names_x).unwrap();
        let comps = names_x
            .iter()
            .map(|n| Expr::coord_named(&q, n).unwrap())
            .collect();
        SmoothMap::new(q, x, comps).unwrap()
    }

    #[test]
    fn contact_system_from_first_jet() {
        let q = proj(&["x", "u"], &["x"]);
        let jet = build_first_jet(&q, &SamplingPolicy::with_seed(1)).unwrap();
        let total = jet.total();
        assert_eq!(total.dim(), 3);
        assert_eq!(total.coords()[2].name(), "u_x");
        // theta = du - u_x dx
        let theta = &jet.cartan_forms()[0];
        assert_eq!(theta.coeff(&[1]), Expr::one(total));
        assert_eq!(theta.coeff(&[0]), Expr::coord(total, 2).neg());
        // C^pi = span{d/du_x}
        assert!(jet
            .fibration()
            .vertical_part()
            .contains_field(&crate::exterior::VectorField::coordinate(total, 2)));
    }

    #[test]
    fn two_base_coordinates() {
        let q = proj(&["x", "y", "u"], &["x", "y"]);
        let jet = build_first_jet(&q, &SamplingPolicy::with_seed(1)).unwrap();
        assert_eq!(jet.total().dim(), 5);
        // theta = du - u_x dx - u_y dy
        let theta = &jet.cartan_forms()[0];
        assert_eq!(theta.coeff(&[0]), Expr::coord(jet.total(), 3).neg());
        assert_eq!(theta.coeff(&[1]), Expr::coord(jet.total(), 4).neg());
    }

    #[test]
    fn two_dependents() {
        let q = proj(&["x", "u", "v"], &["x"]);
        let jet = build_first_jet(&q, &SamplingPolicy::with_seed(1)).unwrap();
        assert_eq!(jet.total().dim(), 5);
        assert_eq!(jet.cartan_forms().len(), 2);
        let names: Vec<&str> = jet
            .total()
            .coords()
            .iter()
            .map(|c| c.name())
            .collect();
        assert_eq!(names, vec!["x", "u", "v", "u_x", "v_x"]);
    }

    #[test]
    fn rejects_non_projections() {
        let q = Chart::new("Q", &["x", "u"]).unwrap();
        let x = Chart::new("X", &["x"]).unwrap();
        let bad = SmoothMap::new(
            q.clone(),
            x.clone(),
            vec![parse_expr("x + u", &q).unwrap()],
        )
        .unwrap();
        match build_first_jet(&bad, &SamplingPolicy::with_seed(1)) {
            Err(Error::NotAProjection(_)) => {}
            other => panic!("expected NotAProjection, got {other:?}"),
        }
    }

    #[test]
    fn restrict_to_pde_examples() {
        // E: u_y = x inside J^1 over (x, y)
        let q = proj(&["x", "y", "u"], &["x", "y"]);
        let jet = build_first_jet(&q, &SamplingPolicy::with_seed(1)).unwrap();
        let e = Chart::new("E", &["x", "y", "u", "p"]).unwrap();
        let emb = SmoothMap::new(
            e.clone(),
            jet.total().clone(),
            vec![
                parse_expr("x", &e).unwrap(),
                parse_expr("y", &e).unwrap(),
                parse_expr("u", &e).unwrap(),
                parse_expr("p", &e).unwrap(),
                parse_expr("x", &e).unwrap(), // u_y = x
            ],
        )
        .unwrap();
        let pde = ParametrizedPde::new(emb, vec![]);
        let f = restrict_to_pde(&jet, &pde, &SamplingPolicy::with_seed(2)).unwrap();
        assert_eq!(f.dim_vertical(), 1);
        // forms: du - p dx - x dy
        let forms = f.pfaffian_forms();
        assert_eq!(forms.len(), 1);
        assert_eq!(forms[0].coeff(&[3]), Expr::zero(&e));
        // coefficient ratio dy/du = -x
        assert_eq!(
            forms[0].coeff(&[1]).div(&forms[0].coeff(&[2])).unwrap(),
            parse_expr("-x", &e).unwrap()
        );

        // ODE fixture p = u: (x, u) -> (x, u, u)
        let q1 = proj(&["x", "u"], &["x"]);
        let jet1 = build_first_jet(&q1, &SamplingPolicy::with_seed(1)).unwrap();
        let e1 = Chart::new("E", &["x", "u"]).unwrap();
        let emb1 = SmoothMap::new(
            e1.clone(),
            jet1.total().clone(),
            vec![
                parse_expr("x", &e1).unwrap(),
                parse_expr("u", &e1).unwrap(),
                parse_expr("u", &e1).unwrap(),
            ],
        )
        .unwrap();
        let pde1 = ParametrizedPde::new(emb1, vec![]);
        let f1 = restrict_to_pde(&jet1, &pde1, &SamplingPolicy::with_seed(2)).unwrap();
        assert_eq!(f1.total().dim(), 2);
        assert_eq!(f1.dim_vertical(), 0);
        // sigma(x) = (x, 0) is a solution (u = 0 of u' = u)
        let base = f1.base().clone();
        let sigma = SmoothMap::new(
            base.clone(),
            f1.total().clone(),
            vec![
                parse_expr("x", &base).unwrap(),
                parse_expr("0", &base).unwrap(),
            ],
        )
        .unwrap();
        assert!(f1.holonomic_check(&sigma).unwrap());

        // identity embedding returns the jet fibration unchanged
        let emb_id = SmoothMap::identity(jet1.total());
        let pde_id = ParametrizedPde::new(emb_id, vec![]);
        let f_id = restrict_to_pde(&jet1, &pde_id, &SamplingPolicy::with_seed(2)).unwrap();
        assert_eq!(f_id.total(), jet1.total());
        assert_eq!(f_id.dim_vertical(), jet1.fibration().dim_vertical());
    }

    #[test]
    fn prolong_section_examples() {
        let q = proj(&["x", "u"], &["x"]);
        let jet = build_first_jet(&q, &SamplingPolicy::with_seed(1)).unwrap();
        let base = jet.base().clone();
        let s = parse_expr("x^2", &base).unwrap();
        let lift = prolong_section(&jet, &[s]).unwrap();
        // (x, x^2, 2x)
        assert_eq!(lift.components()[1], parse_expr("x^2", &base).unwrap());
        assert_eq!(lift.components()[2], parse_expr("2*x", &base).unwrap());
        assert!(jet.fibration().holonomic_check(&lift).unwrap());

        // s(x, y) = x*y -> (x, y, xy, y, x)
        let q2 = proj(&["x", "y", "u"], &["x", "y"]);
        let jet2 = build_first_jet(&q2, &SamplingPolicy::with_seed(1)).unwrap();
        let b2 = jet2.base().clone();
        let s2 = parse_expr("x*y", &b2).unwrap();
        let lift2 = prolong_section(&jet2, &[s2]).unwrap();
        assert_eq!(lift2.components()[3], parse_expr("y", &b2).unwrap());
        assert_eq!(lift2.components()[4], parse_expr("x", &b2).unwrap());
        assert!(jet2.fibration().holonomic_check(&lift2).unwrap());
    }

    #[test]
    fn jet_tableau_is_full_and_involutive() {
        // universality: tableau at sampled points is full Hom(TX, ker Tq),
        // characters (m, ..., m), involutive
        for (nq, nx) in [(vec!["x", "u"], vec!["x"]), (vec!["x", "y", "u"], vec!["x", "y"])] {
            let q = proj(&nq.iter().map(|s| *s).collect::<Vec<_>>(), &nx);
            let jet = build_first_jet(&q, &SamplingPolicy::with_seed(3)).unwrap();
            let f = jet.fibration();
            let n = f.dim_base();
            let m = jet.num_dependents();
            let pt = f.sample_valid_point(&SamplingPolicy::with_seed(4)).unwrap();
            let tau = f.tableau_map_at(&pt).unwrap();
            assert_eq!(tau.rank(), n * m);
            assert_eq!(tau.dim_g(), n * m);
            let report = tableau::involutivity_test(&tau, 6, 5);
            assert!(report.involutive_with_this_flag);
            assert_eq!(report.characters, vec![m; n]);
            // full prolongation fiber dimension m n (n+1) / 2
            let fiber = f.prolongation_fiber_at(&pt, FiberVariant::Full).unwrap();
            assert_eq!(fiber.dim(), Some(m * n * (n + 1) / 2));
        }
    }

    #[test]
    fn jet_point_helper() {
        let q = proj(&["x", "u"], &["x"]);
        let jet = build_first_jet(&q, &SamplingPolicy::with_seed(1)).unwrap();
        let src = Point::new(jet.source_chart().clone(), vec![qi(1), qi(2)]).unwrap();
        let p = jet_point(&jet, &src, &[qi(3)]).unwrap();
        assert_eq!(p.values(), &[qi(1), qi(2), qi(3)]);
    }
}
