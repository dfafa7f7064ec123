//! Symmetries of Pfaffian fibrations: classification of local
//! diffeomorphisms (internal: preserves C; Pfaffian: preserves C and C^pi),
//! pointwise jet membership, prolongation of symmetries to the prolonged
//! fibration, the jet action on pointwise derivations, groupoid action
//! conditions, and the point-symmetry form identity on first jets.

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::expr::{ChartRef, Expr, Point};
use crate::exterior::{Distribution, SmoothMap, VectorField};
use crate::fibration::{PfaffianFibration, ProlongedFibration};
use crate::linalg::{q0, q1, sample_point, solve_affine, Matrix, SamplingPolicy, Scalar};
use crate::relalg::RelativeAlgebroidData;
use crate::Result;

type QMatrix = Matrix<BigRational>;

/// Local diffeomorphism of the total space with a supplied inverse and a
/// domain restriction given as a list of denominators that must not vanish.
#[derive(Debug, Clone)]
pub struct LocalDiffeo {
    map: SmoothMap,
    domain_denominators: Vec<Expr>,
}

impl LocalDiffeo {
    /// The map must carry an inverse (checked symbolically by SmoothMap).
    pub fn new(map: SmoothMap, mut domain_denominators: Vec<Expr>) -> Result<Self> {
        if map.source() != map.target() {
            return Err(Error::ChartMismatch(
                "diffeomorphism must map a chart to itself".into(),
            ));
        }
        if map.inverse_components().is_none() {
            return Err(Error::SpecInvalid("diffeomorphism needs an inverse".into()));
        }
        for c in map.components() {
            if !c.denominator().is_constant() {
                domain_denominators.push(c.denominator_expr());
            }
        }
        Ok(LocalDiffeo {
            map,
            domain_denominators,
        })
    }

    pub fn identity(chart: &ChartRef) -> Self {
        LocalDiffeo {
            map: SmoothMap::identity(chart),
            domain_denominators: Vec::new(),
        }
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn inverse(&self) -> LocalDiffeo {
        LocalDiffeo {
            map: self.map.inverse_map().expect("inverse required"),
            domain_denominators: self.domain_denominators.clone(),
        }
    }

    pub fn domain_denominators(&self) -> &[Expr] {
        &self.domain_denominators
    }

    /// self after other.
    pub fn compose(&self, other: &LocalDiffeo) -> Result<LocalDiffeo> {
        let fwd = self.map.compose(other.map())?;
        let inv_fwd = other
            .map
            .inverse_map()
            .unwrap()
            .compose(&self.map.inverse_map().unwrap())?;
        let map = fwd.with_inverse(inv_fwd.components().to_vec())?;
        let mut dens = other.domain_denominators.clone();
        for d in &self.domain_denominators {
            dens.push(d.substitute(other.map.components())?);
        }
        Ok(LocalDiffeo::new(map, dens)?)
    }
}

/// Verdict of a symmetry classification, with a witness for failures.
#[derive(Debug, Clone)]
pub struct SymmetryVerdict {
    pub internal: bool,
    pub pfaffian: bool,
    pub witness: Option<String>,
}

/// A distribution's generators composed with a map: columns become the
/// generator components with the map substituted.
fn generators_at_image(dist: &Distribution, map: &SmoothMap) -> Result<Matrix<Expr>> {
    let g = dist.generator_matrix();
    let comps = map.components();
    let cols: Vec<Vec<Expr>> = (0..g.cols())
        .map(|j| {
            (0..g.rows())
                .map(|i| g[(i, j)].substitute(comps))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_cols(Expr::zero(map.source()), cols))
}

/// Generic membership of the pushed generators in the image distribution:
/// for each generator g of `dist`, `Dphi * g` must lie in `dist` at phi(x).
fn pushforward_preserves(dist: &Distribution, phi: &SmoothMap) -> Result<(bool, Option<String>)> {
    let jac = phi.jacobian();
    let img = generators_at_image(dist, phi)?;
    let rank = img.rank();
    for (idx, gen) in dist.generators().iter().enumerate() {
        let pushed = jac.mul_vec(gen.components());
        let stacked = img.hstack(&Matrix::from_cols(Expr::zero(phi.source()), vec![pushed]));
        if stacked.rank() != rank {
            return Ok((false, Some(format!("generator {idx} leaves the span"))));
        }
    }
    Ok((true, None))
}

/// Classify a local diffeomorphism: internal iff `Tphi(C) ⊆ C` generically,
/// Pfaffian iff additionally `Tphi(C^pi) ⊆ C^pi`.
pub fn classify_symmetry(f: &PfaffianFibration, phi: &LocalDiffeo) -> Result<SymmetryVerdict> {
    let (internal, wit_c) = pushforward_preserves(f.distribution(), phi.map())?;
    if !internal {
        return Ok(SymmetryVerdict {
            internal: false,
            pfaffian: false,
            witness: wit_c.map(|w| format!("C: {w}")),
        });
    }
    let (vertical, wit_v) = if f.dim_vertical() == 0 {
        (true, None)
    } else {
        pushforward_preserves(f.vertical_part(), phi.map())?
    };
    Ok(SymmetryVerdict {
        internal: true,
        pfaffian: vertical,
        witness: wit_v.map(|w| format!("C^pi: {w}")),
    })
}

/// A 1- or 2-jet of a local diffeomorphism: source and target points, the
/// first-derivative matrix, and (for order 2) the symmetric tensor of second
/// derivatives, one matrix per target coordinate.
#[derive(Debug, Clone)]
pub struct JetElement {
    pub order: u8,
    pub source: Point,
    pub target: Point,
    pub jacobian: QMatrix,
    pub hessian: Option<Vec<QMatrix>>,
}

impl JetElement {
    pub fn new(
        source: Point,
        target: Point,
        jacobian: QMatrix,
        hessian: Option<Vec<QMatrix>>,
    ) -> Result<Self> {
        let n = source.chart().dim();
        if target.chart() != source.chart() {
            return Err(Error::ChartMismatch("jet endpoints on one chart".into()));
        }
        if jacobian.rows() != n || jacobian.cols() != n {
            return Err(Error::DimensionMismatch("jet matrix must be square".into()));
        }
        if jacobian.rank() != n {
            return Err(Error::SpecInvalid(
                "jet first-derivative matrix is singular".into(),
            ));
        }
        if let Some(h) = &hessian {
            if h.len() != n {
                return Err(Error::DimensionMismatch(
                    "one hessian matrix per coordinate".into(),
                ));
            }
            for m in h {
                if m.rows() != n || m.cols() != n {
                    return Err(Error::DimensionMismatch("hessian shape".into()));
                }
                for i in 0..n {
                    for j in 0..n {
                        if m[(i, j)] != m[(j, i)] {
                            return Err(Error::SpecInvalid(
                                "second derivatives must be symmetric".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(JetElement {
            order: if hessian.is_some() { 2 } else { 1 },
            source,
            target,
            jacobian,
            hessian,
        })
    }

    /// Exact jet of a diffeomorphism at a point.
    pub fn of_diffeo(phi: &LocalDiffeo, at: &Point, order: u8) -> Result<JetElement> {
        let target = phi.map().apply_point(at)?;
        let jac = phi.map().jacobian().evaluate(at)?;
        let hessian = if order >= 2 {
            let n = at.chart().dim();
            let mut out = Vec::with_capacity(n);
            for c in 0..n {
                let comp = &phi.map().components()[c];
                let m = Matrix::from_fn(q0(), n, n, |d, e| {
                    comp.differentiate(d)
                        .differentiate(e)
                        .evaluate(at)
                        .expect("no pole at jet point")
                });
                out.push(m);
            }
            Some(out)
        } else {
            None
        };
        JetElement::new(at.clone(), target, jac, hessian)
    }
}

/// Pointwise membership in the symmetry groupoids: the first-derivative
/// matrix must map C_x into C_y (internal) and C^pi_x into C^pi_y (Pfaffian).
pub fn jet_membership(f: &PfaffianFibration, jet: &JetElement) -> Result<SymmetryVerdict> {
    f.check_point(&jet.source)?;
    f.check_point(&jet.target)?;
    let cx = f.distribution().fiber_at(&jet.source)?;
    let cy = f.distribution().fiber_at(&jet.target)?;
    for v in cx.basis() {
        let pushed = jet.jacobian.mul_vec(v);
        if !cy.contains(&pushed) {
            return Ok(SymmetryVerdict {
                internal: false,
                pfaffian: false,
                witness: Some("a C-direction leaves C".into()),
            });
        }
    }
    let vx = f.vertical_part().fiber_at(&jet.source)?;
    let vy = f.vertical_part().fiber_at(&jet.target)?;
    for v in vx.basis() {
        let pushed = jet.jacobian.mul_vec(v);
        if !vy.contains(&pushed) {
            return Ok(SymmetryVerdict {
                internal: true,
                pfaffian: false,
                witness: Some("a vertical direction leaves C^pi".into()),
            });
        }
    }
    Ok(SymmetryVerdict {
        internal: true,
        pfaffian: true,
        witness: None,
    })
}

/// Prolong an internal symmetry to the prolonged fibration:
/// `phi^(1)(h) = Tphi ∘ h ∘ (Tpi ∘ Tphi ∘ h)^{-1}`, expressed in the
/// prolongation chart. Records the inverted determinant as a domain
/// restriction.
pub fn prolong_symmetry(
    prol: &ProlongedFibration,
    phi: &LocalDiffeo,
) -> Result<LocalDiffeo> {
    let base_f = &prol.base_fibration;
    let verdict = classify_symmetry(base_f, phi)?;
    if !verdict.internal {
        return Err(Error::NotInternal);
    }
    let fwd = prolong_components(prol, phi)?;
    let inv = prolong_components(prol, &phi.inverse())?;
    let new_chart = prol.fibration.total();
    let map = SmoothMap::new(new_chart.clone(), new_chart.clone(), fwd.components)?
        .with_inverse(inv.components)?;
    let mut dens = fwd.denominators;
    for d in phi.domain_denominators() {
        dens.push(lift_to(new_chart, d)?);
    }
    LocalDiffeo::new(map, dens)
}

struct ProlongedComponents {
    components: Vec<Expr>,
    denominators: Vec<Expr>,
}

fn lift_to(chart: &ChartRef, e: &Expr) -> Result<Expr> {
    let vals: Vec<Expr> = (0..e.chart().dim()).map(|i| Expr::coord(chart, i)).collect();
    e.substitute(&vals)
}

fn prolong_components(
    prol: &ProlongedFibration,
    phi: &LocalDiffeo,
) -> Result<ProlongedComponents> {
    let base_f = &prol.base_fibration;
    let total = base_f.total().clone();
    let big_n = total.dim();
    let n = base_f.dim_base();
    let r = base_f.dim_vertical();
    let m = prol.params;
    let new_chart = prol.fibration.total().clone();

    // everything happens over the prolonged chart
    let phi_lifted: Vec<Expr> = phi
        .map()
        .components()
        .iter()
        .map(|c| lift_to(&new_chart, c))
        .collect::<Result<Vec<_>>>()?;
    let jac_lifted = {
        let j = phi.map().jacobian();
        Matrix::from_fn(Expr::zero(&new_chart), big_n, big_n, |a, b| {
            lift_to(&new_chart, &j[(a, b)]).expect("lift")
        })
    };
    // Dpi at phi(p): substitute phi into the projection jacobian
    let dpi_at_phi = {
        let dpi = base_f.projection().jacobian();
        Matrix::from_fn(Expr::zero(&new_chart), n, big_n, |a, b| {
            dpi[(a, b)]
                .substitute(&phi_lifted)
                .expect("substitution into projection jacobian")
        })
    };

    // M0 = Tphi ∘ H, A = Tpi ∘ M0; the prolonged splitting is M0 A^{-1}
    let m0 = jac_lifted.matmul(&prol.splitting);
    let a = dpi_at_phi.matmul(&m0);
    let (a_inv, det) = invert_symbolic(&a)?;
    let new_splitting = m0.matmul(&a_inv);

    // target fiber parameters: solve  xi_part(phi) + sum w'_k xi_ker_k(phi) = Xi'
    // where Xi' are the C^pi coefficients of the new splitting at phi(p).
    // Columns of new_splitting decompose as h_i(phi) + sum_a Xi'[a][i] v_a(phi).
    let h_at_phi = Matrix::from_fn(Expr::zero(&new_chart), big_n, n, |c, i| {
        base_f.horizontal_frame()[i].components()[c]
            .substitute(&phi_lifted)
            .expect("substitute horizontal")
    });
    let v_at_phi = Matrix::from_fn(Expr::zero(&new_chart), big_n, r, |c, a2| {
        base_f.vertical_frame()[a2].components()[c]
            .substitute(&phi_lifted)
            .expect("substitute vertical")
    });
    // unknowns: w'_1..w'_m; equations over all (c, i)
    let mut rows: Vec<Vec<Expr>> = Vec::new();
    let mut rhs: Vec<Expr> = Vec::new();
    let xi_part_at_phi = |a2: usize, i: usize| -> Result<Expr> {
        prol.xi_particular[(a2, i)].substitute(&phi_lifted)
    };
    let xi_ker_at_phi = |k: usize, a2: usize, i: usize| -> Result<Expr> {
        prol.xi_kernel[k][(a2, i)].substitute(&phi_lifted)
    };
    for c in 0..big_n {
        for i in 0..n {
            let mut row = Vec::with_capacity(m);
            for k in 0..m {
                let mut coef = Expr::zero(&new_chart);
                for a2 in 0..r {
                    coef = coef.add(&xi_ker_at_phi(k, a2, i)?.mul(&v_at_phi[(c, a2)]));
                }
                row.push(coef);
            }
            let mut base_val = h_at_phi[(c, i)].clone();
            for a2 in 0..r {
                base_val = base_val.add(&xi_part_at_phi(a2, i)?.mul(&v_at_phi[(c, a2)]));
            }
            rows.push(row);
            rhs.push(new_splitting[(c, i)].sub(&base_val));
        }
    }
    let mat = Matrix::from_rows(Expr::zero(&new_chart), rows);
    let sol = solve_affine(&mat, &rhs);
    let Some(wprime) = sol.particular().cloned() else {
        return Err(Error::NotInternal);
    };
    if sol.linear_part().dim() != 0 {
        return Err(Error::NoGlobalParametrization(
            "prolonged symmetry parameters are underdetermined".into(),
        ));
    }

    let mut components = phi_lifted;
    components.extend(wprime);
    let mut denominators = vec![det];
    for c in &components {
        if !c.denominator().is_constant() {
            denominators.push(c.denominator_expr());
        }
    }
    Ok(ProlongedComponents {
        components,
        denominators,
    })
}

/// Symbolic inverse by solving against the identity; returns the inverse and
/// a determinant-like pivot product whose vanishing bounds the domain.
fn invert_symbolic(a: &Matrix<Expr>) -> Result<(Matrix<Expr>, Expr)> {
    let k = a.rows();
    assert_eq!(k, a.cols());
    let proto = a.proto().clone();
    let chart = proto.chart().clone();
    let id = Matrix::identity(Expr::one(&chart), k);
    let aug = a.hstack(&id);
    let rr = aug.rref();
    if rr.pivots.len() < k || rr.pivots.iter().any(|&c| c >= k) {
        return Err(Error::SingularFrame("matrix not invertible generically".into()));
    }
    let inv = Matrix::from_fn(Expr::zero(&chart), k, k, |i, j| rr.mat[(i, k + j)].clone());
    let mut det = Expr::one(&chart);
    for w in rr.witnesses {
        det = det.mul(&w.numerator_expr());
        det = det
            .div(&w.denominator_expr())
            .expect("pivot denominators nonzero");
    }
    Ok((inv, det.numerator_expr()))
}

/// Report of `verify_symmetry_prolongation`.
#[derive(Debug, Clone)]
pub struct ProlongationSymmetryReport {
    pub prolonged_is_pfaffian: bool,
    pub covering_identity: bool,
}

/// Theorem-level check: the prolongation of an internal symmetry is a
/// Pfaffian symmetry of the prolonged fibration, and it covers the original
/// map (`p_1 ∘ phi^(1) = phi ∘ p_1` symbolically).
pub fn verify_symmetry_prolongation(
    prol: &ProlongedFibration,
    phi: &LocalDiffeo,
) -> Result<ProlongationSymmetryReport> {
    let phi1 = prolong_symmetry(prol, phi)?;
    let verdict = classify_symmetry(&prol.fibration, &phi1)?;
    let new_chart = prol.fibration.total();
    let big_n = prol.base_fibration.total().dim();
    let mut covering = true;
    for c in 0..big_n {
        let lhs = &phi1.map().components()[c];
        let rhs = lift_to(new_chart, &phi.map().components()[c])?;
        if lhs != &rhs {
            covering = false;
        }
    }
    Ok(ProlongationSymmetryReport {
        prolonged_is_pfaffian: verdict.internal && verdict.pfaffian,
        covering_identity: covering,
    })
}

/// First-order scalar jets at a point: value and gradient. Used to transport
/// derivations along 2-jets of diffeomorphisms.
#[derive(Debug, Clone)]
struct J1 {
    v: BigRational,
    d: Vec<BigRational>,
}

impl J1 {
    fn constant(nd: usize, v: BigRational) -> Self {
        J1 {
            v,
            d: vec![q0(); nd],
        }
    }
    fn add(&self, o: &J1) -> J1 {
        J1 {
            v: &self.v + &o.v,
            d: self.d.iter().zip(&o.d).map(|(a, b)| a + b).collect(),
        }
    }
    fn sub(&self, o: &J1) -> J1 {
        J1 {
            v: &self.v - &o.v,
            d: self.d.iter().zip(&o.d).map(|(a, b)| a - b).collect(),
        }
    }
    fn mul(&self, o: &J1) -> J1 {
        J1 {
            v: &self.v * &o.v,
            d: self
                .d
                .iter()
                .zip(&o.d)
                .map(|(a, b)| a * &o.v + &self.v * b)
                .collect(),
        }
    }
    fn div(&self, o: &J1) -> J1 {
        let v = &self.v / &o.v;
        let d = self
            .d
            .iter()
            .zip(&o.d)
            .map(|(a, b)| (a - &(&v * b)) / &o.v)
            .collect();
        J1 { v, d }
    }
}

/// Solve M x = b over first-order jets, pivoting on nonzero value parts.
fn solve_j1(m: &mut Vec<Vec<J1>>, b: &mut Vec<Vec<J1>>) -> Option<()> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut r = 0;
    for c in 0..cols {
        let piv = (r..rows).find(|&i| !Scalar::is_zero(&m[i][c].v))?;
        m.swap(r, piv);
        b.swap(r, piv);
        let pv = m[r][c].clone();
        for j in 0..cols {
            m[r][j] = m[r][j].div(&pv);
        }
        for bj in &mut b[r] {
            *bj = bj.div(&pv);
        }
        for i in 0..rows {
            if i == r {
                continue;
            }
            let f = m[i][c].clone();
            if Scalar::is_zero(&f.v) && f.d.iter().all(Scalar::is_zero) {
                continue;
            }
            for j in 0..cols {
                let t = m[r][j].mul(&f);
                m[i][j] = m[i][j].sub(&t);
            }
            for j in 0..b[i].len() {
                let t = b[r][j].mul(&f);
                b[i][j] = b[i][j].sub(&t);
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    if r < cols {
        return None;
    }
    Some(())
}

/// Report of the jet action on the derivation.
#[derive(Debug, Clone)]
pub struct DerivationActionReport {
    /// The order-1 part lies in the Pfaffian symmetry groupoid.
    pub in_pfaffian_groupoid: bool,
    /// The transported derivation is independent of the completion choice
    /// (equivalently, the jet maps flat 1-jets to flat 1-jets).
    pub well_defined: bool,
    /// The transported derivation equals D^C at the target point.
    pub invariant: bool,
}

/// Act on the pointwise derivation `D^C_x` by a 2-jet:
/// `j·D = Phi_* ∘ D_x ∘ j^1 Phi^*` on flat 1-jets at the target, where Phi
/// is the induced bundle map on `pi^*TX` and its 1-jet is assembled from the
/// 2-jet data and the frame derivatives.
pub fn act_on_derivation_at(
    data: &RelativeAlgebroidData,
    jet: &JetElement,
) -> Result<DerivationActionReport> {
    if jet.order < 2 {
        return Err(Error::SpecInvalid("need a 2-jet".into()));
    }
    let f = data.fibration();
    let membership = jet_membership(f, jet)?;
    if !membership.pfaffian {
        return Err(Error::NotInGCpi);
    }
    let hess = jet.hessian.as_ref().expect("order-2 jet");
    let x = &jet.source;
    let y = &jet.target;
    let n = f.dim_base();
    let r = f.dim_vertical();
    let s = f.dim_quotient();
    let big_n = f.total().dim();

    // first-order scalar of an expression along p at x
    let at_x = |e: &Expr| -> Result<J1> {
        Ok(J1 {
            v: e.evaluate(x)?,
            d: (0..big_n)
                .map(|c| e.differentiate(c).evaluate(x))
                .collect::<Result<Vec<_>>>()?,
        })
    };
    // first-order scalar of an expression evaluated at phi(p), via the jet
    let at_phi = |e: &Expr| -> Result<J1> {
        let val = e.evaluate(y)?;
        let grad_y: Vec<BigRational> = (0..big_n)
            .map(|c| e.differentiate(c).evaluate(y))
            .collect::<Result<Vec<_>>>()?;
        let d = (0..big_n)
            .map(|ecol| {
                let mut acc = q0();
                for c in 0..big_n {
                    acc += &grad_y[c] * &jet.jacobian[(c, ecol)];
                }
                acc
            })
            .collect();
        Ok(J1 { v: val, d })
    };

    // D phi as first-order data: value J, derivative from the hessian
    let dphi = |c: usize, dcol: usize| -> J1 {
        J1 {
            v: jet.jacobian[(c, dcol)].clone(),
            d: (0..big_n).map(|e| hess[c][(dcol, e)].clone()).collect(),
        }
    };

    // M(p) = Dphi(p) * H_x(p): N x n over J1
    let mut m_jet: Vec<Vec<J1>> = vec![vec![J1::constant(big_n, q0()); n]; big_n];
    for ccol in 0..big_n {
        for i in 0..n {
            let mut acc = J1::constant(big_n, q0());
            for d in 0..big_n {
                let hval = at_x(&f.horizontal_frame()[i].components()[d])?;
                acc = acc.add(&dphi(ccol, d).mul(&hval));
            }
            m_jet[ccol][i] = acc;
        }
    }
    // adapted frame at phi(p): N x N over J1
    let frame_fields: Vec<&VectorField> = f
        .horizontal_frame()
        .iter()
        .chain(f.vertical_frame())
        .chain(f.vertical_complement())
        .collect();
    let mut frame_jet: Vec<Vec<J1>> = vec![vec![J1::constant(big_n, q0()); big_n]; big_n];
    for (col, field) in frame_fields.iter().enumerate() {
        for crow in 0..big_n {
            frame_jet[crow][col] = at_phi(&field.components()[crow])?;
        }
    }
    // decompose: frame_jet * coords = m_jet
    let mut mm = frame_jet;
    let mut bb: Vec<Vec<J1>> = (0..big_n)
        .map(|crow| m_jet[crow].clone())
        .collect();
    solve_j1(&mut mm, &mut bb)
        .ok_or_else(|| Error::SingularPoint("adapted frame degenerates along the jet".into()))?;
    // rows of bb are now the coordinates; Phi_B = top n x n block
    let phi_b: Vec<Vec<J1>> = (0..n).map(|i| bb[i].clone()).collect();

    // B0 and its inverse
    let b0 = Matrix::from_fn(q0(), n, n, |i, j| phi_b[i][j].v.clone());
    if b0.rank() != n {
        return Err(Error::SingularPoint(
            "induced map on pi^*TX degenerates".into(),
        ));
    }
    let b0_inv = {
        let id = Matrix::identity(q0(), n);
        let aug = b0.hstack(&id);
        let rr = aug.rref();
        Matrix::from_fn(q0(), n, n, |i, j| rr.mat[(i, n + j)].clone())
    };

    // data at x and y
    let h_x: Vec<Vec<BigRational>> = f
        .horizontal_frame()
        .iter()
        .map(|h| h.evaluate(x))
        .collect::<Result<Vec<_>>>()?;
    let h_y: Vec<Vec<BigRational>> = f
        .horizontal_frame()
        .iter()
        .map(|h| h.evaluate(y))
        .collect::<Result<Vec<_>>>()?;
    let v_x: Vec<Vec<BigRational>> = f
        .vertical_frame()
        .iter()
        .map(|v| v.evaluate(x))
        .collect::<Result<Vec<_>>>()?;
    let v_y: Vec<Vec<BigRational>> = f
        .vertical_frame()
        .iter()
        .map(|v| v.evaluate(y))
        .collect::<Result<Vec<_>>>()?;

    // basis of Ann(C^pi_y): kernel of the v_y-evaluation
    let ann_y: Vec<Vec<BigRational>> = {
        if r == 0 {
            (0..big_n)
                .map(|c| {
                    let mut e = vec![q0(); big_n];
                    e[c] = q1();
                    e
                })
                .collect()
        } else {
            let vm = Matrix::from_rows(q0(), v_y.clone());
            crate::linalg::kernel_basis(&vm).basis().to_vec()
        }
    };
    debug_assert_eq!(ann_y.len(), n + s);

    // flat 1-jet basis at y: values (e^k, 0) and gradients (0, e^k ⊗ psi)
    struct FlatJet {
        value: Vec<BigRational>,
        grad: Vec<Vec<BigRational>>, // n rows, big_n cols
    }
    let mut jets: Vec<FlatJet> = Vec::new();
    for k in 0..n {
        let mut value = vec![q0(); n];
        value[k] = q1();
        jets.push(FlatJet {
            value,
            grad: vec![vec![q0(); big_n]; n],
        });
    }
    for k in 0..n {
        for psi in &ann_y {
            let mut grad = vec![vec![q0(); big_n]; n];
            grad[k] = psi.clone();
            jets.push(FlatJet {
                value: vec![q0(); n],
                grad,
            });
        }
    }

    let mut well_defined = true;
    let mut invariant = true;
    for fj in &jets {
        // pullback at x: beta0 = B0^T alpha0; gradient rows
        let mut beta0 = vec![q0(); n];
        for i in 0..n {
            for k in 0..n {
                beta0[i] += &phi_b[k][i].v * &fj.value[k];
            }
        }
        let mut bgrad = vec![vec![q0(); big_n]; n];
        for i in 0..n {
            for e in 0..big_n {
                let mut acc = q0();
                for k in 0..n {
                    // (d Phi_B[k][i])_e * alpha0_k
                    acc += &phi_b[k][i].d[e] * &fj.value[k];
                    // B0[k][i] * (grad alpha_k · J e)
                    let mut ja = q0();
                    for c in 0..big_n {
                        ja += &fj.grad[k][c] * &jet.jacobian[(c, e)];
                    }
                    acc += &phi_b[k][i].v * &ja;
                }
                bgrad[i][e] = acc;
            }
        }
        // flatness of the pullback jet: gradients kill C^pi_x
        for va in &v_x {
            for row in bgrad.iter() {
                let mut acc = q0();
                for c in 0..big_n {
                    acc += &row[c] * &va[c];
                }
                if !Scalar::is_zero(&acc) {
                    well_defined = false;
                }
            }
        }
        // apply the completion (S = H(x), forced brackets) at x
        let mut out = vec![vec![q0(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = q0();
                for c in 0..big_n {
                    acc += &bgrad[j][c] * &h_x[i][c];
                    acc -= &bgrad[i][c] * &h_x[j][c];
                }
                // forced bracket term: sum_k beta0_k * (-c^k_{ij}(x))
                for (k, cmat) in data.bracket_c.iter().enumerate() {
                    let cval = cmat[(i, j)].evaluate(x)?;
                    acc -= &beta0[k] * &cval;
                }
                out[i][j] = acc;
            }
        }
        // push forward along B0
        let mut out_y = vec![vec![q0(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = q0();
                for a in 0..n {
                    for b in 0..n {
                        let t = &out[a][b] * &b0_inv[(a, i)];
                        acc += &t * &b0_inv[(b, j)];
                    }
                }
                out_y[i][j] = acc;
            }
        }
        // reference: D^C_y on the original flat jet
        for i in 0..n {
            for j in 0..n {
                let mut refv = q0();
                for c in 0..big_n {
                    refv += &fj.grad[j][c] * &h_y[i][c];
                    refv -= &fj.grad[i][c] * &h_y[j][c];
                }
                for (k, cmat) in data.bracket_c.iter().enumerate() {
                    let cval = cmat[(i, j)].evaluate(y)?;
                    refv -= &fj.value[k] * &cval;
                }
                if out_y[i][j] != refv {
                    invariant = false;
                }
            }
        }
    }
    let _ = v_y;
    Ok(DerivationActionReport {
        in_pfaffian_groupoid: true,
        well_defined,
        invariant: invariant && well_defined,
    })
}

/// Chart-based groupoid action data. The source map must be a coordinate
/// projection so composable pairs can be sampled by filling its fibers.
#[derive(Debug, Clone)]
pub struct ActionSpec {
    pub groupoid_chart: ChartRef,
    pub base_chart: ChartRef,
    pub source: SmoothMap,
    pub target: SmoothMap,
    pub unit: SmoothMap,
    pub moment: SmoothMap,
    /// Action map on the product chart (G coordinates then P coordinates).
    pub product_chart: ChartRef,
    pub action: SmoothMap,
    pub distribution: Distribution,
}

impl ActionSpec {
    /// Structural validation: chart wiring, `s ∘ unit = id`, and the unit
    /// action law `m(unit(mu(p)), p) = p`.
    pub fn validate(&self, f: &PfaffianFibration) -> Result<()> {
        if self.source.source() != &self.groupoid_chart
            || self.source.target() != &self.base_chart
        {
            return Err(Error::SpecInvalid("source map charts".into()));
        }
        if self.target.source() != &self.groupoid_chart
            || self.target.target() != &self.base_chart
        {
            return Err(Error::SpecInvalid("target map charts".into()));
        }
        if self.unit.source() != &self.base_chart || self.unit.target() != &self.groupoid_chart {
            return Err(Error::SpecInvalid("unit map charts".into()));
        }
        if self.moment.source() != f.total() || self.moment.target() != &self.base_chart {
            return Err(Error::SpecInvalid("moment map charts".into()));
        }
        if self.action.source() != &self.product_chart || self.action.target() != f.total() {
            return Err(Error::SpecInvalid("action map charts".into()));
        }
        if self.distribution.chart() != &self.groupoid_chart {
            return Err(Error::SpecInvalid("H must live on the groupoid chart".into()));
        }
        let ng = self.groupoid_chart.dim();
        let np = f.total().dim();
        if self.product_chart.dim() != ng + np {
            return Err(Error::SpecInvalid("product chart dimension".into()));
        }
        // s ∘ unit = id on M
        if self.base_chart.dim() > 0 {
            let su = self.source.compose(&self.unit)?;
            if !su.is_identity() {
                return Err(Error::SpecInvalid("s ∘ unit is not the identity".into()));
            }
        }
        // m(unit(mu(p)), p) = p symbolically
        let total = f.total().clone();
        let unit_mu = self.unit.compose(&self.moment)?;
        let mut pair_comps: Vec<Expr> = unit_mu.components().to_vec();
        for i in 0..np {
            pair_comps.push(Expr::coord(&total, i));
        }
        let pair_map = SmoothMap::new(total.clone(), self.product_chart.clone(), pair_comps)?;
        let acted = self.action.compose(&pair_map)?;
        if !acted.is_identity() {
            return Err(Error::SpecInvalid(
                "unit does not act as the identity".into(),
            ));
        }
        // source must be a coordinate projection (to sample its fibers)
        source_projection_indices(&self.source)?;
        Ok(())
    }
}

fn source_projection_indices(s: &SmoothMap) -> Result<Vec<usize>> {
    let chart = s.source();
    let mut idxs = Vec::new();
    for (k, comp) in s.components().iter().enumerate() {
        let found = (0..chart.dim()).find(|&i| comp == &Expr::coord(chart, i));
        match found {
            Some(i) if !idxs.contains(&i) => idxs.push(i),
            _ => {
                return Err(Error::SpecInvalid(format!(
                    "source map component {k} is not a distinct coordinate; \
                     composable pairs cannot be sampled"
                )))
            }
        }
    }
    Ok(idxs)
}

/// Verdict of the tangent action conditions at sampled composable pairs.
#[derive(Debug, Clone)]
pub struct ActionReport {
    pub internal: bool,
    pub pfaffian: bool,
    pub pairs_checked: u32,
    pub witness: Option<String>,
}

/// Check the action conditions `Tm(H ×_{Tmu} C) ⊆ C` (internal) and
/// additionally `Tm(H ×_{Tmu} C^pi) ⊆ C^pi` (Pfaffian) at sampled
/// composable pairs.
pub fn check_action(
    f: &PfaffianFibration,
    spec: &ActionSpec,
    policy: &SamplingPolicy,
    pairs: u32,
) -> Result<ActionReport> {
    spec.validate(f)?;
    let src_idx = source_projection_indices(&spec.source)?;
    let ng = spec.groupoid_chart.dim();
    let _np = f.total().dim();
    let mut internal = true;
    let mut pfaffian = true;
    let mut witness = None;

    let dm = spec.action.jacobian(); // np x (ng + np), on the product chart
    let ds = spec.source.jacobian(); // nm x ng
    let dmu = spec.moment.jacobian(); // nm x np

    for sample in 0..pairs {
        // sample p, fill the source fiber over mu(p)
        let p = f.sample_valid_point(&policy.split(61_000 + sample as u64))?;
        let mval = spec.moment.apply_point(&p)?;
        let mut gvals = vec![q0(); ng];
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed ^ (sample as u64 * 7919 + 11));
        for i in 0..ng {
            if let Some(pos) = src_idx.iter().position(|&ix| ix == i) {
                gvals[i] = mval.values()[pos].clone();
            } else {
                let h = policy.height_bound.max(1) as i64;
                gvals[i] = BigRational::new(
                    rng.gen_range(-h..=h).into(),
                    rng.gen_range(1..=h).into(),
                );
            }
        }
        let g = Point::new(spec.groupoid_chart.clone(), gvals)?;
        let mut pair_vals = g.values().to_vec();
        pair_vals.extend(p.values().iter().cloned());
        let gp = Point::new(spec.product_chart.clone(), pair_vals)?;
        let image = spec.action.apply_point(&gp)?;

        // numeric tangent data
        let dm_n = dm.evaluate(&gp)?;
        let ds_n = ds.evaluate(&g)?;
        let dmu_n = dmu.evaluate(&p)?;
        let h_g = spec.distribution.generator_matrix().evaluate(&g)?;
        let c_p = f.distribution().generator_matrix().evaluate(&p)?;
        let c_img = f.distribution().fiber_at(&image)?;

        // fibered pairs: Ts(W) = Tmu(V)
        let lhs = ds_n.matmul(&h_g);
        let rhs = dmu_n.matmul(&c_p).map(q0(), |x| -x.clone());
        let ker = crate::linalg::kernel_basis(&lhs.hstack(&rhs));
        for kvec in ker.basis() {
            let wcoef = &kvec[..h_g.cols()];
            let vcoef = &kvec[h_g.cols()..];
            let w = h_g.mul_vec(wcoef);
            let v = c_p.mul_vec(vcoef);
            let mut wv = w.clone();
            wv.extend(v.iter().cloned());
            let pushed = dm_n.mul_vec(&wv);
            if !c_img.contains(&pushed) {
                internal = false;
                pfaffian = false;
                witness = Some(format!("internal condition fails at sample {sample}"));
            }
        }

        if f.dim_vertical() > 0 && pfaffian {
            let vp = f.vertical_part().generator_matrix().evaluate(&p)?;
            let v_img = f.vertical_part().fiber_at(&image)?;
            let rhs_v = dmu_n.matmul(&vp).map(q0(), |x| -x.clone());
            let ker_v = crate::linalg::kernel_basis(&lhs.hstack(&rhs_v));
            for kvec in ker_v.basis() {
                let wcoef = &kvec[..h_g.cols()];
                let vcoef = &kvec[h_g.cols()..];
                let w = h_g.mul_vec(wcoef);
                let v = vp.mul_vec(vcoef);
                let mut wv = w.clone();
                wv.extend(v.iter().cloned());
                let pushed = dm_n.mul_vec(&wv);
                if !v_img.contains(&pushed) {
                    pfaffian = false;
                    witness = Some(format!("Pfaffian condition fails at sample {sample}"));
                }
            }
        }
    }
    Ok(ActionReport {
        internal,
        pfaffian,
        pairs_checked: pairs,
        witness,
    })
}

/// Report for the point-symmetry form identity on first jets.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub samples: u32,
    pub all_equal: bool,
    pub containment_holds: bool,
}

/// Evaluate both sides of the first-jet form identity
/// `pr*omega_Q - (g·h)∘(qbar* omega_X) = m* theta_Q - g·(pr* theta_Q)`
/// at deterministic random jet data for a coordinate projection `q: Q -> X`,
/// and check the kernel containment `Tm(ker omega × ker theta) ⊆ ker theta`.
pub fn point_symmetry_identity(
    q: &SmoothMap,
    samples: u32,
    seed: u64,
    height: u32,
) -> Result<IdentityReport> {
    // q must be a coordinate projection: split Q coordinates into base and
    // dependent blocks. For clarity we require base coordinates first.
    let nq = q.source().dim();
    let n = q.target().dim();
    let m = nq - n;
    if n == 0 || m == 0 {
        return Err(Error::NotAProjection("need base and fiber directions".into()));
    }
    for (k, comp) in q.components().iter().enumerate() {
        if comp != &Expr::coord(q.source(), k) {
            return Err(Error::NotAProjection(
                "base coordinates must come first in the source chart".into(),
            ));
        }
    }
    let h = height.max(1) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rnd = |rng: &mut ChaCha8Rng| -> BigRational {
        BigRational::new(rng.gen_range(-h..=h).into(), rng.gen_range(1..=h).into())
    };
    let rand_mat = |rng: &mut ChaCha8Rng, rows: usize, cols: usize| -> QMatrix {
        Matrix::from_fn(q0(), rows, cols, |_, _| {
            BigRational::new(rng.gen_range(-h..=h).into(), rng.gen_range(1..=h).into())
        })
    };
    let rand_invertible = |rng: &mut ChaCha8Rng, k: usize| -> QMatrix {
        loop {
            let m = rand_mat(rng, k, k);
            if m.rank() == k {
                return m;
            }
        }
    };

    let mut all_equal = true;
    let mut containment = true;
    for _ in 0..samples {
        // jet of a fibered diffeomorphism: blocks A (base), C, D (fiber)
        let a = rand_invertible(&mut rng, n);
        let cmat = rand_mat(&mut rng, m, n);
        let d = rand_invertible(&mut rng, m);
        // splitting h at the source point: p (m x n)
        let p = rand_mat(&mut rng, m, n);
        // tangent data: W = (zdot, zdot_target, Adot, Cdot, Ddot), V = (zdot, pdot).
        let zdot: Vec<BigRational> = (0..nq).map(|_| rnd(&mut rng)).collect();
        let zdot_t: Vec<BigRational> = (0..nq).map(|_| rnd(&mut rng)).collect();
        let adot = rand_mat(&mut rng, n, n);
        let cdot = rand_mat(&mut rng, m, n);
        let ddot = rand_mat(&mut rng, m, m);
        let pdot = rand_mat(&mut rng, m, n);

        // g·h = (C + D p) A^{-1}
        let a_inv = {
            let aug = a.hstack(&Matrix::identity(q0(), n));
            let rr = aug.rref();
            Matrix::from_fn(q0(), n, n, |i, j| rr.mat[(i, n + j)].clone())
        };
        let dp = {
            let mut t = cmat.clone();
            for i in 0..m {
                for j in 0..n {
                    let mut acc = t[(i, j)].clone();
                    for k in 0..m {
                        acc += &d[(i, k)] * &p[(k, j)];
                    }
                    t[(i, j)] = acc;
                }
            }
            t
        };
        let gh = dp.matmul(&a_inv);

        // omega_Q(W) = zdot_t - Jphi zdot, with Jphi = [[A, 0], [C, D]]
        let jphi_mul = |v: &[BigRational]| -> Vec<BigRational> {
            let mut out = vec![q0(); nq];
            for i in 0..n {
                for j in 0..n {
                    out[i] += &a[(i, j)] * &v[j];
                }
            }
            for i in 0..m {
                for j in 0..n {
                    out[n + i] += &cmat[(i, j)] * &v[j];
                }
                for j in 0..m {
                    out[n + i] += &d[(i, j)] * &v[n + j];
                }
            }
            out
        };
        let omega_q: Vec<BigRational> = {
            let jv = jphi_mul(&zdot);
            (0..nq).map(|i| &zdot_t[i] - &jv[i]).collect()
        };
        // qbar* omega_X (W) = x-part of zdot_t - A (x-part of zdot)
        let omega_x: Vec<BigRational> = {
            let mut out = vec![q0(); n];
            for i in 0..n {
                let mut acc = zdot_t[i].clone();
                for j in 0..n {
                    acc -= &a[(i, j)] * &zdot[j];
                }
                out[i] = acc;
            }
            out
        };
        // LHS = omega_Q - [I; gh] omega_x
        let mut lhs = omega_q.clone();
        for i in 0..n {
            lhs[i] -= &omega_x[i];
        }
        for i in 0..m {
            let mut acc = q0();
            for j in 0..n {
                acc += &gh[(i, j)] * &omega_x[j];
            }
            lhs[n + i] -= &acc;
        }

        // theta_Q(V) = u-part of zdot - p (x-part of zdot)
        let theta_v: Vec<BigRational> = (0..m)
            .map(|i| {
                let mut acc = zdot[n + i].clone();
                for j in 0..n {
                    acc -= &p[(i, j)] * &zdot[j];
                }
                acc
            })
            .collect();
        // m*(theta_Q)(W, V): target point moves by zdot_t; jet part moves by
        // pdot' = (Cdot + Ddot p + D pdot) A^{-1} - (C + Dp) A^{-1} Adot A^{-1}
        let pprime_dot = {
            let mut t1 = cdot.clone();
            for i in 0..m {
                for j in 0..n {
                    let mut acc = t1[(i, j)].clone();
                    for k in 0..m {
                        acc += &ddot[(i, k)] * &p[(k, j)];
                        acc += &d[(i, k)] * &pdot[(k, j)];
                    }
                    t1[(i, j)] = acc;
                }
            }
            let part1 = t1.matmul(&a_inv);
            let part2 = gh.matmul(&adot).matmul(&a_inv);
            Matrix::from_fn(q0(), m, n, |i, j| &part1[(i, j)] - &part2[(i, j)])
        };
        let _ = pprime_dot; // theta at the image uses only base displacement
        let theta_m: Vec<BigRational> = (0..m)
            .map(|i| {
                let mut acc = zdot_t[n + i].clone();
                for j in 0..n {
                    acc -= &gh[(i, j)] * &zdot_t[j];
                }
                acc
            })
            .collect();
        // g·(pr* theta_Q)(V) = D theta_v
        let d_theta: Vec<BigRational> = (0..m)
            .map(|i| {
                let mut acc = q0();
                for k in 0..m {
                    acc += &d[(i, k)] * &theta_v[k];
                }
                acc
            })
            .collect();
        // RHS embedded in T Q: zero base components
        for i in 0..n {
            if !Scalar::is_zero(&lhs[i]) {
                all_equal = false;
            }
        }
        for i in 0..m {
            let rhs = &theta_m[i] - &d_theta[i];
            if lhs[n + i] != rhs {
                all_equal = false;
            }
        }

        // containment of Remark-type kernels: W in ker omega (zdot_t = Jphi zdot),
        // V in ker theta (u-part of zdot = p x-part): then Tm(W, V) in ker theta.
        let zdot_k: Vec<BigRational> = {
            let xpart: Vec<BigRational> = (0..n).map(|_| rnd(&mut rng)).collect();
            let mut out = xpart.clone();
            for i in 0..m {
                let mut acc = q0();
                for j in 0..n {
                    acc += &p[(i, j)] * &xpart[j];
                }
                out.push(acc);
            }
            out
        };
        let zdot_tk = jphi_mul(&zdot_k);
        let pdot_k = rand_mat(&mut rng, m, n);
        let _ = pdot_k;
        // theta at image of Tm(W, V): base displacement zdot_tk, jet g·h
        for i in 0..m {
            let mut acc = zdot_tk[n + i].clone();
            for j in 0..n {
                acc -= &gh[(i, j)] * &zdot_tk[j];
            }
            if !Scalar::is_zero(&acc) {
                containment = false;
            }
        }
    }
    Ok(IdentityReport {
        samples,
        all_equal,
        containment_holds: containment,
    })
}

/// Convenience alias matching the sampling helper used across checks.
pub fn sample_total_point(
    f: &PfaffianFibration,
    policy: &SamplingPolicy,
) -> Result<Point> {
    let _ = sample_point(f.total(), f.singular_locus(), policy);
    f.sample_valid_point(policy)
}
