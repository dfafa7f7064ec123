//! Pfaffian fibrations: a submersion `pi: P -> X` with a distribution C on P
//! that is transverse to the fibers and whose vertical part `C^pi` is
//! involutive. Analysis revolves around an adapted frame:
//!
//! * horizontal lifts `h_1..h_n` in C with `Tpi(h_i) = d/dx_i`,
//! * a basis `v_1..v_r` of `C^pi = C ∩ ker Tpi`,
//! * a complement `k_1..k_s` of `C^pi` inside `ker Tpi`,
//! * coordinate fields spanning a complement of C (the TP/C report basis).
//!
//! Curvature is brackets mod C, the tableau map is its mixed part, and the
//! prolongation fibers are the affine solution sets of the torsion system
//! `delta_tau(xi) = -kappa(h_i, h_j)`.

use std::sync::OnceLock;

use num_rational::BigRational;

use crate::error::Error;
use crate::expr::{Chart, ChartRef, Expr, Point};
use crate::exterior::{lie_bracket, Distribution, KForm, SmoothMap, VectorField};
use crate::linalg::{q0, sample_point, solve_affine, AffineSubspace, Matrix, SamplingPolicy, Scalar, Subspace};
use crate::par;
use crate::tableau::{self, CartanReport, TableauMap};
use crate::Result;

type QMatrix = Matrix<BigRational>;

/// A validated Pfaffian fibration with its cached adapted frame.
#[derive(Debug, Clone)]
pub struct PfaffianFibration {
    total: ChartRef,
    base: ChartRef,
    projection: SmoothMap,
    distribution: Distribution,
    cpi: Distribution,
    horizontal: Vec<VectorField>,
    vertical: Vec<VectorField>,
    vertical_complement: Vec<VectorField>,
    quotient_coords: Vec<usize>,
    singular: Vec<Expr>,
    brackets: OnceLock<Vec<VectorField>>,
}

/// Indices into the C-frame `[h_1..h_n, v_1..v_r]`.
fn pair_list(len: usize) -> Vec<(usize, usize)> {
    (0..len)
        .flat_map(|a| ((a + 1)..len).map(move |b| (a, b)))
        .collect()
}

impl PfaffianFibration {
    /// Validate Definition 1.1 for the raw data: submersion, transversality,
    /// constant-rank vertical part, involutive vertical part. Checks run
    /// generically and at sampled points; the adapted frame is cached.
    pub fn validate(
        projection: SmoothMap,
        distribution: Distribution,
        policy: &SamplingPolicy,
    ) -> Result<Self> {
        let total = projection.source().clone();
        let base = projection.target().clone();
        if distribution.chart() != &total {
            return Err(Error::ChartMismatch(
                "distribution does not live on the total chart".into(),
            ));
        }
        let n = base.dim();
        let big_n = total.dim();
        if n == 0 || big_n <= n {
            return Err(Error::NotASubmersion);
        }
        let dpi = projection.jacobian();
        if dpi.rank() != n {
            return Err(Error::NotASubmersion);
        }

        // ker Tpi as a distribution
        let ker_basis = crate::linalg::kernel_basis(&dpi);
        let ker_fields: Vec<VectorField> = ker_basis
            .basis()
            .iter()
            .map(|v| VectorField::new(total.clone(), primitive(&total, v)))
            .collect();

        // transversality: C + ker Tpi = TP generically
        let gc = distribution.generator_matrix();
        let gker = Matrix::from_cols(
            Expr::zero(&total),
            ker_fields.iter().map(|f| f.components().to_vec()).collect(),
        );
        if gc.hstack(&gker).rank() != big_n {
            return Err(Error::TransversalityFails);
        }

        // C^pi = C ∩ ker Tpi
        let rank_c = distribution.rank();
        let r = rank_c + (big_n - n) - big_n; // = rank C - n
        if rank_c < n {
            return Err(Error::TransversalityFails);
        }
        let stacked = gc.hstack(&gker.map(Expr::zero(&total), |e| e.neg()));
        let inter = crate::linalg::kernel_basis(&stacked);
        let mut vertical_vecs = Vec::new();
        for kv in inter.basis() {
            let coeffs = &kv[..gc.cols()];
            vertical_vecs.push(gc.mul_vec(coeffs));
        }
        let vertical_sub = Subspace::from_vectors(Expr::zero(&total), big_n, vertical_vecs);
        if vertical_sub.dim() != r {
            return Err(Error::VerticalPartNotConstantRank);
        }
        let vertical: Vec<VectorField> = vertical_sub
            .basis()
            .iter()
            .map(|v| VectorField::new(total.clone(), primitive(&total, v)))
            .collect();
        let cpi = Distribution::from_generators(total.clone(), vertical.clone())?;

        let mut singular = distribution.singular_locus();
        singular.extend(dpi.denominators());

        // constant-rank protocol on C and C^pi
        if crate::linalg::constant_rank_on_samples(&gc, &singular, policy, 8).is_err() {
            return Err(Error::RankInstability("Cartan distribution".into()));
        }
        if r > 0 {
            let gv = cpi.generator_matrix();
            match crate::linalg::constant_rank_on_samples(&gv, &singular, policy, 8) {
                Ok(_) => {}
                Err(Error::RankInstability(_)) => {
                    return Err(Error::VerticalPartNotConstantRank)
                }
                Err(e) => return Err(e),
            }
        }
        match cpi.is_involutive(policy) {
            Ok(true) => {}
            Ok(false) => return Err(Error::VerticalPartNotInvolutive),
            Err(Error::RankInstability(_)) => return Err(Error::VerticalPartNotConstantRank),
            Err(e) => return Err(e),
        }

        // horizontal lifts: h_i = G_C c with (Dpi G_C) c = e_i
        let dpi_gc = dpi.matmul(&gc);
        let mut horizontal = Vec::with_capacity(n);
        for i in 0..n {
            let mut rhs = vec![Expr::zero(&total); n];
            rhs[i] = Expr::one(&total);
            let sol = solve_affine(&dpi_gc, &rhs);
            let Some(part) = sol.particular() else {
                return Err(Error::SingularFrame(format!(
                    "no horizontal lift of base direction {i}"
                )));
            };
            let h = gc.mul_vec(part);
            horizontal.push(VectorField::new(total.clone(), h));
        }
        for h in &horizontal {
            singular.extend(field_denominators(h));
        }
        singular.extend(dpi_gc.rref().witnesses.into_iter().filter_map(numerator_locus));

        // complement of C^pi inside ker Tpi (greedy over the kernel basis)
        let mut vertical_complement: Vec<VectorField> = Vec::new();
        {
            let mut current: Vec<Vec<Expr>> = vertical
                .iter()
                .map(|f| f.components().to_vec())
                .collect();
            let mut rank_now = r;
            for kf in &ker_fields {
                if rank_now == big_n - n {
                    break;
                }
                let mut cand = current.clone();
                cand.push(kf.components().to_vec());
                let m = Matrix::from_rows(Expr::zero(&total), cand.clone());
                if m.rank() > rank_now {
                    rank_now += 1;
                    current = cand;
                    vertical_complement.push(kf.clone());
                }
            }
            if rank_now != big_n - n {
                return Err(Error::SingularFrame(
                    "cannot complete C^pi inside ker Tpi".into(),
                ));
            }
        }

        // TP/C report basis: coordinate fields at the pivot-free rows of the
        // reduced C-frame, so the completed frame minor is the pivot minor.
        let cframe: Vec<Vec<Expr>> = horizontal
            .iter()
            .chain(vertical.iter())
            .map(|f| f.components().to_vec())
            .collect();
        let cframe_mat = Matrix::from_cols(Expr::zero(&total), cframe);
        let rr = cframe_mat.transpose().rref();
        let mut quotient_coords = Vec::new();
        for row in 0..big_n {
            if !rr.pivots.contains(&row) {
                quotient_coords.push(row);
            }
        }
        if quotient_coords.len() != big_n - n - r {
            return Err(Error::SingularFrame("quotient completion failed".into()));
        }

        let fib = PfaffianFibration {
            total,
            base,
            projection,
            distribution,
            cpi,
            horizontal,
            vertical,
            vertical_complement,
            quotient_coords,
            singular,
            brackets: OnceLock::new(),
        };

        // sampled-point validation of the full frame
        for k in 0..8u64 {
            fib.sample_valid_point(&policy.split(90_000 + k))?;
        }
        Ok(fib)
    }

    pub fn total(&self) -> &ChartRef {
        &self.total
    }

    pub fn base(&self) -> &ChartRef {
        &self.base
    }

    pub fn projection(&self) -> &SmoothMap {
        &self.projection
    }

    pub fn distribution(&self) -> &Distribution {
        &self.distribution
    }

    /// The vertical part C^pi as a distribution.
    pub fn vertical_part(&self) -> &Distribution {
        &self.cpi
    }

    pub fn horizontal_frame(&self) -> &[VectorField] {
        &self.horizontal
    }

    pub fn vertical_frame(&self) -> &[VectorField] {
        &self.vertical
    }

    /// Complement of C^pi inside ker Tpi (spans ker Tpi together with the
    /// vertical frame; its classes form the relative-algebroid quotient).
    pub fn vertical_complement(&self) -> &[VectorField] {
        &self.vertical_complement
    }

    /// Chart indices of the coordinate fields completing the C-frame; their
    /// classes are the TP/C report basis.
    pub fn quotient_coords(&self) -> &[usize] {
        &self.quotient_coords
    }

    pub fn dim_base(&self) -> usize {
        self.base.dim()
    }

    pub fn dim_vertical(&self) -> usize {
        self.vertical.len()
    }

    pub fn dim_quotient(&self) -> usize {
        self.quotient_coords.len()
    }

    pub fn singular_locus(&self) -> &[Expr] {
        &self.singular
    }

    /// The C-frame `[h_1..h_n, v_1..v_r]`.
    pub fn c_frame(&self) -> Vec<VectorField> {
        self.horizontal
            .iter()
            .chain(self.vertical.iter())
            .cloned()
            .collect()
    }

    /// Full frame columns `[h | v | appended coordinate fields]`.
    pub fn full_frame(&self) -> Matrix<Expr> {
        let mut cols: Vec<Vec<Expr>> = self
            .c_frame()
            .iter()
            .map(|f| f.components().to_vec())
            .collect();
        for &idx in &self.quotient_coords {
            cols.push(VectorField::coordinate(&self.total, idx).components().to_vec());
        }
        Matrix::from_cols(Expr::zero(&self.total), cols)
    }

    /// Pairwise brackets of the C-frame, cached (index by `pair_list`).
    fn frame_brackets(&self) -> &[VectorField] {
        self.brackets.get_or_init(|| {
            let cf = self.c_frame();
            pair_list(cf.len())
                .into_iter()
                .map(|(a, b)| lie_bracket(&cf[a], &cf[b]))
                .collect()
        })
    }

    /// Sample a rational point where the cached frame is invertible.
    pub fn sample_valid_point(&self, policy: &SamplingPolicy) -> Result<Point> {
        let frame = self.full_frame();
        for attempt in 0..policy.max_retries {
            let p = sample_point(
                &self.total,
                &self.singular,
                &policy.split(7_000 + attempt as u64),
            )?;
            if self.check_point(&p).is_ok() {
                return Ok(p);
            }
            let _ = &frame;
        }
        Err(Error::RankInstability(
            "no sampled point with invertible adapted frame".into(),
        ))
    }

    /// A point is valid when the full frame is invertible there.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        let f = self
            .full_frame()
            .evaluate(p)
            .map_err(|_| Error::SingularPoint("pole in frame entries".into()))?;
        if f.rank() != self.total.dim() {
            return Err(Error::SingularPoint(format!(
                "adapted frame degenerates at {}",
                format_point(p)
            )));
        }
        Ok(())
    }

    /// Decompose a tangent vector at `p` in the full frame.
    fn frame_coordinates(&self, p: &Point, w: &[BigRational]) -> Result<Vec<BigRational>> {
        let f = self.full_frame().evaluate(p)?;
        let sol = solve_affine(&f, w);
        sol.particular()
            .cloned()
            .ok_or_else(|| Error::SingularPoint("frame solve failed".into()))
    }

    /// Curvature tensor at a point: brackets of the C-frame mod C.
    pub fn curvature_at(&self, p: &Point) -> Result<CurvatureAtPoint> {
        self.check_point(p)?;
        let cf_len = self.horizontal.len() + self.vertical.len();
        let pairs = pair_list(cf_len);
        let s = self.dim_quotient();
        let brackets = self.frame_brackets();
        let mut rows = Vec::with_capacity(pairs.len());
        for br in brackets {
            let val = br
                .evaluate(p)
                .map_err(|_| Error::SingularPoint("pole in bracket".into()))?;
            let coords = self.frame_coordinates(p, &val)?;
            rows.push(coords[cf_len..].to_vec());
        }
        Ok(CurvatureAtPoint {
            point: p.clone(),
            dim_cframe: cf_len,
            dim_quotient: s,
            pairs,
            matrix: Matrix::from_rows(q0(), rows),
        })
    }

    /// Tableau map at a point: `tau(v_a)(d/dx_i) = kappa(v_a, h_i)` with
    /// g = C^pi, V = T_x X, W = (TP/C)_x.
    pub fn tableau_map_at(&self, p: &Point) -> Result<TableauMap> {
        let curv = self.curvature_at(p)?;
        Ok(self.tableau_from_curvature(&curv))
    }

    pub fn tableau_from_curvature(&self, curv: &CurvatureAtPoint) -> TableauMap {
        let n = self.dim_base();
        let r = self.dim_vertical();
        let s = self.dim_quotient();
        let images = (0..r)
            .map(|a| {
                Matrix::from_fn(q0(), s, n, |w, i| {
                    // kappa(v_a, h_i) = -kappa(h_i, v_a); frame index of v_a is n + a
                    let k = curv.kappa(n + a, i);
                    k[w].clone()
                })
            })
            .collect();
        TableauMap::new(n, s, images).expect("tableau shapes")
    }

    /// Prolongation fiber at a point. The partial variant drops the
    /// curvature equations; the full variant solves
    /// `delta_tau(xi) = -kappa(h_i, h_j)` in `xi in Hom(TX, C^pi)`.
    pub fn prolongation_fiber_at(
        &self,
        p: &Point,
        variant: FiberVariant,
    ) -> Result<ProlongationFiber> {
        let curv = self.curvature_at(p)?;
        self.prolongation_fiber_from_curvature(p, &curv, variant)
    }

    fn prolongation_fiber_from_curvature(
        &self,
        p: &Point,
        curv: &CurvatureAtPoint,
        variant: FiberVariant,
    ) -> Result<ProlongationFiber> {
        let n = self.dim_base();
        let r = self.dim_vertical();
        let s = self.dim_quotient();
        let unknowns = r * n;
        let solutions = match variant {
            FiberVariant::Partial => AffineSubspace::from_parts(
                vec![q0(); unknowns],
                Subspace::full(q0(), unknowns),
            ),
            FiberVariant::Full => {
                let tau = self.tableau_from_curvature(curv);
                let spencer = tableau::spencer_differential(&tau);
                let mut rhs = Vec::with_capacity(spencer.rows());
                for (i, j) in pair_list(n) {
                    let k = curv.kappa(i, j);
                    for w in 0..s {
                        rhs.push(-k[w].clone());
                    }
                }
                solve_affine(&spencer, &rhs)
            }
        };
        let base_splitting = Matrix::from_fn(q0(), self.total.dim(), n, |c, i| {
            self.horizontal[i]
                .components()[c]
                .evaluate(p)
                .expect("checked point")
        });
        let vertical_basis = Matrix::from_fn(q0(), self.total.dim(), r, |c, a| {
            self.vertical[a]
                .components()[c]
                .evaluate(p)
                .expect("checked point")
        });
        Ok(ProlongationFiber {
            point: p.clone(),
            variant,
            solutions,
            base_splitting,
            vertical_basis,
        })
    }

    /// Per-point integrability analysis over sampled points.
    pub fn one_integrability_report(
        &self,
        policy: &SamplingPolicy,
        samples: u32,
        trials: u32,
    ) -> Result<IntegrabilityReport> {
        let points: Vec<Point> = (0..samples)
            .map(|k| self.sample_valid_point(&policy.split(1000 + k as u64)))
            .collect::<Result<Vec<_>>>()?;
        let analyses: Vec<Result<PointAnalysis>> = par::map_indexed(points.len(), |i| {
            let p = &points[i];
            let curv = self.curvature_at(p)?;
            let tau = self.tableau_from_curvature(&curv);
            let full = self.prolongation_fiber_from_curvature(p, &curv, FiberVariant::Full)?;
            let partial =
                self.prolongation_fiber_from_curvature(p, &curv, FiberVariant::Partial)?;
            let report = tableau::involutivity_test(&tau, trials, policy.seed ^ (i as u64));
            Ok(PointAnalysis {
                point: p.clone(),
                fiber_dim: full.solutions.dim(),
                partial_dim: partial.solutions.dim().expect("partial fiber is affine"),
                characters: report.characters.clone(),
                tableau_report: report,
            })
        });
        let analyses = analyses.into_iter().collect::<Result<Vec<_>>>()?;
        let dims: Vec<Option<usize>> = analyses.iter().map(|a| a.fiber_dim).collect();
        let torsion_found = dims.iter().any(|d| d.is_none());
        let constant = dims.windows(2).all(|w| w[0] == w[1]);
        let one_integrable = !torsion_found && constant;
        Ok(IntegrabilityReport {
            fiber_dim: if one_integrable {
                dims.first().copied().flatten()
            } else {
                None
            },
            one_integrable_on_samples: one_integrable,
            torsion_found,
            points: analyses,
        })
    }

    /// Annihilator forms of C (the components of a Pfaffian form for C).
    pub fn pfaffian_forms(&self) -> Vec<KForm> {
        self.distribution.annihilators().to_vec()
    }

    /// Exact holonomicity of a section: `pi ∘ sigma = id` and
    /// `sigma^* theta_C = 0` symbolically.
    pub fn holonomic_check(&self, sigma: &SmoothMap) -> Result<bool> {
        if sigma.source() != &self.base || sigma.target() != &self.total {
            return Err(Error::ChartMismatch("section has wrong charts".into()));
        }
        let comp = self.projection.compose(sigma)?;
        if !comp.is_identity() {
            return Err(Error::NotASection);
        }
        for form in self.pfaffian_forms() {
            if !crate::exterior::pullback_form(sigma, &form)?.is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Symbolic full prolongation: solves the torsion system over the
    /// function field and builds `(P^(1), C^1, pi^(1))` with fresh fiber
    /// coordinates parametrizing the solution's linear part.
    pub fn prolong(&self, policy: &SamplingPolicy) -> Result<ProlongedFibration> {
        let n = self.dim_base();
        let r = self.dim_vertical();
        let s = self.dim_quotient();
        let big_n = self.total.dim();

        // symbolic curvature rows: brackets in full-frame coordinates
        let frame = self.full_frame();
        let brackets = self.frame_brackets();
        let cf_len = n + r;
        let mut kappa_sym: Vec<Vec<Expr>> = Vec::new(); // per pair, quotient coords
        for br in brackets {
            let sol = solve_affine(&frame, br.components());
            let Some(part) = sol.particular() else {
                return Err(Error::SingularFrame("frame decomposition failed".into()));
            };
            kappa_sym.push(part[cf_len..].to_vec());
        }
        let pairs = pair_list(cf_len);
        let kappa = |a: usize, b: usize| -> Vec<Expr> {
            if a == b {
                return vec![Expr::zero(&self.total); s];
            }
            let (i, j, neg) = if a < b { (a, b, false) } else { (b, a, true) };
            let idx = pairs.iter().position(|&p| p == (i, j)).expect("pair");
            if neg {
                kappa_sym[idx].iter().map(Expr::neg).collect()
            } else {
                kappa_sym[idx].clone()
            }
        };

        // symbolic tableau images and Spencer system
        let images: Vec<Matrix<Expr>> = (0..r)
            .map(|a| {
                Matrix::from_fn(Expr::zero(&self.total), s, n, |w, i| kappa(n + a, i)[w].clone())
            })
            .collect();
        let spencer = tableau::spencer_matrix(&images, n, s, r, Expr::zero(&self.total));
        let mut rhs = Vec::new();
        for (i, j) in pair_list(n) {
            for w in 0..s {
                rhs.push(kappa(i, j)[w].neg());
            }
        }
        let sol = solve_affine(&spencer, &rhs);
        let Some(xi_part) = sol.particular().cloned() else {
            return Err(Error::NoGlobalParametrization(
                "prolongation fibers are empty (torsion)".into(),
            ));
        };
        let kernel = sol.linear_part().clone();
        let m = kernel.dim();

        // new chart: total coordinates plus w_1..w_m
        let mut names: Vec<String> = self
            .total
            .coords()
            .iter()
            .map(|c| c.name().to_string())
            .collect();
        for k in 1..=m {
            let mut cand = format!("w_{k}");
            while names.contains(&cand) {
                cand.push('_');
            }
            names.push(cand);
        }
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let new_chart = Chart::new(format!("{}_prol", self.total.name()), &name_refs)?;

        // lift of a P-expression to the new chart
        let lift_vals: Vec<Expr> = (0..big_n).map(|i| Expr::coord(&new_chart, i)).collect();
        let lift = |e: &Expr| -> Result<Expr> { e.substitute(&lift_vals) };

        // xi on the new chart: particular + sum_k w_k * kernel_k
        let mut xi_new: Vec<Vec<Expr>> = vec![vec![Expr::zero(&new_chart); n]; r];
        for a in 0..r {
            for i in 0..n {
                let col = a * n + i;
                let mut acc = lift(&xi_part[col])?;
                for (k, kb) in kernel.basis().iter().enumerate() {
                    let w = Expr::coord(&new_chart, big_n + k);
                    acc = acc.add(&w.mul(&lift(&kb[col])?));
                }
                xi_new[a][i] = acc;
            }
        }

        // splitting matrix H over the new chart: column i = h_i + sum_a xi[a][i] v_a
        let splitting = {
            let mut cols = Vec::with_capacity(n);
            for i in 0..n {
                let mut col = Vec::with_capacity(big_n);
                for c in 0..big_n {
                    let mut acc = lift(&self.horizontal[i].components()[c])?;
                    for a in 0..r {
                        let v = lift(&self.vertical[a].components()[c])?;
                        acc = acc.add(&xi_new[a][i].mul(&v));
                    }
                    col.push(acc);
                }
                cols.push(col);
            }
            Matrix::from_cols(Expr::zero(&new_chart), cols)
        };

        // contact forms: theta^c = dP_c - sum_i H^c_i d(pi_i)
        let mut forms = Vec::with_capacity(big_n);
        let pi_lifted: Vec<Expr> = self
            .projection
            .components()
            .iter()
            .map(lift)
            .collect::<Result<Vec<_>>>()?;
        for c in 0..big_n {
            let mut coeffs: Vec<Expr> = (0..new_chart.dim())
                .map(|_| Expr::zero(&new_chart))
                .collect();
            coeffs[c] = Expr::one(&new_chart);
            for i in 0..n {
                for d in 0..new_chart.dim() {
                    let dpi = pi_lifted[i].differentiate(d);
                    if dpi.is_zero() {
                        continue;
                    }
                    coeffs[d] = coeffs[d].sub(&splitting[(c, i)].mul(&dpi));
                }
            }
            let form = KForm::one_form(&new_chart, coeffs);
            if !form.is_zero() {
                forms.push(form);
            }
        }
        let new_dist = Distribution::from_annihilators(new_chart.clone(), forms)?;
        let new_proj = SmoothMap::new(new_chart.clone(), self.base.clone(), pi_lifted)?;
        let fibration = PfaffianFibration::validate(new_proj, new_dist, policy)?;
        Ok(ProlongedFibration {
            fibration,
            base_fibration: self.clone(),
            params: m,
            xi_particular: Matrix::from_fn(Expr::zero(&self.total), r, n, |a, i| {
                xi_part[a * n + i].clone()
            }),
            xi_kernel: kernel
                .basis()
                .iter()
                .map(|kb| {
                    Matrix::from_fn(Expr::zero(&self.total), r, n, |a, i| kb[a * n + i].clone())
                })
                .collect(),
            splitting,
        })
    }
}

/// Curvature data at one point; rows follow `pair_list` over the C-frame and
/// columns are the TP/C report coordinates.
#[derive(Debug, Clone)]
pub struct CurvatureAtPoint {
    pub point: Point,
    pub dim_cframe: usize,
    pub dim_quotient: usize,
    pairs: Vec<(usize, usize)>,
    matrix: QMatrix,
}

impl CurvatureAtPoint {
    /// kappa of two frame indices, antisymmetric in (a, b).
    pub fn kappa(&self, a: usize, b: usize) -> Vec<BigRational> {
        if a == b {
            return vec![q0(); self.dim_quotient];
        }
        let (i, j, neg) = if a < b { (a, b, false) } else { (b, a, true) };
        let row = self.pairs.iter().position(|&p| p == (i, j)).expect("pair");
        let vals: Vec<BigRational> = self.matrix.row(row).to_vec();
        if neg {
            vals.into_iter().map(|x| -x).collect()
        } else {
            vals
        }
    }

    /// Bilinear application to tangent vectors lying in C at the point,
    /// given by their C-frame coordinates.
    pub fn apply_frame_coords(&self, u: &[BigRational], v: &[BigRational]) -> Vec<BigRational> {
        let mut out = vec![q0(); self.dim_quotient];
        for a in 0..self.dim_cframe {
            for b in 0..self.dim_cframe {
                if Scalar::is_zero(&u[a]) || Scalar::is_zero(&v[b]) {
                    continue;
                }
                let k = self.kappa(a, b);
                for w in 0..self.dim_quotient {
                    let t = &k[w] * &u[a];
                    let t = &t * &v[b];
                    out[w] += t;
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        (0..self.matrix.rows())
            .all(|i| self.matrix.row(i).iter().all(|x| Scalar::is_zero(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberVariant {
    Partial,
    Full,
}

/// Affine fiber of (partial) prolongation splittings at a point, in the
/// coordinates `xi in Hom(T_x X, C^pi_x)` (column layout a*n + i).
#[derive(Debug, Clone)]
pub struct ProlongationFiber {
    pub point: Point,
    pub variant: FiberVariant,
    pub solutions: AffineSubspace<BigRational>,
    /// Columns h_i(p): the horizontal base splitting.
    pub base_splitting: QMatrix,
    /// Columns v_a(p).
    pub vertical_basis: QMatrix,
}

impl ProlongationFiber {
    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.solutions.dim()
    }

    /// Concrete splitting matrix `T_pi(x) X -> T_x P` for a solution vector.
    pub fn splitting_matrix(&self, xi: &[BigRational]) -> QMatrix {
        let n = self.base_splitting.cols();
        let r = self.vertical_basis.cols();
        let big_n = self.base_splitting.rows();
        Matrix::from_fn(q0(), big_n, n, |c, i| {
            let mut acc = self.base_splitting[(c, i)].clone();
            for a in 0..r {
                let t = &self.vertical_basis[(c, a)] * &xi[a * n + i];
                acc += t;
            }
            acc
        })
    }

    /// xi-coordinates of a splitting matrix, if it lies in the affine frame.
    pub fn xi_of_splitting(&self, h: &QMatrix) -> Option<Vec<BigRational>> {
        let n = self.base_splitting.cols();
        let r = self.vertical_basis.cols();
        let big_n = self.base_splitting.rows();
        let mut xi = vec![q0(); r * n];
        for i in 0..n {
            let rhs: Vec<BigRational> = (0..big_n)
                .map(|c| &h[(c, i)] - &self.base_splitting[(c, i)])
                .collect();
            let sol = solve_affine(&self.vertical_basis, &rhs);
            let part = sol.particular()?;
            for a in 0..r {
                xi[a * n + i] = part[a].clone();
            }
        }
        Some(xi)
    }
}

/// Per-point analysis inside an integrability report.
#[derive(Debug, Clone)]
pub struct PointAnalysis {
    pub point: Point,
    /// None = empty fiber (torsion at this point).
    pub fiber_dim: Option<usize>,
    pub partial_dim: usize,
    pub characters: Vec<usize>,
    pub tableau_report: CartanReport,
}

#[derive(Debug, Clone)]
pub struct IntegrabilityReport {
    pub points: Vec<PointAnalysis>,
    pub one_integrable_on_samples: bool,
    pub torsion_found: bool,
    pub fiber_dim: Option<usize>,
}

/// A prolonged fibration together with the parametrization data relating the
/// new fiber coordinates `w_k` to the solved splitting family.
#[derive(Debug, Clone)]
pub struct ProlongedFibration {
    pub fibration: PfaffianFibration,
    pub base_fibration: PfaffianFibration,
    pub params: usize,
    /// Particular solution xi(p) (r x n over the base total chart).
    pub xi_particular: Matrix<Expr>,
    /// Kernel basis matrices; w_k scales xi_kernel[k].
    pub xi_kernel: Vec<Matrix<Expr>>,
    /// Splitting matrix H over the prolonged chart (N x n).
    pub splitting: Matrix<Expr>,
}

impl ProlongedFibration {
    /// Projection p_1 onto the original total chart.
    pub fn p1(&self) -> SmoothMap {
        let new_chart = self.fibration.total();
        let comps = (0..self.base_fibration.total().dim())
            .map(|i| Expr::coord(new_chart, i))
            .collect();
        SmoothMap::new(new_chart.clone(), self.base_fibration.total().clone(), comps)
            .expect("projection components")
    }
}

fn primitive(chart: &ChartRef, v: &[Expr]) -> Vec<Expr> {
    use crate::expr::poly::{primitive_scale, Poly};
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
    primitive_scale(&polys)
        .into_iter()
        .map(|p| Expr::from_parts(chart.clone(), p, Poly::one(chart.dim())).expect("poly entry"))
        .collect()
}

fn field_denominators(f: &VectorField) -> Vec<Expr> {
    f.components()
        .iter()
        .filter(|e| !e.denominator().is_constant())
        .map(|e| e.denominator_expr())
        .collect()
}

fn numerator_locus(e: Expr) -> Option<Expr> {
    if e.numerator().is_constant() {
        None
    } else {
        Some(e.numerator_expr())
    }
}

pub(crate) fn format_point(p: &Point) -> String {
    let vals: Vec<String> = p
        .chart()
        .coords()
        .iter()
        .zip(p.values())
        .map(|(c, v)| format!("{}={}", c.name(), v))
        .collect();
    vals.join(", ")
}
