//! Sparse multivariate polynomials over the rationals.
//!
//! Monomials are ordered graded-lexicographically keyed to the chart's
//! coordinate order; the leading term is the maximum under that order.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exponent vector; length equals the number of chart coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mono(pub Box<[u32]>);

impl Mono {
    pub fn unit(nvars: usize) -> Self {
        Mono(vec![0; nvars].into_boxed_slice())
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut e = vec![0; nvars];
        e[idx] = 1;
        Mono(e.into_boxed_slice())
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise division; `None` when `other` does not divide `self`.
    pub fn div(&self, other: &Mono) -> Option<Mono> {
        let mut out = Vec::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            if a < b {
                return None;
            }
            out.push(a - b);
        }
        Some(Mono(out.into_boxed_slice()))
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => self.0.cmp(&other.0),
            ord => ord,
        }
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial; invariant: no explicitly stored zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Mono, BigRational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Poly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(Mono::unit(nvars), c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Poly::constant(nvars, BigRational::one())
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut p = Poly::zero(nvars);
        p.terms.insert(Mono::var(nvars, idx), BigRational::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
            || (self.terms.len() == 1 && self.terms.keys().next().unwrap().total_degree() == 0)
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            return Some(BigRational::zero());
        }
        if self.is_constant() {
            return self.terms.values().next().cloned();
        }
        None
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Leading (maximal) term under graded lex.
    pub fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coef(&self) -> BigRational {
        self.leading()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().clone() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::one(self.nvars);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m.0[var]).max().unwrap_or(0)
    }

    pub fn contains_var(&self, var: usize) -> bool {
        self.terms.keys().any(|m| m.0[var] > 0)
    }

    /// Highest variable index occurring, if any.
    pub fn top_var(&self) -> Option<usize> {
        let mut top = None;
        for m in self.terms.keys() {
            for (i, e) in m.0.iter().enumerate() {
                if *e > 0 && top.map_or(true, |t| i > t) {
                    top = Some(i);
                }
            }
        }
        top
    }

    pub fn derivative(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut v = m.0.to_vec();
            v[var] = e - 1;
            out.add_term(
                Mono(v.into_boxed_slice()),
                c * BigRational::from(BigInt::from(e)),
            );
        }
        out
    }

    pub fn eval(&self, vals: &[BigRational]) -> BigRational {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, e) in m.0.iter().enumerate() {
                for _ in 0..*e {
                    t *= &vals[i];
                }
            }
            acc += t;
        }
        acc
    }

    /// Coefficients of `self` viewed as univariate in `var`, indexed by degree.
    fn coeffs_in(&self, var: usize) -> Vec<Poly> {
        let d = self.degree_in(var) as usize;
        let mut out = vec![Poly::zero(self.nvars); d + 1];
        for (m, c) in &self.terms {
            let e = m.0[var] as usize;
            let mut v = m.0.to_vec();
            v[var] = 0;
            out[e].add_term(Mono(v.into_boxed_slice()), c.clone());
        }
        out
    }

    fn from_coeffs_in(nvars: usize, var: usize, coeffs: &[Poly]) -> Poly {
        let mut out = Poly::zero(nvars);
        for (e, c) in coeffs.iter().enumerate() {
            for (m, k) in &c.terms {
                let mut v = m.0.to_vec();
                v[var] += e as u32;
                out.add_term(Mono(v.into_boxed_slice()), k.clone());
            }
        }
        out
    }

    /// Exact multivariate division; `None` when the remainder is nonzero.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = Poly::zero(self.nvars);
        let (dm, dc) = {
            let (m, c) = divisor.leading().unwrap();
            (m.clone(), c.clone())
        };
        while !rem.is_zero() {
            let (rm, rc) = {
                let (m, c) = rem.leading().unwrap();
                (m.clone(), c.clone())
            };
            let qm = rm.div(&dm)?;
            let qc = rc / &dc;
            let mut t = Poly::zero(self.nvars);
            t.terms.insert(qm, qc);
            rem = rem.sub(&t.mul(divisor));
            quot = quot.add(&t);
        }
        Some(quot)
    }

    /// Content w.r.t. `var`: gcd of the univariate coefficients.
    fn content_in(&self, var: usize) -> Poly {
        let mut g = Poly::zero(self.nvars);
        for c in self.coeffs_in(var) {
            if c.is_zero() {
                continue;
            }
            g = gcd(&g, &c);
            if g.is_constant() && !g.is_zero() {
                break;
            }
        }
        g
    }

    /// Rescale so the graded-lex leading coefficient is 1.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => self.clone(),
            Some((_, c)) => {
                let inv = BigRational::one() / c.clone();
                self.scale(&inv)
            }
        }
    }
}

/// Pseudo-remainder of `a` by `b` w.r.t. `var` (`b` nonzero in `var`).
fn prem(a: &Poly, b: &Poly, var: usize) -> Poly {
    let db = b.degree_in(var);
    let bc = b.coeffs_in(var);
    let lb = bc.last().unwrap().clone();
    let mut r = a.clone();
    while !r.is_zero() && r.degree_in(var) >= db {
        let dr = r.degree_in(var);
        let rc = r.coeffs_in(var);
        let lr = rc.last().unwrap().clone();
        // r <- lb*r - lr * x^(dr-db) * b
        let mut shift = vec![Poly::zero(a.nvars); (dr - db) as usize + 1];
        *shift.last_mut().unwrap() = lr;
        let shiftp = Poly::from_coeffs_in(a.nvars, var, &shift);
        r = r.mul(&lb).sub(&shiftp.mul(b));
    }
    r
}

/// Multivariate gcd over the rationals via primitive pseudo-remainder
/// sequences. Result is defined up to a nonzero rational factor; callers
/// needing a canonical representative rescale afterwards.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    let top = match a.top_var().into_iter().chain(b.top_var()).max() {
        Some(v) => v,
        None => return Poly::one(a.nvars), // both nonzero constants
    };
    let var = top;
    if !a.contains_var(var) || !b.contains_var(var) {
        // One side is free of the main variable: gcd divides its content.
        let (flat, other) = if a.contains_var(var) { (b, a) } else { (a, b) };
        let cont = other.content_in(var);
        return gcd(flat, &cont);
    }
    let ca = a.content_in(var);
    let cb = b.content_in(var);
    let cg = gcd(&ca, &cb);
    let mut p = a.div_exact(&ca).expect("content divides");
    let mut q = b.div_exact(&cb).expect("content divides");
    if p.degree_in(var) < q.degree_in(var) {
        std::mem::swap(&mut p, &mut q);
    }
    loop {
        let r = prem(&p, &q, var);
        if r.is_zero() {
            let cq = q.content_in(var);
            let pp = q.div_exact(&cq).expect("content divides");
            return cg.mul(&pp);
        }
        if !r.contains_var(var) {
            // Nonzero remainder of main degree 0: main-variable part is coprime.
            return cg;
        }
        let cr = r.content_in(var);
        p = q;
        q = r.div_exact(&cr).expect("content divides");
    }
}

/// Scale a list of polynomials by one rational so that, jointly, integer
/// coefficients are coprime and the first leading coefficient is positive.
/// Used to keep frame fields small after kernel computations.
pub fn primitive_scale(polys: &[Poly]) -> Vec<Poly> {
    use num_integer::Integer;
    let mut den_lcm = BigInt::one();
    let mut num_gcd = BigInt::zero();
    for p in polys {
        for (_, c) in p.terms() {
            den_lcm = den_lcm.lcm(c.denom());
            num_gcd = num_gcd.gcd(c.numer());
        }
    }
    if num_gcd.is_zero() {
        return polys.to_vec();
    }
    let mut factor = BigRational::new(den_lcm, num_gcd);
    if let Some(first) = polys.iter().find(|p| !p.is_zero()) {
        if (first.leading_coef() * &factor).is_negative() {
            factor = -factor;
        }
    }
    polys.iter().map(|p| p.scale(&factor)).collect()
}
