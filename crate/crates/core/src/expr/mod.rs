//! Exact scalar arithmetic: rational functions of chart coordinates.
//!
//! An [`Expr`] is a canonical fraction `p/q` of multivariate polynomials over
//! the rationals. Canonical means `gcd(p, q) = 1` and `q` monic under the
//! graded-lex order keyed to the chart's coordinate order, so two expressions
//! are equal as functions iff they are structurally equal.

pub mod parse;
pub mod poly;

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::Result;
use poly::Poly;

/// A named coordinate of a chart.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coordinate {
    name: String,
}

impl Coordinate {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let mut chars = name.chars();
        let head_ok = chars.next().map_or(false, |c| c.is_ascii_alphabetic());
        let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !head_ok || !tail_ok {
            return Err(Error::UnknownCoordinate(name));
        }
        Ok(Coordinate { name })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// An ordered coordinate chart. The order fixes the frame `d/dx_i` and the
/// monomial order, so it is significant.
#[derive(Debug, PartialEq, Eq)]
pub struct Chart {
    name: String,
    coords: Vec<Coordinate>,
}

pub type ChartRef = Arc<Chart>;

impl Chart {
    pub fn new(name: impl Into<String>, coords: &[&str]) -> Result<ChartRef> {
        let coords = coords
            .iter()
            .map(|c| Coordinate::new(*c))
            .collect::<Result<Vec<_>>>()?;
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::ChartMismatch(format!(
                    "duplicate coordinate `{}`",
                    c.name
                )));
            }
        }
        Ok(Arc::new(Chart {
            name: name.into(),
            coords,
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c.name == name)
    }
}

/// Rational point of a chart: one exact rational per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Point {
    chart: ChartRef,
    values: Vec<BigRational>,
}

impl Point {
    pub fn new(chart: ChartRef, values: Vec<BigRational>) -> Result<Self> {
        if values.len() != chart.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point on `{}` needs {} values, got {}",
                chart.name(),
                chart.dim(),
                values.len()
            )));
        }
        Ok(Point { chart, values })
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    pub fn value(&self, coord: &str) -> Option<&BigRational> {
        self.chart.coord_index(coord).map(|i| &self.values[i])
    }
}

/// Canonical rational function on a chart.
#[derive(Clone, PartialEq, Eq)]
pub struct Expr {
    chart: ChartRef,
    num: Poly,
    den: Poly,
}

impl Expr {
    fn make(chart: ChartRef, num: Poly, den: Poly) -> Result<Expr> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if num.is_zero() {
            let n = chart.dim();
            return Ok(Expr {
                chart,
                num: Poly::zero(n),
                den: Poly::one(n),
            });
        }
        let g = poly::gcd(&num, &den);
        let (mut num, mut den) = if g.is_constant() {
            (num, den)
        } else {
            (
                num.div_exact(&g).expect("gcd divides numerator"),
                den.div_exact(&g).expect("gcd divides denominator"),
            )
        };
        // Monic denominator fixes the unit ambiguity.
        let lc = den.leading_coef();
        if !lc.is_one() {
            let inv = BigRational::one() / lc;
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        Ok(Expr { chart, num, den })
    }

    pub fn zero(chart: &ChartRef) -> Expr {
        let n = chart.dim();
        Expr {
            chart: chart.clone(),
            num: Poly::zero(n),
            den: Poly::one(n),
        }
    }

    pub fn one(chart: &ChartRef) -> Expr {
        Expr::constant(chart, BigRational::one())
    }

    pub fn constant(chart: &ChartRef, c: BigRational) -> Expr {
        let n = chart.dim();
        Expr {
            chart: chart.clone(),
            num: Poly::constant(n, c),
            den: Poly::one(n),
        }
    }

    pub fn int(chart: &ChartRef, c: i64) -> Expr {
        Expr::constant(chart, BigRational::from(BigInt::from(c)))
    }

    pub fn coord(chart: &ChartRef, idx: usize) -> Expr {
        let n = chart.dim();
        assert!(idx < n, "coordinate index out of range");
        Expr {
            chart: chart.clone(),
            num: Poly::var(n, idx),
            den: Poly::one(n),
        }
    }

    pub fn coord_named(chart: &ChartRef, name: &str) -> Result<Expr> {
        chart
            .coord_index(name)
            .map(|i| Expr::coord(chart, i))
            .ok_or_else(|| Error::UnknownCoordinate(name.to_string()))
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    fn assert_same_chart(&self, other: &Expr) {
        assert!(
            self.chart == other.chart,
            "expressions on different charts: `{}` vs `{}`",
            self.chart.name(),
            other.chart.name()
        );
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match (self.num.as_constant(), self.den.as_constant()) {
            (Some(n), Some(d)) => Some(n / d),
            _ => None,
        }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        self.assert_same_chart(other);
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        Expr::make(self.chart.clone(), num, den).expect("nonzero denominators")
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr {
            chart: self.chart.clone(),
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        self.assert_same_chart(other);
        let num = self.num.mul(&other.num);
        let den = self.den.mul(&other.den);
        Expr::make(self.chart.clone(), num, den).expect("nonzero denominators")
    }

    pub fn scale(&self, c: &BigRational) -> Expr {
        Expr::make(self.chart.clone(), self.num.scale(c), self.den.clone())
            .expect("nonzero denominator")
    }

    pub fn div(&self, other: &Expr) -> Result<Expr> {
        self.assert_same_chart(other);
        if other.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let num = self.num.mul(&other.den);
        let den = self.den.mul(&other.num);
        Expr::make(self.chart.clone(), num, den)
    }

    pub fn pow(&self, e: i64) -> Result<Expr> {
        if e >= 0 {
            Ok(Expr::make(
                self.chart.clone(),
                self.num.pow(e as u32),
                self.den.pow(e as u32),
            )
            .expect("nonzero denominator"))
        } else {
            if self.is_zero() {
                return Err(Error::ZeroDenominator);
            }
            Expr::make(
                self.chart.clone(),
                self.den.pow((-e) as u32),
                self.num.pow((-e) as u32),
            )
        }
    }

    /// Exact partial derivative (quotient rule plus renormalization).
    pub fn differentiate(&self, coord: usize) -> Expr {
        let dn = self.num.derivative(coord);
        let dd = self.den.derivative(coord);
        let num = dn.mul(&self.den).sub(&self.num.mul(&dd));
        let den = self.den.mul(&self.den);
        Expr::make(self.chart.clone(), num, den).expect("nonzero denominator")
    }

    pub fn differentiate_named(&self, coord: &str) -> Result<Expr> {
        let idx = self
            .chart
            .coord_index(coord)
            .ok_or_else(|| Error::UnknownCoordinate(coord.to_string()))?;
        Ok(self.differentiate(idx))
    }

    /// Exact value at a rational point.
    pub fn evaluate(&self, point: &Point) -> Result<BigRational> {
        assert!(
            self.chart == point.chart,
            "point lives on a different chart"
        );
        let den = self.den.eval(point.values());
        if den.is_zero() {
            return Err(Error::PoleAtPoint);
        }
        Ok(self.num.eval(point.values()) / den)
    }

    /// Substitute each chart coordinate by the given expression (composition
    /// of rational functions). All substituted expressions must share one
    /// chart, which becomes the chart of the result.
    pub fn substitute(&self, values: &[Expr]) -> Result<Expr> {
        assert_eq!(values.len(), self.chart.dim(), "one value per coordinate");
        let target = values
            .first()
            .map(|e| e.chart.clone())
            .unwrap_or_else(|| self.chart.clone());
        let num = eval_poly_at_exprs(&self.num, &target, values)?;
        let den = eval_poly_at_exprs(&self.den, &target, values)?;
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        num.div(&den)
    }

    /// The denominator as an expression on the same chart.
    pub fn denominator_expr(&self) -> Expr {
        Expr {
            chart: self.chart.clone(),
            num: self.den.clone(),
            den: Poly::one(self.chart.dim()),
        }
    }

    /// The numerator as an expression on the same chart.
    pub fn numerator_expr(&self) -> Expr {
        Expr {
            chart: self.chart.clone(),
            num: self.num.clone(),
            den: Poly::one(self.chart.dim()),
        }
    }

    pub(crate) fn from_parts(chart: ChartRef, num: Poly, den: Poly) -> Result<Expr> {
        Expr::make(chart, num, den)
    }
}

fn eval_poly_at_exprs(p: &Poly, target: &ChartRef, values: &[Expr]) -> Result<Expr> {
    let mut acc = Expr::zero(target);
    for (m, c) in p.terms() {
        let mut t = Expr::constant(target, c.clone());
        for (i, e) in m.0.iter().enumerate() {
            if *e > 0 {
                t = t.mul(&values[i].pow(*e as i64)?);
            }
        }
        acc = acc.add(&t);
    }
    Ok(acc)
}

/// Idempotent canonical form. Construction keeps values canonical already,
/// so this is the identity; it exists as the spec'd public entry point.
pub fn normalize(e: &Expr) -> Expr {
    e.clone()
}

fn fmt_coef(c: &BigRational) -> String {
    if c.denom().is_one() {
        format!("{}", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn fmt_poly(p: &Poly, chart: &Chart) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    // Leading term first: iterate descending.
    let terms: Vec<_> = p.terms().collect();
    for (k, (m, c)) in terms.iter().rev().enumerate() {
        let neg = c.is_negative();
        let abs = if neg { -(*c).clone() } else { (*c).clone() };
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mut factors: Vec<String> = Vec::new();
        // the grammar parses `-x^2` as `(-x)^2`, so a leading negative term
        // always spells out its coefficient: `-1*x^2`
        if !abs.is_one() || m.total_degree() == 0 || (k == 0 && neg) {
            factors.push(fmt_coef(&abs));
        }
        for (i, e) in m.0.iter().enumerate() {
            match e {
                0 => {}
                1 => factors.push(chart.coords()[i].name().to_string()),
                _ => factors.push(format!("{}^{}", chart.coords()[i].name(), e)),
            }
        }
        out.push_str(&factors.join("*"));
    }
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = fmt_poly(&self.num, &self.chart);
        if self.den.is_constant() {
            // den is monic, so a constant denominator is exactly 1
            write!(f, "{num}")
        } else {
            write!(f, "({num})/({})", fmt_poly(&self.den, &self.chart))
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}
