//! Scalar fields on a manifold: a parsed expression over chart and ambient
//! coordinates, with a compiled program for the sampling hot loop.

use super::{ManifoldModel, Point};
use crate::error::Result;
use crate::expr::{Program, ScalarFieldExpr, Var};

#[derive(Debug, Clone)]
pub struct ScalarField {
    source: String,
    expr: ScalarFieldExpr,
    program: Program,
    zero: bool,
}

impl ScalarField {
    pub fn parse(source: &str) -> Result<ScalarField> {
        let expr = ScalarFieldExpr::parse(source)?;
        let zero = expr.is_zero_literal();
        Ok(ScalarField {
            source: source.to_string(),
            program: expr.compile(),
            expr,
            zero,
        })
    }

    pub fn zero() -> ScalarField {
        ScalarField::parse("0").expect("literal zero parses")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> Vec<Var> {
        self.expr.variables()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn eval(&self, m: &ManifoldModel, p: &Point) -> Result<f64> {
        if self.zero {
            return Ok(0.0);
        }
        self.program.eval(&m.env_at(p))
    }

    /// Evaluate at explicit chart coordinates within a fixed chart.
    pub fn eval_chart(&self, m: &ManifoldModel, chart: usize, c: [f64; 2]) -> Result<f64> {
        self.eval(m, &Point { chart, coords: c })
    }
}
