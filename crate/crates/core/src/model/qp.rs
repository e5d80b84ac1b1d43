use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sparse::{CscMatrix, CsrMatrix};

/// The constraint family a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowTag {
    BatteryDynamics,
    ChargeExclusivity,
    DischargeExclusivity,
    DepartureTarget,
    GridSupplyCap,
    RenewableSupplyCap,
    ChargeBalance,
    DischargeBalance,
    /// Pooled layout only: V2V sent equals V2V received in a slot.
    V2vConservation,
    FairCumulativeLimit,
    FairExcessHinge,
    FairExcessBudget,
    /// Rows of hand-built problems that do not come from a scenario.
    Generic,
}

impl RowTag {
    pub fn label(self) -> &'static str {
        match self {
            RowTag::BatteryDynamics => "battery-dynamics",
            RowTag::ChargeExclusivity => "charge-exclusivity",
            RowTag::DischargeExclusivity => "discharge-exclusivity",
            RowTag::DepartureTarget => "departure-target",
            RowTag::GridSupplyCap => "grid-supply-cap",
            RowTag::RenewableSupplyCap => "renewable-supply-cap",
            RowTag::ChargeBalance => "charge-balance",
            RowTag::DischargeBalance => "discharge-balance",
            RowTag::V2vConservation => "v2v-conservation",
            RowTag::FairCumulativeLimit => "fair-cumulative-limit",
            RowTag::FairExcessHinge => "fair-excess-hinge",
            RowTag::FairExcessBudget => "fair-excess-budget",
            RowTag::Generic => "generic",
        }
    }
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Eq,
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowAudit {
    pub kind: RowKind,
    pub index: usize,
    pub tag: RowTag,
}

/// `minimize ½ xᵀQx + cᵀx  s.t.  A_eq x = b_eq,  A_in x ≤ b_in,  lower ≤ x ≤ upper`,
/// with the columns in `binaries` restricted to {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Symmetric, stored in full (both triangles).
    pub quad: CscMatrix,
    pub linear: Vec<f64>,
    pub eq: CsrMatrix,
    pub eq_rhs: Vec<f64>,
    pub eq_tags: Vec<RowTag>,
    pub ineq: CsrMatrix,
    pub ineq_rhs: Vec<f64>,
    pub ineq_tags: Vec<RowTag>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binaries: Vec<usize>,
}

impl QpProblem {
    pub fn new() -> Self {
        Self {
            quad: CscMatrix::zeros(0, 0),
            linear: Vec::new(),
            eq: CsrMatrix::new(0),
            eq_rhs: Vec::new(),
            eq_tags: Vec::new(),
            ineq: CsrMatrix::new(0),
            ineq_rhs: Vec::new(),
            ineq_tags: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            binaries: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn num_rows(&self) -> usize {
        self.eq.nrows() + self.ineq.nrows()
    }

    /// Appends a column and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        let col = self.linear.len();
        self.linear.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        let n = col + 1;
        self.quad.nrows = n;
        self.quad.ncols = n;
        let end = *self.quad.col_ptr.last().unwrap();
        self.quad.col_ptr.push(end);
        self.eq.grow_cols(n);
        self.ineq.grow_cols(n);
        col
    }

    pub fn add_binary(&mut self) -> usize {
        let col = self.add_var(0.0, 1.0, 0.0);
        self.binaries.push(col);
        col
    }

    pub fn add_eq(&mut self, entries: &[(usize, f64)], rhs: f64, tag: RowTag) {
        self.eq.push_row(entries);
        self.eq_rhs.push(rhs);
        self.eq_tags.push(tag);
    }

    pub fn add_le(&mut self, entries: &[(usize, f64)], rhs: f64, tag: RowTag) {
        self.ineq.push_row(entries);
        self.ineq_rhs.push(rhs);
        self.ineq_tags.push(tag);
    }

    /// Sets the quadratic objective from (row, col, value) triplets in ½xᵀQx convention.
    /// Off-diagonal entries must be given for both triangles.
    pub fn set_quadratic(&mut self, triplets: &[(usize, usize, f64)]) {
        let n = self.num_vars();
        self.quad = CscMatrix::from_triplets(n, n, triplets);
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let qx = self.quad.mul_vec(x);
        let quad: f64 = x.iter().zip(&qx).map(|(a, b)| a * b).sum();
        let lin: f64 = x.iter().zip(&self.linear).map(|(a, b)| a * b).sum();
        0.5 * quad + lin
    }

    /// ∇(½xᵀQx + cᵀx) = Qx + c
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.quad.mul_vec(x);
        g.iter_mut().zip(&self.linear).for_each(|(gi, ci)| *gi += ci);
        g
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (r, rhs) in self.eq_rhs.iter().enumerate() {
            worst = worst.max((self.eq.row_dot(r, x) - rhs).abs());
        }
        for (r, rhs) in self.ineq_rhs.iter().enumerate() {
            worst = worst.max(self.ineq.row_dot(r, x) - rhs);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        worst
    }

    /// One entry per constraint row naming its family; equality rows first.
    pub fn row_audit(&self) -> Vec<RowAudit> {
        let eq = self.eq_tags.iter().enumerate().map(|(index, &tag)| RowAudit {
            kind: RowKind::Eq,
            index,
            tag,
        });
        let le = self.ineq_tags.iter().enumerate().map(|(index, &tag)| RowAudit {
            kind: RowKind::Le,
            index,
            tag,
        });
        eq.chain(le).collect()
    }

    pub fn is_binary(&self, col: usize) -> bool {
        self.binaries.contains(&col)
    }
}

impl Default for QpProblem {
    fn default() -> Self {
        Self::new()
    }
}
