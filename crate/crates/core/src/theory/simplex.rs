//! General simplex over exact rationals with Bland's rule.
//!
//! Every constraint owns one slack variable `s = Σ aⱼxⱼ`; constraint bounds
//! live on the slack and branching bounds on the original columns. Each
//! bound carries a reason tag that conflict explanations are built from.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Tag = usize;

#[derive(Debug, Clone)]
struct Bound {
    value: BigRational,
    reason: Tag,
}

#[derive(Debug, Clone)]
pub struct Simplex {
    /// Column count: original variables followed by one slack per row added.
    lower: Vec<Option<Bound>>,
    upper: Vec<Option<Bound>>,
    value: Vec<BigRational>,
    /// `row_of[v]` is the tableau row of basic variable `v`.
    row_of: Vec<Option<usize>>,
    basic: Vec<usize>,
    /// `rows[r][j]`: coefficient of column `j` in `basic[r] = Σ rows[r][j]·xⱼ`.
    rows: Vec<Vec<BigRational>>,
    conflict: Vec<Tag>,
}

fn rat(v: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl Simplex {
    pub fn new(num_vars: usize) -> Self {
        Simplex {
            lower: vec![None; num_vars],
            upper: vec![None; num_vars],
            value: vec![BigRational::zero(); num_vars],
            row_of: vec![None; num_vars],
            basic: Vec::new(),
            rows: Vec::new(),
            conflict: Vec::new(),
        }
    }

    pub fn num_columns(&self) -> usize {
        self.value.len()
    }

    pub fn value(&self, column: usize) -> &BigRational {
        &self.value[column]
    }

    /// Adds a slack column equal to `Σ cⱼ·xⱼ` over original columns and
    /// returns its index.
    pub fn add_row(&mut self, terms: &[(usize, i64)]) -> usize {
        let s = self.value.len();
        for row in &mut self.rows {
            row.push(BigRational::zero());
        }
        self.lower.push(None);
        self.upper.push(None);
        self.row_of.push(None);
        let mut row = vec![BigRational::zero(); s + 1];
        let mut val = BigRational::zero();
        for &(j, c) in terms {
            let c = rat(c as i128);
            val += &c * &self.value[j];
            match self.row_of[j] {
                // substitute basic columns so rows only mention nonbasic ones
                Some(r) => {
                    for (k, e) in self.rows[r].iter().enumerate() {
                        if !e.is_zero() {
                            row[k] += &c * e;
                        }
                    }
                }
                None => row[j] += c,
            }
        }
        self.value.push(val);
        self.row_of[s] = Some(self.rows.len());
        self.basic.push(s);
        self.rows.push(row);
        s
    }

    /// Tightens the lower bound of `column`; on an immediate clash returns
    /// the two reasons involved.
    pub fn assert_lower(&mut self, column: usize, v: BigRational, reason: Tag) -> Result<(), Vec<Tag>> {
        if self.lower[column].as_ref().is_some_and(|b| b.value >= v) {
            return Ok(());
        }
        if let Some(u) = &self.upper[column] {
            if u.value < v {
                self.conflict = sorted(vec![u.reason, reason]);
                return Err(self.conflict.clone());
            }
        }
        if self.row_of[column].is_none() && self.value[column] < v {
            self.update(column, v.clone());
        }
        self.lower[column] = Some(Bound { value: v, reason });
        Ok(())
    }

    pub fn assert_upper(&mut self, column: usize, v: BigRational, reason: Tag) -> Result<(), Vec<Tag>> {
        if self.upper[column].as_ref().is_some_and(|b| b.value <= v) {
            return Ok(());
        }
        if let Some(l) = &self.lower[column] {
            if l.value > v {
                self.conflict = sorted(vec![l.reason, reason]);
                return Err(self.conflict.clone());
            }
        }
        if self.row_of[column].is_none() && self.value[column] > v {
            self.update(column, v.clone());
        }
        self.upper[column] = Some(Bound { value: v, reason });
        Ok(())
    }

    fn update(&mut self, j: usize, v: BigRational) {
        let delta = &v - &self.value[j];
        for (r, row) in self.rows.iter().enumerate() {
            if !row[j].is_zero() {
                self.value[self.basic[r]] += &row[j] * &delta;
            }
        }
        self.value[j] = v;
    }

    fn below_lower(&self, v: usize) -> bool {
        self.lower[v].as_ref().is_some_and(|b| self.value[v] < b.value)
    }

    fn above_upper(&self, v: usize) -> bool {
        self.upper[v].as_ref().is_some_and(|b| self.value[v] > b.value)
    }

    fn can_increase(&self, v: usize) -> bool {
        self.upper[v].as_ref().is_none_or(|b| self.value[v] < b.value)
    }

    fn can_decrease(&self, v: usize) -> bool {
        self.lower[v].as_ref().is_none_or(|b| self.value[v] > b.value)
    }

    /// Restores bound feasibility of every basic variable, or explains why
    /// that is impossible.
    pub fn check(&mut self) -> Result<(), Vec<Tag>> {
        loop {
            let leaving = (0..self.num_columns())
                .filter(|&v| self.row_of[v].is_some())
                .find(|&v| self.below_lower(v) || self.above_upper(v));
            let Some(xi) = leaving else {
                return Ok(());
            };
            let r = self.row_of[xi].expect("leaving variable is basic");
            let increase = self.below_lower(xi);
            let entering = (0..self.num_columns()).find(|&j| {
                let a = &self.rows[r][j];
                if a.is_zero() || self.row_of[j].is_some() {
                    return false;
                }
                if increase == a.is_positive() {
                    self.can_increase(j)
                } else {
                    self.can_decrease(j)
                }
            });
            match entering {
                Some(xj) => {
                    let target = if increase {
                        self.lower[xi].as_ref().unwrap().value.clone()
                    } else {
                        self.upper[xi].as_ref().unwrap().value.clone()
                    };
                    self.pivot_and_update(r, xj, target);
                }
                None => {
                    self.conflict = self.explain_row(r, increase);
                    return Err(self.conflict.clone());
                }
            }
        }
    }

    /// Reasons of the bounds that pin row `r` away from feasibility: the
    /// violated bound of its basic variable plus the blocking bound of every
    /// column with a nonzero coefficient.
    fn explain_row(&self, r: usize, increase: bool) -> Vec<Tag> {
        let xi = self.basic[r];
        let own = if increase { &self.lower[xi] } else { &self.upper[xi] };
        let mut tags = vec![own.as_ref().unwrap().reason];
        for (j, a) in self.rows[r].iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let blocking = if increase == a.is_positive() { &self.upper[j] } else { &self.lower[j] };
            tags.push(blocking.as_ref().expect("blocked column has a bound").reason);
        }
        sorted(tags)
    }

    /// Reasons recorded by the most recent failed `check` or bound assertion.
    pub fn explain_conflict(&self) -> &[Tag] {
        &self.conflict
    }

    fn pivot_and_update(&mut self, r: usize, xj: usize, target: BigRational) {
        let xi = self.basic[r];
        let theta = (&target - &self.value[xi]) / &self.rows[r][xj];
        self.value[xi] = target;
        self.value[xj] += &theta;
        for (r2, row) in self.rows.iter().enumerate() {
            if r2 != r && !row[xj].is_zero() {
                self.value[self.basic[r2]] += &row[xj] * &theta;
            }
        }
        self.pivot(r, xj);
    }

    fn pivot(&mut self, r: usize, xj: usize) {
        let xi = self.basic[r];
        let a = self.rows[r][xj].clone();
        // xi = a·xj + rest  ⇒  xj = (xi − rest)/a
        let mut new_row: Vec<BigRational> = self.rows[r].iter().map(|e| -e / &a).collect();
        new_row[xj] = BigRational::zero();
        new_row[xi] = BigRational::one() / &a;
        for r2 in 0..self.rows.len() {
            if r2 == r {
                continue;
            }
            let c = std::mem::take(&mut self.rows[r2][xj]);
            if c.is_zero() {
                continue;
            }
            for (k, e) in new_row.iter().enumerate() {
                if !e.is_zero() {
                    self.rows[r2][k] += &c * e;
                }
            }
        }
        self.rows[r] = new_row;
        self.basic[r] = xj;
        self.row_of[xj] = Some(r);
        self.row_of[xi] = None;
    }
}

fn sorted(mut tags: Vec<Tag>) -> Vec<Tag> {
    tags.sort_unstable();
    tags.dedup();
    tags
}
