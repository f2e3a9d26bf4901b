use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{PdqError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl CmpOp {
    pub fn holds(self, a: u64, b: u64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operand {
    Column(String),
    Const(u64),
    /// Index into the encrypted condition columns sent with a query.
    Cond(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub lhs: String,
    pub op: CmpOp,
    pub rhs: Operand,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    Atom(Atom),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Index,
    Sum(String),
    Avg(String),
    /// `num / den^2` per matching row.
    DivSquare { num: String, den: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub predicate: Predicate,
    pub aggregator: Aggregator,
}

pub fn atom(lhs: &str, op: CmpOp, rhs: &str) -> Predicate {
    Predicate::Atom(Atom { lhs: lhs.into(), op, rhs: Operand::Column(rhs.into()) })
}

pub fn atom_const(lhs: &str, op: CmpOp, rhs: u64) -> Predicate {
    Predicate::Atom(Atom { lhs: lhs.into(), op, rhs: Operand::Const(rhs) })
}

impl Predicate {
    pub fn and(self, other: Predicate) -> Predicate {
        Predicate::And(vec![self, other])
    }

    pub fn or(self, other: Predicate) -> Predicate {
        Predicate::Or(vec![self, other])
    }

    pub fn negate(self) -> Predicate {
        Predicate::Not(Box::new(self))
    }

    fn visit_atoms_mut(&mut self, f: &mut impl FnMut(&mut Atom)) {
        match self {
            Predicate::Atom(a) => f(a),
            Predicate::And(v) | Predicate::Or(v) => v.iter_mut().for_each(|p| p.visit_atoms_mut(f)),
            Predicate::Not(p) => p.visit_atoms_mut(f),
        }
    }

    fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Predicate::Atom(a) => f(a),
            Predicate::And(v) | Predicate::Or(v) => v.iter().for_each(|p| p.visit_atoms(f)),
            Predicate::Not(p) => p.visit_atoms(f),
        }
    }
}

impl QuerySpec {
    /// The four benchmark queries.
    pub fn standard(id: u8) -> Result<QuerySpec> {
        use CmpOp::*;
        let q = match id {
            1 => QuerySpec { predicate: atom("a", Le, "b").and(atom("c", Ne, "d")), aggregator: Aggregator::Index },
            2 => QuerySpec {
                predicate: atom("b", Le, "c").and(atom("d", Ne, "e")),
                aggregator: Aggregator::Sum("a".into()),
            },
            3 => QuerySpec {
                predicate: atom("b", Le, "c"),
                aggregator: Aggregator::DivSquare { num: "a".into(), den: "b".into() },
            },
            4 => QuerySpec {
                predicate: atom("b", Le, "c").and(atom("d", Eq, "e")),
                aggregator: Aggregator::Avg("a".into()),
            },
            _ => return Err(PdqError::Query(format!("no standard query {id}"))),
        };
        Ok(q)
    }

    /// Every column name the query reads.
    pub fn columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.predicate.visit_atoms(&mut |a| {
            out.push(a.lhs.clone());
            if let Operand::Column(c) = &a.rhs {
                out.push(c.clone());
            }
        });
        match &self.aggregator {
            Aggregator::Index => {}
            Aggregator::Sum(c) | Aggregator::Avg(c) => out.push(c.clone()),
            Aggregator::DivSquare { num, den } => {
                out.push(num.clone());
                out.push(den.clone());
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Replaces constants by condition indices; returns the constants.
    pub fn split_constants(&self) -> (QuerySpec, Vec<u64>) {
        let mut spec = self.clone();
        let mut consts = Vec::new();
        spec.predicate.visit_atoms_mut(&mut |a| {
            if let Operand::Const(v) = a.rhs {
                a.rhs = Operand::Cond(consts.len());
                consts.push(v);
            }
        });
        (spec, consts)
    }

    pub fn has_constants(&self) -> bool {
        let mut any = false;
        self.predicate.visit_atoms(&mut |a| any |= matches!(a.rhs, Operand::Const(_)));
        any
    }
}

pub type Table = BTreeMap<String, Vec<u64>>;

fn column<'a>(table: &'a Table, name: &str) -> Result<&'a [u64]> {
    table.get(name).map(|v| v.as_slice()).ok_or_else(|| PdqError::Query(format!("unknown column {name}")))
}

/// Plaintext filter, row by row.
pub fn filter(pred: &Predicate, table: &Table, rows: usize) -> Result<Vec<bool>> {
    Ok(match pred {
        Predicate::Atom(a) => {
            let l = column(table, &a.lhs)?;
            match &a.rhs {
                Operand::Column(c) => {
                    let r = column(table, c)?;
                    (0..rows).map(|i| a.op.holds(l[i], r[i])).collect()
                }
                Operand::Const(v) => (0..rows).map(|i| a.op.holds(l[i], *v)).collect(),
                Operand::Cond(_) => return Err(PdqError::Query("condition index in a plaintext query".into())),
            }
        }
        Predicate::And(v) => {
            let mut acc = vec![true; rows];
            for p in v {
                acc.iter_mut().zip(filter(p, table, rows)?).for_each(|(x, y)| *x &= y);
            }
            acc
        }
        Predicate::Or(v) => {
            let mut acc = vec![false; rows];
            for p in v {
                acc.iter_mut().zip(filter(p, table, rows)?).for_each(|(x, y)| *x |= y);
            }
            acc
        }
        Predicate::Not(p) => filter(p, table, rows)?.into_iter().map(|x| !x).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Index(Vec<bool>),
    Sum(f64),
    /// `None` when no row matches.
    Avg(Option<f64>),
    /// Per row; `None` on rows that do not match.
    DivSquare(Vec<Option<f64>>),
}

/// Brute-force answer over the first `rows` rows.
pub fn evaluate(spec: &QuerySpec, table: &Table, rows: usize) -> Result<Answer> {
    let mask = filter(&spec.predicate, table, rows)?;
    Ok(match &spec.aggregator {
        Aggregator::Index => Answer::Index(mask),
        Aggregator::Sum(c) => {
            let v = column(table, c)?;
            Answer::Sum((0..rows).filter(|&i| mask[i]).map(|i| v[i] as f64).sum())
        }
        Aggregator::Avg(c) => {
            let v = column(table, c)?;
            let hits: Vec<f64> = (0..rows).filter(|&i| mask[i]).map(|i| v[i] as f64).collect();
            Answer::Avg((!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64))
        }
        Aggregator::DivSquare { num, den } => {
            let (a, b) = (column(table, num)?, column(table, den)?);
            Answer::DivSquare(
                (0..rows)
                    .map(|i| (mask[i] && b[i] != 0).then(|| a[i] as f64 / (b[i] as f64 * b[i] as f64)))
                    .collect(),
            )
        }
    })
}
