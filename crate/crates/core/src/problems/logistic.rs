//! Binary logistic regression over sparse rows, plus the line-oriented sparse
//! text format used to ship datasets: `label( index:value)*` with 1-based
//! indices and `#` starting a comment.

use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::Objective;

#[derive(Debug, Error)]
pub enum LibsvmError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// `f(w) = (1/m) Σ ln(1 + exp(−yᵢ wᵀxᵢ)) + (λ/2)‖w‖²` with labels in {−1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticProblem {
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
    n_features: usize,
    l2_reg: f64,
}

fn softplus(t: f64) -> f64 {
    // ln(1 + e^t) without overflow on either tail
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem {
    pub fn new(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, n_features: usize) -> Self {
        assert_eq!(rows.len(), labels.len());
        for row in &rows {
            for &(j, _) in row {
                assert!(j < n_features, "feature index {j} out of range");
            }
        }
        for &y in &labels {
            assert!(y == 1.0 || y == -1.0, "labels must be ±1");
        }
        Self {
            rows,
            labels,
            n_features,
            l2_reg: 0.0,
        }
    }

    pub fn with_l2(mut self, l2_reg: f64) -> Self {
        assert!(l2_reg >= 0.0);
        self.l2_reg = l2_reg;
        self
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn l2_reg(&self) -> f64 {
        self.l2_reg
    }

    fn dot_row(&self, i: usize, w: &DVector<f64>) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * w[j]).sum()
    }
}

impl Objective for LogisticProblem {
    fn dim(&self) -> usize {
        self.n_features
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        assert_eq!(w.len(), self.n_features, "dimension mismatch");
        let m = self.rows.len() as f64;
        let mut acc = 0.0;
        for i in 0..self.rows.len() {
            acc += softplus(-self.labels[i] * self.dot_row(i, w));
        }
        acc / m + 0.5 * self.l2_reg * w.norm_squared()
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        assert_eq!(w.len(), self.n_features, "dimension mismatch");
        let m = self.rows.len() as f64;
        let mut g = w * self.l2_reg;
        for i in 0..self.rows.len() {
            let y = self.labels[i];
            let coef = -y * sigmoid(-y * self.dot_row(i, w)) / m;
            for &(j, v) in &self.rows[i] {
                g[j] += coef * v;
            }
        }
        g
    }

    fn hessian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(w.len(), self.n_features, "dimension mismatch");
        let n = self.n_features;
        let m = self.rows.len() as f64;
        let mut h = DMatrix::identity(n, n) * self.l2_reg;
        for i in 0..self.rows.len() {
            let t = self.labels[i] * self.dot_row(i, w);
            let weight = sigmoid(t) * sigmoid(-t) / m;
            for &(j, vj) in &self.rows[i] {
                for &(k, vk) in &self.rows[i] {
                    h[(j, k)] += weight * vj * vk;
                }
            }
        }
        h
    }

    fn hess_vec(&self, w: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(w.len(), self.n_features, "dimension mismatch");
        let m = self.rows.len() as f64;
        let mut out = v * self.l2_reg;
        for i in 0..self.rows.len() {
            let t = self.labels[i] * self.dot_row(i, w);
            let weight = sigmoid(t) * sigmoid(-t) / m;
            let xv: f64 = self.rows[i].iter().map(|&(j, xj)| xj * v[j]).sum();
            for &(j, xj) in &self.rows[i] {
                out[j] += weight * xv * xj;
            }
        }
        out
    }
}

/// Parse the sparse text format. Indices are 1-based in the file and 0-based
/// internally; labels `0` and `-1` map to −1, `1`/`+1` to +1. Out-of-order
/// indices within a line are sorted; duplicates are an error.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<LogisticProblem, LibsvmError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut n_features = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue; // blank or comment-only line
        };
        let label_val: f64 = label_tok.parse().map_err(|_| LibsvmError::Parse {
            line: lineno,
            msg: format!("bad label token '{label_tok}'"),
        })?;
        let label = if label_val == 1.0 {
            1.0
        } else if label_val == 0.0 || label_val == -1.0 {
            -1.0
        } else {
            return Err(LibsvmError::Parse {
                line: lineno,
                msg: format!("label must be one of 0, 1, +1, -1, got '{label_tok}'"),
            });
        };
        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| LibsvmError::Parse {
                line: lineno,
                msg: format!("expected index:value, got '{tok}'"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| LibsvmError::Parse {
                line: lineno,
                msg: format!("bad feature index '{idx_s}'"),
            })?;
            if idx == 0 {
                return Err(LibsvmError::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| LibsvmError::Parse {
                line: lineno,
                msg: format!("bad feature value '{val_s}'"),
            })?;
            row.push((idx - 1, val));
            n_features = n_features.max(idx);
        }
        row.sort_by_key(|&(j, _)| j);
        for pair in row.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(LibsvmError::Parse {
                    line: lineno,
                    msg: format!("duplicate feature index {}", pair[0].0 + 1),
                });
            }
        }
        rows.push(row);
        labels.push(label);
    }
    Ok(LogisticProblem::new(rows, labels, n_features))
}

/// Inverse of [`parse_libsvm`] on the sparse representation.
pub fn serialize_libsvm(prob: &LogisticProblem) -> String {
    let mut out = String::new();
    for (row, &label) in prob.rows.iter().zip(&prob.labels) {
        out.push_str(if label > 0.0 { "+1" } else { "-1" });
        for &(j, v) in row {
            out.push_str(&format!(" {}:{}", j + 1, v));
        }
        out.push('\n');
    }
    out
}
