use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::Error;
use crate::tensor::Tensor;

static TAPE_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Handle to a value recorded on a [`Tape`]. Only valid for the tape that
/// produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    LogFloor(Var, f64),
    Scale(Var, f64),
    Sum(Var),
    SoftmaxRows(Var),
    Concat(Vec<Var>, usize),
    GatherRows(Var, Vec<usize>),
    Transpose(Var),
    Reshape(Var),
}

struct Slot {
    shape: Vec<usize>,
    data: Vec<f64>,
    op: Op,
    /// Write-back target for leaves created from external tensors.
    source: Option<Tensor>,
}

/// Wengert tape: every operation appends one node, so slot order is a
/// topological order of the graph and the backward pass is a single reverse
/// sweep. A tape records one forward pass and is dropped afterwards.
pub struct Tape {
    id: u64,
    slots: Vec<Slot>,
    leaf_ids: HashMap<usize, Var>,
}

/// (rows, cols) view; rank-1 tensors count as a single row.
fn dims(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => unreachable!("tensor rank checked at construction"),
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: TAPE_COUNTER.fetch_add(1, Ordering::Relaxed),
            slots: Vec::new(),
            leaf_ids: HashMap::new(),
        }
    }

    /// Registers an external tensor as an input. Repeated registration of the
    /// same tensor returns the same [`Var`].
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        if let Some(&v) = self.leaf_ids.get(&t.ptr_id()) {
            return v;
        }
        let v = self.push(t.shape(), t.data(), Op::Leaf, Some(t.clone()));
        self.leaf_ids.insert(t.ptr_id(), v);
        v
    }

    /// A constant value on the tape; no gradient is tracked for it.
    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var, Error> {
        // Reuse tensor construction checks.
        let t = Tensor::new(shape, data)?;
        Ok(self.push(t.shape(), t.data(), Op::Leaf, None))
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.slots[self.check(v)].shape
    }

    pub fn data(&self, v: Var) -> &[f64] {
        &self.slots[self.check(v)].data
    }

    /// Detached snapshot of a recorded value.
    pub fn snapshot(&self, v: Var) -> Tensor {
        let i = self.check(v);
        Tensor::new(&self.slots[i].shape, self.slots[i].data.clone())
            .expect("slot shapes are valid by construction")
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn check(&self, v: Var) -> usize {
        assert!(
            v.tape == self.id && v.idx < self.slots.len(),
            "Var used with a tape that did not create it"
        );
        v.idx
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, source: Option<Tensor>) -> Var {
        self.slots.push(Slot {
            shape,
            data,
            op,
            source,
        });
        Var {
            tape: self.id,
            idx: self.slots.len() - 1,
        }
    }

    // ---- primitive operations ------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        let (ia, ib) = (self.check(a), self.check(b));
        let sa = &self.slots[ia].shape;
        let sb = &self.slots[ib].shape;
        if sa.len() != 2 {
            return Err(Error::BadRank {
                op: "matmul",
                expected: 2,
                shape: sa.clone(),
            });
        }
        if sb.len() != 2 {
            return Err(Error::BadRank {
                op: "matmul",
                expected: 2,
                shape: sb.clone(),
            });
        }
        let (m, k) = (sa[0], sa[1]);
        let (k2, n) = (sb[0], sb[1]);
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        {
            let da = &self.slots[ia].data;
            let db = &self.slots[ib].data;
            for i in 0..m {
                for kk in 0..k {
                    let aik = da[i * k + kk];
                    if aik == 0.0 {
                        continue;
                    }
                    let row = kk * n;
                    for j in 0..n {
                        out[i * n + j] += aik * db[row + j];
                    }
                }
            }
        }
        Ok(self.push(vec![m, n], out, Op::Matmul(a, b), None))
    }

    fn binary_same_shape(&mut self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize), Error> {
        let (ia, ib) = (self.check(a), self.check(b));
        if self.slots[ia].shape != self.slots[ib].shape {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.slots[ia].shape.clone(),
                rhs: self.slots[ib].shape.clone(),
            });
        }
        Ok((ia, ib))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        let (ia, ib) = self.binary_same_shape("add", a, b)?;
        let data = self.slots[ia]
            .data
            .iter()
            .zip(&self.slots[ib].data)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(self.slots[ia].shape.clone(), data, Op::Add(a, b), None))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        let (ia, ib) = self.binary_same_shape("sub", a, b)?;
        let data = self.slots[ia]
            .data
            .iter()
            .zip(&self.slots[ib].data)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(self.slots[ia].shape.clone(), data, Op::Sub(a, b), None))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        let (ia, ib) = self.binary_same_shape("mul", a, b)?;
        let data = self.slots[ia]
            .data
            .iter()
            .zip(&self.slots[ib].data)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(self.slots[ia].shape.clone(), data, Op::Mul(a, b), None))
    }

    /// Adds a length-n row vector to every row of an m-by-n matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, Error> {
        let (ia, ir) = (self.check(a), self.check(row));
        let sa = self.slots[ia].shape.clone();
        if sa.len() != 2 {
            return Err(Error::BadRank {
                op: "add_row",
                expected: 2,
                shape: sa,
            });
        }
        let (m, n) = (sa[0], sa[1]);
        let (rr, rc) = dims(&self.slots[ir].shape);
        if rr != 1 || rc != n {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: sa,
                rhs: self.slots[ir].shape.clone(),
            });
        }
        let mut data = self.slots[ia].data.clone();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += self.slots[ir].data[j];
            }
        }
        Ok(self.push(sa, data, Op::AddRow(a, row), None))
    }

    /// Multiplies row i of an m-by-n matrix by element i of an m-by-1 column.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, Error> {
        let (ia, ic) = (self.check(a), self.check(col));
        let sa = self.slots[ia].shape.clone();
        let sc = self.slots[ic].shape.clone();
        if sa.len() != 2 {
            return Err(Error::BadRank {
                op: "mul_col",
                expected: 2,
                shape: sa,
            });
        }
        let (m, n) = (sa[0], sa[1]);
        if sc != vec![m, 1] {
            return Err(Error::ShapeMismatch {
                op: "mul_col",
                lhs: sa,
                rhs: sc,
            });
        }
        let mut data = self.slots[ia].data.clone();
        for i in 0..m {
            let c = self.slots[ic].data[i];
            for j in 0..n {
                data[i * n + j] *= c;
            }
        }
        Ok(self.push(sa, data, Op::MulCol(a, col), None))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, Error> {
        let ia = self.check(a);
        let data = self.slots[ia]
            .data
            .iter()
            .map(|&x| 1.0 / (1.0 + (-x).exp()))
            .collect();
        Ok(self.push(self.slots[ia].shape.clone(), data, Op::Sigmoid(a), None))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, Error> {
        let ia = self.check(a);
        let data = self.slots[ia].data.iter().map(|&x| x.tanh()).collect();
        Ok(self.push(self.slots[ia].shape.clone(), data, Op::Tanh(a), None))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, Error> {
        let ia = self.check(a);
        let data = self.slots[ia].data.iter().map(|&x| x.max(0.0)).collect();
        Ok(self.push(self.slots[ia].shape.clone(), data, Op::Relu(a), None))
    }

    /// Natural log of `max(x, floor)`; keeps confident mispredictions finite.
    pub fn log_floor(&mut self, a: Var, floor: f64) -> Result<Var, Error> {
        if !(floor > 0.0) {
            return Err(Error::Contract(format!(
                "log_floor: floor must be positive, got {floor}"
            )));
        }
        let ia = self.check(a);
        let data = self.slots[ia]
            .data
            .iter()
            .map(|&x| x.max(floor).ln())
            .collect();
        Ok(self.push(self.slots[ia].shape.clone(), data, Op::LogFloor(a, floor), None))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, Error> {
        let ia = self.check(a);
        let data = self.slots[ia].data.iter().map(|&x| c * x).collect();
        Ok(self.push(self.slots[ia].shape.clone(), data, Op::Scale(a, c), None))
    }

    /// Sum of all elements, as a shape-`[1]` scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var, Error> {
        let ia = self.check(a);
        let s: f64 = self.slots[ia].data.iter().sum();
        Ok(self.push(vec![1], vec![s], Op::Sum(a), None))
    }

    /// Row-wise softmax with max-shift; rank-1 input is treated as one row.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, Error> {
        let ia = self.check(a);
        if self.slots[ia].data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(
                "softmax_rows: input contains a non-finite entry".into(),
            ));
        }
        let shape = self.slots[ia].shape.clone();
        let (m, n) = dims(&shape);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &self.slots[ia].data[i * n..(i + 1) * n];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..n {
                let e = (row[j] - mx).exp();
                data[i * n + j] = e;
                denom += e;
            }
            for j in 0..n {
                data[i * n + j] /= denom;
            }
        }
        Ok(self.push(shape, data, Op::SoftmaxRows(a), None))
    }

    /// Concatenation along `axis` (0 = stack rows, 1 = widen rows).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, Error> {
        if parts.is_empty() {
            return Err(Error::Contract("concat: no inputs".into()));
        }
        if axis > 1 {
            return Err(Error::Contract(format!("concat: axis {axis} out of range")));
        }
        let idxs: Vec<usize> = parts.iter().map(|&p| self.check(p)).collect();
        let first = self.slots[idxs[0]].shape.clone();
        match axis {
            0 => {
                let rank1 = first.len() == 1;
                let cols = if rank1 { first[0] } else { first[1] };
                let mut rows = 0;
                for &i in &idxs {
                    let s = &self.slots[i].shape;
                    let ok = if rank1 {
                        s.len() == 1
                    } else {
                        s.len() == 2 && s[1] == cols
                    };
                    if !ok {
                        return Err(Error::ShapeMismatch {
                            op: "concat(axis=0)",
                            lhs: first,
                            rhs: s.clone(),
                        });
                    }
                    rows += if rank1 { 1 } else { s[0] };
                }
                let mut data = Vec::with_capacity(rows * cols);
                for &i in &idxs {
                    data.extend_from_slice(&self.slots[i].data);
                }
                let shape = if rank1 {
                    vec![data.len()]
                } else {
                    vec![rows, cols]
                };
                Ok(self.push(shape, data, Op::Concat(parts.to_vec(), 0), None))
            }
            _ => {
                if first.len() != 2 {
                    return Err(Error::BadRank {
                        op: "concat(axis=1)",
                        expected: 2,
                        shape: first,
                    });
                }
                let rows = first[0];
                let mut cols = 0;
                for &i in &idxs {
                    let s = &self.slots[i].shape;
                    if s.len() != 2 || s[0] != rows {
                        return Err(Error::ShapeMismatch {
                            op: "concat(axis=1)",
                            lhs: first,
                            rhs: s.clone(),
                        });
                    }
                    cols += s[1];
                }
                let mut data = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for &i in &idxs {
                        let c = self.slots[i].shape[1];
                        data.extend_from_slice(&self.slots[i].data[r * c..(r + 1) * c]);
                    }
                }
                Ok(self.push(vec![rows, cols], data, Op::Concat(parts.to_vec(), 1), None))
            }
        }
    }

    /// Row lookup into a rank-2 table. Gradients of repeated ids accumulate.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var, Error> {
        let it = self.check(table);
        let shape = self.slots[it].shape.clone();
        if shape.len() != 2 {
            return Err(Error::BadRank {
                op: "gather_rows",
                expected: 2,
                shape,
            });
        }
        let (rows, cols) = (shape[0], shape[1]);
        if ids.is_empty() {
            return Err(Error::Contract("gather_rows: empty id list".into()));
        }
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(Error::IndexOutOfRange { id, rows });
            }
            data.extend_from_slice(&self.slots[it].data[id * cols..(id + 1) * cols]);
        }
        Ok(self.push(
            vec![ids.len(), cols],
            data,
            Op::GatherRows(table, ids.to_vec()),
            None,
        ))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, Error> {
        let ia = self.check(a);
        let shape = self.slots[ia].shape.clone();
        if shape.len() != 2 {
            return Err(Error::BadRank {
                op: "transpose",
                expected: 2,
                shape,
            });
        }
        let (m, n) = (shape[0], shape[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.slots[ia].data[i * n + j];
            }
        }
        Ok(self.push(vec![n, m], data, Op::Transpose(a), None))
    }

    /// Shape change preserving element count and order.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, Error> {
        let ia = self.check(a);
        let numel: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > 2 || numel != self.slots[ia].data.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.slots[ia].shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        let data = self.slots[ia].data.clone();
        Ok(self.push(shape.to_vec(), data, Op::Reshape(a), None))
    }

    // ---- reverse pass ----------------------------------------------------

    /// Backpropagates from a scalar loss. Visits every node exactly once in
    /// reverse order, then accumulates leaf gradients into their source
    /// tensors' `grad` fields.
    pub fn backward(&mut self, loss: Var) -> Result<(), Error> {
        let il = self.check(loss);
        if self.slots[il].data.len() != 1 {
            return Err(Error::NonScalarLoss {
                shape: self.slots[il].shape.clone(),
            });
        }
        let n = self.slots.len();
        let mut grads: Vec<Vec<f64>> = self
            .slots
            .iter()
            .map(|s| vec![0.0; s.data.len()])
            .collect();
        grads[il][0] = 1.0;

        for i in (0..n).rev() {
            // Inputs always precede their consumers on the tape.
            let (lo, hi) = grads.split_at_mut(i);
            let g = &hi[0];
            let slot = &self.slots[i];
            match &slot.op {
                Op::Leaf => {}
                Op::Matmul(a, b) => {
                    let (ia, ib) = (a.idx, b.idx);
                    let (m, k) = dims(&self.slots[ia].shape);
                    let nn = self.slots[ib].shape[1];
                    let da = &self.slots[ia].data;
                    let db = &self.slots[ib].data;
                    // dA = G . B^T
                    for r in 0..m {
                        for kk in 0..k {
                            let mut acc = 0.0;
                            for j in 0..nn {
                                acc += g[r * nn + j] * db[kk * nn + j];
                            }
                            lo[ia][r * k + kk] += acc;
                        }
                    }
                    // dB = A^T . G
                    for kk in 0..k {
                        for j in 0..nn {
                            let mut acc = 0.0;
                            for r in 0..m {
                                acc += da[r * k + kk] * g[r * nn + j];
                            }
                            lo[ib][kk * nn + j] += acc;
                        }
                    }
                }
                Op::Add(a, b) => {
                    for (j, &gj) in g.iter().enumerate() {
                        lo[a.idx][j] += gj;
                        lo[b.idx][j] += gj;
                    }
                }
                Op::Sub(a, b) => {
                    for (j, &gj) in g.iter().enumerate() {
                        lo[a.idx][j] += gj;
                        lo[b.idx][j] -= gj;
                    }
                }
                Op::Mul(a, b) => {
                    let da = &self.slots[a.idx].data;
                    let db = &self.slots[b.idx].data;
                    for (j, &gj) in g.iter().enumerate() {
                        lo[a.idx][j] += gj * db[j];
                        lo[b.idx][j] += gj * da[j];
                    }
                }
                Op::AddRow(a, row) => {
                    let (m, nn) = dims(&slot.shape);
                    for r in 0..m {
                        for j in 0..nn {
                            let gj = g[r * nn + j];
                            lo[a.idx][r * nn + j] += gj;
                            lo[row.idx][j] += gj;
                        }
                    }
                }
                Op::MulCol(a, col) => {
                    let (m, nn) = dims(&slot.shape);
                    let da = &self.slots[a.idx].data;
                    let dc = &self.slots[col.idx].data;
                    for r in 0..m {
                        let mut acc = 0.0;
                        for j in 0..nn {
                            let gj = g[r * nn + j];
                            lo[a.idx][r * nn + j] += gj * dc[r];
                            acc += gj * da[r * nn + j];
                        }
                        lo[col.idx][r] += acc;
                    }
                }
                Op::Sigmoid(a) => {
                    for (j, &gj) in g.iter().enumerate() {
                        let y = slot.data[j];
                        lo[a.idx][j] += gj * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    for (j, &gj) in g.iter().enumerate() {
                        let y = slot.data[j];
                        lo[a.idx][j] += gj * (1.0 - y * y);
                    }
                }
                Op::Relu(a) => {
                    let da = &self.slots[a.idx].data;
                    for (j, &gj) in g.iter().enumerate() {
                        if da[j] > 0.0 {
                            lo[a.idx][j] += gj;
                        }
                    }
                }
                Op::LogFloor(a, floor) => {
                    let da = &self.slots[a.idx].data;
                    for (j, &gj) in g.iter().enumerate() {
                        if da[j] >= *floor {
                            lo[a.idx][j] += gj / da[j];
                        }
                    }
                }
                Op::Scale(a, c) => {
                    for (j, &gj) in g.iter().enumerate() {
                        lo[a.idx][j] += gj * c;
                    }
                }
                Op::Sum(a) => {
                    let g0 = g[0];
                    for x in lo[a.idx].iter_mut() {
                        *x += g0;
                    }
                }
                Op::SoftmaxRows(a) => {
                    let (m, nn) = dims(&slot.shape);
                    for r in 0..m {
                        let y = &slot.data[r * nn..(r + 1) * nn];
                        let gr = &g[r * nn..(r + 1) * nn];
                        let dot: f64 = y.iter().zip(gr).map(|(yj, gj)| yj * gj).sum();
                        for j in 0..nn {
                            lo[a.idx][r * nn + j] += y[j] * (gr[j] - dot);
                        }
                    }
                }
                Op::Concat(parts, axis) => match axis {
                    0 => {
                        let mut off = 0;
                        for p in parts {
                            let len = self.slots[p.idx].data.len();
                            for j in 0..len {
                                lo[p.idx][j] += g[off + j];
                            }
                            off += len;
                        }
                    }
                    _ => {
                        let rows = slot.shape[0];
                        let total = slot.shape[1];
                        for r in 0..rows {
                            let mut off = 0;
                            for p in parts {
                                let c = self.slots[p.idx].shape[1];
                                for j in 0..c {
                                    lo[p.idx][r * c + j] += g[r * total + off + j];
                                }
                                off += c;
                            }
                        }
                    }
                },
                Op::GatherRows(table, ids) => {
                    let cols = self.slots[table.idx].shape[1];
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..cols {
                            lo[table.idx][id * cols + j] += g[r * cols + j];
                        }
                    }
                }
                Op::Transpose(a) => {
                    let (n_out, m_out) = dims(&slot.shape);
                    for i2 in 0..n_out {
                        for j2 in 0..m_out {
                            lo[a.idx][j2 * n_out + i2] += g[i2 * m_out + j2];
                        }
                    }
                }
                Op::Reshape(a) => {
                    for (j, &gj) in g.iter().enumerate() {
                        lo[a.idx][j] += gj;
                    }
                }
            }
        }

        for (i, slot) in self.slots.iter().enumerate() {
            if let Some(t) = &slot.source {
                if t.requires_grad() {
                    t.accumulate_grad(&grads[i]);
                }
            }
        }
        Ok(())
    }
}
