use std::cell::RefCell;
use std::rc::Rc;

use crate::error::Error;

struct Inner {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Dense row-major f64 tensor of rank 1 or 2.
///
/// Clones are cheap and share storage. Values are treated as immutable while
/// a tape references them; `set_data`/`set_at` exist for the optimizer and
/// finite-difference probes between forward passes. The `grad` field is
/// filled by [`crate::Tape::backward`] and accumulates across calls until
/// [`Tensor::zero_grad`].
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<RefCell<Inner>>,
}

fn check_shape(shape: &[usize], data_len: usize) -> Result<(), Error> {
    if shape.is_empty() || shape.len() > 2 {
        return Err(Error::Contract(format!(
            "tensor rank must be 1 or 2, got shape {shape:?}"
        )));
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::Contract(format!(
            "tensor dimensions must be positive, got shape {shape:?}"
        )));
    }
    let numel: usize = shape.iter().product();
    if numel != data_len {
        return Err(Error::Contract(format!(
            "shape {shape:?} implies {numel} elements, data has {data_len}"
        )));
    }
    Ok(())
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self, Error> {
        check_shape(shape, data.len())?;
        Ok(Self::raw(shape.to_vec(), data, false))
    }

    /// Tensor registered for gradient tracking.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Self, Error> {
        check_shape(shape, data.len())?;
        Ok(Self::raw(shape.to_vec(), data, true))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Self::raw(shape.to_vec(), vec![0.0; numel], false)
    }

    pub fn scalar(v: f64) -> Self {
        Self::raw(vec![1], vec![v], false)
    }

    fn raw(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Self {
        Tensor {
            inner: Rc::new(RefCell::new(Inner {
                shape,
                data,
                requires_grad,
                grad: None,
            })),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().data.len()
    }

    pub fn data(&self) -> Vec<f64> {
        self.inner.borrow().data.clone()
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.inner.borrow().data[idx]
    }

    pub fn set_at(&self, idx: usize, v: f64) {
        self.inner.borrow_mut().data[idx] = v;
    }

    pub fn set_data(&self, data: Vec<f64>) -> Result<(), Error> {
        let mut inner = self.inner.borrow_mut();
        if data.len() != inner.data.len() {
            return Err(Error::Contract(format!(
                "set_data: expected {} elements, got {}",
                inner.data.len(),
                data.len()
            )));
        }
        inner.data = data;
        Ok(())
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.borrow().grad.clone()
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[f64]) {
        let mut inner = self.inner.borrow_mut();
        match &mut inner.grad {
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
            None => inner.grad = Some(g.to_vec()),
        }
    }

    pub(crate) fn ptr_id(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("shape", &inner.shape)
            .field("requires_grad", &inner.requires_grad)
            .field("data", &inner.data)
            .finish()
    }
}
