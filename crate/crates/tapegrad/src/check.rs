use crate::error::Error;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Compares analytic gradients of `f` against central finite differences.
///
/// `f` rebuilds the forward computation on the tape it is given and returns
/// the scalar loss; it must be deterministic in the current parameter values.
/// Returns the maximum over all parameter coordinates of
/// `|analytic - central| / max(1, |central|)`.
pub fn grad_check<F>(mut f: F, params: &[Tensor], eps: f64) -> Result<f64, Error>
where
    F: FnMut(&mut Tape) -> Result<Var, Error>,
{
    if !(eps > 0.0 && eps < 1e-2) {
        return Err(Error::Contract(format!(
            "grad_check: eps must lie in (0, 1e-2), got {eps}"
        )));
    }
    for p in params {
        p.zero_grad();
    }

    let mut tape = Tape::new();
    let loss = f(&mut tape)?;
    let base = scalar_value(&tape, loss)?;
    if !base.is_finite() {
        return Err(Error::Numeric(format!(
            "grad_check: loss is not finite ({base})"
        )));
    }
    tape.backward(loss)?;
    drop(tape);

    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut max_rel: f64 = 0.0;
    for (pi, p) in params.iter().enumerate() {
        for i in 0..p.numel() {
            let x0 = p.at(i);
            p.set_at(i, x0 + eps);
            let fp = eval_scalar(&mut f)?;
            p.set_at(i, x0 - eps);
            let fm = eval_scalar(&mut f)?;
            p.set_at(i, x0);
            let fd = (fp - fm) / (2.0 * eps);
            let rel = (analytic[pi][i] - fd).abs() / fd.abs().max(1.0);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

fn eval_scalar<F>(f: &mut F) -> Result<f64, Error>
where
    F: FnMut(&mut Tape) -> Result<Var, Error>,
{
    let mut tape = Tape::new();
    let v = f(&mut tape)?;
    let value = scalar_value(&tape, v)?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "grad_check: perturbed loss is not finite ({value})"
        )));
    }
    Ok(value)
}

fn scalar_value(tape: &Tape, v: Var) -> Result<f64, Error> {
    let d = tape.data(v);
    if d.len() != 1 {
        return Err(Error::NonScalarLoss {
            shape: tape.shape(v).to_vec(),
        });
    }
    Ok(d[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_checks_out() {
        let x = Tensor::param(&[3], vec![0.5, -1.5, 2.0]).unwrap();
        let params = [x.clone()];
        let err = grad_check(
            |tape| {
                let v = tape.leaf(&x);
                let sq = tape.mul(v, v)?;
                tape.sum(sq)
            },
            &params,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-7, "max rel error {err}");
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let params = [x.clone()];
        let err = grad_check(
            |tape| {
                // Loss ignores x entirely.
                let _ = tape.leaf(&x);
                let c = tape.constant(&[1], vec![3.0])?;
                tape.sum(c)
            },
            &params,
            1e-6,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn eps_out_of_range_is_rejected() {
        let x = Tensor::param(&[1], vec![1.0]).unwrap();
        let params = [x.clone()];
        for bad in [0.0, -1e-4, 1e-2, 0.5] {
            let r = grad_check(
                |tape| {
                    let v = tape.leaf(&x);
                    tape.sum(v)
                },
                &params,
                bad,
            );
            assert!(matches!(r, Err(Error::Contract(_))));
        }
    }

    #[test]
    fn non_finite_loss_is_a_numeric_error() {
        let x = Tensor::param(&[1], vec![1.0]).unwrap();
        let params = [x.clone()];
        let r = grad_check(
            |tape| {
                let v = tape.leaf(&x);
                let huge = tape.scale(v, f64::INFINITY)?;
                tape.sum(huge)
            },
            &params,
            1e-6,
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
