//! Central finite-difference gradient verification.
//!
//! The numeric side re-evaluates the forward pass through a fresh graph per
//! perturbation and never touches the analytic code path, so it stays an
//! independent oracle for the backward implementations.

use super::{Graph, NodeId, Tensor};
use crate::error::Result;

/// Check gradients of a scalar-valued graph function with several tensor
/// inputs. Returns the max over all coordinates of
/// `|analytic - central_difference| / max(|analytic|, |cd|, 1e-12)`.
pub fn gradient_check_multi<F>(build: F, inputs: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let loss = build(&mut g, &ids)?;
    g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| g.grad(id).expect("grads populated").to_vec())
        .collect();

    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = build(&mut g, &ids)?;
        Ok(g.data(loss)[0])
    };

    let mut xs: Vec<Tensor> = inputs.to_vec();
    let mut max_rel = 0.0f64;
    for (pi, t) in inputs.iter().enumerate() {
        for i in 0..t.len() {
            let orig = t.data()[i];
            xs[pi].data_mut()[i] = orig + step;
            let fp = eval(&xs)?;
            xs[pi].data_mut()[i] = orig - step;
            let fm = eval(&xs)?;
            xs[pi].data_mut()[i] = orig;
            let cd = (fp - fm) / (2.0 * step);
            let an = analytic[pi][i];
            let rel = (an - cd).abs() / an.abs().max(cd.abs()).max(1e-12);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

/// Single-input form: max relative error between the analytic gradient of
/// `f` at `x` and a central finite difference with the given step.
pub fn gradient_check<F>(f: F, x: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    gradient_check_multi(|g, ids| f(g, ids[0]), std::slice::from_ref(x), step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient_is_nearly_exact() {
        let x = Tensor::from_vec(vec![0.3, -1.2, 2.0, 0.7]);
        let err = gradient_check(
            |g, x| {
                let sq = g.mul(x, x)?;
                Ok(g.sum(sq))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "err {err}");
    }

    #[test]
    fn conv_sigmoid_sum_matches_finite_differences() {
        let x = Tensor::new(vec![2, 6], vec![0.1, -0.4, 0.9, 0.3, -0.2, 0.5, 0.8, -0.6, 0.2, 0.1, 0.4, -0.9]).unwrap();
        let err = gradient_check(
            |g, x| {
                let w = g.leaf(
                    Tensor::new(vec![3, 2, 2], (0..12).map(|i| 0.1 * (i as f64) - 0.5).collect())
                        .unwrap(),
                );
                let b = g.leaf(Tensor::from_vec(vec![0.1, -0.1, 0.2]));
                let c = g.conv1d_causal(x, w, Some(b), 1, 2)?;
                let s = g.sigmoid(c);
                Ok(g.sum(s))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "err {err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let x = Tensor::from_vec(vec![1.0, 2.0]);
        let err = gradient_check(
            |g, x| {
                let c = g.leaf(Tensor::scalar(3.0));
                let _ = x;
                Ok(g.scale(c, 2.0))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }
}
