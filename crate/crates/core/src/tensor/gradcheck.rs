use super::{Tape, Tensor, Var};
use crate::{Error, Result};

/// Below this magnitude a central difference with `eps = 1e-4` is mostly
/// rounding noise (about `1e-16 / eps` per unit of objective), so it serves as
/// the floor of the relative-error denominator.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Relative error with denominator `max(|a|, |b|, GRAD_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

fn evaluate<F>(f: &F, params: &[Tensor]) -> Result<(f64, Vec<bool>)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let v = tape
        .value(out)
        .item()
        .ok_or_else(|| Error::NonScalarLoss(tape.shape(out).to_vec()))?;
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("objective evaluated to {v}")));
    }
    Ok((v, tape.relu_pattern()))
}

/// Outcome of [`grad_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// Largest relative error over the compared coordinates.
    pub max_rel_error: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates whose `±eps` evaluations fall on different sides of a
    /// relu kink; the central difference does not estimate a derivative
    /// there, so they are counted but not compared.
    pub kinks: usize,
}

/// Compares the tape gradient of `f` against central differences for every
/// entry of every parameter.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let v0 = tape.value(out).item().unwrap_or(f64::NAN);
    if !v0.is_finite() {
        return Err(Error::NonFinite(format!("objective evaluated to {v0}")));
    }
    let grads = tape.backward(out)?;

    let mut work = params.to_vec();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        kinks: 0,
    };
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; params[pi].len()]);
        for j in 0..params[pi].len() {
            let orig = params[pi].data()[j];
            work[pi].data_mut()[j] = orig + eps;
            let (plus, plus_pattern) = evaluate(&f, &work)?;
            work[pi].data_mut()[j] = orig - eps;
            let (minus, minus_pattern) = evaluate(&f, &work)?;
            work[pi].data_mut()[j] = orig;
            if plus_pattern != minus_pattern {
                report.kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            report.checked += 1;
            report.max_rel_error = report
                .max_rel_error
                .max(relative_error(analytic[j], numeric));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sigmoid;

    #[test]
    fn half_norm_squared() {
        let theta = vec![Tensor::matrix(1, 4, vec![0.3, -1.2, 2.5, 0.0]).unwrap()];
        let err = grad_check(
            |t, p| {
                let sq = t.mul(p[0], p[0])?;
                let s = t.sum(sq);
                Ok(t.scale(s, 0.5))
            },
            &theta,
            1e-4,
        )
        .unwrap()
        .max_rel_error;
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn relu_kinks_are_counted_not_compared() {
        let theta = vec![Tensor::matrix(1, 3, vec![0.5, 3e-5, -0.7]).unwrap()];
        let r = grad_check(
            |t, p| {
                let r = t.relu(p[0]);
                Ok(t.sum(r))
            },
            &theta,
            1e-4,
        )
        .unwrap();
        assert_eq!((r.checked, r.kinks), (2, 1));
        assert!(r.max_rel_error < 1e-10);
    }

    #[test]
    fn softplus_matches_sigmoid() {
        let theta = vec![Tensor::scalar(0.37)];
        let err = grad_check(|t, p| Ok(t.softplus(p[0])), &theta, 1e-4)
            .unwrap()
            .max_rel_error;
        assert!(err < 1e-8, "{err}");
        let mut tape = Tape::new();
        let v = tape.leaf(theta[0].clone());
        let y = tape.softplus(v);
        let g = tape.backward(y).unwrap();
        assert!((g.get(v).unwrap().data()[0] - sigmoid(0.37)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_eps_and_non_finite() {
        let theta = vec![Tensor::scalar(1.0)];
        assert!(grad_check(|t, p| Ok(t.sum(p[0])), &theta, 0.0).is_err());
        let theta = vec![Tensor::scalar(-1.0)];
        assert!(matches!(
            grad_check(|t, p| Ok(t.ln(p[0])), &theta, 1e-4),
            Err(Error::NonFinite(_))
        ));
    }
}
