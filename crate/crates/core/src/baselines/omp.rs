use nalgebra::DVector;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{gather, principal, spd_solve};

/// Orthogonal matching pursuit with `k` greedy selections.
///
/// Each round adds the column most correlated with the current residual and
/// refits least squares on the selected support.
pub fn omp(data: &Dataset, k: usize) -> Result<DVector<f64>> {
    let (n, d) = (data.n(), data.d());
    if k > n.min(d) {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds min(n, d) = {}", n.min(d))));
    }
    let mut beta = DVector::zeros(d);
    let mut support: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let corr = -data.grad_unchecked(&beta);
        let next = (0..d)
            .filter(|j| !support.contains(j))
            .max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs()));
        let Some(j) = next else { break };
        if corr[j].abs() == 0.0 {
            break;
        }
        support.push(j);
        let sol = spd_solve(&principal(data.gram(), &support), &gather(data.xty(), &support))?;
        beta.fill(0.0);
        for (a, &i) in support.iter().enumerate() {
            beta[i] = sol[a];
        }
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::identity_design;

    #[test]
    fn orthogonal_design_picks_largest() {
        let data = identity_design(&[3.0, 2.0, 1.0]);
        let beta = omp(&data, 2).unwrap();
        assert!((beta - DVector::from_vec(vec![3.0, 2.0, 0.0])).amax() < 1e-12);
        assert_eq!(omp(&data, 0).unwrap(), DVector::zeros(3));
        assert!(omp(&data, 4).is_err());
    }
}
