//! Regression data, the quadratic loss and its gradient.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Feature matrix `X` (n×d, one sample per row) and targets `y`, together
/// with the normalised Gram matrix `H = XᵀX/n` and correlation `Xᵀy/n`.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidData(format!("empty design matrix ({n}x{d})")));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry in X".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry in y".into()));
        }
        if let Some(j) = (0..d).find(|&j| x.column(j).iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidData(format!("column {j} of X is identically zero")));
        }
        let inv_n = 1.0 / n as f64;
        let gram = x.tr_mul(&x) * inv_n;
        let xty = x.tr_mul(&y) * inv_n;
        Ok(Self { x, y, gram, xty })
    }

    /// Square design (`n = d`) whose Gram matrix `XᵀX/n` equals `h`, with
    /// noiseless targets `y = Xβ*`. `h` must be symmetric positive definite.
    pub fn from_gram(h: &DMatrix<f64>, beta_star: &DVector<f64>) -> Result<Self> {
        let d = h.nrows();
        if h.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: h.ncols() });
        }
        if beta_star.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: beta_star.len() });
        }
        let chol = h
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidData("Gram matrix is not positive definite".into()))?;
        let x = chol.l().transpose() * (d as f64).sqrt();
        let y = &x * beta_star;
        Self::new(x, y)
    }

    /// Load `X` and `y` from headerless (or single-header-line) CSV files.
    pub fn from_csv(x_path: &Path, y_path: &Path, header: bool) -> Result<Self> {
        let rows = read_csv(x_path, header)?;
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        let x = DMatrix::from_row_iterator(n, d, rows.into_iter().flatten());
        let ys = read_csv(y_path, header)?;
        if let Some(bad) = ys.iter().find(|r| r.len() != 1) {
            return Err(Error::DimensionMismatch { expected: 1, got: bad.len() });
        }
        let y = DVector::from_iterator(ys.len(), ys.into_iter().flatten());
        Self::new(x, y)
    }

    /// Write `X` and `y` as headerless CSV with shortest round-trip digits.
    pub fn write_csv(&self, x_path: &Path, y_path: &Path) -> Result<()> {
        let wrap = |path: &Path, source| Error::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(x_path).map_err(|e| wrap(x_path, e))?;
        for row in self.x.row_iter() {
            w.write_record(row.iter().map(|v| csv_float(*v))).map_err(|e| wrap(x_path, e))?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(y_path).map_err(|e| wrap(y_path, e))?;
        for v in self.y.iter() {
            w.write_record([csv_float(*v)]).map_err(|e| wrap(y_path, e))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `H = XᵀX/n`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `Xᵀy/n`, i.e. `-∇L(0)`.
    pub fn xty(&self) -> &DVector<f64> {
        &self.xty
    }

    /// `max(1, ‖Xᵀy/n‖∞)`, the scale used for absolute gradient tolerances.
    pub fn grad_scale(&self) -> f64 {
        self.xty.amax().max(1.0)
    }

    fn check_dim(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: beta.len() });
        }
        Ok(())
    }

    /// `L(β) = (1/2n) Σᵢ (⟨β, xᵢ⟩ − yᵢ)²`.
    pub fn loss(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check_dim(beta)?;
        Ok(self.loss_unchecked(beta))
    }

    /// `∇L(β) = Hβ − Xᵀy/n`.
    pub fn grad_loss(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(beta)?;
        Ok(self.grad_unchecked(beta))
    }

    /// `L(b) − L(a)`, expanded around `a` so small differences keep their
    /// relative accuracy instead of cancelling.
    pub fn loss_change(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let delta = b - a;
        let h_delta = &self.gram * &delta;
        Ok(self.grad_unchecked(a).dot(&delta) + 0.5 * delta.dot(&h_delta))
    }

    pub(crate) fn loss_unchecked(&self, beta: &DVector<f64>) -> f64 {
        let r = &self.x * beta - &self.y;
        0.5 * r.norm_squared() / self.n() as f64
    }

    pub(crate) fn grad_unchecked(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.gram * beta - &self.xty
    }
}

/// Shortest round-trip text for `v`, switching to exponent notation for very
/// small or very large magnitudes.
pub fn csv_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Reads a vector stored either as one column or as one row.
pub fn read_vector_csv(path: &Path, header: bool) -> Result<DVector<f64>> {
    let rows = read_csv(path, header)?;
    let values: Vec<f64> = match rows.as_slice() {
        [row] => row.clone(),
        _ => {
            if let Some(bad) = rows.iter().find(|r| r.len() != 1) {
                return Err(Error::DimensionMismatch { expected: 1, got: bad.len() });
            }
            rows.into_iter().flatten().collect()
        }
    };
    Ok(DVector::from_vec(values))
}

fn read_csv(path: &Path, header: bool) -> Result<Vec<Vec<f64>>> {
    let wrap = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(wrap)?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(wrap)?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|e| {
                    Error::InvalidData(format!(
                        "{}: row {}: cannot parse {field:?}: {e}",
                        path.display(),
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::fixtures::two_d_example;

    #[test]
    fn loss_is_zero_at_interpolator() {
        let data = two_d_example();
        let beta = DVector::from_vec(vec![-0.2, 2.0]);
        assert!(data.loss(&beta).unwrap() < 1e-28);
        assert!(data.grad_loss(&beta).unwrap().amax() < 1e-14);
    }

    #[test]
    fn identity_design_loss_and_gradient() {
        let h = DMatrix::identity(3, 3);
        let bs = DVector::from_vec(vec![3.0, 2.0, 1.0]);
        let data = Dataset::from_gram(&h, &bs).unwrap();
        let zero = DVector::zeros(3);
        assert!((data.loss(&zero).unwrap() - 7.0).abs() < 1e-13);
        let g = data.grad_loss(&zero).unwrap();
        assert!((g - DVector::from_vec(vec![-3.0, -2.0, -1.0])).amax() < 1e-14);
    }

    #[test]
    fn two_d_loss_matches_quadratic_form() {
        let data = two_d_example();
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.1]);
        let bs = DVector::from_vec(vec![-0.2, 2.0]);
        for beta in [vec![0.0, 0.0], vec![0.3, -1.0], vec![0.2, 0.0]] {
            let beta = DVector::from_vec(beta);
            let e = &beta - &bs;
            let oracle = 0.5 * e.dot(&(&h * &e));
            assert!((data.loss(&beta).unwrap() - oracle).abs() < 1e-14);
        }
        // 0.5 * β*ᵀHβ* = 0.5 * (0.04 - 0.16 + 0.4) = 0.14
        assert!((data.loss(&DVector::zeros(2)).unwrap() - 0.14).abs() < 1e-14);
        let g = data.grad_loss(&DVector::zeros(2)).unwrap();
        assert!((g - DVector::from_vec(vec![-0.2, -0.16])).amax() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(Dataset::new(x, y.clone()), Err(Error::InvalidData(_))));
        let x = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 2.0, 1.0]);
        assert!(matches!(Dataset::new(x, y.clone()), Err(Error::InvalidData(_))));
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(matches!(Dataset::new(x, y), Err(Error::DimensionMismatch { .. })));
        let data = two_d_example();
        assert!(data.loss(&DVector::zeros(3)).is_err());
        assert!(data.grad_loss(&DVector::zeros(1)).is_err());
    }

    #[test]
    fn csv_float_round_trips() {
        for v in [0.0, -0.0, 1.0, -2.5e-29, 5.119707274884367e-29, 3.3e20, 1e-4, 0.1 + 0.2, f64::MAX, f64::MIN_POSITIVE] {
            let text = csv_float(v);
            assert_eq!(text.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{text}");
        }
        assert_eq!(csv_float(5.119707274884367e-29), "5.119707274884367e-29");
        assert_eq!(csv_float(0.25), "0.25");
    }

    #[test]
    fn vector_csv_as_row_or_column() {
        let dir = tempfile::tempdir().unwrap();
        let col = dir.path().join("col.csv");
        let row = dir.path().join("row.csv");
        std::fs::write(&col, "1\n-2.5\n3\n").unwrap();
        std::fs::write(&row, "b1,b2,b3\n1,-2.5,3\n").unwrap();
        let expected = DVector::from_vec(vec![1.0, -2.5, 3.0]);
        assert_eq!(read_vector_csv(&col, false).unwrap(), expected);
        assert_eq!(read_vector_csv(&row, true).unwrap(), expected);
        std::fs::write(&col, "1,2\n3,4\n").unwrap();
        assert!(read_vector_csv(&col, false).is_err());
    }

    #[test]
    fn csv_round_trip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let xp = dir.path().join("X.csv");
        let yp = dir.path().join("y.csv");
        std::fs::write(&xp, "a,b\n1.0, 2.0\n3.0,4.5\n").unwrap();
        std::fs::write(&yp, "y\n1\n-2e-3\n").unwrap();
        let data = Dataset::from_csv(&xp, &yp, true).unwrap();
        assert_eq!((data.n(), data.d()), (2, 2));
        assert_eq!(data.x()[(1, 1)], 4.5);
        assert_eq!(data.y()[1], -2e-3);
        std::fs::write(&yp, "y\n1\n2\n3\n").unwrap();
        assert!(Dataset::from_csv(&xp, &yp, true).is_err());
    }

    proptest::proptest! {
        #[test]
        fn gradient_matches_central_differences(
            seed in proptest::collection::vec(-2.0f64..2.0, 12),
            beta in proptest::collection::vec(-3.0f64..3.0, 3),
            dir in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let x = DMatrix::from_row_slice(4, 3, &seed[..12]);
            proptest::prop_assume!((0..3).all(|j| x.column(j).amax() > 1e-3));
            let y = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.3]);
            let data = Dataset::new(x, y).unwrap();
            let beta = DVector::from_vec(beta);
            let dir = DVector::from_vec(dir);
            let g = data.grad_loss(&beta).unwrap();
            let mut errs = Vec::new();
            for h in [1e-2, 5e-3] {
                let fd = (data.loss(&(&beta + &dir * h)).unwrap()
                    - data.loss(&(&beta - &dir * h)).unwrap()) / (2.0 * h);
                errs.push((fd - g.dot(&dir)).abs());
            }
            // quadratic loss: central differences are exact up to rounding
            proptest::prop_assert!(errs[0] < 1e-9 && errs[1] < 1e-9, "{errs:?}");
        }
    }
}
