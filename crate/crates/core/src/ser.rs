//! Serialize nalgebra vectors as plain JSON arrays.

use nalgebra::DVector;
use serde::ser::{SerializeSeq, Serializer};

pub fn vector<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn vectors<S: Serializer>(vs: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(vs.len()))?;
    for v in vs {
        seq.serialize_element(v.as_slice())?;
    }
    seq.end()
}
