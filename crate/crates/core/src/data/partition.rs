//! Vertical partitioning of encoded features across guest participants.

use crate::data::preprocess::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// One guest's slice of the feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GuestView<T> {
    pub guest_id: usize,
    pub attributes: Vec<String>,
    pub x: Matrix<T>,
}

/// Splits attributes into `k` contiguous groups by attribute count, larger
/// groups first when the count does not divide evenly. Encoded columns
/// follow their attribute, so each view is a contiguous column slice.
pub fn vertical_partition<T: Scalar>(fm: &FeatureMatrix<T>, k: usize) -> Result<Vec<GuestView<T>>> {
    let d = fm.column_map.len();
    if k == 0 || k > d {
        return Err(Error::Partition(format!(
            "cannot split {d} attributes across {k} participants"
        )));
    }
    let base = d / k;
    let remainder = d % k;
    let mut views = Vec::with_capacity(k);
    let mut attr_start = 0;
    for guest_id in 0..k {
        let size = base + usize::from(guest_id < remainder);
        let attr_range = attr_start..attr_start + size;
        let col_start = fm.column_map[attr_range.start].start;
        let last = &fm.column_map[attr_range.end - 1];
        let col_end = last.start + last.len;
        views.push(GuestView {
            guest_id,
            attributes: fm.column_map[attr_range.clone()]
                .iter()
                .map(|s| s.attribute.clone())
                .collect(),
            x: fm.x.slice_cols(col_start..col_end)?,
        });
        attr_start += size;
    }
    Ok(views)
}
