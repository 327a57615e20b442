use ndarray::Array2;

use super::ClusterAssignment;

/// Labels each row by its argmax column.
///
/// Ties go to the lowest column; all-zero rows become noise. Labels are
/// dense in first-occurrence order. The second value maps each label back to
/// its column.
pub fn argmax_label(x: &Array2<f64>) -> (ClusterAssignment, Vec<usize>) {
    let raw: Vec<Option<usize>> = x
        .rows()
        .into_iter()
        .map(|row| {
            if row.iter().all(|&v| v == 0.0) {
                return None;
            }
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            Some(best)
        })
        .collect();
    let assignment = ClusterAssignment::from_raw(&raw);
    let mut columns = vec![0usize; assignment.n_clusters()];
    for (r, &l) in raw.iter().zip(assignment.labels()) {
        if let Some(c) = r {
            columns[l as usize] = *c;
        }
    }
    (assignment, columns)
}
