//! Nondominated filtering and exact hypervolume (maximization).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypervolumeError {
    #[error("point {index} does not strictly dominate the reference point")]
    NotDominating { index: usize },
    #[error("point {index} has {got} objectives, reference has {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        got: usize,
    },
}

/// `a` weakly dominates `b` in every coordinate and strictly in one.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Indices of nondominated rows, ascending. Duplicate rows are all kept.
pub fn pareto_front(y: &[Vec<f64>]) -> Vec<usize> {
    (0..y.len())
        .filter(|&i| !y.iter().any(|other| dominates(other, &y[i])))
        .collect()
}

fn box_volume(p: &[f64], reference: &[f64]) -> f64 {
    p.iter().zip(reference).map(|(x, r)| x - r).product()
}

fn nondominated(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let keep = pareto_front(&points);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(keep.len());
    for i in keep {
        if !out.contains(&points[i]) {
            out.push(points[i].clone());
        }
    }
    out
}

fn hv_2d(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts: Vec<&Vec<f64>> = points.iter().collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]));
    let mut volume = 0.0;
    let mut height = reference[1];
    for p in pts {
        if p[1] > height {
            volume += (p[0] - reference[0]) * (p[1] - height);
            height = p[1];
        }
    }
    volume
}

/// WFG recursion over a nondominated set.
fn wfg(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    match points.len() {
        0 => 0.0,
        1 => box_volume(&points[0], reference),
        _ if reference.len() == 2 => hv_2d(points, reference),
        _ => {
            let mut pts = points.to_vec();
            // descending in the last objective keeps limit sets small
            pts.sort_by(|a, b| b[b.len() - 1].total_cmp(&a[a.len() - 1]));
            (0..pts.len())
                .map(|k| exclusive(&pts[k], &pts[k + 1..], reference))
                .sum()
        }
    }
}

/// Volume dominated by `p` and by none of `others`.
pub(crate) fn exclusive(p: &[f64], others: &[Vec<f64>], reference: &[f64]) -> f64 {
    let limited: Vec<Vec<f64>> = others
        .iter()
        .map(|q| {
            q.iter()
                .zip(p)
                .map(|(a, b)| a.min(*b))
                .collect::<Vec<f64>>()
        })
        .filter(|q| q.iter().zip(reference).all(|(a, r)| a > r))
        .collect();
    box_volume(p, reference) - wfg(&nondominated(limited), reference)
}

/// Lebesgue measure of the union of boxes `[reference, p]`.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64, HypervolumeError> {
    for (index, p) in points.iter().enumerate() {
        if p.len() != reference.len() {
            return Err(HypervolumeError::Dimension {
                index,
                expected: reference.len(),
                got: p.len(),
            });
        }
        if !p.iter().zip(reference).all(|(x, r)| x > r) {
            return Err(HypervolumeError::NotDominating { index });
        }
    }
    Ok(wfg(&nondominated(points.to_vec()), reference))
}
