use rayon::prelude::*;

use super::domain::Point;
use crate::error::Result;

/// Parallel map over grid nodes; results keep node order and the first error wins.
pub fn par_map<T, F>(points: &[Point], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Point) -> Result<T> + Sync + Send,
{
    points.par_iter().map(f).collect()
}

/// Index and value of the smallest entry; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best, (i, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
}

/// Index and value of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrema_prefer_first_index() {
        let v = [3.0, 1.0, 1.0, 5.0, 5.0];
        assert_eq!(argmin(&v), Some((1, 1.0)));
        assert_eq!(argmax(&v), Some((3, 5.0)));
        assert_eq!(argmin(&[]), None);
    }
}
