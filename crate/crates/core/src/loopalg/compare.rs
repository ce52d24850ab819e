use serde::Serialize;

use crate::error::{coords, Result};
use crate::fieldcalc::sweep::par_map;
use crate::fieldcalc::Point;

use super::loops::{extract_hamiltonian, ContactLoop};

/// Largest discrepancy over a spacetime sample.
#[derive(Clone, Debug, Serialize)]
pub struct Discrepancy {
    pub what: String,
    pub samples: usize,
    pub times: usize,
    pub max: f64,
    pub worst: Vec<f64>,
    pub worst_time: f64,
}

fn sweep<F>(what: &str, points: &[Point], times: &[f64], f: F) -> Result<Discrepancy>
where
    F: Fn(&Point, f64) -> Result<f64> + Sync + Send,
{
    let rows = par_map(points, |p| {
        let mut w = (0.0f64, 0.0f64);
        for &t in times {
            let d = f(p, t)?;
            if d > w.0 || d.is_nan() {
                w = (d, t);
            }
        }
        Ok(w)
    })?;
    let (i, &(max, t)) = rows
        .iter()
        .enumerate()
        .fold((0, &(0.0, 0.0)), |a, b| if b.1 .0 > a.1 .0 || b.1 .0.is_nan() { b } else { a });
    Ok(Discrepancy {
        what: what.to_string(),
        samples: points.len(),
        times: times.len(),
        max,
        worst: points.get(i).map(coords).unwrap_or_default(),
        worst_time: t,
    })
}

/// `max dist(a_t(p), b_t(p))`.
pub fn flow_distance(a: &ContactLoop, b: &ContactLoop, points: &[Point], times: &[f64]) -> Result<Discrepancy> {
    let dom = a.domain().clone();
    sweep(&format!("dist({}, {})", a.label(), b.label()), points, times, |p, t| {
        Ok(dom.distance(&a.flow(p, t)?, &b.flow(p, t)?))
    })
}

/// `max |H_t(p) - formula(p)|`, with `H` the loop's Hamiltonian or, if `oracle` is set, the one
/// recovered from its flow.
pub fn formula_residual<F>(
    l: &ContactLoop,
    formula: F,
    points: &[Point],
    times: &[f64],
    oracle: bool,
) -> Result<Discrepancy>
where
    F: Fn(&Point) -> f64 + Sync + Send,
{
    let h = if oracle { extract_hamiltonian(l) } else { l.hamiltonian().clone() };
    let what = format!("{}({}) - formula", if oracle { "oracle" } else { "H" }, l.label());
    sweep(&what, points, times, |p, t| Ok((h.eval(p, t)? - formula(p)).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopalg::compose_loops;
    use crate::models::{loop_rho, loop_zeta, model_s1s2};

    #[test]
    fn rho_squared_is_double_rotation() {
        let m = model_s1s2().unwrap();
        let rho = loop_rho(m.alpha()).unwrap();
        let rr = compose_loops(&rho, &rho).unwrap();
        let pts = m.domain().sample(12, 2);
        let times = [0.3, 1.7, 4.0];
        assert!(flow_distance(&rr, &rr, &pts, &times).unwrap().max == 0.0);
        let z = loop_zeta(m.alpha()).unwrap();
        assert!(flow_distance(&rr, &z, &pts, &times).unwrap().max > 0.1);
        let r = formula_residual(&rr, |p| 2.0 * (p[1] * p[1] + p[2] * p[2]), &pts, &times, true).unwrap();
        assert!(r.max < 1e-6, "{r:?}");
    }
}
