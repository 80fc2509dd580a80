//! Central finite-difference gradient checking.

use rand::seq::index::sample;

use crate::seed;

/// Denominator floor so that near-zero gradients are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h`
pub fn central_difference<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] = x[i] + h;
    let fp = f(&xp);
    xp[i] = x[i] - h;
    let fm = f(&xp);
    (fp - fm) / (2.0 * h)
}

fn check_indices<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    indices: impl Iterator<Item = usize>,
    h: f64,
) -> GradCheckReport {
    assert_eq!(x.len(), analytic.len());
    let mut report = GradCheckReport {
        probes: 0,
        max_rel_error: 0.0,
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for i in indices {
        let numeric = central_difference(&mut f, x, i, h);
        let err = relative_error(analytic[i], numeric);
        report.probes += 1;
        if report.probes == 1 || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
            report.worst_analytic = analytic[i];
            report.worst_numeric = numeric;
        }
    }
    report
}

/// Check every coordinate.
pub fn check_all<F: FnMut(&[f64]) -> f64>(f: F, x: &[f64], analytic: &[f64], h: f64) -> GradCheckReport {
    check_indices(f, x, analytic, 0..x.len(), h)
}

/// Check `probes` distinct coordinates drawn with `probe_seed` (all of them if fewer exist).
pub fn check_probes<F: FnMut(&[f64]) -> f64>(
    f: F,
    x: &[f64],
    analytic: &[f64],
    probes: usize,
    h: f64,
    probe_seed: u64,
) -> GradCheckReport {
    if probes >= x.len() {
        return check_all(f, x, analytic, h);
    }
    let mut rng = seed::rng(probe_seed);
    let mut idx = sample(&mut rng, x.len(), probes).into_vec();
    idx.sort_unstable();
    check_indices(f, x, analytic, idx.into_iter(), h)
}
