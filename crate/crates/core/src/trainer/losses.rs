use crate::error::{Error, Result};

pub const SCORE_EPS: f64 = 1e-7;

fn clamp(s: f64) -> f64 {
    s.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

/// d clamp(s) / ds: one inside the clamp interval, zero outside.
fn clamp_grad(s: f64) -> f64 {
    if (SCORE_EPS..=1.0 - SCORE_EPS).contains(&s) {
        1.0
    } else {
        0.0
    }
}

fn check(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(Error::Empty("score list".into()));
    }
    Ok(())
}

/// Binary cross-entropy `−(1/N) Σ [y log s + (1−y) log(1−s)]` on clamped scores.
pub fn discriminator_loss(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check(scores, labels)?;
    let n = scores.len() as f64;
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let s = clamp(s);
            y * s.ln() + (1.0 - y) * (1.0 - s).ln()
        })
        .sum();
    Ok(-total / n)
}

pub fn discriminator_loss_grad(scores: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    check(scores, labels)?;
    let n = scores.len() as f64;
    Ok(scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            let c = clamp(s);
            -(y / c - (1.0 - y) / (1.0 - c)) * clamp_grad(s) / n
        })
        .collect())
}

/// `−mean(s)`.
pub fn generator_adversarial_loss(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("score list".into()));
    }
    Ok(-scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn generator_adversarial_loss_grad(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Empty("score list".into()));
    }
    Ok(vec![-1.0 / scores.len() as f64; scores.len()])
}

fn check_chains(chains: &[Vec<f64>]) -> Result<usize> {
    let len = chains.first().map(Vec::len).ok_or_else(|| Error::Empty("score chains".into()))?;
    if len < 2 {
        return Err(Error::InvalidArgument("score chains need T >= 1".into()));
    }
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::Shape("score chains of different lengths".into()));
    }
    Ok(len - 1)
}

/// Mean over chains and `t = 1..=T` of `log(s^{t−1} / s^t)`, on clamped scores.
/// Each chain is `[s^0, …, s^T]`.
pub fn boundary_loss(chains: &[Vec<f64>]) -> Result<f64> {
    let steps = check_chains(chains)?;
    let mut total = 0.0;
    for c in chains {
        for t in 1..=steps {
            total += (clamp(c[t - 1]) / clamp(c[t])).ln();
        }
    }
    Ok(total / (chains.len() * steps) as f64)
}

pub fn boundary_loss_grad(chains: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let steps = check_chains(chains)?;
    let w = 1.0 / (chains.len() * steps) as f64;
    Ok(chains
        .iter()
        .map(|c| {
            let mut g = vec![0.0; c.len()];
            for t in 1..=steps {
                g[t - 1] += w / clamp(c[t - 1]) * clamp_grad(c[t - 1]);
                g[t] -= w / clamp(c[t]) * clamp_grad(c[t]);
            }
            g
        })
        .collect())
}

/// `L_neg + L_diff`.
pub fn generator_total_loss(adversarial: f64, boundary: f64) -> f64 {
    adversarial + boundary
}
