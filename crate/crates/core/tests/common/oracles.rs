//! Brute-force reference computations, written independently of the
//! library code they check.

use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct BleuPair {
    pub hyp: String,
    pub refs: Vec<String>,
    pub bleu: f64,
}

#[derive(Debug, Deserialize)]
pub struct BleuFixture {
    pub generator: String,
    pub pairs: Vec<BleuPair>,
}

pub fn bleu_fixture() -> BleuFixture {
    let path = super::fixtures().join("bleu_reference.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Unigram overlap by pairing each hypothesis token with a distinct,
/// not-yet-used reference token. Returns (matches, P, R, F1).
pub fn rouge1_by_pairing(hyp: &[String], reference: &[String]) -> (usize, f64, f64, f64) {
    let mut used = vec![false; reference.len()];
    let mut matches = 0;
    for h in hyp {
        for (j, r) in reference.iter().enumerate() {
            if !used[j] && r == h {
                used[j] = true;
                matches += 1;
                break;
            }
        }
    }
    if hyp.is_empty() || reference.is_empty() {
        return (matches, 0.0, 0.0, 0.0);
    }
    let p = matches as f64 / hyp.len() as f64;
    let r = matches as f64 / reference.len() as f64;
    let f = if matches == 0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (matches, p, r, f)
}

/// Greedy-match BERTScore with explicit loops over every token pair.
pub fn bertscore_double_loop(hyp: &[Vec<f64>], reference: &[Vec<f64>]) -> (f64, f64, f64) {
    if hyp.is_empty() || reference.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let cos = |a: &Vec<f64>, b: &Vec<f64>| {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for k in 0..a.len() {
            dot += a[k] * b[k];
            na += a[k] * a[k];
            nb += b[k] * b[k];
        }
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0)
        }
    };
    let mut p_sum = 0.0;
    for h in hyp {
        let mut best = 0.0f64;
        for r in reference {
            best = best.max(cos(h, r));
        }
        p_sum += best;
    }
    let mut r_sum = 0.0;
    for r in reference {
        let mut best = 0.0f64;
        for h in hyp {
            best = best.max(cos(h, r));
        }
        r_sum += best;
    }
    let p = p_sum / hyp.len() as f64;
    let r = r_sum / reference.len() as f64;
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}
