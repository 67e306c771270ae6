//! Reference Simple Good-Turing, transcribed step by step from Gale and
//! Sampson's published procedure (their `SGT.c` layout: parallel `r`/`n`
//! arrays, a linear `row` lookup and a running "indifference" flag).

use std::collections::BTreeMap;

pub struct Reference {
    pub p_zero: f64,
    /// Probability of one word seen `r` times, keyed by `r`.
    pub prob: BTreeMap<u64, f64>,
}

/// `counts` is a list of per-word counts (zeros ignored).
pub fn reference_sgt(counts: &[u64]) -> Reference {
    let mut fof: BTreeMap<u64, u64> = BTreeMap::new();
    for &c in counts.iter().filter(|&&c| c > 0) {
        *fof.entry(c).or_insert(0) += 1;
    }
    let r: Vec<f64> = fof.keys().map(|&k| k as f64).collect();
    let n: Vec<f64> = fof.values().map(|&v| v as f64).collect();
    let rows = r.len();
    let row = |value: f64| r.iter().position(|&x| x == value);

    let mut big_n = 0.0;
    for j in 0..rows {
        big_n += r[j] * n[j];
    }
    let p_zero = match row(1.0) {
        Some(j) => n[j] / big_n,
        None => 0.0,
    };

    let mut z = vec![0.0; rows];
    let mut log_r = vec![0.0; rows];
    let mut log_z = vec![0.0; rows];
    for j in 0..rows {
        let i = if j == 0 { 0.0 } else { r[j - 1] };
        let k = if j == rows - 1 {
            2.0 * r[j] - i
        } else {
            r[j + 1]
        };
        z[j] = 2.0 * n[j] / (k - i);
        log_r[j] = r[j].ln();
        log_z[j] = z[j].ln();
    }

    // find_best_fit
    let (mut xs, mut ys) = (0.0, 0.0);
    for j in 0..rows {
        xs += log_r[j];
        ys += log_z[j];
    }
    let meanx = xs / rows as f64;
    let meany = ys / rows as f64;
    let (mut xy, mut xx) = (0.0, 0.0);
    for j in 0..rows {
        xy += (log_r[j] - meanx) * (log_z[j] - meany);
        xx += (log_r[j] - meanx) * (log_r[j] - meanx);
    }
    let slope = xy / xx;
    let intercept = meany - slope * meanx;
    let smoothed = |i: f64| (intercept + slope * i.ln()).exp();

    let mut r_star = vec![0.0; rows];
    let mut indiff_vals_seen = false;
    for j in 0..rows {
        let y = (r[j] + 1.0) * smoothed(r[j] + 1.0) / smoothed(r[j]);
        let next = row(r[j] + 1.0);
        if next.is_none() {
            indiff_vals_seen = true;
        }
        if !indiff_vals_seen {
            let nx = n[next.unwrap()];
            let x = (r[j] + 1.0) * nx / n[j];
            let confid =
                1.96 * ((r[j] + 1.0).powi(2) * (nx / n[j].powi(2)) * (1.0 + nx / n[j])).sqrt();
            if (x - y).abs() <= confid {
                indiff_vals_seen = true;
            } else {
                r_star[j] = x;
            }
        }
        if indiff_vals_seen {
            r_star[j] = y;
        }
    }
    let mut big_n_prime = 0.0;
    for j in 0..rows {
        big_n_prime += n[j] * r_star[j];
    }
    let mut prob = BTreeMap::new();
    for j in 0..rows {
        prob.insert(r[j] as u64, (1.0 - p_zero) * r_star[j] / big_n_prime);
    }
    Reference { p_zero, prob }
}
