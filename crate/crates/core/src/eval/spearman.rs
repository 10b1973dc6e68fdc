use super::EvalError;

/// Ranks doubled so that averaged tie ranks stay integral.
fn doubled_ranks(xs: &[f64]) -> Vec<i128> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..=j share rank ((i+1) + (j+1)) / 2
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as i128;
        }
        i = j + 1;
    }
    ranks
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn exact_sqrt(x: u128) -> Option<u128> {
    let r = x.isqrt();
    (r * r == x).then_some(r)
}

/// Spearman's rank correlation with average ranks for ties.
///
/// Rank sums are accumulated in integers, so for inputs up to 20 000 items
/// the result is `sign · sqrt(p/q)` for the reduced fraction `p/q = ρ²`,
/// evaluated as a single division when both are perfect squares. Either
/// list having zero rank variance gives NaN.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.is_empty() {
        return Err(EvalError::Empty);
    }
    let rx = doubled_ranks(xs);
    let ry = doubled_ranks(ys);
    let n = xs.len() as i128;
    if xs.len() > 20_000 {
        return Ok(pearson_f64(&rx, &ry));
    }
    let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (&a, &b) in rx.iter().zip(&ry) {
        sx += a;
        sy += b;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return Ok(f64::NAN);
    }
    let sign = if cov < 0 { -1.0 } else { 1.0 };
    let mut p = cov.unsigned_abs() * cov.unsigned_abs();
    let mut q = vx as u128 * vy as u128;
    let g = gcd(p, q);
    p /= g;
    q /= g;
    Ok(match (exact_sqrt(p), exact_sqrt(q)) {
        (Some(a), Some(b)) => sign * (a as f64 / b as f64),
        _ => sign * (p as f64 / q as f64).sqrt(),
    })
}

fn pearson_f64(rx: &[i128], ry: &[i128]) -> f64 {
    let n = rx.len() as f64;
    let mx = rx.iter().map(|&x| x as f64).sum::<f64>() / n;
    let my = ry.iter().map(|&y| y as f64).sum::<f64>() / n;
    let (mut c, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (&a, &b) in rx.iter().zip(ry) {
        let (da, db) = (a as f64 - mx, b as f64 - my);
        c += da * db;
        vx += da * da;
        vy += db * db;
    }
    if vx == 0.0 || vy == 0.0 {
        return f64::NAN;
    }
    c / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_and_reversed() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&xs, &[10.0, 20.0, 30.0, 40.0, 50.0]).unwrap(), 1.0);
        assert_eq!(spearman(&xs, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn average_ranks() {
        assert_eq!(doubled_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![2, 5, 5, 8]);
    }

    #[test]
    fn errors_and_nan() {
        assert!(matches!(spearman(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(spearman(&[], &[]), Err(EvalError::Empty)));
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).unwrap().is_nan());
    }

    #[test]
    fn float_path_agrees() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 23) as f64).collect();
        let ys: Vec<f64> = (0..50).map(|i| ((i * 11) % 17) as f64).collect();
        let exact = spearman(&xs, &ys).unwrap();
        let approx = pearson_f64(&doubled_ranks(&xs), &doubled_ranks(&ys));
        assert!((exact - approx).abs() < 1e-12);
    }
}
