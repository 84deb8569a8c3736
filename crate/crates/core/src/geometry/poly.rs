//! Small dense polynomial helpers. Coefficients are stored lowest degree first.

use nalgebra::DMatrix;

pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

pub(crate) fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub(crate) fn eval(a: &[f64], x: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn derivative(a: &[f64]) -> Vec<f64> {
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * i as f64)
        .collect()
}

/// Real roots via companion-matrix eigenvalues, each polished by Newton steps.
///
/// Eigenvalues with a small imaginary part are kept: a double real root
/// commonly splits into a near-real complex pair under rounding.
pub(crate) fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let scale_max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale_max == 0.0 {
        return Vec::new();
    }
    let mut c: Vec<f64> = coeffs.iter().map(|x| x / scale_max).collect();
    while c.len() > 1 && c.last().unwrap().abs() < 1e-13 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i] / lead;
    }
    let d = derivative(&c);
    let mut roots: Vec<f64> = comp
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-4 * (1.0 + z.re.abs()))
        .map(|z| polish(&c, &d, z.re))
        .collect();
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    roots
}

fn polish(c: &[f64], d: &[f64], mut x: f64) -> f64 {
    let mut fx = eval(c, x).abs();
    for _ in 0..8 {
        let dx = eval(d, x);
        if dx == 0.0 {
            break;
        }
        let cand = x - eval(c, x) / dx;
        let fc = eval(c, cand).abs();
        if fc < fx {
            x = cand;
            fx = fc;
        } else {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_with_known_roots() {
        // (x-1)(x+2)(x-0.5)(x-3)
        let p = mul(&mul(&[-1.0, 1.0], &[2.0, 1.0]), &mul(&[-0.5, 1.0], &[-3.0, 1.0]));
        let r = real_roots(&p);
        let expected = [-2.0, 0.5, 1.0, 3.0];
        assert_eq!(r.len(), 4);
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_roots_are_dropped() {
        // (x^2 + 1)(x - 2)
        let r = real_roots(&mul(&[1.0, 0.0, 1.0], &[-2.0, 1.0]));
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2.0).abs() < 1e-12);
    }
}
