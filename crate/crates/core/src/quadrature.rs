//! Adaptive Simpson integration of vector-valued integrands.

/// Integrates every component of `f` over `[a, b]`. Subintervals are split
/// until the Richardson error estimate of each is below `tol` scaled to its
/// share of the interval.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, &fa, &fm, &fb);
    recurse(f, a, b, &fa, &fm, &fb, whole, tol, max_depth)
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let h = (b - a) / 6.0;
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((x, y), z)| h * (x + 4.0 * y + z))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: Vec<f64>,
    tol: f64,
    depth: u32,
) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, &flm, fm);
    let right = simpson(m, b, fm, &frm, fb);
    let err = left
        .iter()
        .zip(&right)
        .zip(&whole)
        .map(|((l, r), w)| (l + r - w).abs())
        .fold(0.0, f64::max);
    if depth == 0 || err <= 15.0 * tol {
        return left
            .iter()
            .zip(&right)
            .zip(&whole)
            .map(|((l, r), w)| l + r + (l + r - w) / 15.0)
            .collect();
    }
    let l = recurse(f, a, m, fa, &flm, fm, left, 0.5 * tol, depth - 1);
    let r = recurse(f, m, b, fm, &frm, fb, right, 0.5 * tol, depth - 1);
    l.iter().zip(&r).map(|(x, y)| x + y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_half_line() {
        let v = adaptive_simpson(&|x: f64| vec![(-x * x).exp(), x * (-x * x).exp()], -12.0, 0.0, 1e-14, 40);
        let half_sqrt_pi = 0.5 * std::f64::consts::PI.sqrt();
        assert!((v[0] - half_sqrt_pi).abs() < 1e-12);
        assert!((v[1] + 0.5).abs() < 1e-12);
    }
}
