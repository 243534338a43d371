//! Adaptive Simpson quadrature in one and two dimensions.

use core::cell::Cell;

/// Value of a numerical integral together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

const MAX_DEPTH: u32 = 40;
const INITIAL_PANELS: usize = 16;

struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson_rule(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) * (fa + 4.0 * fm + fb) / 6.0
}

fn refine<F: Fn(f64) -> f64>(f: &F, p: Panel, tol: f64, depth: u32, acc: &mut Integral) {
    let Panel { a, m, b, fa, fm, fb, whole } = p;
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (m - a) <= f64::EPSILON * a.abs().max(1.0) {
        acc.value += left + right + delta / 15.0;
        acc.error += delta.abs() / 15.0;
        return;
    }
    let lp = Panel { a, m: lm, b: m, fa, fm: flm, fb: fm, whole: left };
    let rp = Panel { a: m, m: rm, b, fa: fm, fm: frm, fb, whole: right };
    refine(f, lp, 0.5 * tol, depth - 1, acc);
    refine(f, rp, 0.5 * tol, depth - 1, acc);
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first cut into a fixed number of panels so that narrow
/// features are not skipped by the initial five-point sample.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Integral {
    let mut acc = Integral { value: 0.0, error: 0.0 };
    if b <= a {
        return acc;
    }
    let width = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut fa = f(a);
    for j in 0..INITIAL_PANELS {
        let pa = a + width * j as f64;
        let pb = if j + 1 == INITIAL_PANELS { b } else { pa + width };
        let pm = 0.5 * (pa + pb);
        let (fm, fb) = (f(pm), f(pb));
        let whole = simpson_rule(pa, pb, fa, fm, fb);
        let panel = Panel { a: pa, m: pm, b: pb, fa, fm, fb, whole };
        refine(&f, panel, panel_tol, MAX_DEPTH, &mut acc);
        fa = fb;
    }
    acc
}

/// Tensor-product adaptive Simpson over the rectangle `[x0, x1] x [y0, y1]`.
///
/// Half of the tolerance budget goes to the outer integral and half to the
/// inner ones; the reported error adds the outer estimate to the worst inner
/// estimate times the outer width.
pub fn simpson_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    tol: f64,
) -> Integral {
    let inner_tol = 0.5 * tol / (x1 - x0).max(f64::MIN_POSITIVE);
    let worst_inner = Cell::new(0.0f64);
    let outer = simpson(
        |x| {
            let inner = simpson(|y| f(x, y), y0, y1, inner_tol);
            worst_inner.set(worst_inner.get().max(inner.error));
            inner.value
        },
        x0,
        x1,
        0.5 * tol,
    );
    Integral { value: outer.value, error: outer.error + worst_inner.get() * (x1 - x0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = simpson(|x| 3.0 * x * x * x - x + 2.0, -1.0, 2.0, 1e-12);
        // 3/4 (16 - 1) - (4 - 1)/2 + 2 * 3
        assert!((r.value - 15.75).abs() < 1e-12);
    }

    #[test]
    fn narrow_bump_is_found() {
        let r = simpson(|x| libm::exp(-0.5 * (x - 3.0) * (x - 3.0) / 0.01), -50.0, 50.0, 1e-10);
        let exact = libm::sqrt(2.0 * PI * 0.01);
        assert!((r.value - exact).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn gaussian_2d_mass() {
        let r = simpson_2d(
            |x, y| libm::exp(-0.5 * (x * x + y * y)) / (2.0 * PI),
            (-9.0, 9.0),
            (-9.0, 9.0),
            1e-8,
        );
        assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
        assert!(r.error < 1e-7);
    }

    #[test]
    fn kinked_integrand() {
        // |x - y| over the unit square integrates to 1/3.
        let r = simpson_2d(|x, y| (x - y).abs(), (0.0, 1.0), (0.0, 1.0), 1e-7);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-6, "{r:?}");
    }
}
