//! Brent's univariate minimizer: golden-section steps with successive
//! parabolic interpolation, plus explicit endpoint probes so boundary optima
//! are returned exactly.

const GOLDEN: f64 = 0.381_966_011_250_105_2; // (3 - sqrt(5)) / 2

/// Minimizes `g` on `[lo, hi]`. Returns the best evaluated point and its
/// value; that value is never above `g` at either endpoint or at the initial
/// interior probe. `g` may return `+inf`. At most `max_iter` evaluations are
/// spent beyond the three initial probes.
pub fn brent_minimize<F>(mut g: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo < hi, "brent_minimize needs lo < hi");
    let tol = tol.abs().max(1e-12);
    let eps = f64::EPSILON.sqrt();

    let mut best_x = lo;
    let mut best_g = g(lo);
    let g_hi = g(hi);
    if g_hi < best_g {
        best_x = hi;
        best_g = g_hi;
    }

    let mut a = lo;
    let mut b = hi;
    let mut x = 0.5 * (lo + hi);
    let mut fx = g(x);
    if fx < best_g {
        best_x = x;
        best_g = fx;
    }
    let (mut w, mut v) = (x, x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;

    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = tol * x.abs() + eps;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }

        let mut use_golden = true;
        if e.abs() > tol1 && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            // Parabola through (x, fx), (w, fw), (v, fv).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < mid { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = g(u);
        if fu < best_g {
            best_x = u;
            best_g = fu;
        }

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u >= x {
                b = u;
            } else {
                a = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    (best_x, best_g)
}
