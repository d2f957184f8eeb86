//! Normal distribution tails, the bivariate normal orthant probability and
//! ball/cap volumes.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

const GL_W6: [f64; 3] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904];
const GL_X6: [f64; 3] = [0.9324695142031522, 0.6612093864662647, 0.2386191860831970];
const GL_W12: [f64; 6] = [
    0.04717533638651177,
    0.1069393259953183,
    0.1600783285433464,
    0.2031674267230659,
    0.2334925365383547,
    0.2491470458134029,
];
const GL_X12: [f64; 6] = [
    0.9815606342467191,
    0.9041172563704750,
    0.7699026741943050,
    0.5873179542866171,
    0.3678314989981802,
    0.1252334085114692,
];
const GL_W20: [f64; 10] = [
    0.01761400713915212,
    0.04060142980038694,
    0.06267204833410906,
    0.08327674157670475,
    0.1019301198172404,
    0.1181945319615184,
    0.1316886384491766,
    0.1420961093183821,
    0.1491729864726037,
    0.1527533871307259,
];
const GL_X20: [f64; 10] = [
    0.9931285991850949,
    0.9639719272779138,
    0.9122344282513259,
    0.8391169718222188,
    0.7463319064601508,
    0.6360536807265150,
    0.5108670019508271,
    0.3737060887154196,
    0.2277858511416451,
    0.07652652113349733,
];

/// `P(X > h, Y > k)` for standard bivariate normals with correlation `r`.
///
/// Genz's algorithm (Drezner-Wesolowsky with Gauss-Legendre quadrature),
/// accurate to about 1e-15.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { norm_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return norm_cdf(-h);
    }
    let r = r.clamp(-1.0, 1.0);
    if r == 0.0 {
        return norm_cdf(-h) * norm_cdf(-k);
    }
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL_W6, &GL_X6)
    } else if r.abs() < 0.75 {
        (&GL_W12, &GL_X12)
    } else {
        (&GL_W20, &GL_X20)
    };
    let tp = 2.0 * PI;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (wi, xi) in w.iter().zip(x) {
            for s in [1.0, -1.0] {
                let sn = (asr * (s * xi + 1.0) / 2.0).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (2.0 * tp) + norm_cdf(-h) * norm_cdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / a_s + hk) / 2.0;
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * tp.sqrt()
                    * norm_cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (wi, xi) in w.iter().zip(x) {
                for s in [-1.0, 1.0] {
                    let xs = (a * (s * xi + 1.0)).powi(2);
                    let rs = (1.0 - xs).sqrt();
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        bvn += a
                            * wi
                            * asr.exp()
                            * ((-hk * xs / (2.0 * (1.0 + rs).powi(2))).exp() / rs
                                - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
            }
            bvn = -bvn / tp;
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else {
            bvn = -bvn + (norm_cdf(-h) - norm_cdf(-k)).max(0.0);
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Volume of the k-dimensional ball of radius `r`.
pub fn ball_volume(k: usize, r: f64) -> f64 {
    // V_k = V_{k-2} * 2 pi / k keeps small dimensions exact to rounding
    let mut v = if k % 2 == 0 { 1.0 } else { 2.0 };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        v *= 2.0 * PI / j as f64;
        j += 2;
    }
    v * r.powi(k as i32)
}

/// Volume of `{x in B_k(0, r) : x_1 >= h}`; `h` is clamped to `[-r, r]`.
pub fn ball_cap_volume(k: usize, h: f64, r: f64) -> f64 {
    if !(r > 0.0) || k == 0 {
        return 0.0;
    }
    let h = h.clamp(-r, r);
    let full = ball_volume(k, r);
    if h < 0.0 {
        return full - ball_cap_volume(k, -h, r);
    }
    let t = h / r;
    let x = ((1.0 - t) * (1.0 + t)).max(0.0);
    0.5 * full * beta_reg((k as f64 + 1.0) / 2.0, 0.5, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn phi(x: f64) -> f64 {
        (-x * x / 2.0).exp() / (2.0 * PI).sqrt()
    }

    // P(X > h, Y > k) = int_h^inf phi(x) P(Y > k | X = x) dx by composite Simpson.
    fn bvn_quadrature(h: f64, k: f64, r: f64) -> f64 {
        let s = (1.0 - r * r).sqrt();
        let lo = h.max(-12.0);
        let hi = 12.0f64;
        if lo >= hi {
            return 0.0;
        }
        let n = 20000;
        let step = (hi - lo) / n as f64;
        let f = |x: f64| phi(x) * norm_cdf((r * x - k) / s);
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let x = lo + step * i as f64;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * step / 3.0
    }

    #[test]
    fn bvn_matches_quadrature() {
        for &r in &[-0.99, -0.95, -0.8, -0.5, -0.1, 0.2, 0.5, 0.8, 0.93, 0.999] {
            for &h in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
                for &k in &[-1.5, 0.0, 0.4, 2.2] {
                    let got = bvn_upper(h, k, r);
                    let want = bvn_quadrature(h, k, r);
                    assert!((got - want).abs() < 1e-11, "h={h} k={k} r={r}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn bvn_independent_case_is_product() {
        assert_abs_diff_eq!(bvn_upper(0.3, -0.2, 0.0), norm_cdf(-0.3) * norm_cdf(0.2));
        assert_abs_diff_eq!(bvn_upper(0.0, 0.0, 0.5), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn cap_examples() {
        assert_abs_diff_eq!(ball_cap_volume(1, 0.0, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ball_cap_volume(2, 0.0, 1.0), PI / 2.0, epsilon = 1e-15);
        assert_eq!(ball_cap_volume(2, 1.0, 1.0), 0.0);
        assert_abs_diff_eq!(ball_volume(3, 2.0), 4.0 / 3.0 * PI * 8.0, epsilon = 1e-12);
    }

    #[test]
    fn cap_matches_closed_forms() {
        for &h in &[-0.9f64, -0.3, 0.1, 0.6] {
            // segment of the unit disk
            let seg = h.acos() - h * (1.0 - h * h).sqrt();
            assert_abs_diff_eq!(ball_cap_volume(2, h, 1.0), seg, epsilon = 1e-13);
            // spherical cap of the unit ball
            let a = 1.0 - h;
            let cap = PI * a * a * (3.0 - a) / 3.0;
            assert_abs_diff_eq!(ball_cap_volume(3, h, 1.0), cap, epsilon = 1e-13);
        }
    }
}
