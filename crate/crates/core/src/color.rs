//! Optical-flow color coding: direction maps to hue on the standard flow
//! color wheel, magnitude to saturation; the zero vector is white.

use crate::Scalar;

/// Segment lengths of the standard flow color wheel (RY, YG, GC, CB, BM, MR).
const SEGMENTS: [(usize, [f64; 3], [f64; 3]); 6] = [
    (15, [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
    (6, [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]),
    (4, [0.0, 1.0, 0.0], [0.0, 1.0, 1.0]),
    (11, [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]),
    (13, [0.0, 0.0, 1.0], [1.0, 0.0, 1.0]),
    (6, [1.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
];

fn color_wheel() -> Vec<[f64; 3]> {
    let mut wheel = Vec::with_capacity(55);
    for (len, from, to) in SEGMENTS {
        for k in 0..len {
            let f = k as f64 / len as f64;
            wheel.push([
                from[0] + f * (to[0] - from[0]),
                from[1] + f * (to[1] - from[1]),
                from[2] + f * (to[2] - from[2]),
            ]);
        }
    }
    wheel
}

/// Magnitude at the given percentile (in `[0,1]`), used to normalize the
/// color saturation.
pub fn percentile_magnitude<T: Scalar>(flow: &[[T; 2]], percentile: f64) -> f64 {
    let mut mags: Vec<f64> = flow
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt().as_f64())
        .collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if mags.is_empty() {
        return 0.0;
    }
    let idx = ((mags.len() - 1) as f64 * percentile.clamp(0.0, 1.0)).round() as usize;
    mags[idx]
}

/// Colors one flow vector; `max_rad` is the magnitude mapped to full
/// saturation (typically the 99th percentile of the field).
pub fn flow_color<T: Scalar>(v: &[T; 2], max_rad: f64) -> [u8; 3] {
    let wheel = color_wheel();
    flow_color_with_wheel(v, max_rad, &wheel)
}

fn flow_color_with_wheel<T: Scalar>(v: &[T; 2], max_rad: f64, wheel: &[[f64; 3]]) -> [u8; 3] {
    let (u, w) = (v[0].as_f64(), v[1].as_f64());
    let norm = if max_rad > 0.0 { max_rad } else { 1.0 };
    let rad = (u * u + w * w).sqrt() / norm;
    let angle = (-w).atan2(-u) / std::f64::consts::PI;
    let n = wheel.len();
    let fk = (angle + 1.0) / 2.0 * (n - 1) as f64;
    let k0 = (fk.floor() as usize).min(n - 1);
    let k1 = (k0 + 1) % n;
    let f = fk - k0 as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let col = (1.0 - f) * wheel[k0][c] + f * wheel[k1][c];
        let col = if rad <= 1.0 {
            1.0 - rad * (1.0 - col)
        } else {
            col * 0.75
        };
        out[c] = (255.0 * col).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Colors a whole frame, normalizing by `max_rad`.
pub fn colorize_frame<T: Scalar>(flow: &[[T; 2]], max_rad: f64) -> Vec<[u8; 3]> {
    let wheel = color_wheel();
    flow.iter().map(|v| flow_color_with_wheel(v, max_rad, &wheel)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_is_white() {
        assert_eq!(flow_color(&[0.0f64, 0.0], 1.0), [255, 255, 255]);
    }

    #[test]
    fn uniform_flow_gives_uniform_color() {
        let flow = vec![[1.0f64, 0.0]; 24];
        let img = colorize_frame(&flow, 1.0);
        for px in &img {
            assert_eq!(*px, img[0]);
        }
        assert_ne!(img[0], [255, 255, 255]);
    }

    #[test]
    fn hue_varies_monotonically_around_the_wheel() {
        // saturated vectors swept over the circle: the wheel position fk is
        // monotone in the angle, so hue order must follow
        let n = 64;
        let mut hues = Vec::new();
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64 - std::f64::consts::PI;
            let c = flow_color(&[th.cos(), th.sin()], 1.0);
            let (r, g, b) = (c[0] as f64, c[1] as f64, c[2] as f64);
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            let h = if max == min {
                0.0
            } else if max == r {
                (60.0 * (g - b) / (max - min)).rem_euclid(360.0)
            } else if max == g {
                60.0 * (b - r) / (max - min) + 120.0
            } else {
                60.0 * (r - g) / (max - min) + 240.0
            };
            hues.push(h);
        }
        // monotone around the circle, allowing a single wrap in each rotation
        let mut wraps = 0;
        for w in hues.windows(2) {
            if w[1] < w[0] - 1e-9 {
                wraps += 1;
            }
        }
        assert!(wraps <= 1, "hue wrapped {wraps} times: {hues:?}");
    }

    #[test]
    fn oversaturated_vectors_are_dimmed() {
        let inside = flow_color(&[0.5f64, 0.0], 1.0);
        let outside = flow_color(&[2.0f64, 0.0], 1.0);
        let sum_in: u32 = inside.iter().map(|&v| v as u32).sum();
        let sum_out: u32 = outside.iter().map(|&v| v as u32).sum();
        assert!(sum_out < sum_in);
    }

    #[test]
    fn percentile_magnitude_is_robust_to_outliers() {
        let mut flow = vec![[1.0f64, 0.0]; 99];
        flow.push([1000.0, 0.0]);
        let p99 = percentile_magnitude(&flow, 0.99);
        assert!(p99 <= 1.0 + 1e-12, "p99 {p99}");
    }
}
