//! Composite and adaptive quadrature rules.

/// Composite Simpson rule on uniformly spaced samples with spacing `h`.
///
/// Works for any number of samples ≥ 2: an odd number of intervals is closed
/// with the Simpson 3/8 rule on the last three, and two samples fall back to
/// the trapezoid rule.
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (samples[0] + samples[1]),
        3 => h / 3.0 * (samples[0] + 4.0 * samples[1] + samples[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals % 2 == 0 { (n - 1, false) } else { (n - 4, true) };
            let mut total = 0.0;
            if even_end > 0 {
                let mut s = samples[0] + samples[even_end];
                for (i, v) in samples.iter().enumerate().take(even_end).skip(1) {
                    s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
                }
                total = h / 3.0 * s;
            }
            if tail {
                let y = &samples[n - 4..];
                total += 3.0 * h / 8.0 * (y[0] + 3.0 * y[1] + 3.0 * y[2] + y[3]);
            }
            total
        }
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut k = 0.0;
    let mut g = 0.0;
    for i in 0..7 {
        let x = r * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    let fc = f(c);
    k += K15_WEIGHTS[7] * fc;
    g += G7_WEIGHTS[3] * fc;
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate falls below `tol` or `max_intervals` panels are in use.
pub fn adaptive_gk(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, max_intervals: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut panels = vec![{
        let (v, e) = gauss_kronrod(&mut f, a, b);
        (a, b, v, e)
    }];
    loop {
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= tol || panels.len() >= max_intervals {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gauss_kronrod(&mut f, lo, mid);
        let (v2, e2) = gauss_kronrod(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// Fixed Gauss–Kronrod (15-point) rule on each of `panels` equal subintervals
/// of `[a, b]`; suited to integrands that are smooth between known breakpoints.
pub fn panel_gk(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    (0..panels).map(|i| gauss_kronrod(&mut f, a + i as f64 * h, a + (i + 1) as f64 * h).0).sum()
}
