//! Adaptive Gauss-Kronrod (7/15) quadrature.

#![allow(clippy::excessive_precision)]

use crate::real::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct Estimate<F> {
    pub value: F,
    pub error: F,
}

fn gk15<F: Real, G: Fn(F) -> F>(f: &G, a: F, b: F) -> Estimate<F> {
    let half = F::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * F::lit(WGK[7]);
    let mut gauss = fc * F::lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * F::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + F::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss = gauss + F::lit(WG[j / 2]) * pair;
        }
    }
    Estimate {
        value: kronrod * half_len,
        error: ((kronrod - gauss) * half_len).abs(),
    }
}

/// Integrates `f` over `[a, b]` until the summed error estimate is below
/// `rel_tol * |value|` (or an absolute floor for vanishing integrals).
pub fn integrate<F: Real, G: Fn(F) -> F>(f: G, a: F, b: F, rel_tol: f64) -> Estimate<F> {
    if a == b {
        return Estimate {
            value: F::zero(),
            error: F::zero(),
        };
    }
    let rel = F::lit(rel_tol.max(F::TOL_FLOOR));
    let first = gk15(&f, a, b);
    let mut parts = vec![(a, b, first)];
    let mut total = first.value;
    let mut err = first.error;
    let max_parts = 4000;
    while err > rel * total.abs() + F::min_positive_value() && parts.len() < max_parts {
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.partial_cmp(&y.1 .2.error).unwrap())
            .expect("non-empty");
        let (lo, hi, est) = parts.swap_remove(worst);
        let mid = F::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            parts.push((lo, hi, est));
            break;
        }
        let left = gk15(&f, lo, mid);
        let right = gk15(&f, mid, hi);
        parts.push((lo, mid, left));
        parts.push((mid, hi, right));
        // Re-sum rather than update incrementally to keep rounding bounded.
        total = parts.iter().map(|p| p.2.value).sum();
        err = parts.iter().map(|p| p.2.error).sum();
    }
    Estimate {
        value: total,
        error: err,
    }
}
