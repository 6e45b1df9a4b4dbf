//! Independent reference implementations used by the acceptance run.
#![allow(dead_code)]

use hyvar::model::Component;
use hyvar::schemes::ObservationScheme;

/// Every interval pair `(i, j)` with nonempty overlap and `t¹_i ∨ t²_j <= T`,
/// by exhaustive double loop, in lexicographic order.
pub fn brute_pairs(s: &ObservationScheme) -> Vec<(usize, usize)> {
    let a = s.times(Component::One);
    let b = s.times(Component::Two);
    let mut out = Vec::new();
    for i in 1..a.len() {
        for j in 1..b.len() {
            if a[i - 1].max(b[j - 1]) < a[i].min(b[j]) && a[i].max(b[j]) <= s.horizon() {
                out.push((i, j));
            }
        }
    }
    out
}

fn pw(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

/// Length powers of one pair: `(|I¹|, |I²|, |I¹∩I²|, |I¹\I²|, |I²\I¹|)`.
fn pair_lengths(a: &[f64], b: &[f64], i: usize, j: usize) -> [f64; 5] {
    let l1 = a[i] - a[i - 1];
    let l2 = b[j] - b[j - 1];
    let ov = a[i].min(b[j]) - a[i - 1].max(b[j - 1]);
    [l1, l2, ov, (l1 - ov).max(0.0), (l2 - ov).max(0.0)]
}

fn brute_sum(s: &ObservationScheme, t: f64, scale: f64, term: impl Fn([f64; 5]) -> f64) -> f64 {
    let a = s.times(Component::One);
    let b = s.times(Component::Two);
    let mut total = 0.0;
    for (i, j) in brute_pairs(s) {
        if a[i].max(b[j]) <= t {
            total += term(pair_lengths(&a, &b, i, j));
        }
    }
    scale * total
}

/// `H_{k,m,p}(t)` by double loop.
pub fn brute_h(s: &ObservationScheme, k: u32, m: u32, p: f64, rate: f64, t: f64) -> f64 {
    let e = (p - f64::from(k + m)) / 2.0;
    brute_sum(s, t, rate.powf(p / 2.0 - 1.0), |l| {
        pw(l[3], f64::from(k) / 2.0) * pw(l[4], f64::from(m) / 2.0) * pw(l[2], e)
    })
}

/// `G_{k,m,p}(t)` by double loop.
pub fn brute_gkmp(s: &ObservationScheme, k: u32, m: u32, p: f64, rate: f64, t: f64) -> f64 {
    let e = (p - f64::from(k + m)) / 2.0;
    brute_sum(s, t, rate.powf(p / 2.0 - 1.0), |l| {
        pw(l[0], f64::from(k) / 2.0) * pw(l[1], f64::from(m) / 2.0) * pw(l[2], e)
    })
}

/// `(k-1)!!` in exact integer arithmetic, 0 for odd `k`.
pub fn double_factorial_moment(k: u32) -> u128 {
    if k % 2 == 1 {
        return 0;
    }
    (1..k as u128).step_by(2).product()
}

/// `E|Z|^p` for standard normal `Z` by composite Simpson on `[0, 40]`.
pub fn abs_moment_simpson(p: f64) -> f64 {
    let (a, b, n) = (0.0f64, 40.0f64, 2_000_000usize);
    let h = (b - a) / n as f64;
    let phi = |x: f64| x.powf(p) * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(a) + phi(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * phi(x);
    }
    2.0 * s * h / 3.0
}

/// Deterministic random explicit scheme with at most `max_len` times per component.
pub fn random_scheme(rng: &mut impl FnMut() -> f64, max_len: usize) -> ObservationScheme {
    let mut grid = || {
        let k = 1 + (rng() * (max_len - 1) as f64) as usize;
        let mut v: Vec<f64> = (0..k).map(|_| rng() * 1.1).filter(|&x| x > 0.0).collect();
        v.push(0.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let a = grid();
    let b = grid();
    let horizon = 0.3 + 0.8 * rng();
    ObservationScheme::new(a, b, horizon).expect("valid random scheme")
}

/// Small splitmix-based uniform generator, independent of the crate's RNG.
pub fn uniform_source(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed;
    move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}
