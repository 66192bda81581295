#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structmor::interconnection::InterconnectionTopology;
use structmor::StateSpace;

pub type Mat = DMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn skew(rng: &mut impl Rng, n: usize) -> Mat {
    let m = uniform(rng, n, n);
    &m - m.transpose()
}

/// `L Lᵀ + shift·I`.
pub fn spd(rng: &mut impl Rng, n: usize, shift: f64) -> Mat {
    let l = uniform(rng, n, n);
    &l * l.transpose() + Mat::identity(n, n) * shift
}

/// Random PSD matrix of the given rank.
pub fn psd(rng: &mut impl Rng, n: usize, rank: usize) -> Mat {
    let l = uniform(rng, n, rank);
    &l * l.transpose()
}

/// Hurwitz `A = K − (L Lᵀ + I/2)` with random `B`, `C`, `D`.
pub fn stable_system(rng: &mut impl Rng, n: usize, p: usize, q: usize) -> StateSpace {
    let a = skew(rng, n) * 1.5 - spd(rng, n, 0.5);
    StateSpace::new(
        a,
        uniform(rng, n, p),
        uniform(rng, q, n),
        uniform(rng, q, p),
    )
    .unwrap()
}

pub fn strictly_proper(rng: &mut impl Rng, n: usize, p: usize, q: usize) -> StateSpace {
    let s = stable_system(rng, n, p, q);
    let (a, b, c, _) = s.into_parts();
    StateSpace::new(a, b, c, Mat::zeros(q, p)).unwrap()
}

/// Port-Hamiltonian model `A = (J − R)H`, `C = BᵀH`, `D = Dₛ + Dₖ`.
/// `H` is a storage matrix, so the model is passive; `R ≻ 0` makes it
/// asymptotically stable. Returns the model and `H`.
pub fn passive_system(
    rng: &mut impl Rng,
    n: usize,
    p: usize,
    feedthrough: bool,
) -> (StateSpace, Mat) {
    let h = spd(rng, n, 0.5);
    let j = skew(rng, n);
    let r = spd(rng, n, 0.2) * 0.5;
    let a = (&j - &r) * &h;
    let b = uniform(rng, n, p);
    let c = b.transpose() * &h;
    let d = if feedthrough {
        psd(rng, p, p) * 0.5 + skew(rng, p) * 0.5
    } else {
        Mat::zeros(p, p)
    };
    (StateSpace::new(a, b, c, d).unwrap(), h)
}

/// Stable model with `C = −BᵀH` and `D = 0`, which admits no storage matrix:
/// `ΞB = Cᵀ` would force `BᵀΞB = −BᵀHB ≺ 0`.
pub fn non_passive_system(rng: &mut impl Rng, n: usize, p: usize) -> StateSpace {
    let (s, h) = passive_system(rng, n, p, false);
    let (a, b, _, d) = s.into_parts();
    let c = -(b.transpose() * h);
    StateSpace::new(a, b, c, d).unwrap()
}

/// Well-conditioned random transformation `I + 0.4·U`.
pub fn transform(rng: &mut impl Rng, n: usize) -> Mat {
    loop {
        let t = Mat::identity(n, n) + uniform(rng, n, n) * 0.4;
        let s = t.clone().singular_values();
        if s.min() > 0.2 {
            return t;
        }
    }
}

/// PSD `S` (`pb×pb`) with a random `𝓑` of width `m`.
pub fn random_topology(rng: &mut impl Rng, pb: usize, m: usize) -> InterconnectionTopology {
    let rank = rng.gen_range(1..=pb);
    InterconnectionTopology::new(psd(rng, pb, rank), uniform(rng, pb, m)).unwrap()
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

pub fn frf_distance(g: &StateSpace, h: &StateSpace, omegas: &[f64]) -> (f64, f64) {
    let mut worst_abs: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for &w in omegas {
        let s = num_complex::Complex64::new(0.0, w);
        let a = g.eval(s).unwrap();
        let b = h.eval(s).unwrap();
        let d = (&a - &b).norm();
        worst_abs = worst_abs.max(d);
        worst_rel = worst_rel.max(d / a.norm().max(1e-300));
    }
    (worst_abs, worst_rel)
}
