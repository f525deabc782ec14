//! Seeded generators for random primitive systems, shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermoformal::symbolic::higher_block_recode;
use thermoformal::{CylinderFunction, CylinderPotential, KmsInstance, MarkovMeasure, SubshiftSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A primitive transition matrix on `2..=d_max` symbols; entries are 1 with probability 0.7.
pub fn random_spec(rng: &mut ChaCha8Rng, d_max: usize) -> SubshiftSpec {
    loop {
        let d = rng.gen_range(2..=d_max);
        let rows = (0..d)
            .map(|_| (0..d).map(|_| u8::from(rng.gen_bool(0.7))).collect())
            .collect();
        if let Ok(spec) = SubshiftSpec::new(rows) {
            if spec.is_primitive() {
                return spec;
            }
        }
    }
}

/// `A` uniform in `[−2, 2]` on the admissible words of length `depth`.
pub fn random_potential(rng: &mut ChaCha8Rng, spec: &SubshiftSpec, depth: usize) -> CylinderPotential {
    let a = CylinderFunction::from_fn(spec, depth, |_| rng.gen_range(-2.0..=2.0)).unwrap();
    CylinderPotential::from_log(a).unwrap()
}

pub fn random_system(rng: &mut ChaCha8Rng, d_max: usize, depth_max: usize) -> CylinderPotential {
    let spec = random_spec(rng, d_max);
    let depth = rng.gen_range(1..=depth_max);
    random_potential(rng, &spec, depth)
}

/// The two-coordinate form of a potential, recoded when it is deeper.
pub fn two_coordinate(pot: &CylinderPotential) -> CylinderPotential {
    higher_block_recode(&pot.canonical()).unwrap().potential
}

/// A Markov chain with independent uniform(0.05, 1) weights on the allowed transitions.
pub fn random_markov(rng: &mut ChaCha8Rng, spec: &SubshiftSpec) -> MarkovMeasure {
    let d = spec.alphabet_size();
    let mut p = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if spec.allowed(i, j) {
                p[(i, j)] = rng.gen_range(0.05..1.0);
            }
        }
        let s: f64 = p.row(i).sum();
        for j in 0..d {
            p[(i, j)] /= s;
        }
    }
    MarkovMeasure::from_transition(spec, p).unwrap()
}

pub fn random_function(rng: &mut ChaCha8Rng, spec: &SubshiftSpec, depth: usize) -> CylinderFunction {
    CylinderFunction::from_fn(spec, depth, |_| rng.gen_range(-1.0..=1.0)).unwrap()
}

/// `H = e^{−A}` on the two-coordinate form, so `β = 1` recovers `A`.
pub fn kms_instance(pot: &CylinderPotential, beta: f64) -> KmsInstance {
    let pot = two_coordinate(pot);
    let h = pot.log_weights().map(|a| (-a).exp());
    KmsInstance::new(&h, beta).unwrap()
}

/// Largest eigenvalue modulus of a dense matrix.
pub fn dense_spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Unit vector spanning the kernel of `m − λI`, taken from the smallest singular value.
pub fn kernel_vector(m: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let n = m.nrows();
    let shifted = m - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v: DVector<f64> = v_t.row(idx).transpose();
    if v.sum() < 0.0 {
        -v
    } else {
        v
    }
}
