use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::tensor::Tensor;

/// Xavier/Glorot uniform `[rows, cols]` matrix.
pub fn xavier_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt() as f32;
    let dist = Uniform::new_inclusive(-a, a);
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

/// `[rows, cols]` matrix with N(0, std^2) entries.
pub fn normal<R: Rng + ?Sized>(rows: usize, cols: usize, std: f32, rng: &mut R) -> Tensor {
    let dist = Normal::new(0.0, std).expect("std is finite and non-negative");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn xavier_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = xavier_uniform(10, 20, &mut rng);
        let a = (6.0f32 / 30.0).sqrt();
        assert!(t.data().iter().all(|x| x.abs() <= a));
        assert_eq!(t.shape(), &[10, 20]);
    }

    #[test]
    fn normal_is_seeded() {
        let a = normal(4, 4, 0.1, &mut ChaCha8Rng::seed_from_u64(3));
        let b = normal(4, 4, 0.1, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
