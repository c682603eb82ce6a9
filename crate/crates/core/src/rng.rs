//! Bit-reproducible 64-bit linear congruential generator used for every
//! seeded vector and fixture in reports.

use num_complex::Complex64;

const MULTIPLIER: u64 = 6364136223846793005;
const INCREMENT: u64 = 1442695040888963407;

#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(MULTIPLIER)
            .wrapping_add(INCREMENT);
        self.state
    }

    /// Top 53 bits as a float in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[−1, 1)`.
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }

    /// Real part then imaginary part, each from one draw.
    pub fn next_complex(&mut self) -> Complex64 {
        let re = self.next_symmetric();
        let im = self.next_symmetric();
        Complex64::new(re, im)
    }

    /// A unit vector of length `n` (nonzero with probability one).
    pub fn unit_vector(&mut self, n: usize) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = (0..n).map(|_| self.next_complex()).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        v
    }

    /// A point of the open disk with modulus at most `max_radius`, by rejection.
    pub fn disk_point(&mut self, max_radius: f64) -> Complex64 {
        loop {
            let z = self.next_complex();
            if z.norm() < 1.0 {
                return z * max_radius;
            }
        }
    }
}
