//! Counter-based pseudo-random numbers.
//!
//! Every draw is a pure function of `(key, counter)`, so streams can be
//! forked per restart and replayed bit-for-bit regardless of thread
//! scheduling. The mixer is SplitMix64.

use num_complex::Complex64;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic counter-based generator.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: splitmix64(seed.wrapping_add(GOLDEN)), counter: 0 }
    }

    /// Independent stream derived from this generator's key.
    pub fn fork(&self, stream: u64) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(stream.wrapping_mul(GOLDEN).wrapping_add(1))),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let z = self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN));
        self.counter += 1;
        splitmix64(z)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Complex standard normal (real and imaginary parts independent N(0,1)).
    pub fn complex_normal(&mut self) -> Complex64 {
        Complex64::new(self.normal(), self.normal())
    }

    /// Uniform direction on the unit sphere.
    pub fn unit_vector(&mut self) -> [f64; 3] {
        loop {
            let x = self.normal();
            let y = self.normal();
            let z = self.normal();
            let n = (x * x + y * y + z * z).sqrt();
            if n > 1e-12 {
                return [x / n, y / n, z / n];
            }
        }
    }

    /// Haar-random pure-state amplitudes of the given dimension.
    pub fn haar_amplitudes(&mut self, dim: usize) -> Vec<Complex64> {
        loop {
            let v: Vec<Complex64> = (0..dim).map(|_| self.complex_normal()).collect();
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n > 1e-12 {
                return v.into_iter().map(|z| z / n).collect();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_identical() {
        let mut a = CounterRng::new(42);
        let mut b = CounterRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn forked_streams_differ() {
        let base = CounterRng::new(7);
        let mut s1 = base.fork(0);
        let mut s2 = base.fork(1);
        assert_ne!(s1.next_u64(), s2.next_u64());
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = CounterRng::new(3);
        for _ in 0..1000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn haar_amplitudes_normalized() {
        let mut rng = CounterRng::new(11);
        let amps = rng.haar_amplitudes(8);
        let n: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}
