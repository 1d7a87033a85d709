//! Seeded random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 generator seeded
//! with the experiment's master seed. Independent consumers use disjoint
//! ChaCha streams of that seed, so adding draws to one consumer never
//! shifts another:
//!
//! | stream | consumer                                         |
//! |--------|--------------------------------------------------|
//! | 0      | weight initialisation                            |
//! | 1      | training (on-the-fly negatives, dropout masks)   |
//! | 2      | static negative dev corpus generation            |
//! | 3      | synthetic corpus generation                      |
//! | 16+k   | worker `k` of a parallel generation job          |
//!
//! A stream position is fully described by [`RngState`], which is what
//! checkpoints persist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INIT_STREAM: u64 = 0;
pub const TRAIN_STREAM: u64 = 1;
pub const NEGATIVE_DEV_STREAM: u64 = 2;
pub const SYNTHETIC_STREAM: u64 = 3;
const WORKER_STREAM_BASE: u64 = 16;

pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Stream for worker `worker` of a parallel job derived from `master_seed`.
pub fn worker_rng(master_seed: u64, worker: u64) -> ChaCha8Rng {
    stream_rng(master_seed, WORKER_STREAM_BASE + worker)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngState {
            seed,
            stream,
            word_pos: 0,
        }
    }

    pub fn capture(seed: u64, rng: &ChaCha8Rng) -> Self {
        RngState {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = stream_rng(self.seed, self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn capture_restore_resumes_sequence() {
        let mut rng = stream_rng(7, TRAIN_STREAM);
        for _ in 0..13 {
            rng.gen::<u32>();
        }
        let state = RngState::capture(7, &rng);
        let expected: Vec<u64> = (0..5).map(|_| rng.gen()).collect();
        let mut resumed = state.restore();
        let got: Vec<u64> = (0..5).map(|_| resumed.gen()).collect();
        assert_eq!(expected, got);
    }

    #[test]
    fn streams_are_disjoint() {
        let a: u64 = stream_rng(1, 0).gen();
        let b: u64 = stream_rng(1, 1).gen();
        let c: u64 = worker_rng(1, 0).gen();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
