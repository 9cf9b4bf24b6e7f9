//! The four experiment pipelines behind `restrata experiment <id>`.

mod census;
mod quality_bias;
mod reweight;
mod user_assisted;

pub use census::exp_detriment_census;
pub use quality_bias::exp_quality_bias;
pub use reweight::exp_reweight;
pub use user_assisted::exp_user_assisted;

use rand_chacha::ChaCha8Rng;
use restrata::rng;

/// Hands out consecutive substreams of one seed, so every stage of a run
/// gets its own stream in a fixed order.
pub(crate) struct StreamDealer {
    seed: u64,
    next: u64,
}

impl StreamDealer {
    pub(crate) fn new(seed: u64) -> Self {
        Self { seed, next: 0 }
    }

    pub(crate) fn next(&mut self) -> ChaCha8Rng {
        let stream = self.next;
        self.next += 1;
        rng::substream(self.seed, stream)
    }
}
